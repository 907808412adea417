"""One molecule coupled to one cavity mode, without the rotating-wave approximation.

H = H_m + omega_c a^dag a + g x (a^dag + a).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import eigsh

from . import spectra
from .errors import (ConvergenceError, MemoryGuardError, ParameterError, SingularityError, ValidationError)
from .molecule import (ElectronicStructure, MoleculeParams, bare_absorption, molecule_hamiltonian, nuclear_levels,
                       prediagonalize_molecule, surface_minimum)
from .numerics import EigenSolution, Grid1D, canonicalize
from .units import BOHR_MILLIANGSTROM, au_to_ev, ev_to_au

log = logging.getLogger(__name__)

PERMANENT_DIPOLE_TOL = 1e-8
FOCK_TOL = 1e-8


@dataclass(frozen=True)
class CavityParams:
    """Photon energy and coupling in atomic units; n_max is the Fock cutoff."""

    omega_c: float
    g: float
    n_max: int = 4

    def __post_init__(self):
        if not self.omega_c > 0:
            raise ParameterError(f"omega_c must be positive, got {self.omega_c}")
        if not self.g >= 0:
            raise ParameterError(f"g must be non-negative, got {self.g}")
        if int(self.n_max) != self.n_max or self.n_max < 1:
            raise ParameterError(f"n_max must be an integer >= 1, got {self.n_max}")

    def replace(self, **changes) -> "CavityParams":
        return replace(self, **changes)


def coupling_from_volume(omega_c_ev: float, regime: str = "microcavity") -> float:
    """Coupling g (a.u.) implied by a typical mode volume at photon energy omega_c (eV)."""
    if not omega_c_ev > 0:
        raise ParameterError("omega_c must be positive")
    prefactor = {"microcavity": 1.34e-7, "plasmonic": 3.72e-4}
    if regime not in prefactor:
        raise ParameterError(f"regime must be one of {sorted(prefactor)}, got {regime!r}")
    return prefactor[regime] * omega_c_ev**2


def zero_detuning_omega(spectrum: spectra.Spectrum) -> float:
    """Photon energy (a.u.) at the absorption maximum of ``spectrum``."""
    return ev_to_au(spectra.peak_position(spectrum))


def vertical_gap_omega(es: ElectronicStructure) -> float:
    """E_e(R_e) - E_g(R_e) in a.u., with R_e the ground-surface minimum."""
    r_e, _, _ = surface_minimum(es.R, es.E_g)
    E = es.energies_at(r_e)
    return float(E[1] - E[0])


# ---------------------------------------------------------------------------
# electronic + photon matrices at fixed nuclear geometry


def _check_two_level(E, mu):
    E = np.asarray(E, dtype=float)
    mu = np.asarray(mu, dtype=float)
    if E.shape != (2,) or mu.shape != (2, 2):
        raise ValidationError("expected two electronic states")
    if abs(mu[0, 0]) > PERMANENT_DIPOLE_TOL or abs(mu[1, 1]) > PERMANENT_DIPOLE_TOL:
        raise ValidationError(f"permanent dipoles must vanish, got {mu[0, 0]:.2e}, {mu[1, 1]:.2e}")
    return E, mu


def ladder(n_max: int) -> np.ndarray:
    """Truncated a^dag + a on Fock states 0..n_max."""
    off = np.sqrt(np.arange(1, n_max + 1))
    return np.diag(off, 1) + np.diag(off, -1)


def electron_photon_matrix(E, mu, c: CavityParams) -> np.ndarray:
    """Electronic {g, e} x Fock(0..n_max) Hamiltonian, index = a*(n_max+1) + n."""
    E, mu = _check_two_level(E, mu)
    nf = c.n_max + 1
    H = np.kron(np.diag(E), np.eye(nf)) + c.omega_c * np.kron(np.eye(2), np.diag(np.arange(nf)))
    H += c.g * np.kron(mu, ladder(c.n_max))
    return H


def parity_indices(n_max: int, parity: str) -> np.ndarray:
    """Basis indices of one excitation-parity block.

    ``'even'`` holds g0, e1, g2, ... ; ``'odd'`` holds g1, e0, g3, e2, ...
    """
    nf = n_max + 1
    target = 0 if parity == "even" else 1
    if parity not in ("even", "odd"):
        raise ParameterError(f"parity must be 'even' or 'odd', got {parity!r}")
    idx = [a * nf + n for n in range(nf) for a in (0, 1) if (a + n) % 2 == target]
    return np.array(idx)


def parity_block(H: np.ndarray, n_max: int, parity: str) -> np.ndarray:
    idx = parity_indices(n_max, parity)
    return H[np.ix_(idx, idx)]


@dataclass(frozen=True)
class PolaritonSurfaces:
    """Labeled polaritonic surfaces over R.

    ``exciton_weight[label]`` is the electronic excited-state population of
    the state, ``photon_weight`` its complement; ``vectors[label]`` holds
    the per-R eigenvectors (n_R, 2*(n_max+1)) with continuous sign.
    """

    grid_R: Grid1D
    cavity: CavityParams
    surfaces: dict
    exciton_weight: dict
    vectors: dict = field(repr=False)
    transition_dipoles: dict = field(repr=False)

    @property
    def R(self) -> np.ndarray:
        return self.grid_R.points

    def photon_weight(self, label: str) -> np.ndarray:
        return 1.0 - self.exciton_weight[label]

    def __getitem__(self, label: str) -> np.ndarray:
        return self.surfaces[label]


def coupled_pes_single(es: ElectronicStructure, c: CavityParams) -> PolaritonSurfaces:
    """Diagonalise the electronic+photon matrix at every R.

    Labels: ``G`` (lowest even-parity state), ``LP`` and ``UP`` (two lowest
    odd-parity states). Transition dipoles <LP|x|G>, <UP|x|G> use x acting
    on the electron only.
    """
    nf = c.n_max + 1
    even, odd = parity_indices(c.n_max, "even"), parity_indices(c.n_max, "odd")
    n_R = es.grid_R.n_points
    dim = 2 * nf
    vecs = {lab: np.zeros((n_R, dim)) for lab in ("G", "LP", "UP")}
    energies = {lab: np.empty(n_R) for lab in ("G", "LP", "UP")}
    for i in range(n_R):
        H = electron_photon_matrix(es.energies[i, :2], es.dipoles[i, :2, :2], c)
        we, ve = sla.eigh(H[np.ix_(even, even)], subset_by_index=(0, 0))
        wo, vo = sla.eigh(H[np.ix_(odd, odd)], subset_by_index=(0, 1))
        energies["G"][i] = we[0]
        vecs["G"][i, even] = ve[:, 0]
        for j, lab in enumerate(("LP", "UP")):
            energies[lab][i] = wo[j]
            vecs[lab][i, odd] = vo[:, j]
    exciton = {}
    for lab in vecs:
        vecs[lab] = _continuous_sign(vecs[lab])
        exciton[lab] = np.sum(vecs[lab][:, nf:] ** 2, axis=1)
    xel = [np.kron(es.dipoles[i, :2, :2], np.eye(nf)) for i in range(n_R)]
    dips = {lab: np.array([vecs[lab][i] @ xel[i] @ vecs["G"][i] for i in range(n_R)]) for lab in ("LP", "UP")}
    return PolaritonSurfaces(es.grid_R, c, energies, exciton, vecs, dips)


def _continuous_sign(v: np.ndarray) -> np.ndarray:
    """Sign continuity without the overlap guard (labels may swap character at seams)."""
    v = v.copy()
    if v[0, np.argmax(np.abs(v[0]))] < 0:
        v[0] *= -1
    for i in range(len(v) - 1):
        if v[i] @ v[i + 1] < 0:
            v[i + 1] *= -1
    return v


# ---------------------------------------------------------------------------
# exact solutions


def _fock_escalate(solve, c: CavityParams, k: int, tol: float, n_limit: int):
    """Raise n_max until the lowest k energies move by less than tol."""
    prev = solve(c)
    drift = np.inf
    n = c.n_max
    while n < n_limit:
        nxt = solve(c.replace(n_max=n + 1))
        drift = float(np.max(np.abs(nxt.energies[:k] - prev.energies[:k])))
        if drift < tol:
            return prev, n, drift
        prev, n = nxt, n + 1
    raise ConvergenceError(f"Fock cutoff not converged up to n_max={n_limit}: drift {drift:.2e}", drift=drift)


def cavity_hamiltonian_prediag(energies, dipole, c: CavityParams) -> np.ndarray:
    """H in the product of molecular eigenstates and Fock states, index = k*(n_max+1) + n."""
    nf = c.n_max + 1
    return (np.kron(np.diag(energies), np.eye(nf)) + c.omega_c * np.kron(np.eye(len(energies)), np.diag(np.arange(nf)))
            + c.g * np.kron(dipole, ladder(c.n_max)))


def solve_exact_cavity(p: MoleculeParams, c: CavityParams, grids: tuple[Grid1D, Grid1D], k: int | None = None,
                       basis: str = "prediag", n_even: int = 30, n_odd: int = 30, check_fock: bool = True,
                       check_basis: bool = False, fock_tol: float = FOCK_TOL, n_limit: int = 16,
                       max_dim: int = 400_000) -> EigenSolution:
    """Lowest ``k`` eigenpairs of the full molecule + cavity Hamiltonian.

    ``basis='prediag'`` expands in exact (x, R) molecular eigenstates (the
    lowest ``n_even`` ground-manifold and ``n_odd`` excited-manifold states)
    times Fock states; ``basis='grid'`` uses the raw (x, R) grid times Fock
    states and is only practical on small grids. The returned solution
    carries the photon number of every basis state and the dipole operator
    (electron coordinate) in that basis.
    """
    grid_x, grid_R = grids
    if basis == "grid":
        return _solve_exact_cavity_grid(p, c, grid_x, grid_R, k or 10, max_dim)
    if basis != "prediag":
        raise ParameterError(f"basis must be 'prediag' or 'grid', got {basis!r}")

    extra = 5 if check_basis else 0
    mb_full = prediagonalize_molecule(p, grid_x, grid_R, n_even + extra, n_odd + extra)
    mb = mb_full.truncated(n_even, n_odd)

    def solve(cc):
        return _diag_prediag(mb, cc, k)

    if check_fock:
        sol, n_used, drift = _fock_escalate(solve, c, k or 10, fock_tol, n_limit)
        log.debug("Fock cutoff %d (drift %.1e)", n_used, drift)
    else:
        sol = solve(c)
    if check_basis:
        kk = k or 10
        ref = _diag_prediag(mb_full, c.replace(n_max=sol.photon_number.max()), kk)
        drift = float(np.max(np.abs(ref.energies[:kk] - sol.energies[:kk])))
        if drift > fock_tol:
            raise ConvergenceError(f"molecular basis not converged: drift {drift:.2e} adding 5 states per parity",
                                   drift=drift)
    return sol


def _diag_prediag(mb, c: CavityParams, k: int | None) -> EigenSolution:
    H = cavity_hamiltonian_prediag(mb.energies, mb.dipole, c)
    nf = c.n_max + 1
    w, v = sla.eigh(H) if k is None else sla.eigh(H, subset_by_index=(0, k - 1))
    w, v = canonicalize(w, v)
    photons = np.tile(np.arange(nf), mb.size)
    return EigenSolution(w, v, f"prediag({mb.size})xFock({c.n_max})", photon_number=photons,
                         dipole=np.kron(mb.dipole, np.eye(nf)))


def _solve_exact_cavity_grid(p, c, grid_x, grid_R, k, max_dim) -> EigenSolution:
    nf = c.n_max + 1
    n_xr = grid_x.n_points * grid_R.n_points
    if n_xr * nf > max_dim:
        raise MemoryGuardError(f"grid x Fock dimension {n_xr * nf} exceeds max_dim = {max_dim}")
    Hm = molecule_hamiltonian(p, grid_x, grid_R)
    X = sp.diags(np.repeat(grid_x.points, grid_R.n_points))
    n_op = sp.diags(np.arange(nf, dtype=float))
    H = (sp.kron(Hm, sp.identity(nf)) + c.omega_c * sp.kron(sp.identity(n_xr), n_op)
         + c.g * sp.kron(X, sp.csr_matrix(ladder(c.n_max)))).tocsc()
    w0, _ = eigsh(Hm.tocsc(), k=1, sigma=-10.0, which="LM")
    w, v = eigsh(H, k=k, sigma=w0[0] - 0.05, which="LM")
    order = np.argsort(w)
    w, v = canonicalize(w[order], v[:, order])
    photons = np.tile(np.arange(nf), n_xr)
    return EigenSolution(w, v, f"grid-xR({n_xr})xFock({c.n_max})", photon_number=photons,
                         dipole=sp.kron(X, sp.identity(nf)).tocsr())


def ground_photon_number(sol: EigenSolution) -> float:
    """<a^dag a> in the lowest state of ``sol``."""
    if sol.photon_number is None:
        raise ValidationError("solution carries no photon-number labels")
    return float(np.sum(sol.photon_number * np.abs(sol.vectors[:, 0]) ** 2))


# ---------------------------------------------------------------------------
# ultrastrong-coupling ground state


@dataclass(frozen=True)
class GroundStatePES:
    R: np.ndarray
    bare: np.ndarray
    exact: np.ndarray
    perturbative: np.ndarray
    n_max: int

    @property
    def residual(self) -> np.ndarray:
        return self.exact - self.perturbative


def ground_state_pes_usc(es: ElectronicStructure, c: CavityParams, fock_tol: float = FOCK_TOL,
                         n_limit: int = 24, min_denominator: float = 1e-6) -> GroundStatePES:
    """Coupled ground surface and its second-order estimate.

    The exact surface is the lowest eigenvalue of the even block at every R;
    n_max is raised until the surface moves by less than ``fock_tol``.
    """
    denom = es.E_e - es.E_g + c.omega_c
    bad = np.flatnonzero(np.abs(denom) < min_denominator)
    if bad.size:
        raise SingularityError(f"vanishing energy denominator at R={es.R[bad[0]]:.4f}", location=float(es.R[bad[0]]))
    pert = es.E_g - (c.g * es.mu_eg) ** 2 / denom

    def surface(cc):
        even = parity_indices(cc.n_max, "even")
        out = np.empty(es.grid_R.n_points)
        for i in range(len(out)):
            H = electron_photon_matrix(es.energies[i, :2], es.dipoles[i, :2, :2], cc)
            out[i] = sla.eigh(H[np.ix_(even, even)], eigvals_only=True, subset_by_index=(0, 0))[0]
        return out

    class _S:  # adapter so the escalation helper can compare whole surfaces
        def __init__(self, e):
            self.energies = e

    cc = c.replace(n_max=max(c.n_max, 2))
    sol, n_used, _ = _fock_escalate(lambda x: _S(surface(x)), cc, es.grid_R.n_points, fock_tol, n_limit)
    return GroundStatePES(es.R, es.E_g.copy(), sol.energies, pert, n_used)


@dataclass(frozen=True)
class BondShift:
    au: float
    milli_angstrom: float
    R_bare: float
    R_coupled: float


def bond_length_shift(R: np.ndarray, pes_bare: np.ndarray, pes_coupled: np.ndarray) -> BondShift:
    """Difference of the minimum positions (coupled - bare), refined to well below 1e-7 bohr."""
    r0, _, _ = surface_minimum(R, pes_bare)
    r1, _, _ = surface_minimum(R, pes_coupled)
    d = r1 - r0
    return BondShift(d, d * BOHR_MILLIANGSTROM, r0, r1)


# ---------------------------------------------------------------------------
# absorption of the coupled system


def boa_absorption_single(es: ElectronicStructure, c: CavityParams, epsilon_ev: float = spectra.DEFAULT_EPSILON_EV,
                          omega_ev=None, n_vib: int = 40, pes: PolaritonSurfaces | None = None) -> spectra.Spectrum:
    """Absorption from nuclear levels on the polaritonic surfaces.

    Initial state: vibrational ground state on G. Final states: ``n_vib``
    levels on each of LP and UP, with R-dependent transition dipoles.
    At g = 0 the surfaces cross without mixing and the bare-molecule
    spectrum is returned.
    """
    if omega_ev is None:
        omega_ev = spectra.default_omega_grid(au_to_ev(c.omega_c))
    if c.g == 0:
        return bare_absorption(es, epsilon_ev=epsilon_ev, omega_ev=omega_ev, n_vib=n_vib)
    pes = coupled_pes_single(es, c) if pes is None else pes
    M = es.params.M
    g0 = nuclear_levels(es.grid_R, pes["G"], M, 1, "G")
    chi0 = g0.wavefunctions[:, 0]
    exc, strength = [], []
    for lab in ("LP", "UP"):
        lv = nuclear_levels(es.grid_R, pes[lab], M, n_vib, lab)
        amps = lv.wavefunctions.T @ (pes.transition_dipoles[lab] * chi0)
        exc.append(lv.energies - g0.energies[0])
        strength.append(amps**2)
    exc, strength = np.concatenate(exc), np.concatenate(strength)
    return spectra.lorentzian_spectrum(exc, strength, epsilon_ev, omega_ev)


def exact_absorption_single(p: MoleculeParams, c: CavityParams, grids, epsilon_ev: float = spectra.DEFAULT_EPSILON_EV,
                            omega_ev=None, n_even: int = 30, n_odd: int = 30) -> spectra.Spectrum:
    """Absorption from the full (prediagonalised) molecule + cavity eigenstates."""
    sol = solve_exact_cavity(p, c, grids, k=None, n_even=n_even, n_odd=n_odd, check_fock=False)
    if omega_ev is None:
        omega_ev = spectra.default_omega_grid(au_to_ev(c.omega_c))
    return spectra.absorption(sol, sol.dipole, epsilon_ev, omega_ev)


__all__ = [
    "CavityParams", "PolaritonSurfaces", "GroundStatePES", "BondShift", "coupling_from_volume",
    "zero_detuning_omega", "vertical_gap_omega", "electron_photon_matrix", "parity_indices", "parity_block",
    "coupled_pes_single", "solve_exact_cavity", "cavity_hamiltonian_prediag", "ground_photon_number",
    "ground_state_pes_usc", "bond_length_shift", "boa_absorption_single", "exact_absorption_single", "ladder",
]
