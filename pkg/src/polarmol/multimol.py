"""Two identical (or different) molecules sharing one cavity mode.

Molecules do not interact directly; the photon mediates all coupling.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.interpolate import RectBivariateSpline
from scipy.optimize import minimize
from scipy.sparse.linalg import eigsh

from . import spectra
from .cavity import CavityParams, ground_state_pes_usc, ladder
from .errors import ConvergenceError, FitError, ParameterError, ValidationError, WindowError
from .molecule import ElectronicStructure, MoleculeParams, prediagonalize_molecule, surface_minimum
from .numerics import EigenSolution, Grid1D, canonicalize, kinetic_sparse
from .units import BOHR_MILLIANGSTROM, au_to_ev

log = logging.getLogger(__name__)

EVEN_LABELS = ("gg0", "eg1", "ge1", "ee0")
ODD_LABELS = ("gg1", "eg0", "ge0", "ee1")


@dataclass(frozen=True)
class TwoMolBasis:
    """Product basis |k1, k2, n> with flat index (k1 * k + k2) * (n_max + 1) + n."""

    k_per_mol: int
    n_max: int

    def __post_init__(self):
        if self.k_per_mol < 1 or self.n_max < 0:
            raise ParameterError("k_per_mol must be >= 1 and n_max >= 0")

    @property
    def dim(self) -> int:
        return self.k_per_mol**2 * (self.n_max + 1)

    def index(self, k1: int, k2: int, n: int) -> int:
        k, nf = self.k_per_mol, self.n_max + 1
        if not (0 <= k1 < k and 0 <= k2 < k and 0 <= n < nf):
            raise ParameterError(f"state ({k1}, {k2}, {n}) outside the basis")
        return (k1 * k + k2) * nf + n

    def state(self, i: int) -> tuple[int, int, int]:
        if not 0 <= i < self.dim:
            raise ParameterError(f"index {i} outside 0..{self.dim - 1}")
        nf = self.n_max + 1
        pair, n = divmod(i, nf)
        k1, k2 = divmod(pair, self.k_per_mol)
        return k1, k2, n

    def quantum_numbers(self) -> np.ndarray:
        """(dim, 3) array of (k1, k2, n)."""
        return np.array([self.state(i) for i in range(self.dim)])


# ---------------------------------------------------------------------------
# electronic + photon matrices at fixed (R1, R2)


def build_parity_blocks(E1, d1, E2, d2, c: CavityParams) -> tuple[np.ndarray, np.ndarray]:
    """The two 4x4 blocks of the {g,e} x {g,e} x {0,1} problem.

    E1, E2 are (E_g, E_e) of each molecule at its own R, d1, d2 the
    transition dipoles. Even block basis: gg0, eg1, ge1, ee0; odd block:
    gg1, eg0, ge0, ee1. Every off-diagonal element flips one molecule and
    changes the photon number by one, so e.g. eg1 <-> ee0 carries g*d2.
    """
    Eg1, Ee1 = E1
    Eg2, Ee2 = E2
    w = c.omega_c
    a, b = c.g * d1, c.g * d2

    def block(diag):
        H = np.diag(diag).astype(float)
        H[0, 1] = H[1, 0] = a
        H[0, 2] = H[2, 0] = b
        H[1, 3] = H[3, 1] = b
        H[2, 3] = H[3, 2] = a
        return H

    even = block([Eg1 + Eg2, Ee1 + Eg2 + w, Eg1 + Ee2 + w, Ee1 + Ee2])
    odd = block([Eg1 + Eg2 + w, Ee1 + Eg2, Eg1 + Ee2, Ee1 + Ee2 + w])
    return even, odd


def _two_level_ops(n_max: int):
    nf = n_max + 1
    sx = np.array([[0.0, 1.0], [1.0, 0.0]])
    I2 = np.eye(2)
    If = np.eye(nf)
    x1 = np.kron(np.kron(sx, I2), If)
    x2 = np.kron(np.kron(I2, sx), If)
    lad = np.kron(np.eye(4), ladder(n_max))
    num = np.kron(np.eye(4), np.diag(np.arange(nf, dtype=float)))
    a1 = np.kron(np.kron(np.diag([0.0, 1.0]), I2), If)
    a2 = np.kron(np.kron(I2, np.diag([0.0, 1.0])), If)
    return x1, x2, lad, num, a1, a2


def two_mol_parity_indices(n_max: int, parity: str) -> np.ndarray:
    """Indices of {g,e} x {g,e} x Fock(0..n_max) states with (a1 + a2 + n) even/odd."""
    if parity not in ("even", "odd"):
        raise ParameterError(f"parity must be 'even' or 'odd', got {parity!r}")
    target = 0 if parity == "even" else 1
    nf = n_max + 1
    return np.array([(a1 * 2 + a2) * nf + n for a1 in (0, 1) for a2 in (0, 1) for n in range(nf)
                     if (a1 + a2 + n) % 2 == target])


def two_mol_electronic_photon(E1, d1, E2, d2, c: CavityParams) -> np.ndarray:
    """Full {g,e}^2 x Fock(0..n_max) matrix, index (a1*2 + a2)*(n_max+1) + n.

    Works on stacked inputs: E1, E2 of shape (..., 2), d1, d2 of shape (...).
    """
    E1, E2 = np.asarray(E1, float), np.asarray(E2, float)
    d1, d2 = np.asarray(d1, float), np.asarray(d2, float)
    x1, x2, lad, num, a1, a2 = _two_level_ops(c.n_max)
    shape = d1.shape
    dE1 = (E1[..., 1] - E1[..., 0])[..., None, None]
    dE2 = (E2[..., 1] - E2[..., 0])[..., None, None]
    base = (E1[..., 0] + E2[..., 0])[..., None, None]
    dim = 4 * (c.n_max + 1)
    H = base * np.eye(dim) + dE1 * a1 + dE2 * a2 + c.omega_c * num
    H = H + c.g * (d1[..., None, None] * (x1 @ lad) + d2[..., None, None] * (x2 @ lad))
    return H.reshape(shape + (dim, dim))


# ---------------------------------------------------------------------------
# coupled two-dimensional surfaces


@dataclass(frozen=True)
class CoupledPES2D:
    """Surfaces on the (R1, R2) lattice, indexed [i1, i2].

    ``surfaces`` has LP, DS, UP (three lowest odd-parity states) and G
    (lowest even-parity state); ``photon_weight`` the probability of n >= 1
    for each label.
    """

    grid_R1: Grid1D
    grid_R2: Grid1D
    cavity: CavityParams
    surfaces: dict
    photon_weight: dict
    exciton_weight: dict = field(default_factory=dict)

    def __getitem__(self, label):
        return self.surfaces[label]

    def spline(self, label: str) -> RectBivariateSpline:
        return RectBivariateSpline(self.grid_R1.points, self.grid_R2.points, self.surfaces[label], kx=3, ky=3)


def _eig_blocks(E1, d1, E2, d2, c: CavityParams):
    """Batched diagonalisation of both parity blocks. Returns dict label -> (energy, vector, block idx)."""
    H = two_mol_electronic_photon(E1, d1, E2, d2, c)
    out = {}
    for parity, labels in (("even", ("G",)), ("odd", ("LP", "DS", "UP"))):
        idx = two_mol_parity_indices(c.n_max, parity)
        w, v = np.linalg.eigh(H[..., idx[:, None], idx[None, :]])
        for j, lab in enumerate(labels):
            out[lab] = (w[..., j], v[..., :, j], idx)
    return out


def _weights(vec, idx, n_max):
    nf = n_max + 1
    n = idx % nf
    pair = idx // nf
    excited = (pair // 2) + (pair % 2)
    p = vec**2
    return np.sum(p * (n >= 1), axis=-1), np.sum(p * excited, axis=-1)


def coupled_pes_two(es1: ElectronicStructure, es2: ElectronicStructure, c: CavityParams,
                    grid_R1: Grid1D | None = None, grid_R2: Grid1D | None = None) -> CoupledPES2D:
    """LP, DS, UP and ground surfaces on a (R1, R2) lattice.

    Per-molecule energies and dipoles come from spline interpolation of the
    electronic structures, so lattices other than the electronic R grids
    are allowed. d_j is evaluated at R_j.
    """
    grid_R1 = es1.grid_R if grid_R1 is None else grid_R1
    grid_R2 = es2.grid_R if grid_R2 is None else grid_R2
    R1, R2 = grid_R1.points, grid_R2.points
    e1, e2 = es1.energies_at(R1)[:, :2], es2.energies_at(R2)[:, :2]
    mu1, mu2 = es1.dipoles_at(R1), es2.dipoles_at(R2)
    for mu in (mu1, mu2):
        if np.max(np.abs(mu[:, 0, 0])) > 1e-8 or np.max(np.abs(mu[:, 1, 1])) > 1e-8:
            raise ValidationError("permanent dipoles must vanish")
    E1 = np.broadcast_to(e1[:, None, :], (len(R1), len(R2), 2))
    E2 = np.broadcast_to(e2[None, :, :], (len(R1), len(R2), 2))
    d1 = np.broadcast_to(mu1[:, None, 1, 0], (len(R1), len(R2)))
    d2 = np.broadcast_to(mu2[None, :, 1, 0], (len(R1), len(R2)))
    res = _eig_blocks(E1, d1, E2, d2, c)
    surfaces, photon, exciton = {}, {}, {}
    for lab, (w, v, idx) in res.items():
        surfaces[lab] = w
        photon[lab], exciton[lab] = _weights(v, idx, c.n_max)
    return CoupledPES2D(grid_R1, grid_R2, c, surfaces, photon, exciton)


def surfaces_at(es1, es2, c: CavityParams, R1, R2) -> dict:
    """Coupled energies at arbitrary (broadcastable) points R1, R2."""
    R1, R2 = np.broadcast_arrays(np.asarray(R1, float), np.asarray(R2, float))
    E1, E2 = es1.energies_at(R1)[..., :2], es2.energies_at(R2)[..., :2]
    d1, d2 = es1.dipoles_at(R1)[..., 1, 0], es2.dipoles_at(R2)[..., 1, 0]
    return {lab: w for lab, (w, _, _) in _eig_blocks(E1, d1, E2, d2, c).items()}


# ---------------------------------------------------------------------------
# dark-state splitting along R1 = R2


@dataclass(frozen=True)
class DarkStateSplitting:
    """Gap between the dark state and the exciton-like polariton on R1 = R2.

    ``naive`` is the single-channel estimate (g d)^2 / (4 delta) and ``perturbative`` the
    second-order shift of the bright combination of eg0 and ge0, repelled
    by gg1 and by the counter-rotating partner ee1:
    2 (g d)^2 |1/delta - 1/(2 omega_c + delta)| with delta = E_e - E_g - omega_c.
    The dark combination couples to neither and stays at E_e + E_g. Points
    closer to resonance than ``resonance_margin`` are flagged in
    ``excluded`` and set to NaN.
    """

    R: np.ndarray
    numeric: np.ndarray
    naive: np.ndarray
    perturbative: np.ndarray
    detuning: np.ndarray
    partner: np.ndarray  # "UP" or "LP": which polariton the dark state is closest to
    excluded: np.ndarray

    def ratio_to_naive(self) -> np.ndarray:
        return self.numeric / self.naive

    def ratio_to_perturbative(self) -> np.ndarray:
        return self.numeric / self.perturbative


def dark_state_splitting(es: ElectronicStructure, c: CavityParams, R=None,
                         resonance_margin: float = 10.0) -> DarkStateSplitting:
    """Splitting of the two single-molecule excitations on the diagonal.

    The margin is in units of g*d: points with |delta| < margin * g*d are
    excluded (and logged) because the perturbative picture fails there.
    """
    R = es.R if R is None else np.asarray(R, float)
    surf = surfaces_at(es, es, c, R, R)
    E = es.energies_at(R)
    d = np.abs(es.dipoles_at(R)[:, 1, 0])
    delta = E[:, 1] - E[:, 0] - c.omega_c
    gd = c.g * d
    ds, lp, up = surf["DS"], surf["LP"], surf["UP"]
    # the exciton-like polariton sits above the dark state when delta < 0 ... and vice versa
    partner = np.where(delta > 0, "UP", "LP")
    numeric = np.where(delta > 0, up - ds, ds - lp)
    excluded = np.abs(delta) < resonance_margin * gd
    if np.any(excluded):
        log.info("dark_state_splitting: %d point(s) near resonance excluded", int(excluded.sum()))
    with np.errstate(divide="ignore", invalid="ignore"):
        naive = gd**2 / (4 * np.abs(delta))
        pert = 2 * gd**2 * np.abs(1 / delta - 1 / (2 * c.omega_c + delta))
    nan = np.where(excluded, np.nan, 1.0)
    return DarkStateSplitting(R, numeric * nan, naive * nan, pert * nan, delta, partner, excluded)


# ---------------------------------------------------------------------------
# local harmonic expansion E0 + a dR1^2 + a dR2^2 + b dR1 dR2


@dataclass(frozen=True)
class HarmonicFit:
    E0: float
    R1_0: float
    R2_0: float
    alpha: float
    beta: float
    residual: float
    alpha1: float = float("nan")
    alpha2: float = float("nan")
    half_width: float = float("nan")

    @property
    def ratio(self) -> float:
        return self.beta / self.alpha


def _poly_terms(u, v, degree):
    return np.stack([u**i * v**j for i in range(degree + 1) for j in range(degree + 1 - i)], axis=-1), \
        [(i, j) for i in range(degree + 1) for j in range(degree + 1 - i)]


def fit_harmonic(surface, guess, half_width: float, n_points: int = 11, degree: int = 6,
                 max_iter: int = 8, residual_tol: float = 1e-3, symmetric: bool = True) -> HarmonicFit:
    """Quadratic coefficients of E(R1, R2) around its minimum.

    ``surface`` is a vectorised callable E(R1, R2). The minimum is located
    from ``guess``; then an ``n_points`` x ``n_points`` lattice of
    +-``half_width`` around it is fitted by a full polynomial of total
    ``degree`` (>= 2). Higher-order terms absorb anharmonicity so that the
    quadratic part is the local Taylor expansion. The lattice is recentred
    on the fitted stationary point until it stops moving.

    Identical molecules share one alpha (average of both diagonal terms).
    """
    if n_points < 11:
        raise ParameterError("need at least an 11 x 11 lattice")
    if degree < 2:
        raise ParameterError("degree must be >= 2")
    t = np.linspace(-1.0, 1.0, n_points)
    U, V = np.meshgrid(t, t, indexing="ij")
    A, powers = _poly_terms(U.ravel(), V.ravel(), degree)
    col = {p: k for k, p in enumerate(powers)}

    def local_fit(center):
        E = np.asarray(surface(center[0] + half_width * U, center[1] + half_width * V), float).ravel()
        coef, *_ = np.linalg.lstsq(A, E, rcond=None)
        c20, c02, c11 = coef[col[(2, 0)]], coef[col[(0, 2)]], coef[col[(1, 1)]]
        hess = np.array([[2 * c20, c11], [c11, 2 * c02]])
        eig = np.linalg.eigvalsh(hess)
        if np.any(eig <= 0):
            sig = "".join("+" if e > 0 else "-" for e in eig)
            raise FitError(f"stationary point is not a minimum: Hessian signature ({sig}), eigenvalues {eig}")
        return E, coef, hess

    # a saddle at the starting point would send the minimiser off; diagnose it first
    local_fit(np.asarray(guess, float))
    res = minimize(lambda z: float(surface(z[0], z[1])), np.asarray(guess, float), method="Nelder-Mead",
                   options={"xatol": 1e-4 * half_width, "fatol": 1e-16, "maxiter": 4000})
    center = res.x
    for _ in range(max_iter):
        E, coef, hess = local_fit(center)
        step = -np.linalg.solve(hess, [coef[col[(1, 0)]], coef[col[(0, 1)]]])
        center = center + half_width * step
        if np.max(np.abs(step)) < 1e-6:
            break
    else:
        raise ConvergenceError("harmonic fit did not settle on a stationary point", drift=float(np.max(np.abs(step))))
    c20, c02, c11 = coef[col[(2, 0)]], coef[col[(0, 2)]], coef[col[(1, 1)]]
    fitted = A @ coef
    span = np.ptp(E)
    residual = float(np.sqrt(np.mean((fitted - E) ** 2)) / span) if span > 0 else 0.0
    if residual > residual_tol:
        raise FitError(f"fit residual {residual:.2e} exceeds {residual_tol:g}")
    h2 = half_width**2
    a1, a2 = c20 / h2, c02 / h2
    alpha = 0.5 * (a1 + a2) if symmetric else a1
    if alpha <= 0:
        raise FitError("non-positive curvature")
    E0 = float(np.asarray(surface(center[0], center[1])))
    return HarmonicFit(E0, float(center[0]), float(center[1]), float(alpha), float(c11 / h2), residual,
                       float(a1), float(a2), float(half_width))


def rms_amplitude(M: float, omega: float) -> float:
    """Ground-state RMS displacement 1/sqrt(2 M omega) of a harmonic oscillator."""
    return 1.0 / np.sqrt(2.0 * M * omega)


def fit_two_mol_surfaces(es: ElectronicStructure, c: CavityParams, labels=("LP", "DS", "UP", "G"),
                         omega_vib: float | None = None, amplitudes: float = 3.0, n_points: int = 11) -> dict:
    """Harmonic fits of the coupled surfaces of two identical molecules.

    The window is +-``amplitudes`` ground-state RMS amplitudes. Every
    surface is searched for a minimum starting on the diagonal at the
    minimum of the corresponding single-molecule curve.
    """
    M = es.params.M
    if omega_vib is None:
        from .molecule import vibrational_levels
        lv = vibrational_levels(es, "g", M, 2)
        omega_vib = lv.energies[1] - lv.energies[0]
    hw = amplitudes * rms_amplitude(M, omega_vib)
    out = {}
    for lab in labels:
        def f(R1, R2, lab=lab):
            return surfaces_at(es, es, c, R1, R2)[lab]
        Rd = es.R
        diag = f(Rd, Rd)
        i = int(np.argmin(diag))
        if i in (0, len(Rd) - 1):
            raise WindowError(f"{lab} minimum at the edge of the R window")
        out[lab] = fit_harmonic(f, (Rd[i], Rd[i]), hw, n_points=n_points)
    return out


# ---------------------------------------------------------------------------
# exact two-molecule solution


@dataclass(frozen=True)
class TwoMolSolution:
    """Eigenpairs split into the even and odd total-parity sectors."""

    even: EigenSolution
    odd: EigenSolution
    basis_size: tuple


def _two_mol_prediag_hamiltonian(mb1, mb2, c: CavityParams):
    nf = c.n_max + 1
    I1, I2, If = sp.identity(mb1.size), sp.identity(mb2.size), sp.identity(nf)
    lad = sp.csr_matrix(ladder(c.n_max))
    num = sp.diags(np.arange(nf, dtype=float))
    H = (sp.kron(sp.kron(sp.diags(mb1.energies), I2), If) + sp.kron(sp.kron(I1, sp.diags(mb2.energies)), If)
         + c.omega_c * sp.kron(sp.kron(I1, I2), num)
         + c.g * sp.kron(sp.kron(sp.csr_matrix(mb1.dipole), I2), lad)
         + c.g * sp.kron(sp.kron(I1, sp.csr_matrix(mb2.dipole)), lad))
    D = (sp.kron(sp.kron(sp.csr_matrix(mb1.dipole), I2), If) + sp.kron(sp.kron(I1, sp.csr_matrix(mb2.dipole)), If))
    par = (np.add.outer(np.add.outer((mb1.parity < 0).astype(int), (mb2.parity < 0).astype(int)),
                        np.arange(nf)) % 2).ravel()
    photons = np.tile(np.arange(nf), mb1.size * mb2.size)
    return H.tocsr(), D.tocsr(), par, photons


def solve_exact_two(p1: MoleculeParams, p2: MoleculeParams, c: CavityParams, grids, k_per_mol: int = 30,
                    k: int | None = None, check_basis: bool = False, tol: float = 1e-8) -> TwoMolSolution:
    """Eigenpairs of the two-molecule Hamiltonian in a prediagonalised basis.

    Each molecule contributes its lowest ``k_per_mol // 2`` ground-manifold
    and ``k_per_mol - k_per_mol // 2`` excited-manifold exact states. Both
    total-parity sectors are diagonalised densely (lowest ``k`` states of
    each, all when ``k`` is None).
    """
    grid_x, grid_R = grids
    ne, no = k_per_mol // 2, k_per_mol - k_per_mol // 2
    extra = 5 if check_basis else 0
    mbs = [prediagonalize_molecule(p, grid_x, grid_R, ne + extra, no + extra) for p in (p1, p2)]

    def solve(m1, m2):
        H, D, par, photons = _two_mol_prediag_hamiltonian(m1, m2, c)
        sols = []
        for target in (0, 1):
            idx = np.flatnonzero(par == target)
            Hs = H[idx][:, idx].toarray()
            kk = len(idx) if k is None else min(k, len(idx))
            w, v = sla.eigh(Hs, subset_by_index=(0, kk - 1))
            w, v = canonicalize(w, v)
            full = np.zeros((H.shape[0], kk))
            full[idx] = v
            sols.append(EigenSolution(w, full, f"prediag2({m1.size}x{m2.size})xFock({c.n_max})",
                                      photon_number=photons, dipole=D))
        return sols

    small = [mb.truncated(ne, no) for mb in mbs]
    even, odd = solve(*small)
    if check_basis:
        ref_even, ref_odd = solve(*mbs)
        kk = min(10, len(even.energies))
        drift = max(np.max(np.abs(ref_even.energies[:kk] - even.energies[:kk])),
                    np.max(np.abs(ref_odd.energies[:kk] - odd.energies[:kk])))
        if drift > tol:
            raise ConvergenceError(f"two-molecule basis not converged: drift {drift:.2e}", drift=float(drift))
    return TwoMolSolution(even, odd, (small[0].size, small[1].size))


def exact_absorption_two(p: MoleculeParams, c: CavityParams, grids, epsilon_ev: float = spectra.DEFAULT_EPSILON_EV,
                         omega_ev=None, k_per_mol: int = 30) -> spectra.Spectrum:
    """Absorption of two identical molecules from the exact eigenstates.

    The ground state is the lowest even-parity state; the dipole
    x1 + x2 only reaches odd-parity states.
    """
    sol = solve_exact_two(p, p, c, grids, k_per_mol=k_per_mol)
    ground = sol.even.vectors[:, 0]
    amps = sol.odd.vectors.T @ (sol.odd.dipole @ ground)
    exc = sol.odd.energies - sol.even.energies[0]
    if omega_ev is None:
        omega_ev = spectra.default_omega_grid(au_to_ev(c.omega_c))
    return spectra.lorentzian_spectrum(exc, amps**2, epsilon_ev, omega_ev)


def boa_absorption_two(es: ElectronicStructure, c: CavityParams, epsilon_ev: float = spectra.DEFAULT_EPSILON_EV,
                       omega_ev=None, n_vib: int = 60, stride: int = 2) -> spectra.Spectrum:
    """Absorption of two identical molecules within the BOA on the (R1, R2) lattice.

    Nuclear eigenstates are computed on the G, LP, DS and UP surfaces
    (every ``stride``-th point of the electronic R grid in each direction);
    transition dipoles <pol|x1 + x2|G> are evaluated per lattice point.
    """
    R = es.R[::stride]
    grid = Grid1D(float(R[0]), float(R[-1]), len(R))
    n = len(R)
    R1, R2 = np.meshgrid(R, R, indexing="ij")
    E1, E2 = es.energies_at(R1)[..., :2], es.energies_at(R2)[..., :2]
    d1, d2 = es.dipoles_at(R1)[..., 1, 0], es.dipoles_at(R2)[..., 1, 0]
    res = _eig_blocks(E1, d1, E2, d2, c)
    x1, x2, *_ = _two_level_ops(c.n_max)
    X = d1[..., None, None] * x1 + d2[..., None, None] * x2
    wG, vG, idx_even = res["G"]
    vG = _raster_sign(vG)
    M = es.params.M
    T = sp.kron(kinetic_sparse(grid, M), sp.identity(n)) + sp.kron(sp.identity(n), kinetic_sparse(grid, M))

    def levels(surface, k):
        H = (T + sp.diags(surface.ravel())).tocsc()
        w, v = eigsh(H, k=k, sigma=float(surface.min()) - 1e-3, which="LM")
        order = np.argsort(w)
        return w[order], v[:, order]

    e0, chi0 = levels(wG, 1)
    exc, strength = [], []
    for lab in ("LP", "DS", "UP"):
        w, v, idx_odd = res[lab]
        v = _raster_sign(v)
        Xb = X[..., idx_odd[:, None], idx_even[None, :]]
        D = np.einsum("...i,...ij,...j->...", v, Xb, vG).ravel()
        ek, chik = levels(w, n_vib)
        amps = chik.T @ (D * chi0[:, 0])
        exc.append(ek - e0[0])
        strength.append(amps**2)
    if omega_ev is None:
        omega_ev = spectra.default_omega_grid(au_to_ev(c.omega_c))
    return spectra.lorentzian_spectrum(np.concatenate(exc), np.concatenate(strength), epsilon_ev, omega_ev)


def _raster_sign(v: np.ndarray) -> np.ndarray:
    """Continuous sign on a 2D lattice: along the first column, then along every row."""
    v = v.copy()
    n1, n2 = v.shape[:2]
    if v[0, 0][np.argmax(np.abs(v[0, 0]))] < 0:
        v[0, 0] *= -1
    for i in range(1, n1):
        if v[i, 0] @ v[i - 1, 0] < 0:
            v[i, 0] *= -1
    for j in range(1, n2):
        flip = np.einsum("ik,ik->i", v[:, j], v[:, j - 1]) < 0
        v[flip, j] *= -1
    return v


# ---------------------------------------------------------------------------
# ultrastrong-coupling ground state for N = 1, 2


@dataclass(frozen=True)
class GroundShift:
    N: int
    g: float
    delta_E0: float          # a.u., shift of the surface minimum energy
    delta_R0: float          # a.u.
    beta: float = float("nan")


def ground_shift(es: ElectronicStructure, omega_c: float, g: float, N: int, n_max: int = 6,
                 fit_beta: bool = False) -> GroundShift:
    """Bond-length and energy shift of the coupled ground surface.

    For N = 2 the minimum lies on R1 = R2 by symmetry, so the shift is
    read off the diagonal; ``fit_beta`` adds the cross-curvature of the
    full two-dimensional ground surface.
    """
    bare_R, bare_E, _ = surface_minimum(es.R, es.E_g)
    if N == 1:
        pes = ground_state_pes_usc(es, CavityParams(omega_c, g, n_max))
        Rm, Em, _ = surface_minimum(es.R, pes.exact)
        return GroundShift(1, g, Em - bare_E, Rm - bare_R)
    if N != 2:
        raise ParameterError("only N = 1 and N = 2 are supported")
    c = CavityParams(omega_c, g, n_max)
    diag = surfaces_at(es, es, c, es.R, es.R)["G"]
    Rm, Em, _ = surface_minimum(es.R, diag)
    beta = float("nan")
    if fit_beta:
        lv_omega = _omega_vib(es)
        hw = 3.0 * rms_amplitude(es.params.M, lv_omega)

        def ground(R1, R2):
            return surfaces_at(es, es, c, R1, R2)["G"]

        beta = fit_harmonic(ground, (Rm, Rm), hw).beta
    return GroundShift(2, g, Em - 2 * bare_E, Rm - bare_R, beta)


def _omega_vib(es):
    from .molecule import vibrational_levels
    lv = vibrational_levels(es, "g", es.params.M, 2)
    return lv.energies[1] - lv.energies[0]


def loglog_slope(x, y) -> float:
    x, y = np.asarray(x, float), np.abs(np.asarray(y, float))
    return float(np.polyfit(np.log(x), np.log(y), 1)[0])


def collective_scaling_report(es: ElectronicStructure, omega_c: float, g_list, n_max: int = 6) -> dict:
    """Ground-state shifts versus N and g, plus the fitted scaling laws.

    N = 1 uses g, N = 2 uses g / sqrt(2) so that every row pair shares the
    same collective Rabi splitting.
    """
    g_list = np.asarray(sorted(g_list), float)
    rows = []
    for g in g_list:
        one = ground_shift(es, omega_c, g, 1, n_max)
        two = ground_shift(es, omega_c, g / np.sqrt(2), 2, n_max, fit_beta=True)
        two_same_g = ground_shift(es, omega_c, g, 2, n_max, fit_beta=True)
        rows.append((one, two, two_same_g))
    table = []
    for one, two, same in rows:
        for s in (one, two, same):
            table.append({"N": s.N, "g": s.g, "delta_E0_au": s.delta_E0, "delta_E0_meV": au_to_ev(s.delta_E0) * 1e3,
                          "delta_R0_au": s.delta_R0, "delta_R0_mA": s.delta_R0 * BOHR_MILLIANGSTROM,
                          "beta_ground": s.beta})
    dR1 = [r[0].delta_R0 for r in rows]
    dR2 = [r[1].delta_R0 for r in rows]
    dE1 = [r[0].delta_E0 for r in rows]
    dE2 = [r[1].delta_E0 for r in rows]
    betas = [r[2].beta for r in rows]
    summary = {
        "slope_delta_R0_vs_g_N1": loglog_slope(g_list, dR1),
        "slope_delta_R0_vs_g_N2": loglog_slope(g_list / np.sqrt(2), dR2),
        "slope_beta_ground_vs_g_N2": loglog_slope(g_list, betas),
        "ratio_delta_R0_N2_over_N1_same_rabi": [b / a for a, b in zip(dR1, dR2)],
        "ratio_delta_E0_N2_over_N1_same_rabi": [b / a for a, b in zip(dE1, dE2)],
    }
    return {"omega_c_au": omega_c, "n_max": n_max, "rows": table, "summary": summary}


__all__ = [
    "TwoMolBasis", "CoupledPES2D", "HarmonicFit", "DarkStateSplitting", "TwoMolSolution", "GroundShift",
    "build_parity_blocks", "two_mol_electronic_photon", "two_mol_parity_indices", "coupled_pes_two",
    "surfaces_at", "dark_state_splitting", "fit_harmonic", "fit_two_mol_surfaces", "rms_amplitude",
    "solve_exact_two", "exact_absorption_two", "boa_absorption_two", "ground_shift", "collective_scaling_report",
    "loglog_slope",
]
