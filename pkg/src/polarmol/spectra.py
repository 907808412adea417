"""Linear absorption cross sections and spectrum comparison."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg as sla
from scipy.signal import find_peaks

from .errors import AmbiguityError, NotStronglyCoupledError, ParameterError, ValidationError
from .numerics import EigenSolution
from .units import SPEED_OF_LIGHT, au_to_ev, ev_to_au

DEFAULT_EPSILON_EV = 0.015
DEFAULT_HALF_SPAN_EV = 1.5
DEFAULT_N_OMEGA = 2000


@dataclass(frozen=True)
class Spectrum:
    """sigma(omega) on a frequency grid in eV; epsilon is the Lorentzian half-width in eV."""

    omega: np.ndarray
    sigma: np.ndarray
    epsilon: float
    normalization: str = "none"

    def __post_init__(self):
        if self.omega.shape != self.sigma.shape:
            raise ValidationError("omega and sigma must have the same shape")
        if not np.all(np.isfinite(self.sigma)):
            raise ValidationError("spectrum contains non-finite values")
        if np.any(self.sigma < 0):
            raise ValidationError("cross section must be non-negative")

    def normalized(self, mode: str = "peak") -> "Spectrum":
        if mode == "none":
            return replace(self, normalization="none")
        if mode == "peak":
            scale = self.sigma.max()
        elif mode == "area":
            scale = np.trapezoid(self.sigma, self.omega)
        else:
            raise ParameterError(f"normalization must be peak, area or none, got {mode!r}")
        if scale <= 0:
            raise ValidationError("cannot normalise a zero spectrum")
        return replace(self, sigma=self.sigma / scale, normalization=mode)

    def area(self) -> float:
        return float(np.trapezoid(self.sigma, self.omega))


def default_omega_grid(center_ev: float, half_span_ev: float = DEFAULT_HALF_SPAN_EV,
                       n: int = DEFAULT_N_OMEGA) -> np.ndarray:
    return np.linspace(center_ev - half_span_ev, center_ev + half_span_ev, n)


def _check_epsilon(epsilon_ev):
    if not epsilon_ev > 0:
        raise ParameterError(f"epsilon must be positive, got {epsilon_ev}")


def lorentzian_spectrum(excitations, strengths, epsilon_ev: float, omega_ev) -> Spectrum:
    """(4 pi w / c) sum_k s_k eps / ((D_k - w)^2 + eps^2), all in atomic units.

    ``excitations`` are energies above the ground state (a.u.), ``strengths``
    the squared transition dipoles |<k|mu|0>|^2.
    """
    _check_epsilon(epsilon_ev)
    omega_ev = np.asarray(omega_ev, dtype=float)
    w = ev_to_au(omega_ev)
    eps = ev_to_au(epsilon_ev)
    dE = np.asarray(excitations, dtype=float)
    s = np.asarray(strengths, dtype=float)
    keep = s > 0
    dE, s = dE[keep], s[keep]
    lines = eps / ((dE[None, :] - w[:, None]) ** 2 + eps**2)
    sigma = 4 * np.pi * w / SPEED_OF_LIGHT * (lines @ s)
    return Spectrum(omega_ev, np.clip(sigma, 0.0, None), float(epsilon_ev))


def transition_amplitudes(sol: EigenSolution, dipole_op) -> np.ndarray:
    """<psi_k|mu|psi_0> for every state k in ``sol``."""
    D = dipole_op
    v = sol.vectors
    return v.T @ (D @ v[:, 0])


def absorption(sol: EigenSolution, dipole_op, epsilon_ev: float = DEFAULT_EPSILON_EV,
               omega_ev=None) -> Spectrum:
    """Sum-over-states cross section from the lowest state of ``sol``.

    ``dipole_op`` is the dipole operator in the basis of ``sol.vectors``
    (dense or sparse). Only states contained in ``sol`` contribute.
    """
    _check_epsilon(epsilon_ev)
    amps = transition_amplitudes(sol, dipole_op)
    dE = sol.energies - sol.energies[0]
    if omega_ev is None:
        k = int(np.argmax(amps[1:] ** 2)) + 1 if len(amps) > 1 else 0
        omega_ev = default_omega_grid(au_to_ev(dE[k]))
    return lorentzian_spectrum(dE[1:], amps[1:] ** 2, epsilon_ev, omega_ev)


def absorption_resolvent(H, dipole_op, epsilon_ev: float = DEFAULT_EPSILON_EV, omega_ev=None) -> Spectrum:
    """Same cross section from (H - E_0 - w - i eps)^-1 applied to mu|0>.

    Independent of any eigen-decomposition beyond the ground state; meant
    for moderate dense problems and as a cross-check of :func:`absorption`.
    """
    _check_epsilon(epsilon_ev)
    H = np.asarray(H.toarray() if hasattr(H, "toarray") else H, dtype=float)
    D = np.asarray(dipole_op.toarray() if hasattr(dipole_op, "toarray") else dipole_op, dtype=float)
    E0, v0 = sla.eigh(H, subset_by_index=(0, 0))
    v0 = v0[:, 0]
    src = D @ v0
    src = src - v0 * (v0 @ src)  # the ground state itself carries no absorption
    if omega_ev is None:
        raise ParameterError("absorption_resolvent needs an explicit omega grid")
    omega_ev = np.asarray(omega_ev, dtype=float)
    eps = ev_to_au(epsilon_ev)
    # diagonalising once turns every frequency into a diagonal solve, but to stay
    # independent of the eigen-route we factor H - E0 per frequency
    n = H.shape[0]
    sigma = np.empty_like(omega_ev)
    for i, w in enumerate(ev_to_au(omega_ev)):
        A = H - (E0[0] + w + 1j * eps) * np.eye(n)
        x = sla.solve(A, src.astype(complex), assume_a="sym")
        sigma[i] = 4 * np.pi * w / SPEED_OF_LIGHT * np.imag(src @ x)
    return Spectrum(omega_ev, np.clip(sigma, 0.0, None), float(epsilon_ev))


def _refine(omega, sigma, i) -> float:
    if i == 0 or i == len(sigma) - 1:
        return float(omega[i])
    y0, y1, y2 = sigma[i - 1: i + 2]
    denom = y0 - 2 * y1 + y2
    if denom >= 0:
        return float(omega[i])
    h = omega[i + 1] - omega[i]
    return float(omega[i] + 0.5 * h * (y0 - y2) / denom)


def local_maxima(s: Spectrum, rel_height: float = 1e-3) -> tuple[np.ndarray, np.ndarray]:
    """Sub-grid peak positions (eV) and heights of all local maxima."""
    idx, _ = find_peaks(s.sigma, height=rel_height * s.sigma.max())
    pos = np.array([_refine(s.omega, s.sigma, i) for i in idx])
    return pos, s.sigma[idx]


def peak_position(s: Spectrum, rtol: float = 1e-9) -> float:
    """Position (eV) of the global maximum, refined by a parabola through 3 points."""
    if s.sigma.max() <= 0:
        raise ValidationError("spectrum is zero")
    top = np.flatnonzero(s.sigma >= s.sigma.max() * (1 - rtol))
    if len(top) > 1 and np.any(np.diff(top) > 1):
        raise AmbiguityError(f"{len(top)} equal maxima", candidates=[float(s.omega[i]) for i in top])
    return _refine(s.omega, s.sigma, int(top[len(top) // 2]))


def rabi_splitting(s: Spectrum, window=None) -> float:
    """Distance (eV) between the two tallest absorption peaks.

    Two equal Lorentzians of half-width eps only show two maxima when they
    are more than 2 eps / sqrt(3) apart; below that the spectrum has a
    single maximum and NotStronglyCoupledError is raised.
    """
    if window is not None:
        lo, hi = window
        keep = (s.omega >= lo) & (s.omega <= hi)
        s = replace(s, omega=s.omega[keep], sigma=s.sigma[keep])
    pos, heights = local_maxima(s)
    if len(pos) < 2:
        raise NotStronglyCoupledError(f"found {len(pos)} resolved peak(s); no polariton doublet")
    top = np.sort(pos[np.argsort(heights)[-2:]])
    return float(top[1] - top[0])


def spectral_overlap(a: Spectrum, b: Spectrum) -> float:
    """Normalised inner product of two spectra; b is resampled onto a's grid if needed."""
    sb = b.sigma
    if a.omega.shape != b.omega.shape or not np.allclose(a.omega, b.omega, rtol=0, atol=1e-12):
        sb = np.interp(a.omega, b.omega, b.sigma, left=0.0, right=0.0)
    na = np.trapezoid(a.sigma**2, a.omega)
    nb = np.trapezoid(sb**2, a.omega)
    if na <= 0 or nb <= 0:
        raise ValidationError("overlap undefined for a zero spectrum")
    return float(np.clip(np.trapezoid(a.sigma * sb, a.omega) / np.sqrt(na * nb), 0.0, 1.0))
