"""Non-adiabatic couplings between the two single-excitation polariton surfaces.

Conventions: |+> is the upper and |-> the lower polariton,
|+> = cos(t)|g1> + sin(t)|e0>, |-> = sin(t)|g1> - cos(t)|e0>, with
tan(2t) = 2h / dE, dE = E_g + omega_c - E_e and h = g mu_eg. The nuclear
momentum is P = -i d/dR, so <-|P|+> is purely imaginary for real states;
``P_offdiag`` stores its imaginary part.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .cavity import CavityParams, coupled_pes_single
from .errors import FitError, ParameterError, SingularityError, ValidationError, WindowError
from .molecule import ElectronicStructure, build_bo_structure, surface_minimum
from .numerics import Grid1D, _fd_first, _fd_second, fix_gauge

VERDICT_BANDS = ((0.1, "valid"), (1.0, "marginal"), (np.inf, "invalid"))


@dataclass(frozen=True)
class NonBOModel:
    """Linearised two-surface crossing: dE(R) = a0 (R - Rc), constant coupling h0."""

    a0: float
    h0: float
    Rc: float
    M: float
    omega_vib: float = float("nan")
    delta_R: float = float("nan")
    delta_E: float = float("nan")
    omega_c: float = float("nan")

    @classmethod
    def from_harmonic(cls, M: float, omega_vib: float, delta_R: float, delta_E: float, omega_c: float,
                      h0: float, R_ground: float = 0.0) -> "NonBOModel":
        """Two displaced harmonic surfaces with equal curvature.

        ``R_ground`` is the ground-surface minimum (origin of the model),
        ``delta_E`` the excited minus ground minimum energy.
        """
        a0 = M * omega_vib**2 * delta_R
        if a0 == 0:
            raise SingularityError("zero displacement gives no crossing", location=None)
        Rc = R_ground + delta_R / 2 + (delta_E - omega_c) / a0
        return cls(float(a0), h0, float(Rc), M, omega_vib, delta_R, delta_E, omega_c)

    @property
    def fwhm(self) -> float:
        """Full width at half maximum (in R) of |<-|P|+>|."""
        return 4 * abs(self.h0) / abs(self.a0)

    @property
    def peak_P(self) -> float:
        return abs(self.a0) / (4 * abs(self.h0))


@dataclass(frozen=True)
class CorrectionTerms:
    grid_R: Grid1D
    P_offdiag: np.ndarray       # Im <-|P|+>
    P2_offdiag: np.ndarray      # <-|P^2|+>
    P2_diag_plus: np.ndarray    # <+|P^2|+>
    P2_diag_minus: np.ndarray   # <-|P^2|->
    P_offdiag_reverse: np.ndarray | None = None  # Im <+|P|->
    P_diag_plus: np.ndarray | None = None        # Im <+|P|+>
    P_diag_minus: np.ndarray | None = None

    @property
    def R(self) -> np.ndarray:
        return self.grid_R.points

    def columns(self) -> dict:
        return {"R": self.R, "P_offdiag": self.P_offdiag, "P2_offdiag": self.P2_offdiag,
                "P2_diag_plus": self.P2_diag_plus, "P2_diag_minus": self.P2_diag_minus}


def nonbo_model(m: NonBOModel, grid_R: Grid1D) -> CorrectionTerms:
    """Closed-form couplings of the linearised crossing."""
    if m.h0 == 0:
        raise SingularityError("h0 = 0: the surfaces cross and the couplings are singular", location=m.Rc)
    x = grid_R.points - m.Rc
    D = 4 * m.h0**2 + (m.a0 * x) ** 2
    P = -m.a0 * m.h0 / D
    P2 = 2 * m.a0**3 * m.h0 * x / D**2
    diag = (m.a0 * m.h0) ** 2 / D**2
    zero = np.zeros_like(x)
    return CorrectionTerms(grid_R, P, P2, diag, diag.copy(), -P, zero, zero.copy())


def polariton_2x2(E_g, E_e, mu_eg, c: CavityParams, R=None):
    """Energies (lower, upper) and mixing angle of the resonant 2x2 problem.

    The angle is tracked continuously along the input arrays by unwrapping 2t.
    Returns (E_minus, E_plus, theta).
    """
    E_g, E_e, mu_eg = (np.asarray(a, dtype=float) for a in (E_g, E_e, mu_eg))
    h = c.g * mu_eg
    dE = E_g + c.omega_c - E_e
    avg = 0.5 * (E_g + c.omega_c + E_e)
    half = 0.5 * np.sqrt(4 * h**2 + dE**2)
    two_theta = np.arctan2(2 * h, dE)
    if two_theta.ndim:
        two_theta = np.unwrap(two_theta)
    return avg - half, avg + half, 0.5 * two_theta


# ---------------------------------------------------------------------------
# numerical couplings


def crossing_point(es: ElectronicStructure, omega_c: float) -> float:
    """R where E_g(R) + omega_c = E_e(R) (the crossing closest to the ground minimum)."""
    gap = es.E_e - es.E_g - omega_c
    s = np.flatnonzero(np.sign(gap[:-1]) != np.sign(gap[1:]))
    if s.size == 0:
        raise WindowError("E_g + omega_c does not cross E_e inside the R window")
    r_e, _, _ = surface_minimum(es.R, es.E_g)
    i = s[np.argmin(np.abs(es.R[s] - r_e))]

    def f(R):
        E = es.energies_at(R)
        return E[1] - E[0] - omega_c

    return brentq(f, es.R[i], es.R[i + 1], xtol=1e-12)


def crossing_grid(es: ElectronicStructure, c: CavityParams, widths: float = 8.0, spacing: float | None = None,
                  points_per_fwhm: int = 40) -> Grid1D:
    """Fine R grid centred on the crossing, ``widths`` coupling widths on each side."""
    Rc = crossing_point(es, c.omega_c)
    slope = float(np.diff(es.slopes_at(Rc))[0])
    h0 = c.g * abs(float(es.dipoles_at(Rc)[1, 0]))
    if h0 == 0 or slope == 0:
        raise SingularityError("no avoided crossing", location=Rc)
    fwhm = 4 * h0 / abs(slope)
    spacing = fwhm / points_per_fwhm if spacing is None else spacing
    half = widths * fwhm
    return Grid1D.around(Rc, half, spacing)


def polariton_vector_fields(es: ElectronicStructure, c: CavityParams, Rc: float | None = None):
    """Polariton states on the electronic grid times Fock space, for every R.

    Returns (grid_R, psi_plus, psi_minus) with psi arrays of shape
    (n_R, n_x * (n_max + 1)). Signs are continuous in R and pinned by a
    positive |g, 1> amplitude at the point closest to the crossing.
    """
    if es.vectors is None:
        raise ValidationError("electronic structure must keep its eigenvectors (keep_vectors=True)")
    pes = coupled_pes_single(es, c)
    nf = c.n_max + 1
    phi = es.vectors[:, :, :2]
    Rc = crossing_point(es, c.omega_c) if Rc is None else Rc
    ic = int(np.argmin(np.abs(es.R - Rc)))
    fields = {}
    for lab in ("UP", "LP"):
        coeff = pes.vectors[lab].reshape(len(es.R), 2, nf)
        psi = np.einsum("rxa,ran->rxn", phi, coeff).reshape(len(es.R), -1)
        psi = fix_gauge(psi, grid_R=es.grid_R)
        g1 = phi[ic, :, 0] @ psi[ic].reshape(-1, nf)[:, 1]
        if g1 < 0:
            psi = -psi
        fields[lab] = psi
    return es.grid_R, fields["UP"], fields["LP"]


def nonbo_numeric(es: ElectronicStructure, c: CavityParams, accuracy: int = 4,
                  Rc: float | None = None) -> CorrectionTerms:
    """Couplings from finite differences of the full polariton states.

    ``es`` must hold gauge-fixed electronic vectors on an R grid that
    resolves the avoided crossing (see :func:`crossing_grid`). The
    electronic R-dependence is included, not only the mixing angle.
    """
    grid_R, plus, minus = polariton_vector_fields(es, c, Rc)
    h = grid_R.spacing
    dp, dm = _fd_first(plus, h, accuracy), _fd_first(minus, h, accuracy)
    d2p, d2m = _fd_second(plus, h, accuracy), _fd_second(minus, h, accuracy)

    def dot(a, b):
        return np.einsum("ri,ri->r", a, b)

    return CorrectionTerms(
        grid_R,
        P_offdiag=-dot(minus, dp),
        P2_offdiag=-dot(minus, d2p),
        P2_diag_plus=-dot(plus, d2p),
        P2_diag_minus=-dot(minus, d2m),
        P_offdiag_reverse=-dot(plus, dm),
        P_diag_plus=-dot(plus, dp),
        P_diag_minus=-dot(minus, dm),
    )


def fine_structure_near_crossing(es: ElectronicStructure, c: CavityParams, **grid_kw) -> ElectronicStructure:
    """Rebuild ``es`` with vectors on a fine grid around the crossing."""
    grid = crossing_grid(es, c, **grid_kw)
    return build_bo_structure(es.params, es.grid_x, grid, k=2, keep_vectors=True)


# ---------------------------------------------------------------------------
# model parameters from a molecule


def linearized_from_fixture(es: ElectronicStructure, c: CavityParams) -> NonBOModel:
    """Crossing model from the local data at the true crossing.

    a0 is the slope of E_g + omega_c - E_e at Rc and h0 = g |mu_eg(Rc)|;
    no harmonic assumption enters.
    """
    Rc = crossing_point(es, c.omega_c)
    dg, de = es.slopes_at(Rc)
    a0 = float(dg - de)
    h0 = c.g * abs(float(es.dipoles_at(Rc)[1, 0]))
    return NonBOModel(a0, h0, Rc, es.params.M, omega_c=c.omega_c)


def harmonic_from_fixture(es: ElectronicStructure, c: CavityParams, M: float | None = None,
                          amplitudes: float = 1.0, max_residual: float = 0.02) -> NonBOModel:
    """Approximate both surfaces by equal-curvature parabolas and build the crossing model.

    omega_vib is the ground-surface curvature at its minimum; h0 = g |mu_eg(Rc)|.
    Harmonicity is checked by quadratic fits over +-``amplitudes`` RMS
    amplitudes of each minimum (RMS residual / energy range).
    """
    M = es.params.M if M is None else M
    rg, Eg, kg = surface_minimum(es.R, es.E_g)
    re, Ee, _ = surface_minimum(es.R, es.E_e)
    omega0 = np.sqrt(kg / M)
    hw = amplitudes / np.sqrt(2 * M * omega0)

    def fit(r0, E):
        sel = np.abs(es.R - r0) <= hw
        if sel.sum() < 5:
            raise FitError("too few points in the harmonic fit window")
        x = es.R[sel] - r0
        coef = np.polyfit(x, E[sel], 2)
        resid = np.sqrt(np.mean((np.polyval(coef, x) - E[sel]) ** 2)) / np.ptp(E[sel])
        return coef, resid

    cg, resg = fit(rg, es.E_g)
    ce, rese = fit(re, es.E_e)
    worst = max(resg, rese)
    if worst > max_residual:
        raise FitError(f"surfaces are not harmonic in the fit window (residual {worst:.2%})")
    omega = omega0
    model = NonBOModel.from_harmonic(M, omega, re - rg, Ee - Eg, c.omega_c, 0.0, R_ground=rg)
    h0 = c.g * abs(float(es.dipoles_at(model.Rc)[1, 0]))
    return NonBOModel(model.a0, h0, model.Rc, M, float(omega), float(re - rg), float(Ee - Eg), c.omega_c)


# ---------------------------------------------------------------------------
# validity of the Born-Oppenheimer picture


@dataclass(frozen=True)
class ValidityReport:
    ratio_P: float
    ratio_P2: float
    P_typ: float
    h_eff: float
    verdict: str
    verdict_P2: str

    def __str__(self):
        return (f"P-coupling ratio {self.ratio_P:.3g} ({self.verdict}); "
                f"P^2-coupling ratio {self.ratio_P2:.3g} ({self.verdict_P2}); P_typ = {self.P_typ:.4g} a.u.")


def _verdict(r):
    for bound, name in VERDICT_BANDS:
        if r < bound:
            return name
    return "invalid"


def boa_validity(m: NonBOModel, P_typ: float | None = None, N: int = 1) -> ValidityReport:
    """Compare the largest non-adiabatic coupling with the polariton gap.

    r_P = max|<+|P/2M|->| * P_typ / (2 h_eff) = Delta_R w^2 P_typ / (16 h_eff^2),
    r_P2 = max_R |<-|P^2|+>| / (2M (E_+ - E_-)) = M Delta_R^2 w^4 / (25 sqrt(5) h_eff^3).
    P_typ defaults to the RMS momentum sqrt(M w / 2) of the vibrational
    ground state. For N >= 2 identical molecules h_eff = h0 sqrt(N) / 2:
    the collective splitting grows as sqrt(N) but the dark states halve
    the distance between neighbouring surfaces.
    """
    if N < 1:
        raise ParameterError("N must be >= 1")
    w, dR = m.omega_vib, m.delta_R
    if not (np.isfinite(w) and np.isfinite(dR)):
        raise ParameterError("model needs omega_vib and delta_R")
    P_typ = np.sqrt(m.M * w / 2) if P_typ is None else P_typ
    if not P_typ > 0:
        raise ParameterError("P_typ must be positive")
    h_eff = abs(m.h0) if N == 1 else abs(m.h0) * np.sqrt(N) / 2
    if h_eff == 0:
        return ValidityReport(np.inf, np.inf, P_typ, 0.0, "invalid", "invalid")
    rP = abs(dR) * w**2 * P_typ / (16 * h_eff**2)
    rP2 = m.M * dR**2 * w**4 / (25 * np.sqrt(5) * h_eff**3)
    return ValidityReport(float(rP), float(rP2), float(P_typ), float(h_eff), _verdict(rP), _verdict(rP2))


def p2_offdiag_extremum(m: NonBOModel) -> tuple[float, float]:
    """Location and value of the maximum of <-|P^2|+> by direct 1D maximisation."""
    scale = m.fwhm

    def f(x):
        return -(2 * m.a0**3 * m.h0 * x / (4 * m.h0**2 + (m.a0 * x) ** 2) ** 2)

    res = minimize_scalar(f, bounds=(0.0, 5 * scale), method="bounded", options={"xatol": 1e-12 * scale})
    return m.Rc + float(res.x), float(-res.fun)


def p2_ratio_extremum(m: NonBOModel) -> tuple[float, float]:
    """Maximum over R of |<-|P^2|+>| / (2M (E_+ - E_-)) by direct maximisation."""
    scale = m.fwhm

    def f(x):
        D = 4 * m.h0**2 + (m.a0 * x) ** 2
        return -abs(2 * m.a0**3 * m.h0 * x / D**2) / (2 * m.M * np.sqrt(D))

    res = minimize_scalar(f, bounds=(0.0, 5 * scale), method="bounded", options={"xatol": 1e-12 * scale})
    return m.Rc + float(res.x), float(-res.fun)


def lorentzian_fwhm(R: np.ndarray, y: np.ndarray) -> float:
    """Width at half maximum of |y| by linear interpolation of the crossings."""
    a = np.abs(y)
    i = int(np.argmax(a))
    half = a[i] / 2
    lo = np.flatnonzero(a[:i] < half)
    hi = np.flatnonzero(a[i:] < half)
    if lo.size == 0 or hi.size == 0:
        raise WindowError("peak is not resolved inside the window")
    j = lo[-1]
    k = i + hi[0]
    r_lo = R[j] + (half - a[j]) * (R[j + 1] - R[j]) / (a[j + 1] - a[j])
    r_hi = R[k - 1] + (half - a[k - 1]) * (R[k] - R[k - 1]) / (a[k] - a[k - 1])
    return float(r_hi - r_lo)


def relative_l2(a: np.ndarray, b: np.ndarray, R: np.ndarray) -> float:
    """||a - b|| / ||b|| with trapezoidal weights."""
    return float(np.sqrt(np.trapezoid((a - b) ** 2, R) / np.trapezoid(b**2, R)))


__all__ = [
    "NonBOModel", "CorrectionTerms", "ValidityReport", "nonbo_model", "nonbo_numeric", "polariton_2x2",
    "polariton_vector_fields", "crossing_point", "crossing_grid", "fine_structure_near_crossing",
    "harmonic_from_fixture", "linearized_from_fixture", "boa_validity", "p2_offdiag_extremum", "p2_ratio_extremum",
    "lorentzian_fwhm", "relative_l2",
]
