"""Grids, finite-difference operators, eigensolvers and gauge-fixed derivatives."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from .errors import GaugeError, ParameterError, ValidationError

# Fourth-order central stencil for the second derivative, times -1/2.
_D2_COEFFS = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


@dataclass(frozen=True)
class Grid1D:
    """Uniform grid including both end points."""

    min: float
    max: float
    n_points: int

    def __post_init__(self):
        if self.n_points < 8:
            raise ParameterError(f"n_points must be >= 8, got {self.n_points}")
        if not self.max > self.min:
            raise ParameterError(f"grid max ({self.max}) must exceed min ({self.min})")

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / (self.n_points - 1)

    @property
    def points(self) -> np.ndarray:
        return self.min + self.spacing * np.arange(self.n_points)

    def point(self, i: int) -> float:
        return self.min + i * self.spacing

    @property
    def is_symmetric(self) -> bool:
        return abs(self.min + self.max) <= 1e-12 * max(1.0, abs(self.max))

    @classmethod
    def around(cls, center: float, half_width: float, spacing: float) -> "Grid1D":
        """Symmetric window ``center +- half_width`` with at most ``spacing``."""
        n = int(np.ceil(2 * half_width / spacing)) + 1
        return cls(center - half_width, center + half_width, max(n, 8))


@dataclass(frozen=True)
class EigenSolution:
    """Eigenpairs of a Hermitian problem.

    ``vectors[:, i]`` is the eigenvector of ``energies[i]`` in the basis named
    by ``basis_tag``. Product bases with a photon mode also carry the photon
    number of every basis state, and a dipole matrix when one is known.
    """

    energies: np.ndarray
    vectors: np.ndarray
    basis_tag: str
    photon_number: np.ndarray | None = None
    dipole: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.energies)

    def orthonormality_error(self) -> float:
        v = self.vectors
        return float(np.max(np.abs(v.conj().T @ v - np.eye(v.shape[1]))))


def _check_mass(mass):
    if not mass > 0:
        raise ParameterError(f"mass must be positive, got {mass}")


def kinetic_banded(grid: Grid1D, mass: float) -> np.ndarray:
    """Upper banded storage (3 x n) of :func:`kinetic_matrix`, for ``eig_banded``."""
    _check_mass(mass)
    n = grid.n_points
    c = -0.5 / (mass * grid.spacing**2)
    ab = np.zeros((3, n))
    ab[2] = c * _D2_COEFFS[2]
    ab[1, 1:] = c * _D2_COEFFS[1]
    ab[0, 2:] = c * _D2_COEFFS[0]
    return ab


def kinetic_sparse(grid: Grid1D, mass: float) -> sp.csr_matrix:
    _check_mass(mass)
    n = grid.n_points
    c = -0.5 / (mass * grid.spacing**2)
    diags = [np.full(n - abs(k), c * _D2_COEFFS[k + 2]) for k in range(-2, 3)]
    return sp.diags(diags, list(range(-2, 3)), format="csr")


def kinetic_matrix(grid: Grid1D, mass: float) -> np.ndarray:
    """Dense -(1/2m) d^2/dx^2 with a 5-point stencil and Dirichlet walls.

    Built entry by entry from one stencil, so it is exactly symmetric.
    """
    return kinetic_sparse(grid, mass).toarray()


def _symmetry_error(H) -> float:
    if sp.issparse(H):
        d = abs(H - H.T)
        return float(d.max()) if d.nnz else 0.0
    return float(np.max(np.abs(H - H.T.conj()))) if H.size else 0.0


def canonicalize(energies: np.ndarray, vectors: np.ndarray, tol: float = 1e-10):
    """Fix signs and the order inside degenerate clusters.

    The first significant component of every vector is made positive.
    Inside a cluster of energies equal within ``tol`` the vectors are
    ordered by the basis index of that component.
    """
    energies = np.asarray(energies)
    vectors = np.array(vectors, copy=True)
    n = vectors.shape[1]
    scale = np.max(np.abs(vectors), axis=0)
    first = np.empty(n, dtype=int)
    for i in range(n):
        idx = np.flatnonzero(np.abs(vectors[:, i]) > 1e-8 * scale[i])[0]
        first[i] = idx
        if vectors[idx, i].real < 0:
            vectors[:, i] *= -1
    etol = tol * max(1.0, float(np.max(np.abs(energies))) if n else 1.0)
    order = np.arange(n)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and energies[stop] - energies[stop - 1] <= etol:
            stop += 1
        if stop - start > 1:
            block = order[start:stop]
            order[start:stop] = block[np.argsort(first[block], kind="stable")]
        start = stop
    return energies[order], vectors[:, order]


def solve_hermitian(H, k: int | None = None, basis_tag: str = "generic") -> EigenSolution:
    """Lowest ``k`` eigenpairs of a dense symmetric/Hermitian matrix."""
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValidationError(f"matrix must be square, got shape {H.shape}")
    n = H.shape[0]
    if k is None:
        k = n
    if not 1 <= k <= n:
        raise ParameterError(f"k={k} outside 1..{n}")
    scale = max(1.0, float(np.max(np.abs(H))) if n else 1.0)
    if _symmetry_error(H) > 1e-10 * scale:
        raise ValidationError("matrix is not symmetric within 1e-10")
    H = 0.5 * (H + H.T.conj())
    w, v = sla.eigh(H, subset_by_index=(0, k - 1))
    w, v = canonicalize(w, v)
    return EigenSolution(w, v, basis_tag)


def _fd_first(field: np.ndarray, h: float, accuracy: int) -> np.ndarray:
    if accuracy == 2:
        return np.gradient(field, h, axis=0, edge_order=2)
    if accuracy != 4:
        raise ParameterError(f"accuracy must be 2 or 4, got {accuracy}")
    d = np.gradient(field, h, axis=0, edge_order=2)
    d[2:-2] = (field[:-4] - 8 * field[1:-3] + 8 * field[3:-1] - field[4:]) / (12 * h)
    return d


def _fd_second(field: np.ndarray, h: float, accuracy: int) -> np.ndarray:
    d = np.empty_like(field)
    d[1:-1] = (field[:-2] - 2 * field[1:-1] + field[2:]) / h**2
    if accuracy == 4:
        d[2:-2] = (-field[:-4] + 16 * field[1:-3] - 30 * field[2:-2] + 16 * field[3:-1] - field[4:]) / (12 * h**2)
    d[0] = (2 * field[0] - 5 * field[1] + 4 * field[2] - field[3]) / h**2
    d[-1] = (2 * field[-1] - 5 * field[-2] + 4 * field[-3] - field[-4]) / h**2
    return d


def fix_gauge(vectors_over_R: np.ndarray, min_overlap: float = 0.5, grid_R: Grid1D | None = None) -> np.ndarray:
    """Return a copy whose sign is continuous along the first axis.

    ``vectors_over_R`` has shape ``(n_R, dim)`` or ``(n_R, dim, n_states)``;
    every state is treated separately. The global sign is pinned by making
    the largest component at the first R point positive.
    """
    v = np.array(vectors_over_R, dtype=float, copy=True)
    squeeze = v.ndim == 2
    if squeeze:
        v = v[:, :, None]
    n_R = v.shape[0]
    for s in range(v.shape[2]):
        j = np.argmax(np.abs(v[0, :, s]))
        if v[0, j, s] < 0:
            v[0, :, s] *= -1
        for i in range(n_R - 1):
            ov = v[i, :, s] @ v[i + 1, :, s]
            norm = np.linalg.norm(v[i, :, s]) * np.linalg.norm(v[i + 1, :, s])
            if abs(ov) <= min_overlap * norm:
                where = (i, i + 1)
                if grid_R is not None:
                    where = (grid_R.point(i), grid_R.point(i + 1))
                raise GaugeError(
                    f"state {s}: overlap {abs(ov) / norm:.3f} between R={where[0]} and R={where[1]}; "
                    "refine the R grid near this crossing",
                    interval=where,
                )
            if ov < 0:
                v[i + 1, :, s] *= -1
    return v[:, :, 0] if squeeze else v


def gauge_fixed_derivative(vectors_over_R: np.ndarray, grid_R: Grid1D, accuracy: int = 2,
                           project: bool = True) -> np.ndarray:
    """d/dR of a real eigenvector field after making its sign continuous.

    With ``project`` the (discretisation-only) component along the vector
    itself is removed, since <v|dv/dR> = 0 for a real normalised field.
    """
    v = fix_gauge(vectors_over_R, grid_R=grid_R)
    d = _fd_first(v, grid_R.spacing, accuracy)
    if project:
        norms = np.sum(v * v, axis=1, keepdims=True)
        d = d - v * np.sum(v * d, axis=1, keepdims=True) / norms
    return d


def gauge_fixed_second_derivative(vectors_over_R: np.ndarray, grid_R: Grid1D, accuracy: int = 2) -> np.ndarray:
    v = fix_gauge(vectors_over_R, grid_R=grid_R)
    return _fd_second(v, grid_R.spacing, accuracy)


def parabola_vertex(x: np.ndarray, y: np.ndarray, i: int) -> tuple[float, float]:
    """Vertex of the parabola through points i-1, i, i+1."""
    x0, x1, x2 = x[i - 1], x[i], x[i + 1]
    y0, y1, y2 = y[i - 1], y[i], y[i + 1]
    denom = (x0 - x1) * (x0 - x2) * (x1 - x2)
    a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom
    b = (x2**2 * (y0 - y1) + x1**2 * (y2 - y0) + x0**2 * (y1 - y2)) / denom
    c = y1 - a * x1**2 - b * x1
    if a == 0:
        return float(x1), float(y1)
    xv = -b / (2 * a)
    return float(xv), float(c - b * b / (4 * a))
