import numpy as np
import pytest
import scipy.linalg as sla

from polarmol.errors import GaugeError, ParameterError, ValidationError
from polarmol.molecule import nuclear_levels
from polarmol.numerics import (Grid1D, canonicalize, fix_gauge, gauge_fixed_derivative, gauge_fixed_second_derivative,
                               kinetic_banded, kinetic_matrix, kinetic_sparse, parabola_vertex, solve_hermitian)


def test_grid_endpoints_and_validation():
    g = Grid1D(-3.0, 7.0, 1001)
    assert abs(g.point(g.n_points - 1) - g.max) <= 1e-12 * abs(g.max)
    assert g.points[0] == g.min and np.isclose(g.spacing, 0.01)
    assert Grid1D(-2.0, 2.0, 9).is_symmetric and not g.is_symmetric
    with pytest.raises(ParameterError):
        Grid1D(0.0, 1.0, 7)
    with pytest.raises(ParameterError):
        Grid1D(1.0, 1.0, 10)


def test_grid_around_respects_spacing():
    g = Grid1D.around(3.0, 0.5, 0.01)
    assert np.isclose(g.min, 2.5) and np.isclose(g.max, 3.5) and g.spacing <= 0.01 + 1e-15


def test_harmonic_oscillator_levels():
    g = Grid1D(-10.0, 10.0, 1001)
    H = kinetic_matrix(g, 1.0) + np.diag(0.5 * g.points**2)
    sol = solve_hermitian(H, k=10)
    expected = np.arange(10) + 0.5
    assert np.max(np.abs(sol.energies - expected) / expected) < 1e-6


def test_morse_levels_match_closed_form():
    De, a, M = 0.15, 2.0, 40000.0
    g = Grid1D(-0.6, 1.6, 2201)
    V = De * (1 - np.exp(-a * g.points)) ** 2
    lv = nuclear_levels(g, V, M, 10)
    w = a * np.sqrt(2 * De / M)
    n = np.arange(10) + 0.5
    exact = w * n - (w * n) ** 2 / (4 * De)
    assert np.max(np.abs(lv.energies - exact) / exact) < 1e-5


def test_particle_in_a_box():
    # Dirichlet walls sit one spacing beyond the first and last grid point
    # (the truncated 5-point stencil shifts the effective wall by O(h))
    g = Grid1D(0.0, 1.0, 4001)
    L = g.max - g.min + 2 * g.spacing
    E = sla.eig_banded(kinetic_banded(g, 1.0), eigvals_only=True, select="i", select_range=(0, 4))
    n = np.arange(1, 6)
    assert np.max(np.abs(E / (n**2 * np.pi**2 / (2 * L**2)) - 1)) < 1e-4


def test_kinetic_forms_agree_and_are_symmetric():
    g = Grid1D(-1.0, 1.0, 40)
    T = kinetic_matrix(g, 2.5)
    assert np.array_equal(T, T.T)
    assert np.allclose(kinetic_sparse(g, 2.5).toarray(), T)
    ab = kinetic_banded(g, 2.5)
    w_band = sla.eig_banded(ab, eigvals_only=True)
    assert np.allclose(np.sort(w_band), np.linalg.eigvalsh(T))
    assert np.linalg.eigvalsh(T).min() >= 0
    with pytest.raises(ParameterError):
        kinetic_matrix(g, 0.0)


def test_two_level_and_diagonal():
    h = 0.3
    sol = solve_hermitian(np.array([[0.0, h], [h, 0.0]]))
    assert np.allclose(sol.energies, [-h, h], atol=1e-15)
    assert np.allclose(sol.vectors**2, 0.5)
    D = np.diag([3.0, 1.0, 2.0])
    sol = solve_hermitian(D)
    assert np.allclose(sol.energies, [1, 2, 3])
    assert np.allclose(np.abs(sol.vectors), np.eye(3)[:, [1, 2, 0]])


def test_random_matrix_against_dense_reference(rng):
    A = rng.standard_normal((50, 50))
    H = A + A.T
    sol = solve_hermitian(H)
    assert np.max(np.abs(sol.energies - np.linalg.eigvalsh(H))) < 1e-10
    assert sol.orthonormality_error() < 1e-10
    perm = rng.permutation(50)
    permuted = solve_hermitian(H[np.ix_(perm, perm)])
    assert np.max(np.abs(permuted.energies - sol.energies)) < 1e-10


def test_rejects_bad_input():
    with pytest.raises(ValidationError):
        solve_hermitian(np.array([[0.0, 1.0], [0.0, 0.0]]))
    with pytest.raises(ValidationError):
        solve_hermitian(np.ones((2, 3)))
    with pytest.raises(ParameterError):
        solve_hermitian(np.eye(3), k=4)


def test_canonicalize_degenerate_cluster_is_deterministic():
    E = np.array([1.0, 1.0, 2.0])
    V = np.array([[0.0, -1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, -1.0]])
    e, v = canonicalize(E, V)
    assert np.allclose(v, np.eye(3))
    assert np.allclose(e, E)


def _rotating_field(R, flips):
    theta = 0.3 + 0.8 * np.tanh(R)
    v = np.stack([np.cos(theta), np.sin(theta), np.zeros_like(R)], axis=1)
    return v * flips[:, None], theta, 0.8 / np.cosh(R) ** 2


def test_gauge_fixed_derivative_of_rotation(rng):
    g = Grid1D(-2.0, 2.0, 4001)
    flips = rng.choice([-1.0, 1.0], size=g.n_points)
    v, theta, dtheta = _rotating_field(g.points, flips)
    d = gauge_fixed_derivative(v, g)
    ref = fix_gauge(v, grid_R=g)
    sign = np.sign(ref[:, 0])[:, None]
    expected = sign * np.stack([-np.sin(theta), np.cos(theta), 0 * theta], axis=1) * dtheta[:, None]
    assert np.max(np.abs(d - expected)) < 1e-6
    assert np.max(np.abs(np.sum(ref * d, axis=1))) < 1e-8
    unflipped, _, _ = _rotating_field(g.points, np.ones(g.n_points))
    assert np.allclose(np.abs(gauge_fixed_derivative(unflipped, g)), np.abs(d))


def test_gauge_second_derivative_and_constant_field():
    g = Grid1D(-1.0, 1.0, 2001)
    const = np.tile([0.6, 0.8], (g.n_points, 1))
    assert np.allclose(gauge_fixed_derivative(const, g), 0.0)
    assert np.allclose(gauge_fixed_second_derivative(const, g), 0.0)
    v, theta, dtheta = _rotating_field(g.points, np.ones(g.n_points))
    d2 = gauge_fixed_second_derivative(v, g, accuracy=4)
    # <v|v''> = -theta'^2 for a unit vector rotating in a plane
    assert np.max(np.abs(np.sum(v * d2, axis=1) + dtheta**2)) < 1e-5


def test_gauge_error_on_unresolved_crossing():
    g = Grid1D(0.0, 1.0, 20)
    v = np.zeros((20, 2))
    v[:10, 0] = 1.0
    v[10:, 1] = 1.0
    with pytest.raises(GaugeError):
        fix_gauge(v, grid_R=g)


def test_parabola_vertex():
    x = np.array([0.0, 1.0, 2.0])
    y = 3 * (x - 1.2) ** 2 - 0.5
    xv, yv = parabola_vertex(x, y, 1)
    assert np.isclose(xv, 1.2) and np.isclose(yv, -0.5)
