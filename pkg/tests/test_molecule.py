import numpy as np
import pytest

from polarmol.errors import BoxTooSmallError, ParameterError, ValidationError, WindowError
from polarmol.molecule import (ANTHRACENE_TARGETS, ElectronicStructure, MoleculeParams, calibrate, default_grids,
                               load_fixture, measure_observables, nuclear_levels, potential_en, potential_nn,
                               sampled_potential_en, soft_coulomb, solve_electronic, solve_exact_molecule,
                               surface_minimum, vibrational_levels)
from polarmol.numerics import Grid1D
from polarmol.units import au_to_ev, ev_to_au

P = MoleculeParams(M=40000.0, Z=2.0, alpha=1.0, r0=2.0, De=0.15, R0=3.6, A=1.9)


def test_soft_coulomb_limits():
    assert np.isclose(soft_coulomb(0.0, P), -P.Z / P.alpha)
    r = np.array([200.0, 400.0])
    assert np.allclose(soft_coulomb(r, P) * r, -0.5, rtol=1e-4)
    r = np.linspace(0, 20, 200)
    assert np.all(np.diff(soft_coulomb(r, P)) > 0)


def test_potential_is_symmetric_and_rejects_bad_R():
    x = np.linspace(-10, 10, 201)
    assert np.allclose(potential_en(x, 3.0, P), potential_en(-x, 3.0, P))
    assert np.isclose(potential_en(0.0, 3.0, P), 2 * soft_coulomb(1.5, P))
    with pytest.raises(ParameterError):
        potential_en(x, 0.0, P)


def test_sampled_potential_converges_to_point_values():
    g = Grid1D(-6.0, 6.0, 12001)
    far = np.abs(np.abs(g.points) - 1.5) > 0.05
    diff = sampled_potential_en(g, 3.0, P) - potential_en(g.points, 3.0, P)
    assert np.max(np.abs(diff[far])) < 1e-5


def test_morse_minimum_and_curvature():
    assert potential_nn(P.R0, P) == 0.0
    h = 1e-4
    R = P.R0 + np.array([-h, 0.0, h])
    curv = np.diff(potential_nn(R, P), 2)[0] / h**2
    assert np.isclose(curv, 2 * P.De * P.A**2, rtol=1e-6)
    assert np.isclose(potential_nn(100.0, P), P.De)


def test_param_file_round_trip_and_strictness(tmp_path):
    path = tmp_path / "m.params"
    P.write(path, header="test molecule")
    assert MoleculeParams.read(path) == P
    text = P.to_text()
    with pytest.raises(ValidationError):
        MoleculeParams.from_text(text + "B = 1.0\n")
    with pytest.raises(ValidationError):
        MoleculeParams.from_text(text + "M = 1.0\n")
    with pytest.raises(ValidationError):
        MoleculeParams.from_text(text.replace("A = 1.9\n", ""))
    with pytest.raises(ParameterError):
        MoleculeParams.from_text(text.replace("De = 0.15", "De = -0.15"))
    with pytest.raises(ParameterError):
        load_fixture("benzene")


def test_electronic_states_have_opposite_parity(anthracene):
    E, v = solve_electronic(anthracene.params, anthracene.params.R0, anthracene.grid_x, 2)
    assert E[0] < E[1]
    assert np.allclose(v[:, 0], v[::-1, 0], atol=1e-8)
    assert np.allclose(v[:, 1], -v[::-1, 1], atol=1e-8)


def test_small_box_is_rejected():
    with pytest.raises(BoxTooSmallError):
        solve_electronic(P, P.R0, Grid1D(-3.0, 3.0, 61), 2)


@pytest.mark.parametrize("name", ["anthracene", "r6g"])
def test_dipoles_parity_and_smoothness(name, request):
    es = request.getfixturevalue(name).es
    assert np.max(np.abs(es.dipoles[:, 0, 0])) < 1e-8
    assert np.max(np.abs(es.dipoles[:, 1, 1])) < 1e-8
    mu = es.mu_eg
    assert np.all(np.abs(mu) > 0.5) and np.all(np.sign(mu) == np.sign(mu[0]))
    assert np.max(np.abs(np.diff(mu, 2))) < 1e-3


@pytest.mark.parametrize("name, targets", [
    ("anthracene", (0.180, 0.092, 3.5)),
    ("r6g", (0.070, 0.018, 2.3)),
])
def test_fixtures_reproduce_their_targets(name, targets, request):
    fx = request.getfixturevalue(name)
    obs = measure_observables(fx.es)
    assert abs(obs.omega_vib / targets[0] - 1) < 0.05
    assert abs(obs.delta_R / targets[1] - 1) < 0.10
    assert abs(obs.transition_energy / targets[2] - 1) < 0.02
    ladder = vibrational_levels(fx.es, "g", n=3).energies
    assert np.isclose(au_to_ev(ladder[1] - ladder[0]), targets[0], rtol=0.01)


def test_vibrational_density_is_normalized(anthracene):
    lv = vibrational_levels(anthracene.es, "e", n=4)
    assert np.allclose(np.sum(lv.densities, axis=0) * anthracene.grid_R.spacing, 1.0)
    assert np.allclose(lv.wavefunctions.T @ lv.wavefunctions, np.eye(4), atol=1e-10)


def test_window_error_when_minimum_at_edge():
    g = Grid1D(0.0, 1.0, 101)
    with pytest.raises(WindowError):
        nuclear_levels(g, (g.points - 1.0) ** 2, 1000.0, 2)


def _shifted_structure(d, M=30000.0, omega=ev_to_au(0.1)):
    grid_R = Grid1D(2.0, 4.0, 801)
    R = grid_R.points
    k = M * omega**2
    Eg = 0.5 * k * (R - 3.0) ** 2
    Ee = 0.5 * k * (R - 3.0 - d) ** 2 + 0.1
    dip = np.zeros((len(R), 2, 2))
    dip[:, 0, 1] = dip[:, 1, 0] = 1.3
    params = P.replace(M=M)
    return ElectronicStructure(params, Grid1D(-1.0, 1.0, 9), grid_R, np.stack([Eg, Ee], axis=1), dip)


def test_displaced_copy_gives_its_displacement():
    for d in (0.02, 0.09):
        obs = measure_observables(_shifted_structure(d), transition="vertical")
        assert np.isclose(obs.delta_R, d, rtol=1e-6)
        assert np.isclose(obs.omega_vib, 0.1, rtol=1e-4)
        assert np.isclose(obs.dipole_at_Re, 1.3)


def test_surface_minimum_off_grid():
    R = np.linspace(0, 1, 51)
    rmin, emin, curv = surface_minimum(R, 2.0 * (R - 0.4137) ** 2 + 1)
    assert np.isclose(rmin, 0.4137, atol=1e-9) and np.isclose(emin, 1.0) and np.isclose(curv, 4.0)


def test_exact_ground_state_is_even_sector(anthracene):
    gx, gR = default_grids(anthracene.params, x_spacing=0.2, points_per_width=3)
    full = solve_exact_molecule(anthracene.params, gx, gR, k=2)
    even = solve_exact_molecule(anthracene.params, gx, gR, k=2, parity="even")
    assert np.isclose(full.energies[0], even.energies[0], rtol=1e-10)
    assert even.vectors.shape[0] == gx.n_points * gR.n_points


def test_calibration_recovers_fixture_targets(anthracene):
    p = anthracene.params
    grids = default_grids(p, x_spacing=0.2, points_per_width=3)
    start = p.replace(A=1.03 * p.A, R0=0.99 * p.R0)
    res = calibrate(ANTHRACENE_TARGETS, start, grids=grids, xatol=1e-4, restarts=0, transition_rtol=5e-3)
    assert res.within_tolerance
    assert abs(res.relative_errors["omega_vib"]) < 1e-3
    assert abs(res.relative_errors["delta_R"]) < 1e-3
    assert abs(res.relative_errors["transition_energy"]) < 5e-3
