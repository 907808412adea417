import numpy as np
import pytest

from polarmol.cavity import (CavityParams, boa_absorption_single, bond_length_shift, coupled_pes_single,
                             coupling_from_volume, electron_photon_matrix, ground_photon_number,
                             ground_state_pes_usc, parity_block, parity_indices, solve_exact_cavity,
                             zero_detuning_omega)
from polarmol.errors import ParameterError, ValidationError
from polarmol.molecule import bare_absorption, default_grids
from polarmol.spectra import Spectrum, lorentzian_spectrum
from polarmol.units import ev_to_au

E2 = np.array([-1.0, -0.87])
MU = np.array([[0.0, 1.6], [1.6, 0.0]])


def test_coupling_from_volume():
    assert np.isclose(coupling_from_volume(2.0), 1.34e-7 * 4)
    assert np.isclose(coupling_from_volume(1.0, "plasmonic"), 3.72e-4)
    assert np.isclose(coupling_from_volume(2.0) / coupling_from_volume(1.0), 4.0)
    with pytest.raises(ParameterError):
        coupling_from_volume(2.0, "waveguide")
    with pytest.raises(ParameterError):
        coupling_from_volume(-1.0)


def test_cavity_params_validation():
    with pytest.raises(ParameterError):
        CavityParams(0.0, 0.01)
    with pytest.raises(ParameterError):
        CavityParams(0.1, -0.01)
    with pytest.raises(ParameterError):
        CavityParams(0.1, 0.01, n_max=0)


def test_single_excitation_block_is_the_two_by_two():
    g, w = 0.01, 0.125
    c = CavityParams(w, g, n_max=1)
    H = electron_photon_matrix(E2, MU, c)
    block = parity_block(H, 1, "odd")
    a, b, h = E2[0] + w, E2[1], g * MU[1, 0]
    mean, half = 0.5 * (a + b), np.hypot(0.5 * (a - b), h)
    assert np.allclose(np.linalg.eigvalsh(block), [mean - half, mean + half], atol=1e-12, rtol=0)


@pytest.mark.parametrize("n_max", [1, 4, 7])
def test_parity_blocks_decouple(n_max):
    H = electron_photon_matrix(E2, MU, CavityParams(0.13, 0.05, n_max))
    even, odd = parity_indices(n_max, "even"), parity_indices(n_max, "odd")
    assert len(even) + len(odd) == H.shape[0]
    assert np.all(H[np.ix_(even, odd)] == 0)
    both = np.sort(np.concatenate([np.linalg.eigvalsh(parity_block(H, n_max, p)) for p in ("even", "odd")]))
    assert np.allclose(both, np.linalg.eigvalsh(H), atol=1e-12)


def test_permanent_dipole_rejected():
    with pytest.raises(ValidationError):
        electron_photon_matrix(E2, np.array([[0.1, 1.0], [1.0, 0.0]]), CavityParams(0.1, 0.01))


def test_zero_coupling_gives_bare_replicas(anthracene):
    c = CavityParams(anthracene.omega_abs, 0.0)
    pes = coupled_pes_single(anthracene.es, c)
    es = anthracene.es
    assert np.allclose(pes["G"], es.E_g, atol=1e-14)
    assert np.allclose(pes["LP"], np.minimum(es.E_g + c.omega_c, es.E_e), atol=1e-14)
    assert np.allclose(pes["UP"], np.maximum(es.E_g + c.omega_c, es.E_e), atol=1e-14)


def test_boa_absorption_at_zero_coupling_is_bare(anthracene):
    c = CavityParams(anthracene.omega_abs, 0.0)
    s = boa_absorption_single(anthracene.es, c)
    ref = bare_absorption(anthracene.es, omega_ev=s.omega)
    assert np.array_equal(s.sigma, ref.sigma)


def test_polariton_mixing_is_half_at_resonance(anthracene):
    es = anthracene.es
    i = es.grid_R.n_points // 2
    # n_max = 1 leaves only the resonant pair {g1, e0} in the odd block
    c = CavityParams(float(es.E_e[i] - es.E_g[i]), 0.01, n_max=1)
    pes = coupled_pes_single(es, c)
    assert np.isclose(pes.exciton_weight["LP"][i], 0.5, atol=1e-10)
    split = pes["UP"][i] - pes["LP"][i]
    assert np.isclose(split, 2 * c.g * abs(es.mu_eg[i]), rtol=1e-10)
    # counter-rotating terms push the resonance away from the bare crossing
    full = coupled_pes_single(es, c.replace(n_max=6))
    assert full.exciton_weight["LP"][i] < 0.5


def test_usc_ground_shift_sign_and_order(anthracene):
    es = anthracene.es
    res = []
    for g in (0.01, 0.02):
        usc = ground_state_pes_usc(es, CavityParams(anthracene.omega_abs, g))
        assert np.all(usc.exact < usc.bare)
        res.append(np.max(np.abs(usc.residual)))
    # the second-order estimate is exact to O(g^4)
    assert np.isclose(res[1] / res[0], 16.0, rtol=0.05)


def test_bond_length_shift_of_quadratics():
    R = np.linspace(3.0, 4.0, 201)
    s = bond_length_shift(R, 0.5 * (R - 3.5) ** 2, 0.5 * (R - 3.5 - 2.4e-5) ** 2 - 1e-3)
    assert abs(s.au - 2.4e-5) < 1e-9
    assert np.isclose(s.milli_angstrom, 2.4e-5 * 529.177, rtol=1e-4)


@pytest.fixture(scope="module")
def coarse(anthracene):
    return default_grids(anthracene.params, x_spacing=0.2, points_per_width=3)


def test_photon_number_vanishes_at_zero_coupling_and_grows_as_g_squared(anthracene, coarse):
    p, w = anthracene.params, anthracene.omega_abs
    sol0 = solve_exact_cavity(p, CavityParams(w, 0.0), coarse, k=3, n_even=10, n_odd=10)
    assert ground_photon_number(sol0) < 1e-20
    gs = np.array([0.001, 0.002, 0.004])
    n = [ground_photon_number(solve_exact_cavity(p, CavityParams(w, g), coarse, k=3, n_even=10, n_odd=10))
         for g in gs]
    slope = np.polyfit(np.log(gs), np.log(n), 1)[0]
    assert abs(slope - 2.0) < 0.02


def test_fock_cutoff_is_converged(anthracene, coarse):
    p, w = anthracene.params, anthracene.omega_abs
    c = CavityParams(w, 0.05, n_max=2)
    sol = solve_exact_cavity(p, c, coarse, k=5, n_even=10, n_odd=10)
    bigger = solve_exact_cavity(p, c.replace(n_max=14), coarse, k=5, n_even=10, n_odd=10, check_fock=False)
    assert np.max(np.abs(sol.energies - bigger.energies)) < 1e-8


def test_grid_and_prediag_bases_agree(anthracene):
    p, w = anthracene.params, anthracene.omega_abs
    grids = default_grids(p, x_spacing=0.25, points_per_width=2.5)
    c0 = CavityParams(w, 0.0, n_max=2)
    a = solve_exact_cavity(p, c0, grids, k=3, n_even=10, n_odd=10, check_fock=False)
    b = solve_exact_cavity(p, c0, grids, k=3, basis="grid")
    assert np.max(np.abs(a.energies - b.energies)) < 1e-12
    # with coupling, the truncated molecular basis misses the polarizability
    # of higher electronic states; the gap closes as the basis grows
    c = c0.replace(g=0.01)
    ref = solve_exact_cavity(p, c, grids, k=3, basis="grid").energies
    gaps = [np.max(np.abs(solve_exact_cavity(p, c, grids, k=3, n_even=n, n_odd=n, check_fock=False).energies - ref))
            for n in (30, 60)]
    assert gaps[1] < gaps[0] < 2e-5


def test_zero_detuning_follows_a_shift():
    omega = np.linspace(1.0, 4.0, 3001)
    s = lorentzian_spectrum(np.array([ev_to_au(2.3)]), np.array([1.0]), 0.05, omega)
    shifted = Spectrum(omega + 0.1, s.sigma, s.epsilon)
    assert np.isclose(zero_detuning_omega(shifted) - zero_detuning_omega(s), ev_to_au(0.1), rtol=1e-9)
    # the omega prefactor of the cross section moves the maximum slightly up
    assert ev_to_au(2.3) < zero_detuning_omega(s) < ev_to_au(2.301)
