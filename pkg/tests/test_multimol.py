import numpy as np
import pytest

from polarmol.cavity import CavityParams, coupled_pes_single
from polarmol.errors import FitError, ParameterError
from polarmol.molecule import default_grids, solve_exact_molecule, surface_minimum, vibrational_levels
from polarmol.multimol import (TwoMolBasis, build_parity_blocks, coupled_pes_two, dark_state_splitting,
                               fit_harmonic, fit_two_mol_surfaces, rms_amplitude, solve_exact_two, surfaces_at,
                               two_mol_electronic_photon, two_mol_parity_indices)
from polarmol.numerics import Grid1D


def _random_pair(rng):
    E1 = np.sort(rng.uniform(-1.0, -0.8, 2))
    E2 = np.sort(rng.uniform(-1.0, -0.8, 2))
    return E1, rng.uniform(0.5, 2.0), E2, rng.uniform(0.5, 2.0)


def test_parity_blocks_match_full_matrix(rng):
    for _ in range(20):
        E1, d1, E2, d2 = _random_pair(rng)
        c = CavityParams(rng.uniform(0.05, 0.2), rng.uniform(0.0, 0.05), n_max=1)
        H = two_mol_electronic_photon(E1, d1, E2, d2, c)
        full = np.linalg.eigvalsh(H)
        blocks = build_parity_blocks(E1, d1, E2, d2, c)
        merged = np.sort(np.concatenate([np.linalg.eigvalsh(b) for b in blocks]))
        assert np.max(np.abs(merged - full)) < 1e-10
        for parity, block in zip(("even", "odd"), blocks):
            idx = two_mol_parity_indices(1, parity)
            assert np.allclose(np.linalg.eigvalsh(H[np.ix_(idx, idx)]), np.linalg.eigvalsh(block), atol=1e-12)


def test_zero_coupling_blocks_are_diagonal():
    even, odd = build_parity_blocks([-1.0, -0.9], 1.0, [-1.1, -0.85], 1.5, CavityParams(0.1, 0.0))
    assert np.count_nonzero(even - np.diag(np.diag(even))) == 0
    assert np.allclose(np.diag(odd), [-2.0, -2.0, -1.85, -1.65])


def test_resonant_diagonal_is_tavis_cummings():
    E, d, g = np.array([-1.0, -0.88]), 1.7, 0.004
    c = CavityParams(0.12, g, n_max=1)
    w = np.linalg.eigvalsh(build_parity_blocks(E, d, E, d, c)[1])
    # lowest three: LP, DS, UP of the resonant gg1 / eg0 / ge0 triple (ee1 lies 2 omega above)
    lp, ds, up = w[:3]
    assert np.isclose(ds, E.sum(), atol=1e-14)
    assert np.isclose(up - lp, 2 * np.sqrt(2) * g * d, rtol=1e-3)


def test_exchange_symmetry(anthracene):
    es = anthracene.es
    c = CavityParams(anthracene.omega_vert, 0.004, n_max=3)
    R1 = np.linspace(es.R[5], es.R[-5], 7)
    R2 = R1[::-1] + 0.01
    a, b = surfaces_at(es, es, c, R1, R2), surfaces_at(es, es, c, R2, R1)
    for lab in ("G", "LP", "DS", "UP"):
        assert np.allclose(a[lab], b[lab], atol=1e-13)


def test_zero_coupling_surfaces_are_uncoupled_replicas(anthracene):
    es = anthracene.es
    c = CavityParams(anthracene.omega_vert, 0.0, n_max=1)
    sub = Grid1D(float(es.R[2]), float(es.R[-3]), 25)
    pes = coupled_pes_two(es, es, c, sub, sub)
    E = es.energies_at(sub.points)
    Eg1, Ee1 = E[:, None, 0], E[:, None, 1]
    Eg2, Ee2 = E[None, :, 0], E[None, :, 1]
    ref = np.sort(np.stack(np.broadcast_arrays(Eg1 + Eg2 + c.omega_c, Ee1 + Eg2, Eg1 + Ee2)), axis=0)
    for k, lab in enumerate(("LP", "DS", "UP")):
        assert np.allclose(pes[lab], ref[k], atol=1e-12)
    assert np.allclose(pes["G"], Eg1 + Eg2, atol=1e-12)


def test_far_off_diagonal_matches_single_molecule(anthracene):
    es = anthracene.es
    c = CavityParams(anthracene.omega_vert, 0.002, n_max=1)
    single = coupled_pes_single(es, c)
    # molecule 2 far from resonance: molecule 1 alone mixes with the photon
    i1, i2 = es.grid_R.n_points // 2, 0
    s = surfaces_at(es, es, c, es.R[i1], es.R[i2])
    shift = es.E_g[i2]
    assert np.isclose(s["LP"], single["LP"][i1] + shift, atol=1e-5)


def _quadratic(alpha, beta, quartic=0.0):
    def f(R1, R2):
        u, v = np.asarray(R1) - 3.0, np.asarray(R2) - 3.2
        return alpha * (u**2 + v**2) + beta * u * v + quartic * (u**4 + v**4) - 1.0
    return f


def test_fit_harmonic_recovers_known_ratio():
    fit = fit_harmonic(_quadratic(0.2, 0.01, quartic=0.5), (3.01, 3.19), 0.05)
    assert abs(fit.ratio - 0.05) < 1e-3
    assert np.isclose(fit.R1_0, 3.0, atol=1e-6) and np.isclose(fit.R2_0, 3.2, atol=1e-6)
    assert np.isclose(fit.E0, -1.0)


def test_fit_harmonic_separable_and_saddle():
    fit = fit_harmonic(_quadratic(0.2, 0.0), (3.0, 3.2), 0.05)
    assert abs(fit.beta) < 1e-12
    with pytest.raises(FitError, match="signature"):
        fit_harmonic(_quadratic(0.2, 0.6), (3.0, 3.2), 0.05)
    with pytest.raises(ParameterError):
        fit_harmonic(_quadratic(0.2, 0.0), (3.0, 3.2), 0.05, n_points=7)


@pytest.mark.parametrize("name", ["anthracene", "r6g"])
def test_dark_state_splitting(name, request):
    fx = request.getfixturevalue(name)
    c = CavityParams(fx.omega_vert, 0.001, n_max=1)
    ds = dark_state_splitting(fx.es, c)
    ok = ~ds.excluded
    assert ok.sum() > 10 and ds.excluded.sum() > 0
    assert np.all(np.abs(ds.ratio_to_perturbative()[ok] - 1) < 0.05)
    # the naive estimate misses a factor close to 8
    assert 4 < np.nanmedian(ds.ratio_to_naive()) < 13
    assert ds.partner[0] == "UP" and ds.partner[-1] == "LP"
    half = dark_state_splitting(fx.es, c.replace(g=0.0005))
    both = ok & ~half.excluded
    assert np.allclose(ds.numeric[both] / half.numeric[both], 4.0, rtol=0.02)


@pytest.mark.parametrize("g", [0.002, 0.01])
def test_dark_state_is_photon_free_yet_correlated(r6g, g):
    es = r6g.es
    c = CavityParams(r6g.omega_vert, g, n_max=1)
    lv = vibrational_levels(es, "g", n=2)
    a = rms_amplitude(es.params.M, lv.energies[1] - lv.energies[0])
    R0 = surface_minimum(es.R, es.E_g)[0]
    # one RMS amplitude around the point where both molecules are resonant with the cavity
    box = Grid1D(R0 - a, R0 + a, 21)
    pes = coupled_pes_two(es, es, c, box, box)
    assert pes.photon_weight["DS"].max() < 0.05
    assert pes.photon_weight["LP"].min() > 0.25
    assert abs(fit_two_mol_surfaces(es, c, labels=("DS",))["DS"].ratio) > 0.005


def test_two_mol_basis_bijection():
    b = TwoMolBasis(4, 2)
    qn = b.quantum_numbers()
    assert len({tuple(q) for q in qn}) == b.dim == 48
    for i in (0, 17, 47):
        assert b.index(*b.state(i)) == i
    with pytest.raises(ParameterError):
        b.index(4, 0, 0)


def test_exact_two_at_zero_coupling(anthracene):
    p = anthracene.params
    grids = default_grids(p, x_spacing=0.25, points_per_width=2.5)
    w = anthracene.omega_vert
    sol = solve_exact_two(p, p, CavityParams(w, 0.0, n_max=2), grids, k_per_mol=6, k=4)
    even = solve_exact_molecule(p, *grids, k=3, parity="even").energies
    odd = solve_exact_molecule(p, *grids, k=3, parity="odd").energies
    assert np.isclose(sol.even.energies[0], 2 * even[0], atol=1e-10)
    first_odd = min(even[0] + odd[0], 2 * even[0] + w)
    assert np.isclose(sol.odd.energies[0], first_odd, atol=1e-10)
