"""What the counter-rotating terms do to the ground state.

Without the rotating-wave approximation the cavity vacuum dresses the
molecular ground state with virtual photons. The energy drops as g^2, the
photon number grows as g^2 and the bond length moves by an amount that also
scales as g^2. With two molecules at the same collective Rabi splitting each
bond shifts half as much.
"""

import numpy as np

from polarmol.cavity import (CavityParams, ground_photon_number, ground_state_pes_usc, solve_exact_cavity,
                             zero_detuning_omega)
from polarmol.molecule import bare_absorption, build_bo_structure, default_grids, load_fixture
from polarmol.multimol import collective_scaling_report, loglog_slope
from polarmol.units import au_to_ev

p = load_fixture("anthracene_like")
grids = default_grids(p)
es = build_bo_structure(p, *grids)
omega_c = zero_detuning_omega(bare_absorption(es))

bare = solve_exact_cavity(p, CavityParams(omega_c, 0.0), grids, k=1).energies[0]
g_list = np.array([0.002, 0.004, 0.008, 0.016])
photons = []
print("exact grid ground state (electron, nucleus and photon quantised):")
print("     g      E_0 - E_bare (meV)   <a+a>")
for g in g_list:
    sol = solve_exact_cavity(p, CavityParams(omega_c, g), grids, k=1)
    photons.append(ground_photon_number(sol))
    print(f"  {g:.3f}      {1e3 * au_to_ev(sol.energies[0] - bare):9.4f}        {photons[-1]:.3e}")
print(f"photon number log-log slope {loglog_slope(g_list, photons):.3f}")

# Ground polariton surface with a converged Fock space; second-order theory for comparison.
usc = ground_state_pes_usc(es, CavityParams(omega_c, 0.016))
i = int(np.argmin(usc.bare))
print(f"\nat R_e, g = 0.016: exact shift {au_to_ev(usc.exact[i] - usc.bare[i]) * 1e3:.3f} meV, "
      f"second order {au_to_ev(usc.perturbative[i] - usc.bare[i]) * 1e3:.3f} meV, Fock cutoff {usc.n_max}")

rep = collective_scaling_report(es, omega_c, g_list)
print("\n  N     g      dE0 (meV)   dR0 (mA)")
for row in rep["rows"]:
    print(f"  {row['N']}   {row['g']:.4f}   {row['delta_E0_meV']:9.4f}   {row['delta_R0_mA']:8.4f}")
s = rep["summary"]
print(f"dR0 slope vs g (N=1): {s['slope_delta_R0_vs_g_N1']:.3f}")
print("dR0(N=2)/dR0(N=1) at equal Rabi splitting:", np.round(s["ratio_delta_R0_N2_over_N1_same_rabi"], 3))
print("dE0(N=2)/dE0(N=1) at equal Rabi splitting:", np.round(s["ratio_delta_E0_N2_over_N1_same_rabi"], 3))
