"""A model molecule without a cavity.

One electron and two fixed-charge nuclei moving in one dimension. We build the
Born-Oppenheimer surfaces on a grid, quantise the nuclear motion on each one and
check the result against a brute-force solve of the full (x, R) problem.
"""

import numpy as np

from polarmol.molecule import (bare_absorption, build_bo_structure, default_grids, load_fixture,
                               measure_observables, solve_exact_molecule, vibrational_levels)
from polarmol.spectra import peak_position

p = load_fixture("anthracene_like")
grid_x, grid_R = default_grids(p)
print(f"parameters: {p}")
print(f"electron grid {grid_x.n_points} points at {grid_x.spacing:.3f} bohr, "
      f"nuclear grid {grid_R.n_points} points from {grid_R.min:.3f} to {grid_R.max:.3f} bohr")

# Two lowest electronic states at every R, plus the transition dipole between them.
es = build_bo_structure(p, grid_x, grid_R)
i = len(es.R) // 2
print(f"at R = {es.R[i]:.3f}: E_g = {es.E_g[i]:.6f} Ha, E_e = {es.E_e[i]:.6f} Ha, "
      f"mu_eg = {es.dipoles[i, 1, 0]:+.4f} a.u.")

# Vibrational levels on the ground surface versus the exact grid eigenvalues.
boa = vibrational_levels(es, "g", n=6).energies
exact = solve_exact_molecule(p, grid_x, grid_R, k=6).energies
print("\n  k   BO composed (Ha)   exact grid (Ha)   rel. difference")
for k, (a, b) in enumerate(zip(boa, exact)):
    print(f"{k:3d}   {a:.10f}    {b:.10f}    {abs(b / a - 1):.1e}")

obs = measure_observables(es)
print(f"\nvibrational quantum {obs.omega_vib * 1e3:.1f} meV, surface displacement {obs.delta_R:.4f} bohr")
print(f"vertical gap {obs.vertical_gap:.4f} eV, transition dipole at R_e {obs.dipole_at_Re:.3f} a.u.")

# Franck-Condon progression: Lorentzian lines at each vibronic transition.
spectrum = bare_absorption(es)
peak = peak_position(spectrum)
print(f"absorption maximum {peak:.4f} eV, {1e3 * (obs.vertical_gap - peak):.1f} meV below the vertical gap")
print(f"spectrum sampled on {len(spectrum.omega)} points, strongest sample at {spectrum.omega[np.argmax(spectrum.sigma)]:.4f} eV")
