"""One molecule in a lossless single-mode cavity.

The cavity is tuned to the bare absorption maximum. For each coupling g we
compute the absorption spectrum twice: once from the exact grid Hamiltonian
(electron, nucleus and photon all quantised) and once from nuclear motion on
the Born-Oppenheimer polariton surfaces. Their overlap tells how well the
adiabatic picture holds; the peak splitting is compared with 2 g mu_eg.
"""

import numpy as np

from polarmol.cavity import (CavityParams, boa_absorption_single, coupled_pes_single, exact_absorption_single,
                             zero_detuning_omega)
from polarmol.errors import NotStronglyCoupledError
from polarmol.molecule import bare_absorption, build_bo_structure, default_grids, load_fixture
from polarmol.nonbo import crossing_point
from polarmol.spectra import default_omega_grid, rabi_splitting, spectral_overlap
from polarmol.units import au_to_ev

for name, g_list in (("r6g_like", (0.001, 0.002, 0.004)), ("anthracene_like", (0.002, 0.004, 0.008, 0.016))):
    p = load_fixture(name)
    grids = default_grids(p)
    es = build_bo_structure(p, *grids)
    omega_c = zero_detuning_omega(bare_absorption(es))
    omega = default_omega_grid(au_to_ev(omega_c))
    # the dipole that matters is the one where the photon crosses the excited surface
    Rc = crossing_point(es, omega_c)
    mu_c = abs(es.dipoles_at(Rc)[1, 0])
    print(f"\n{name}: omega_c = {au_to_ev(omega_c):.4f} eV, crossing at R = {Rc:.4f} bohr, mu_eg = {mu_c:.3f}")
    print("     g     overlap   splitting (eV)   2 g mu (eV)")
    for g in g_list:
        c = CavityParams(omega_c, g)
        exact = exact_absorption_single(p, c, grids, omega_ev=omega)
        boa = boa_absorption_single(es, c, omega_ev=omega)
        try:
            split = f"{rabi_splitting(exact):.4f}"
        except NotStronglyCoupledError:
            split = "unresolved"
        print(f"  {g:.3f}    {spectral_overlap(boa, exact):.4f}    {split:>10}      {au_to_ev(2 * g * mu_c):.4f}")

# The polariton surfaces themselves: the lower one softens and shifts near the crossing.
c = CavityParams(omega_c, 0.008, n_max=1)
pes = coupled_pes_single(es, c)
i = int(np.argmin(np.abs(es.R - Rc)))
print(f"\nanthracene_like, g = 0.008, at the crossing: LP {pes['LP'][i]:.6f} Ha, UP {pes['UP'][i]:.6f} Ha, "
      f"gap {au_to_ev(pes['UP'][i] - pes['LP'][i]):.4f} eV, LP exciton weight {pes.exciton_weight['LP'][i]:.3f}")
