"""Unit conversions. Everything inside the package is in atomic units."""

HARTREE_EV = 27.211386
BOHR_ANGSTROM = 0.529177
BOHR_MILLIANGSTROM = BOHR_ANGSTROM * 1000.0
SPEED_OF_LIGHT = 137.036


def ev_to_au(e):
    return e / HARTREE_EV


def au_to_ev(e):
    return e * HARTREE_EV


def bohr_to_mangstrom(r):
    return r * BOHR_MILLIANGSTROM
