import numpy as np
import pytest

from polarmol.cavity import vertical_gap_omega, zero_detuning_omega
from polarmol.molecule import bare_absorption, build_bo_structure, default_grids, load_fixture


class Fixture:
    """A shipped molecule with its default grids, BO structure and resonant cavity frequencies."""

    def __init__(self, name):
        self.name = name
        self.params = load_fixture(name)
        self.grid_x, self.grid_R = default_grids(self.params)
        self.es = build_bo_structure(self.params, self.grid_x, self.grid_R)
        self.bare = bare_absorption(self.es)
        self.omega_abs = zero_detuning_omega(self.bare)
        self.omega_vert = vertical_gap_omega(self.es)

    @property
    def grids(self):
        return self.grid_x, self.grid_R


@pytest.fixture(scope="session")
def anthracene():
    return Fixture("anthracene_like")


@pytest.fixture(scope="session")
def r6g():
    return Fixture("r6g_like")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
