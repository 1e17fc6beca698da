import numpy as np
import pytest

import backheat as bh


def random_field(grid, rng) -> bh.StateField:
    return bh.StateField(grid, rng.standard_normal(grid.n_dofs))


def interval_setup(nx=8, ell=1.0, T=0.02, nt=50, d=1.0, a=None, b=None):
    grid = bh.build_grid_1d(ell, nx)
    gen = bh.assemble_1d(grid, d=d, a=a, b=b)
    stepper = bh.TimeStepper(T=T, nt=nt)
    return grid, gen, stepper


def disk_setup(nr=6, ntheta=8, T=0.01, nt=40, d=1.0, gamma=1.0, a=None, b=None):
    grid = bh.build_polar_grid(nr, ntheta)
    gen = bh.assemble_2d(grid, d=d, gamma=gamma, a=a, b=b)
    stepper = bh.TimeStepper(T=T, nt=nt)
    return grid, gen, stepper


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def interval_small():
    return interval_setup()


@pytest.fixture
def disk_small():
    return disk_setup()
