import numpy as np
import pytest

from chnsopt import (
    FlowState,
    Kernel,
    ModelParams,
    Potential,
    SolverConfig,
    TorusGrid,
)
from chnsopt import synth

TWO_PI = 2.0 * np.pi


@pytest.fixture(scope="session")
def g16():
    return TorusGrid(16, 16, TWO_PI, TWO_PI)


@pytest.fixture(scope="session")
def g32():
    return TorusGrid(32, 32, TWO_PI, TWO_PI)


@pytest.fixture(scope="session")
def kernel16(g16):
    return Kernel("gaussian", 0.5, 5.0, g16)


@pytest.fixture(scope="session")
def kernel32(g32):
    return Kernel("gaussian", 0.5, 5.0, g32)


@pytest.fixture(scope="session")
def double_well():
    return Potential.double_well()


@pytest.fixture(scope="session")
def params16(g16, kernel16, double_well):
    return ModelParams(g16, kernel16, double_well)


@pytest.fixture(scope="session")
def params32(g32, kernel32, double_well):
    return ModelParams(g32, kernel32, double_well)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


@pytest.fixture()
def smooth_state32(g32):
    u = synth.taylor_green(g32, 0.5)
    phi = synth.sine_scalar(g32, (1, 1), 0.1, mean=0.2)
    return FlowState(u, phi, 0.0)


@pytest.fixture()
def smooth_state16(g16):
    u = synth.taylor_green(g16, 0.5)
    phi = synth.sine_scalar(g16, (1, 1), 0.1, mean=0.2)
    return FlowState(u, phi, 0.0)


def short_config(dt=1e-3, T=0.01, nu=0.1, **kw):
    return SolverConfig(dt=dt, T=T, nu=nu, **kw)
