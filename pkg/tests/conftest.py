import numpy as np
import pytest

import floquet_sep as fs


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def mesh41():
    return fs.build_mesh(1, 1.0, 41)


@pytest.fixture(scope="session")
def op_neumann(mesh41):
    return fs.build_operator(mesh41, 1.0, 0.0)


@pytest.fixture(scope="session")
def op_robin(mesh41):
    return fs.build_operator(mesh41, 1.0, (1.0, 1.0))


@pytest.fixture(scope="session")
def op_slow(mesh41):
    # slow diffusion keeps the per-unit contraction factor resolvable
    return fs.build_operator(mesh41, 0.1, 0.0)


@pytest.fixture(scope="session")
def field_zero(mesh41):
    return fs.field_from_profiles(mesh41, "constant")


@pytest.fixture(scope="session")
def field_periodic(mesh41):
    return fs.field_from_profiles(
        mesh41,
        "time-periodic",
        offset=fs.Profile("const", 0.0),
        modes=[(1.0, fs.Profile("cos-kx", 1.0, k=1))],
    )


@pytest.fixture(scope="session")
def prop_heat(op_neumann, field_zero):
    return fs.Propagator(op_neumann, field_zero, fs.PropagatorConfig(dt=1e-2))


@pytest.fixture(scope="session")
def prop_periodic(op_slow, field_periodic):
    return fs.Propagator(op_slow, field_periodic, fs.PropagatorConfig(dt=1e-2))


@pytest.fixture(scope="session")
def periodic_fiber(prop_periodic, field_periodic):
    return fs.principal_fiber(prop_periodic, field_periodic.reference_point())
