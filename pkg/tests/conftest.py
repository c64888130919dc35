import hypothesis
import numpy as np
import pytest

from commutesim import KernelSpec, ModelParams, build_grid

hypothesis.settings.register_profile(
    "default", max_examples=25, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.register_profile("thorough", max_examples=200, deadline=None)
hypothesis.settings.load_profile("default")

np.seterr(all="raise", under="ignore")


@pytest.fixture(scope="session")
def unit_grid():
    return build_grid((0.0, 1.0, 0.0, 1.0), 16, 16)


@pytest.fixture(scope="session")
def fine_grid():
    return build_grid((0.0, 1.0, 0.0, 1.0), 50, 50)


@pytest.fixture(scope="session")
def kernel():
    return KernelSpec(0.05)


@pytest.fixture(scope="session")
def table1_params():
    # gamma, alpha, chi from the standard day fractions 12/24, 2/24, 10/24.
    return ModelParams(gamma=2.0, alpha=12.0, chi=2.4, eps=1.0, sigma=0.05)
