import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from edgegas.cdkernel import WeightSpec, cd_kernel  # noqa: E402
from edgegas.equilibrium import (DeviationProfile, SmoothField,  # noqa: E402
                                 equilibrium_measure, fixed_point)
from edgegas.fields import ConfiningField, InteractionSpec  # noqa: E402

SQRT2 = math.sqrt(2.0)


@pytest.fixture(scope="session")
def quadratic():
    return ConfiningField((0.0, 0.0, 1.0))


@pytest.fixture(scope="session")
def quad_solution(quadratic):
    return equilibrium_measure(SmoothField(quadratic, 3.0, None))


@pytest.fixture(scope="session")
def quad_profile(quad_solution):
    return DeviationProfile.from_solution(quad_solution)


@pytest.fixture(scope="session")
def attractive():
    """h = -0.1 exp(-t^2/2), the weakly attractive (negative-definite) interaction."""
    return InteractionSpec.gaussian(-0.1, 1.0)


@pytest.fixture(scope="session")
def attractive_fp(quadratic, attractive):
    return fixed_point(quadratic, attractive, L=3.0)


@pytest.fixture(scope="session")
def kernels(quadratic):
    cache = {}

    def get(N, L=3.0):
        if (N, L) not in cache:
            cache[(N, L)] = cd_kernel(WeightSpec(N, quadratic, L))
        return cache[(N, L)]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
