import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

from rpkit.kernels import available_backends, load_backend  # noqa: E402


@pytest.fixture(params=available_backends())
def backend(request):
    """Each available kernel module, so both paths are exercised."""
    return load_backend(request.param)


@pytest.fixture
def nprng():
    return np.random.default_rng(20261015)


settings.register_profile("rpkit", derandomize=True, deadline=None)
settings.load_profile("rpkit")
