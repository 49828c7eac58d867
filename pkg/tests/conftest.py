import numpy as np
import pytest

from wetlandseg.nn import available_backends


@pytest.fixture(params=available_backends())
def backend(request):
    """Run a test once per available convolution implementation."""
    return request.param


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
