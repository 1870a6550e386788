import numpy as np
import pytest

from etdm.image import Frame


def quantized(rng, shape):
    """Random [0,1] values on the 8-bit k/255 grid, float32."""
    k = rng.integers(0, 256, shape).astype(np.float32)
    return k / np.float32(255.0)


def quantized_frame(rng, shape, tier):
    return Frame(quantized(rng, shape), tier)


@pytest.fixture
def rng():
    return np.random.default_rng(20240901)
