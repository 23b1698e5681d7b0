import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


def random_cloud(rng, n=1000, scale=10.0):
    from lidargrid import PointCloud

    xyz = rng.uniform(-scale, scale, size=(n, 3)).astype(np.float32).astype(float)
    intensity = rng.uniform(0, 1, size=n).astype(np.float32).astype(float)
    return PointCloud(xyz, intensity)
