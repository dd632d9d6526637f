import sys
from pathlib import Path

import numpy as np
import pytest

from fagstyle.preshape import PreShape

sys.path.insert(0, str(Path(__file__).parent))


def centered_unit(k, rng):
    a = rng.normal(size=(2, k))
    a -= a.mean(axis=1, keepdims=True)
    return a / np.linalg.norm(a)


def orthonormal_pair(k, rng):
    """Two orthonormal points of the centered subspace (distance pi/2)."""
    a = centered_unit(k, rng)
    b = rng.normal(size=(2, k))
    b -= b.mean(axis=1, keepdims=True)
    b -= a * np.sum(a * b)
    b /= np.linalg.norm(b)
    return PreShape(a), PreShape(b)


def pair_at_distance(k, d, rng):
    """Two pre-shapes exactly d radians apart."""
    u, v = orthonormal_pair(k, rng)
    b = np.cos(d) * u.landmarks + np.sin(d) * v.landmarks
    return u, PreShape(b / np.linalg.norm(b))


def random_preshape(k, rng):
    return PreShape(centered_unit(k, rng))


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
