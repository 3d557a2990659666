import math

import numpy as np
import pytest

from qrsma.channel import draw_channels, draw_geometry
from qrsma.sysmodel import QuantizationProfile, SystemConfig


def random_instance(rng, n, k, bits=None, kappa=0.4, common=True):
    """A random small scenario: channels, profile and a unit direction."""
    if bits is None:
        bits = rng.choice([2, 4, 6, 8, 12, 16], size=n)
    cfg = SystemConfig(
        n_antennas=n, n_users=k, bits=tuple(int(b) for b in bits), kappa=kappa,
    )
    ch = draw_channels(draw_geometry(cfg, rng), cfg, rng)
    s = k + 1 if common else k
    W = rng.standard_normal((n, s)) + 1j * rng.standard_normal((n, s))
    W /= np.linalg.norm(W)
    return cfg, ch, W


def unit_direction(rng, n, s):
    W = rng.standard_normal((n, s)) + 1j * rng.standard_normal((n, s))
    return W / np.linalg.norm(W)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
