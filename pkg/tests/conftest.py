"""Test fixtures for trade_tails."""

import json

import numpy as np
import pytest

from trade_tails.process import (
    GaussianJump,
    ModulatedModel,
    RegimeExponent,
    brownian_model,
    regime_switching_model,
)
from trade_tails.timing import IIM, ITM

# p with -log(1 - p) = 1/2, so standard Brownian motion has alpha = 1
HALF_LEVEL_P = 1.0 - np.exp(-0.5)


@pytest.fixture
def brownian():
    """Standard Brownian motion, a single regime."""
    return brownian_model(drift=0.0, variance=1.0)


@pytest.fixture
def two_regime_model():
    """Symmetric two-regime switching Brownian model."""
    return regime_switching_model(
        regimes=[
            RegimeExponent(drift=-0.1, variance=1.0),
            RegimeExponent(drift=0.1, variance=0.25),
        ],
        generator=[[-1.0, 1.0], [1.0, -1.0]],
        initial=[0.5, 0.5],
    )


@pytest.fixture
def scalar_iim():
    """Geometric trade index with -log(1 - p) = 1/2."""
    return IIM(probabilities=(HALF_LEVEL_P,))


@pytest.fixture
def scalar_itm():
    """Exponential trade time with rate 1/2."""
    return ITM(arrival_rates=(0.5,))


@pytest.fixture
def two_regime_r_d():
    """Closed-form dominant eigenvalue of A(z) for the two-regime model."""

    def r_d(z):
        a = -1.0 - 0.1 * z + 0.5 * z * z
        d = -1.0 + 0.1 * z + 0.125 * z * z
        return 0.5 * (a + d) + np.sqrt(0.25 * (a - d) ** 2 + 1.0)

    return r_d


@pytest.fixture
def config_document():
    """Minimal run configuration: Brownian motion with geometric trade index."""
    return {
        "model": {
            "regimes": [{"drift": 0.0, "variance": 1.0}],
            "generator": [[0.0]],
        },
        "timing": {"kind": "iim", "probabilities": [float(HALF_LEVEL_P)]},
        "simulation": {"count": 20000, "seed": 7, "streams": 2},
    }


@pytest.fixture
def config_file(tmp_path, config_document):
    """The minimal configuration written to a JSON file."""
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config_document))
    return path


def random_generator(rng, size):
    """Dense irreducible generator with off-diagonal rates in [0.1, 2]."""
    G = rng.uniform(0.1, 2.0, size=(size, size))
    np.fill_diagonal(G, 0.0)
    np.fill_diagonal(G, -G.sum(axis=1))
    return G


@pytest.fixture
def random_model():
    """Factory for seeded switching models with diffusion and Gaussian jumps."""

    def build(seed, size):
        rng = np.random.default_rng(seed)
        regimes = tuple(
            RegimeExponent(
                drift=rng.normal(0.0, 0.2),
                variance=rng.uniform(0.2, 1.5),
                jump_intensity=rng.uniform(0.0, 1.0),
                jump=GaussianJump(rng.normal(0.0, 0.1), rng.uniform(0.01, 0.05)),
            )
            for _ in range(size)
        )
        return ModulatedModel(
            regimes=regimes,
            generator=random_generator(rng, size),
            initial=rng.dirichlet(np.ones(size)),
        )

    return build
