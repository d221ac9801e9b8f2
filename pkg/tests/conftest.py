# tests/conftest.py
"""Shared test fixtures for the ratgreedy test suite."""

from __future__ import annotations

import logging
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
import pytest

from ratgreedy.analysis import GridSpec
from ratgreedy.domain import (
    CustomTarget,
    Interval,
    InversePower,
    NormalizedPoleDictionary,
    PlainPoleDictionary,
    PoleWindow,
    TwoTermFrac,
)
from ratgreedy.greedy import PsoConfig
from ratgreedy.operators import SpdMatrix
from ratgreedy.settings import get_settings

# Intervals used throughout the examples
FIT_EXAMPLE1 = Interval(lo=1e-8, hi=1.0)
EVAL_EXAMPLE1 = Interval(lo=1e-6, hi=1.0)
EXAMPLE2_ON = Interval(lo=1e-6, hi=1.0)
UNIT = Interval(lo=0.0, hi=1.0)

# Small numerics so unit tests stay fast
FAST_PSO = PsoConfig(swarm_size=16, iterations=40, seed=0)
FAST_GRID = GridSpec(n_points=400, refine_iters=30, n_peaks=6)


def random_spd(n: int, rng: np.random.Generator, cond: float = 1e3) -> SpdMatrix:
    """Random SPD matrix with eigenvalues log-spaced on [1, cond]."""
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    eigvals = np.geomspace(1.0, cond, n)
    a = (q * eigvals) @ q.T
    return SpdMatrix(0.5 * (a + a.T))


@pytest.fixture(scope="session", autouse=True)
def setup_test_environment() -> Iterator[None]:
    """Set up test environment configuration."""
    mp = pytest.MonkeyPatch()
    mp.setenv("LOG_LEVEL", "ERROR")  # Reduce noise in test output
    mp.delenv("DEBUG", raising=False)
    get_settings.cache_clear()
    yield
    mp.undo()
    get_settings.cache_clear()


@pytest.fixture(autouse=True)
def fresh_settings() -> Iterator[None]:
    """Each test sees settings built from its own environment."""
    get_settings.cache_clear()
    yield
    get_settings.cache_clear()


@pytest.fixture
def output_dir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """Results directory under tmp_path, also set as the OUTPUT_DIR default."""
    out = tmp_path / "results"
    monkeypatch.setenv("OUTPUT_DIR", str(out))
    return out


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(12345)


@pytest.fixture
def fast_pso() -> PsoConfig:
    return FAST_PSO


@pytest.fixture
def fast_grid() -> GridSpec:
    return FAST_GRID


@pytest.fixture
def inv_sqrt() -> InversePower:
    """z^(-1/2), the first example target."""
    return InversePower(alpha=0.5)


@pytest.fixture
def two_term() -> TwoTermFrac:
    """(0.1 z^(1/2) + z^(-1/2))^(-1), the second example target."""
    return TwoTermFrac(s=0.1, t=1.0, alpha=0.5, beta=-0.5)


@pytest.fixture
def single_pole() -> CustomTarget:
    """1/(z + 0.5), a target the pole dictionaries represent exactly."""
    return CustomTarget(evaluator=lambda z: 1.0 / (np.asarray(z, dtype=float) + 0.5), label="1/(z+0.5)")


@pytest.fixture
def normalized_poles() -> NormalizedPoleDictionary:
    return NormalizedPoleDictionary(window=PoleWindow())


@pytest.fixture
def plain_poles() -> PlainPoleDictionary:
    return PlainPoleDictionary(window=PoleWindow())


@pytest.fixture
def spd_factory(rng: np.random.Generator) -> Callable[..., SpdMatrix]:
    def make(n: int = 20, cond: float = 1e3) -> SpdMatrix:
        return random_spd(n, rng, cond)

    return make


CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture
def config_dir() -> Path:
    return CONFIG_DIR


@pytest.fixture(autouse=True)
def detach_cli_log_handlers() -> Iterator[None]:
    """The CLI installs handlers on captured streams; drop them after each test."""
    yield
    logging.getLogger("ratgreedy").handlers.clear()
