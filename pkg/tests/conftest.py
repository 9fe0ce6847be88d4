from __future__ import annotations

import numpy as np
import pytest

from gibbslab.geometry import make_grid
from gibbslab.pairs import LogPairCurve

CUBE_ROOTS = ("1", "-0.5+0.8660254037844386j", "-0.5-0.8660254037844386j")


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def small_grid():
    return make_grid(24)


@pytest.fixture(scope="session")
def triple_half() -> LogPairCurve:
    """(1/2, 1/2, 1/2) on the cube roots of unity."""
    return LogPairCurve.from_chart(CUBE_ROOTS, ["1/2", "1/2", "1/2"])


@pytest.fixture(scope="session")
def bare() -> LogPairCurve:
    return LogPairCurve.bare()


@pytest.fixture(scope="session")
def cube_roots() -> tuple[str, ...]:
    return CUBE_ROOTS
