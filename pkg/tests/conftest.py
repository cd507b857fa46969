import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

sys.path.insert(0, os.path.dirname(__file__))

from bmmpp import EXAMPLE_K2, EXAMPLE_K4, BmmppModel  # noqa: E402

settings.register_profile(
    "default", max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")

rate = st.floats(0.05, 10.0, allow_nan=False, allow_infinity=False)
emit = st.floats(0.0, 10.0, allow_nan=False, allow_infinity=False)


@st.composite
def models(draw, k_min=1, k_max=4, min_event_rate=0.05):
    """Valid irreducible BMMPP_2(K) with diagonal closing the rows."""
    K = draw(st.integers(k_min, k_max))
    y, r = draw(rate), draw(rate)
    dk = np.array([[draw(emit), draw(emit)] for _ in range(K)])
    # keep both phases emitting so every stationary quantity is defined
    dk[-1] = np.maximum(dk[-1], min_event_rate)
    rates = dk.sum(axis=0)
    d0 = np.array([[-y - rates[0], y], [r, -r - rates[1]]])
    return BmmppModel(d0, dk)


@pytest.fixture
def k2():
    return EXAMPLE_K2


@pytest.fixture
def k4():
    return EXAMPLE_K4


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines, key=lambda k: int(k[1:])):
        terminalreporter.write_line(lines[key])
