import numpy as np
import pytest
from hypothesis import HealthCheck, settings, strategies as st

from kadsmodes.errors import Inadmissible
from kadsmodes.geometry import BlackHoleParams, derive_geometry

settings.register_profile("kads", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow, HealthCheck.filter_too_much])
settings.load_profile("kads")


def admissible_or_none(M, a, k):
    try:
        p = BlackHoleParams(M, a, k)
        return p, derive_geometry(p)
    except Inadmissible:
        return None


def random_admissible(rng, n, a_positive=False):
    """n admissible (params, geometry) pairs drawn log-uniformly in M and k."""
    out = []
    while len(out) < n:
        M = float(np.exp(rng.uniform(np.log(0.02), np.log(3.0))))
        k = float(np.exp(rng.uniform(np.log(0.3), np.log(3.0))))
        a = float(rng.uniform(1e-3 if a_positive else 0.0, 0.95 / k))
        got = admissible_or_none(M, a, k)
        if got is not None:
            out.append(got)
    return out


@st.composite
def admissible_params(draw, a_positive=False):
    M = draw(st.floats(0.02, 3.0))
    k = draw(st.floats(0.3, 3.0))
    frac = draw(st.floats(0.001 if a_positive else 0.0, 0.95))
    got = admissible_or_none(M, frac / k, k)
    from hypothesis import assume
    assume(got is not None)
    return got


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line for an acceptance criterion, then assert it."""
    def record(n: int, ok: bool, detail: str):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}"
        ACCEPTANCE_LINES[n] = line
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
