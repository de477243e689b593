import numpy as np
import pytest
from hypothesis import strategies as st

from kcycle.graph import WeightedDigraph


def ring(n, w=1.0):
    return WeightedDigraph(n, ((i, (i + 1) % n, w) for i in range(n)))


def complete(n, w=1.0):
    return WeightedDigraph(n, ((u, v, w) for u in range(n) for v in range(n) if u != v))


@st.composite
def digraphs(draw, min_n=1, max_n=8):
    """Random digraph without self-loops; weights in (0.01, 100)."""
    n = draw(st.integers(min_n, max_n))
    pairs = [(u, v) for u in range(n) for v in range(n) if u != v]
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True)) if pairs else []
    ws = draw(st.lists(st.floats(0.01, 100.0), min_size=len(chosen), max_size=len(chosen)))
    return WeightedDigraph(n, ((u, v, w) for (u, v), w in zip(chosen, ws)))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# acceptance-criterion reporting: one PASS/FAIL line per criterion at the end of the run

_CRITERIA: dict = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion n")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None or not (rep.when == "call" or rep.failed or rep.skipped):
        return
    n = mark.args[0]
    statuses, details = _CRITERIA.setdefault(n, ([], []))
    statuses.append("SKIP" if rep.skipped else ("PASS" if rep.passed else "FAIL"))
    details.extend(v for k, v in rep.user_properties if k == "detail")


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        statuses, details = _CRITERIA[n]
        status = next((s for s in ("FAIL", "SKIP") if s in statuses), "PASS")
        line = f"CRITERION {n}: {status}"
        if details:
            line += "  (" + "; ".join(details) + ")"
        terminalreporter.write_line(line)
