import itertools

import pytest
from hypothesis import settings, strategies as st

from npges.graphs import Dag

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


@st.composite
def dags(draw, min_d=1, max_d=6):
    """Random DAGs: a random vertex order, then any subset of forward pairs."""
    d = draw(st.integers(min_d, max_d))
    order = draw(st.permutations(range(d)))
    pairs = [(order[a], order[b]) for a, b in itertools.combinations(range(d), 2)]
    keep = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Dag.from_edges(d, [p for p, k in zip(pairs, keep) if k])


# -- acceptance summary ------------------------------------------------------

_RESULTS: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or (rep.when == "setup" and rep.outcome != "passed"):
        detail = "; ".join(str(v) for k, v in item.user_properties if k == "detail")
        _RESULTS[number] = (title, "PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        title, verdict, detail = _RESULTS[number]
        line = f"criterion {number} {verdict}: {title}"
        if detail:
            line += f" [{detail}]"
        terminalreporter.write_line(line)
