import math
import sys

import numpy as np
import pytest

from interleave.graph import MapperGraph
from interleave.grid import Grid

# two branches of a loop between levels 6 and 12; "15" and "22" sit at level 9
LOOP_VERTICES = [("8", 6), ("a7", 7), ("b7", 7), ("a8", 8), ("b8", 8), ("15", 9), ("22", 9),
                 ("3", 10), ("23", 10), ("a11", 11), ("b11", 11), ("1", 12)]
LOOP_EDGES = [("8-a7", "8", "a7"), ("8-b7", "8", "b7"), ("a7-a8", "a7", "a8"), ("b7-b8", "b7", "b8"),
              ("a8-15", "a8", "15"), ("b8-22", "b8", "22"), ("15-3", "15", "3"), ("22-23", "22", "23"),
              ("3-a11", "3", "a11"), ("23-b11", "23", "b11"), ("a11-1", "a11", "1"),
              ("b11-1", "b11", "1")]


def loop_graph() -> MapperGraph:
    return MapperGraph(Grid(14), LOOP_VERTICES, LOOP_EDGES)


@pytest.fixture
def loop():
    return loop_graph()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary -------------------------------------------------------

_CRITERIA = {}


def pytest_runtest_logreport(report):
    crit = dict(report.user_properties).get("criterion")
    if crit is None:
        return
    if report.when == "call" or report.outcome in ("failed", "skipped"):
        prev = _CRITERIA.get(crit)
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        if prev in (None, "PASS") or status == "FAIL":
            _CRITERIA[crit] = status


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for crit in sorted(_CRITERIA):
        terminalreporter.write_line(f"criterion {crit}: {_CRITERIA[crit]}")
