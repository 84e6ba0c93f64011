from __future__ import annotations

import numpy as np
import pytest

from dppdml.pairgraph import PairGraph, PairwiseDatum, build_graph

#: Pass/fail lines registered by the acceptance suite, echoed after the run.
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def graph_from_edges(edges, relation="transitive", dim=1, n_nodes=None) -> PairGraph:
    """PairGraph over integer node ids with placeholder features."""
    pairs = [
        PairwiseDatum(a, b, np.full(dim, 1.0), 0) for a, b in edges
    ]
    extra = range(n_nodes) if n_nodes is not None else ()
    return build_graph(pairs, relation, extra_nodes=extra)


@pytest.fixture
def fig5_graph() -> PairGraph:
    """The worked example graph: a direct edge, two longer routes via a hub,
    and a triangle hanging off the source."""
    edges = [
        ("s", "t"), ("s", "c"), ("c", "e"), ("e", "t"),
        ("c", "u"), ("u", "t"), ("s", "a"), ("a", "b"), ("b", "s"),
    ]
    return graph_from_edges(edges)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
