import numpy as np
import pytest

from pcsynth.graph import LabeledGraph, debruijn
from pcsynth.synthesis import Certificate, Kind


def single_node_cert(P, K, M=1, gamma=1.0):
    g = debruijn(M, 0)
    return Certificate(g, Kind.ROBUST, (np.asarray(P, float),), (np.asarray(K, float),), gamma)


def two_node_cert(P1, P2, K=None):
    g = LabeledGraph(1, ("a", "b"), ((0, 1, 1), (1, 0, 1)))
    n = len(P1)
    K = np.zeros((1, n)) if K is None else K
    return Certificate(g, Kind.ROBUST, (np.asarray(P1, float), np.asarray(P2, float)), (K, K))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
