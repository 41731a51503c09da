import itertools

import numpy as np
import pytest

from grds.graph import Graph

_ACCEPTANCE = []


def random_connected_graph(rng, n, p=0.3, bipartite=False):
    """Random spanning tree plus extra edges; bipartite keeps a 2-colouring."""
    order = rng.permutation(np.arange(1, n + 1))
    side = {int(v): k % 2 for k, v in enumerate(order)} if bipartite else None
    edges = set()
    for k in range(1, n):
        i = int(order[k])
        if bipartite:
            # attach to an earlier node of the opposite colour
            cands = [int(v) for v in order[:k] if side[int(v)] != side[i]]
            j = int(rng.choice(cands))
        else:
            j = int(order[rng.integers(k)])
        edges.add((min(i, j), max(i, j)))
    for i, j in itertools.combinations(range(1, n + 1), 2):
        if bipartite and side[i] == side[j]:
            continue
        if rng.random() < p:
            edges.add((i, j))
    return Graph(n, frozenset(edges), f"random({n})")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def acceptance():
    def record(number, ok, detail=""):
        _ACCEPTANCE.append((number, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, ok, detail in sorted(_ACCEPTANCE, key=lambda t: t[0]):
        terminalreporter.write_line(f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}")
