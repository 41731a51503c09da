"""
Undirected graph model for sensor networks.

Nodes are numbered 1..n at the public surface; every dense matrix uses
0-based row ``i - 1`` for node ``i``.
"""

from __future__ import annotations

import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np


class GraphError(ValueError):
    """Invalid graph or generator parameters."""


class GenerationError(GraphError):
    """A randomized generator ran out of retries."""


@dataclass(frozen=True)
class DegreeProfile:
    d: np.ndarray
    d_m: int
    d_M: int
    vol: int


@dataclass(frozen=True)
class DenseMatrixBundle:
    A: np.ndarray
    D: np.ndarray
    L: np.ndarray
    NL: np.ndarray


@dataclass(frozen=True, eq=False)
class Graph:
    """Simple undirected graph on nodes ``1..n``.

    Edges are stored once as ``(i, j)`` with ``i < j``.
    """

    n: int
    edges: frozenset = field(default_factory=frozenset)
    name: str = ""

    def __post_init__(self):
        if not isinstance(self.n, (int, np.integer)) or self.n < 2:
            raise GraphError(f"node count must be an integer >= 2, got {self.n!r}")
        canon = set()
        for e in self.edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise GraphError(f"self-loop at node {i}")
            if not (1 <= i <= self.n and 1 <= j <= self.n):
                raise GraphError(f"edge {{{i}, {j}}} references a node outside 1..{self.n}")
            canon.add((min(i, j), max(i, j)))
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "edges", frozenset(canon))

    @classmethod
    def from_edges(cls, n, edges, name=""):
        edges = list(edges)
        seen = set()
        for i, j in edges:
            key = (min(i, j), max(i, j))
            if key in seen:
                raise GraphError(f"duplicate edge {{{i}, {j}}}")
            seen.add(key)
        return cls(n, frozenset(edges), name)

    def __eq__(self, other):
        return isinstance(other, Graph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        label = self.name or "Graph"
        return f"<{label}: n={self.n}, |E|={len(self.edges)}>"

    @property
    def num_edges(self):
        return len(self.edges)

    def sorted_edges(self):
        return sorted(self.edges)

    @cached_property
    def neighbors(self) -> dict[int, tuple[int, ...]]:
        nbrs = {i: [] for i in range(1, self.n + 1)}
        for i, j in self.edges:
            nbrs[i].append(j)
            nbrs[j].append(i)
        return {i: tuple(sorted(v)) for i, v in nbrs.items()}

    def degree_profile(self) -> DegreeProfile:
        d = np.array([len(self.neighbors[i]) for i in range(1, self.n + 1)], dtype=int)
        return DegreeProfile(d=d, d_m=int(d.min()), d_M=int(d.max()), vol=int(d.sum()))

    @property
    def degrees(self) -> np.ndarray:
        return self.degree_profile().d

    def is_regular(self):
        p = self.degree_profile()
        return p.d_m == p.d_M


def matrices(g: Graph) -> DenseMatrixBundle:
    """Adjacency, degree, Laplacian and normalized Laplacian of ``g``.

    Raises
    ------
    GraphError
        If some node is isolated (the normalized Laplacian is undefined).
    """
    n = g.n
    A = np.zeros((n, n), dtype=int)
    for i, j in g.edges:
        A[i - 1, j - 1] = A[j - 1, i - 1] = 1
    d = A.sum(axis=1)
    if (d == 0).any():
        iso = [int(k) + 1 for k in np.flatnonzero(d == 0)]
        raise GraphError(f"isolated node(s) {iso}: normalized Laplacian undefined")
    D = np.diag(d)
    L = D - A
    s = 1.0 / np.sqrt(d)
    NL = s[:, None] * L * s[None, :]
    NL = 0.5 * (NL + NL.T)
    return DenseMatrixBundle(A=A, D=D, L=L, NL=NL)


def is_connected(g: Graph) -> bool:
    seen = {1}
    queue = deque([1])
    while queue:
        i = queue.popleft()
        for j in g.neighbors[i]:
            if j not in seen:
                seen.add(j)
                queue.append(j)
    return len(seen) == g.n


def is_bipartite(g: Graph) -> bool:
    color = {}
    for start in range(1, g.n + 1):
        if start in color:
            continue
        color[start] = 0
        queue = deque([start])
        while queue:
            i = queue.popleft()
            for j in g.neighbors[i]:
                if j not in color:
                    color[j] = 1 - color[i]
                    queue.append(j)
                elif color[j] == color[i]:
                    return False
    return True


# -- generators --------------------------------------------------------------


def complete(n: int) -> Graph:
    _check_n(n)
    return Graph.from_edges(n, itertools.combinations(range(1, n + 1), 2), f"complete({n})")


def path(n: int) -> Graph:
    _check_n(n)
    return Graph.from_edges(n, ((i, i + 1) for i in range(1, n)), f"path({n})")


def cycle(n: int) -> Graph:
    if n < 3:
        raise GraphError("cycle needs n >= 3")
    return circulant(n, (1,))


def circulant(n: int, offsets) -> Graph:
    """Circulant graph: node i joined to i +/- s (mod n) for every offset s."""
    offsets = sorted({int(s) for s in offsets})
    if n < 3:
        raise GraphError("circulant needs n >= 3")
    if not offsets or offsets[0] < 1 or offsets[-1] > n // 2:
        raise GraphError(f"offsets must lie in 1..{n // 2}, got {offsets}")
    edges = set()
    for i in range(n):
        for s in offsets:
            j = (i + s) % n
            edges.add((min(i, j) + 1, max(i, j) + 1))
    label = ",".join(map(str, offsets))
    return Graph(n, frozenset(edges), f"circulant({n},{{{label}}})")


def friendship(k: int) -> Graph:
    """``k`` triangles sharing hub node 1; n = 2k + 1."""
    if k < 1:
        raise GraphError("friendship graph needs k >= 1")
    edges = []
    for t in range(k):
        a, b = 2 + 2 * t, 3 + 2 * t
        edges += [(1, a), (1, b), (a, b)]
    return Graph.from_edges(2 * k + 1, edges, f"friendship({k})")


DEFAULT_BRIDGES = {(6, 7, 9): ((6, 7), (13, 14), (22, 1), (3, 17))}


def clique_bridge(sizes, bridge_edges=None) -> Graph:
    """Disjoint cliques on consecutive node blocks joined by bridge edges.

    With ``sizes=(6, 7, 9)`` and no explicit bridges, the canonical
    22-node small-world instance is returned.
    """
    sizes = tuple(int(s) for s in sizes)
    if not sizes or min(sizes) < 1:
        raise GraphError(f"clique sizes must be positive, got {sizes}")
    if bridge_edges is None:
        if sizes in DEFAULT_BRIDGES:
            bridge_edges = DEFAULT_BRIDGES[sizes]
        else:
            # ring of bridges: last node of each block to first of the next
            starts = np.cumsum((0,) + sizes[:-1]) + 1
            ends = np.cumsum(sizes)
            m = len(sizes)
            ring = {(int(ends[b]), int(starts[(b + 1) % m])) for b in range(m)} if m > 1 else set()
            bridge_edges = sorted({(min(e), max(e)) for e in ring})
    edges = set()
    start = 1
    for s in sizes:
        block = range(start, start + s)
        edges.update(itertools.combinations(block, 2))
        start += s
    n = start - 1
    for i, j in bridge_edges:
        key = (min(i, j), max(i, j))
        if key in edges:
            raise GraphError(f"bridge edge {key} duplicates an existing edge")
        edges.add(key)
    return Graph(n, frozenset(edges), f"clique_bridge({list(sizes)})")


def random_regular(n: int, c: int, seed: int, max_tries: int = 1000) -> Graph:
    """Uniform-ish random ``c``-regular simple graph via the pairing model."""
    if c < 1 or c >= n:
        raise GraphError(f"degree must satisfy 1 <= c < n, got c={c}, n={n}")
    if (n * c) % 2:
        raise GraphError(f"n*c must be even for a regular graph, got n={n}, c={c}")
    rng = np.random.default_rng(seed)
    stubs = np.repeat(np.arange(1, n + 1), c)
    for _ in range(max_tries):
        perm = rng.permutation(stubs).reshape(-1, 2)
        edges = set()
        ok = True
        for i, j in perm:
            i, j = int(i), int(j)
            key = (min(i, j), max(i, j))
            if i == j or key in edges:
                ok = False
                break
            edges.add(key)
        if ok:
            return Graph(n, frozenset(edges), f"random_regular({n},{c})")
    raise GenerationError(f"no simple {c}-regular pairing found in {max_tries} tries")


def ramanujan_candidate(n: int, c: int, seed: int, max_tries: int = 500) -> Graph:
    """First seeded random ``c``-regular graph that is connected, non-bipartite,
    Ramanujan and has normalized-Laplacian midpoint above one."""
    from .spectral import ramanujan_check, spectral_summary

    rng = np.random.default_rng(seed)
    for _ in range(max_tries):
        g = random_regular(n, c, int(rng.integers(2**31)))
        if not is_connected(g) or is_bipartite(g):
            continue
        if ramanujan_check(g) and spectral_summary(g).varsigma_NL > 1:
            return Graph(g.n, g.edges, f"ramanujan_candidate({n},{c},seed={seed})")
    raise GenerationError(f"retry budget of {max_tries} exhausted without a Ramanujan candidate")


def _check_n(n):
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise GraphError(f"n must be an integer >= 2, got {n!r}")


_GENERATORS = {
    "complete": complete,
    "path": path,
    "cycle": cycle,
    "circulant": circulant,
    "friendship": friendship,
    "clique_bridge": clique_bridge,
    "random_regular": random_regular,
    "ramanujan_candidate": ramanujan_candidate,
}


def generate(kind: str, *args, **kwargs) -> Graph:
    """Build a graph from a topology descriptor name and its parameters.

    >>> generate("circulant", 36, (1, 2)).num_edges
    72
    """
    try:
        fn = _GENERATORS[kind]
    except KeyError:
        raise GraphError(f"unknown topology {kind!r}; expected one of {sorted(_GENERATORS)}") from None
    return fn(*args, **kwargs)


# -- edge-list text format ---------------------------------------------------


def dumps_edge_list(g: Graph) -> str:
    lines = [f"n {g.n}"] + [f"{i} {j}" for i, j in g.sorted_edges()]
    return "\n".join(lines) + "\n"


def loads_edge_list(text: str, name="") -> Graph:
    n = None
    edges = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if n is None:
            if len(parts) != 2 or parts[0] != "n":
                raise GraphError(f"line {lineno}: expected header 'n <count>', got {raw!r}")
            n = _parse_int(parts[1], lineno)
            continue
        if len(parts) != 2:
            raise GraphError(f"line {lineno}: expected 'i j', got {raw!r}")
        edges.append((_parse_int(parts[0], lineno), _parse_int(parts[1], lineno)))
    if n is None:
        raise GraphError("empty edge list: missing 'n <count>' header")
    try:
        return Graph.from_edges(n, edges, name)
    except GraphError as exc:
        raise GraphError(f"edge list: {exc}") from None


def read_edge_list(path) -> Graph:
    p = Path(path)
    return loads_edge_list(p.read_text(), name=p.stem)


def write_edge_list(g: Graph, path):
    Path(path).write_text(dumps_edge_list(g))


def _parse_int(tok, lineno):
    try:
        return int(tok)
    except ValueError:
        raise GraphError(f"line {lineno}: {tok!r} is not an integer") from None
