"""
Synchronous round-based simulation of the distributed estimator.

Each node keeps one scalar estimate and, every round, recomputes it from
its own previous value, the previous values broadcast by its neighbours
and its locally held relative measurements. All nodes update from the same
frozen snapshot (Jacobi rounds).
"""

from __future__ import annotations

import csv
import math
import warnings
from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from .estimation import MeasurementSet, centralized_solution
from .graph import Graph

DIVERGENCE_LIMIT = 1e12
CERTIFY_TOL = 1e-6
MIN_RATE_POINTS = 20


class SimulationError(RuntimeError):
    pass


class ShortFitWarning(UserWarning):
    """Residual hit the floating-point floor before enough rounds were recorded."""


@dataclass(frozen=True)
class NodeRule:
    """Update rule of one node, holding only neighbourhood-local data.

    ``measurements[j] = (x~_ij, x~_ji)`` for each neighbour ``j``.
    """

    node: int
    q: float
    degree: int
    neighbors: tuple
    measurements: dict

    @property
    def bias(self):
        return 0.5 * sum(x_ji - x_ij for x_ij, x_ji in self.measurements.values())

    def update(self, own: float, inbox: Mapping) -> float:
        s = 0.0
        for j in self.neighbors:
            s += inbox[j]
        return self.q * own + (1.0 - self.q) / self.degree * (s + self.bias)


class Inbox(Mapping):
    """Read-only view of the messages delivered to one node in one round."""

    def __init__(self, messages, reader, log=None, rnd=0):
        self._messages = messages
        self._reader = reader
        self._log = log
        self._round = rnd

    def __getitem__(self, j):
        value = self._messages[j]
        if self._log is not None:
            self._log.append((self._round, self._reader, j))
        return value

    def __iter__(self):
        return iter(self._messages)

    def __len__(self):
        return len(self._messages)


def make_rules(g: Graph, m: MeasurementSet, q) -> list[NodeRule]:
    q = np.asarray(q, dtype=float)
    if q.shape != (g.n,):
        raise SimulationError(f"q must have length {g.n}")
    rules = []
    for i in range(1, g.n + 1):
        nb = g.neighbors[i]
        meas = {j: (m.entries[(i, j)], m.entries[(j, i)]) for j in nb}
        rules.append(NodeRule(i, float(q[i - 1]), len(nb), nb, meas))
    return rules


@dataclass
class SimulationResult:
    trajectory: list
    rounds_run: int
    converged: bool
    relative_diff_error: float
    drift_beta: float
    final: np.ndarray
    centralized: np.ndarray
    residuals: np.ndarray
    last_change: float
    oracle_deviation: float | None = None
    diagnostic: str = ""
    message_log: list | None = field(default=None, repr=False)

    def write_trajectory_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "node", "estimate"])
            for k, x in self.trajectory:
                for i, v in enumerate(x, 1):
                    w.writerow([k, i, repr(float(v))])

    def write_residual_csv(self, path, stride=1):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["round", "log_residual"])
            for k, r in enumerate(self.residuals):
                if k % stride == 0:
                    w.writerow([k, repr(float(math.log(r))) if r > 0 else "-inf"])


def relative_difference_error(xhat, xc, g: Graph) -> float:
    xhat = np.asarray(xhat, dtype=float)
    xc = np.asarray(xc, dtype=float)
    if xhat.shape != xc.shape:
        raise SimulationError("estimate and reference differ in length")
    if not g.edges:
        return 0.0
    e = np.array(g.sorted_edges()) - 1
    diff = xhat - xc
    return float(np.max(np.abs(diff[e[:, 0]] - diff[e[:, 1]])))


def _rule_arrays(g, rules):
    by_node = {r.node: r for r in rules}
    missing = sorted(set(range(1, g.n + 1)) - set(by_node))
    if missing:
        raise SimulationError(f"missing rule for node(s) {missing}")
    ordered = [by_node[i] for i in range(1, g.n + 1)]
    q = np.array([r.q for r in ordered])
    deg = np.array([r.degree for r in ordered], dtype=float)
    bias = np.array([r.bias for r in ordered])
    return ordered, q, deg, bias


def run_sync(
    g: Graph,
    rules,
    x0=None,
    max_rounds=100_000,
    tol=1e-9,
    stride=1,
    engine="vector",
    verify=True,
    log_messages=False,
) -> SimulationResult:
    """Run synchronous rounds until the successive change drops below ``tol``.

    ``engine="local"`` evaluates each :class:`NodeRule` on an inbox of its
    neighbours' previous-round values (and can log every read);
    ``engine="vector"`` applies the same per-node formula to all nodes at
    once through neighbour index gathers. With ``verify`` the matrix
    recursion ``x <- F x + u`` is advanced alongside and its largest
    deviation is reported.
    """
    ordered, q, deg, bias = _rule_arrays(g, rules)
    n = g.n
    xt = 2.0 * bias
    xc = centralized_solution(g, xt)
    x = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if x.shape != (n,):
        raise SimulationError(f"x0 must have length {n}")

    nbr = np.concatenate([np.array(r.neighbors, dtype=int) - 1 for r in ordered])
    starts = np.concatenate([[0], np.cumsum(deg[:-1])]).astype(int)
    gain = (1.0 - q) / deg
    if verify:
        A = np.zeros((n, n))
        A[np.repeat(np.arange(n), deg.astype(int)), nbr] = 1.0
        F = np.diag(q) + gain[:, None] * A
        u = gain * bias
        x_mat = x.copy()
    log = [] if log_messages else None

    def centered_residual(v):
        return float(np.linalg.norm(v - v.mean() - xc))

    trajectory = [(0, x.copy())]
    residuals = [centered_residual(x)]
    oracle_dev = 0.0 if verify else None
    converged = False
    diagnostic = ""
    change = math.inf
    k = 0
    while k < max_rounds:
        k += 1
        if engine == "vector":
            new = q * x + gain * (np.add.reduceat(x[nbr], starts) + bias)
        elif engine == "local":
            snapshot = {i + 1: float(x[i]) for i in range(n)}
            new = np.empty(n)
            for r in ordered:
                inbox = Inbox({j: snapshot[j] for j in r.neighbors}, r.node, log, k)
                new[r.node - 1] = r.update(snapshot[r.node], inbox)
        else:
            raise SimulationError(f"unknown engine {engine!r}")
        change = float(np.max(np.abs(new - x)))
        x = new
        if verify:
            x_mat = F @ x_mat + u
            oracle_dev = max(oracle_dev, float(np.max(np.abs(x - x_mat))))
        res = centered_residual(x)
        residuals.append(res)
        if stride and k % stride == 0:
            trajectory.append((k, x.copy()))
        if not np.all(np.isfinite(x)) or res > DIVERGENCE_LIMIT:
            diagnostic = f"diverged at round {k} (residual {res:.3e})"
            break
        if change < tol:
            converged = True
            break
    else:
        diagnostic = f"no convergence within {max_rounds} rounds (last change {change:.3e})"

    if trajectory[-1][0] != k:
        trajectory.append((k, x.copy()))
    finite = np.all(np.isfinite(x))
    rde = relative_difference_error(x, xc, g) if finite else math.inf
    if converged and rde > CERTIFY_TOL:
        converged = False
        diagnostic = f"stalled: relative difference error {rde:.3e} above {CERTIFY_TOL}"
    return SimulationResult(
        trajectory=trajectory,
        rounds_run=k,
        converged=converged,
        relative_diff_error=rde,
        drift_beta=float(np.mean(x - xc)) if finite else math.nan,
        final=x,
        centralized=xc,
        residuals=np.array(residuals),
        last_change=change,
        oracle_deviation=oracle_dev,
        diagnostic=diagnostic,
        message_log=log,
    )


def fit_rate(residuals, min_points=MIN_RATE_POINTS):
    """Geometric decay rate of a residual sequence.

    Fits ``log r_k`` against ``k`` by least squares over the tail of the
    contiguous run of residuals above the round-off floor, dropping the
    first quarter as transient. Returns ``(rate, points_used)``.
    """
    r = np.asarray(residuals, dtype=float)
    if r.size == 0 or r[0] == 0:
        return 0.0, 0
    floor = 1e-11 * float(np.max(r))
    below = np.flatnonzero(r <= floor)
    end = int(below[0]) if below.size else r.size
    if end < 2:
        return 0.0, end
    start = end // 4
    k = np.arange(start, end)
    if k.size < 2:
        k = np.arange(0, end)
    slope = np.polyfit(k, np.log(r[k]), 1)[0]
    return float(math.exp(slope)), int(k.size)


def empirical_rate(result: SimulationResult) -> float:
    rate, pts = fit_rate(result.residuals)
    if pts < MIN_RATE_POINTS:
        warnings.warn(f"rate fitted on only {pts} rounds", ShortFitWarning, stacklevel=2)
    return rate
