"""
Relative-measurement estimation problem: measurements, cost, and the
centralized minimum-norm least-squares solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graph import Graph, GraphError, is_connected, matrices
from .spectral import sym_eigen


class EstimationError(ValueError):
    pass


@dataclass(frozen=True)
class MeasurementSet:
    """``entries[(i, j)]`` is node i's noisy reading of ``x_j - x_i``."""

    entries: dict
    noise_sigma: float = 0.0
    seed: int | None = None

    def __getitem__(self, key):
        return self.entries[key]

    def __len__(self):
        return len(self.entries)


def _state(g, x, what="state"):
    x = np.asarray(x, dtype=float)
    if x.shape != (g.n,):
        raise EstimationError(f"{what} must have length {g.n}, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise EstimationError(f"{what} has non-finite entries")
    return x


def generate_measurements(g: Graph, x, sigma=0.0, seed=0) -> MeasurementSet:
    if sigma < 0:
        raise EstimationError(f"noise sigma must be >= 0, got {sigma}")
    if not is_connected(g):
        raise GraphError("graph is disconnected")
    x = _state(g, x)
    rng = np.random.default_rng(seed)
    pairs = [(i, j) for i in range(1, g.n + 1) for j in g.neighbors[i]]
    noise = rng.normal(0.0, sigma, size=len(pairs)) if sigma > 0 else np.zeros(len(pairs))
    entries = {(i, j): float(x[j - 1] - x[i - 1] + nu) for (i, j), nu in zip(pairs, noise)}
    return MeasurementSet(entries=entries, noise_sigma=float(sigma), seed=seed)


def aggregate(g: Graph, m: MeasurementSet) -> np.ndarray:
    """Per-node sum of ``x~_ji - x~_ij`` over neighbours j."""
    xt = np.zeros(g.n)
    for i in range(1, g.n + 1):
        for j in g.neighbors[i]:
            try:
                xt[i - 1] += m.entries[(j, i)] - m.entries[(i, j)]
            except KeyError as exc:
                raise EstimationError(f"missing measurement for ordered pair {exc.args[0]}") from None
    return xt


def cost_h(g: Graph, m: MeasurementSet, xhat) -> float:
    xhat = _state(g, xhat, "estimate")
    total = 0.0
    for (i, j), xt_ij in m.entries.items():
        total += (xhat[i - 1] - xhat[j - 1] + xt_ij) ** 2
    return 0.5 * total


def cost_gradient(g: Graph, m: MeasurementSet, xhat) -> np.ndarray:
    """Analytic gradient of :func:`cost_h`, equal to ``2 L xhat - xt``."""
    xhat = _state(g, xhat, "estimate")
    return 2.0 * matrices(g).L @ xhat - aggregate(g, m)


def centralized_solution(g: Graph, xt) -> np.ndarray:
    """Minimum-norm least-squares estimate ``L^+ xt / 2``.

    The pseudo-inverse is built from the Laplacian eigendecomposition,
    dropping eigenvalues below ``1e-9`` times the largest one.
    """
    xt = _state(g, xt, "aggregated measurement")
    L = matrices(g).L.astype(float)
    spec, V = sym_eigen(L, context="L", vectors=True)
    lam = spec.values
    tau = 1e-9 * lam[-1]
    keep = lam > tau
    if np.count_nonzero(~keep) > 1:
        raise GraphError("graph is disconnected (Laplacian has multiple zero eigenvalues)")
    scale = np.abs(xt).max() if xt.size else 0.0
    if abs(xt.sum()) > 1e-9 * max(1.0, scale):
        raise EstimationError(f"aggregated measurement is not orthogonal to the ones vector (sum {xt.sum():.3e})")
    Vk = V[:, keep]
    return 0.5 * Vk @ ((Vk.T @ xt) / lam[keep])
