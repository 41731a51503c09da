"""
Greedy random-perturbation search over the per-node regularization vector.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field

import numpy as np

from .graph import Graph
from .schemes import (
    ExtendedDomainWarning,
    ParameterDomain,
    optimal_parameters,
    q_from_eps,
    q_from_eta,
    q_from_rho,
    theorem2_domain,
)
from .spectral import cri, spectrum_FQ


@dataclass(frozen=True)
class OptimizerConfig:
    iterations: int = 5000
    sigma0: float = 0.05
    decay: float = 0.995
    seed: int = 0
    margin: float = 1e-6
    restarts: int = 0

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if self.sigma0 <= 0 or self.margin <= 0:
            raise ValueError("sigma0 and margin must be positive")
        if not 0 < self.decay <= 1:
            raise ValueError("decay must lie in (0, 1]")
        if self.restarts < 0:
            raise ValueError("restarts must be >= 0")


@dataclass
class OptimizationTrace:
    best_q: list = field(default_factory=list)
    best_cri: list = field(default_factory=list)
    accepted: list = field(default_factory=list)
    init_label: str = ""

    @property
    def final_q(self):
        return self.best_q[-1]

    @property
    def final_cri(self):
        return self.best_cri[-1]

    def write_csv(self, path, q_stride=0):
        """Write ``iteration, cri, accepted``; every ``q_stride``-th row also carries q."""
        n = len(self.best_q[0])
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            header = ["iteration", "cri", "accepted"]
            if q_stride:
                header += [f"q{i}" for i in range(1, n + 1)]
            w.writerow(header)
            for t, (r, acc) in enumerate(zip(self.best_cri, self.accepted)):
                row = [t, repr(float(r)), int(acc)]
                if q_stride:
                    row += [repr(float(v)) for v in self.best_q[t]] if t % q_stride == 0 else [""] * n
                w.writerow(row)


def project(q, domain: ParameterDomain, margin):
    """Clamp each coordinate into ``[lower + margin, upper - margin]``."""
    if not margin < (domain.upper - domain.lower) / 2:
        raise ValueError(f"margin {margin} too large for domain ({domain.lower}, {domain.upper})")
    return np.clip(np.asarray(q, dtype=float), domain.lower + margin, domain.upper - margin)


def q_cri(g: Graph, q) -> float:
    return cri(spectrum_FQ(g, q))


def initial_candidates(g: Graph) -> dict[str, np.ndarray]:
    """q-vectors of the unregularized scheme and the optimal eta/rho/eps schemes."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtendedDomainWarning)
        opt = optimal_parameters(g, "extended")
    return {
        "sigma0": np.zeros(g.n),
        "sigmaEta": q_from_eta(g, opt["eta"]),
        "sigmaRho": q_from_rho(g, opt["rho"]),
        "sigmaEps": q_from_eps(g, opt["eps"]),
    }


def greedy_optimize(g: Graph, cfg: OptimizerConfig | None = None, q0=None) -> OptimizationTrace:
    """Hill-climb the convergence rate index over the sufficient domain.

    Starts from ``q0`` if given, else from the best of the standard schemes
    after projection into the domain. Each iteration perturbs every
    coordinate with Gaussian noise and keeps the candidate only on strict
    improvement; the scale shrinks by ``cfg.decay`` after each rejection.
    Entry ``t`` of the returned trace is the incumbent after ``t`` steps.
    """
    cfg = cfg or OptimizerConfig()
    dom = theorem2_domain(g)
    rng = np.random.default_rng(cfg.seed)

    if q0 is not None:
        q = project(q0, dom, cfg.margin)
        label = "given"
    else:
        best = None
        for name, cand in initial_candidates(g).items():
            cq = project(cand, dom, cfg.margin)
            r = q_cri(g, cq)
            if best is None or r < best[0]:
                best = (r, name, cq)
        _, label, q = best
    r = q_cri(g, q)

    trace = OptimizationTrace(init_label=label)
    trace.best_q.append(q.copy())
    trace.best_cri.append(r)
    trace.accepted.append(False)

    per_run = max(1, cfg.iterations // (cfg.restarts + 1))
    for t in range(cfg.iterations):
        if t % per_run == 0:
            scale = cfg.sigma0
        cand = project(q + scale * rng.standard_normal(g.n), dom, cfg.margin)
        rc = q_cri(g, cand)
        ok = rc < r
        if ok:
            q, r = cand, rc
        else:
            scale *= cfg.decay
        trace.best_q.append(q.copy())
        trace.best_cri.append(r)
        trace.accepted.append(ok)
    return trace
