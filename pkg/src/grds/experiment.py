"""
Batch experiments: topology, measurements, every scheme, optimizer and
simulator, with CSV and JSON outputs.

Config files are flat ``key = value`` text; ``#`` starts a comment.
Recognized keys (defaults in parentheses):

topology (required)
    complete | path | cycle | circulant | friendship | clique_bridge |
    random_regular | ramanujan_candidate | edge_list
n, k, degree
    integer sizes used by the chosen topology
offsets
    comma-separated circulant offsets, e.g. ``1, 2``
sizes
    comma-separated clique sizes for ``clique_bridge``
bridges
    comma-separated ``i-j`` bridge edges for ``clique_bridge``
edge_list
    path to an edge-list file (relative paths resolve against the config)
topology_seed (0), measurement_seed (0), optimizer_seed (0), q_seed (0)
noise_sigma (0.1), state_scale (10.0)
schemes (sigma0, sigmaEta, sigmaRho, sigmaEps, sigmaQ_random, sigmaQ_greedy)
optimizer_iterations (5000), optimizer_sigma0 (0.05),
optimizer_decay (0.995), optimizer_margin (1e-6), optimizer_restarts (0)
max_rounds (100000), tol (1e-9), stride (1), q_stride (0)
precision (6)
out (results)
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import graph as gr
from .estimation import aggregate, generate_measurements
from .optimizer import OptimizationTrace, OptimizerConfig, greedy_optimize
from .schemes import (
    ExtendedDomainWarning,
    build,
    build_sigmaQ,
    classic_domains,
    converges,
    extended_domains,
    optimal_parameters,
    theorem2_domain,
)
from .simulator import MIN_RATE_POINTS, fit_rate, make_rules, run_sync
from .spectral import (
    CHEEGER_MAX_N,
    bound_report,
    laplacian_spectrum,
    normalized_laplacian_spectrum,
    spectral_summary,
)

ALL_SCHEMES = ("sigma0", "sigmaEta", "sigmaRho", "sigmaEps", "sigmaQ_random", "sigmaQ_greedy")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    topology: str
    topology_params: dict = field(default_factory=dict)
    noise_sigma: float = 0.1
    state_scale: float = 10.0
    topology_seed: int = 0
    measurement_seed: int = 0
    optimizer_seed: int = 0
    q_seed: int = 0
    schemes: tuple = ALL_SCHEMES
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    max_rounds: int = 100_000
    tol: float = 1e-9
    stride: int = 1
    q_stride: int = 0
    precision: int = 6
    out: str = "results"
    name: str = ""

    def with_seed(self, seed):
        opt = replace(self.optimizer, seed=seed)
        return replace(self, measurement_seed=seed, optimizer_seed=seed, q_seed=seed, optimizer=opt)


# -- config parsing --------------------------------------------------------------

_INT = ("n", "k", "degree", "topology_seed", "measurement_seed", "optimizer_seed", "q_seed",
        "optimizer_iterations", "optimizer_restarts", "max_rounds", "stride", "q_stride", "precision")
_FLOAT = ("noise_sigma", "state_scale", "optimizer_sigma0", "optimizer_decay", "optimizer_margin", "tol")
_TEXT = ("topology", "edge_list", "out", "name")
_LIST = ("offsets", "sizes", "bridges", "schemes")
_TOPOLOGY_KEYS = {
    "complete": ("n",),
    "path": ("n",),
    "cycle": ("n",),
    "circulant": ("n", "offsets"),
    "friendship": ("k",),
    "clique_bridge": ("sizes",),
    "random_regular": ("n", "degree"),
    "ramanujan_candidate": ("n", "degree"),
    "edge_list": ("edge_list",),
}


def parse_config(text: str, base_dir=None) -> ExperimentConfig:
    raw, where = {}, {}
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line.strip()!r}")
        key, value = (s.strip() for s in body.split("=", 1))
        if key not in _INT + _FLOAT + _TEXT + _LIST:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r} (first set on line {where[key]})")
        raw[key], where[key] = value, lineno

    def conv(key, fn):
        try:
            return fn(raw[key])
        except (ValueError, TypeError):
            raise ConfigError(f"line {where[key]}: bad value for {key!r}: {raw[key]!r}") from None

    vals = {}
    for key in raw:
        if key in _INT:
            vals[key] = conv(key, int)
        elif key in _FLOAT:
            vals[key] = conv(key, float)
        elif key == "schemes":
            vals[key] = tuple(s.strip() for s in raw[key].split(",") if s.strip())
        elif key == "bridges":
            vals[key] = conv(key, _parse_bridges)
        elif key in _LIST:
            vals[key] = conv(key, lambda v: tuple(int(s) for s in v.split(",") if s.strip()))
        else:
            vals[key] = raw[key]

    topo = vals.get("topology")
    if topo is None:
        raise ConfigError("missing required key 'topology'")
    if topo not in _TOPOLOGY_KEYS:
        raise ConfigError(f"line {where['topology']}: unknown topology {topo!r}")
    for req in _TOPOLOGY_KEYS[topo]:
        if req not in vals:
            raise ConfigError(f"topology {topo!r} requires key {req!r}")
    params = {k: vals.pop(k) for k in ("n", "k", "degree", "offsets", "sizes", "bridges", "edge_list") if k in vals}
    if "edge_list" in params and base_dir is not None:
        p = Path(params["edge_list"])
        params["edge_list"] = str(p if p.is_absolute() else Path(base_dir) / p)
    bad = [s for s in vals.get("schemes", ()) if s not in ALL_SCHEMES]
    if bad:
        raise ConfigError(f"line {where['schemes']}: unknown scheme(s) {bad}; expected {ALL_SCHEMES}")

    try:
        opt = OptimizerConfig(
            iterations=vals.pop("optimizer_iterations", 5000),
            sigma0=vals.pop("optimizer_sigma0", 0.05),
            decay=vals.pop("optimizer_decay", 0.995),
            seed=vals.get("optimizer_seed", 0),
            margin=vals.pop("optimizer_margin", 1e-6),
            restarts=vals.pop("optimizer_restarts", 0),
        )
    except ValueError as exc:
        raise ConfigError(f"optimizer settings: {exc}") from None
    vals.pop("topology")
    cfg = ExperimentConfig(topology=topo, topology_params=params, optimizer=opt, **vals)
    if cfg.noise_sigma < 0 or cfg.max_rounds <= 0 or cfg.tol <= 0 or cfg.stride < 0:
        raise ConfigError("noise_sigma must be >= 0; max_rounds, tol must be positive; stride >= 0")
    return cfg


def _parse_bridges(v):
    out = []
    for tok in v.split(","):
        tok = tok.strip()
        if tok:
            a, b = tok.split("-")
            out.append((int(a), int(b)))
    return tuple(out)


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    cfg = parse_config(text, base_dir=p.parent)
    return cfg if cfg.name else replace(cfg, name=p.stem)


def preset(name: str) -> ExperimentConfig:
    """Canonical configs of the four case-study topologies."""
    presets = {
        "smallworld22": ExperimentConfig("clique_bridge", {"sizes": (6, 7, 9)}, name="smallworld22"),
        "circulant36": ExperimentConfig("circulant", {"n": 36, "offsets": (1, 2)}, name="circulant36"),
        "friendship19": ExperimentConfig("friendship", {"k": 9}, name="friendship19"),
        "ramanujan16": ExperimentConfig("ramanujan_candidate", {"n": 16, "degree": 3}, name="ramanujan16"),
    }
    try:
        return presets[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; expected one of {sorted(presets)}") from None


def build_topology(cfg: ExperimentConfig) -> gr.Graph:
    p = cfg.topology_params
    t = cfg.topology
    if t == "edge_list":
        return gr.read_edge_list(p["edge_list"])
    if t in ("complete", "path", "cycle"):
        return gr.generate(t, p["n"])
    if t == "circulant":
        return gr.circulant(p["n"], p["offsets"])
    if t == "friendship":
        return gr.friendship(p["k"])
    if t == "clique_bridge":
        return gr.clique_bridge(p["sizes"], p.get("bridges"))
    return gr.generate(t, p["n"], p["degree"], cfg.topology_seed)


# -- running ----------------------------------------------------------------------


@dataclass
class SchemeRow:
    scheme: str
    domain: str
    parameter: float | None
    cri: float
    converged: bool
    sim_converged: bool | None = None
    rounds: int | None = None
    empirical_rate: float | None = None
    rate_points: int | None = None
    relative_diff_error: float | None = None
    q: list | None = None


@dataclass
class ExperimentReport:
    name: str
    graph: gr.Graph
    rows: list
    spectral: dict
    bounds: dict | None
    optimizer_trace: OptimizationTrace | None = None
    simulations: dict = field(default_factory=dict)

    def row(self, scheme, domain=None):
        for r in self.rows:
            if r.scheme == scheme and (domain is None or r.domain == domain):
                return r
        raise KeyError((scheme, domain))


def run_experiment(cfg: ExperimentConfig) -> ExperimentReport:
    g = build_topology(cfg)
    if not gr.is_connected(g):
        raise gr.GraphError(f"topology {g!r} is disconnected")
    rng = np.random.default_rng(cfg.measurement_seed)
    x_true = cfg.state_scale * rng.standard_normal(g.n)
    m = generate_measurements(g, x_true, cfg.noise_sigma, seed=cfg.measurement_seed + 1)
    xt = aggregate(g, m)

    s = spectral_summary(g)
    mu = theorem2_domain(g).lower
    ext, cls = extended_domains(g), classic_domains(g)
    spectral = {
        "n": g.n,
        "edges": g.num_edges,
        "lambda1_NL": s.lambda1_NL,
        "lambdaN1_NL": s.lambdaN1_NL,
        "varsigma_NL": s.varsigma_NL,
        "varsigma_L": s.varsigma_L,
        "mu": mu,
        "bipartite": gr.is_bipartite(g),
        "varsigma_lt_1": s.varsigma_NL < 1 - 1e-9,
    }
    bounds = None
    if g.n <= CHEEGER_MAX_N:
        b = bound_report(g)
        bounds = {k: v for k, v in asdict(b).items()}

    rows = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", ExtendedDomainWarning)
        opt_ext = optimal_parameters(g, "extended")
        opt_cls = optimal_parameters(g, "classic")
        schemes = []
        if "sigma0" in cfg.schemes:
            schemes.append(("sigma0", "none", None, build(g, xt, "sigma0")))
        for label, key in (("sigmaEta", "eta"), ("sigmaRho", "rho")):
            if label in cfg.schemes:
                schemes.append((label, "classic", opt_cls[key], build(g, xt, label, opt_cls[key])))
                schemes.append((label, "extended", opt_ext[key], build(g, xt, label, opt_ext[key])))
        if "sigmaEps" in cfg.schemes:
            eps = opt_ext["eps"]
            dom = "classic" if cls["eps"].closure_contains(eps) else "extended"
            schemes.append(("sigmaEps", dom, eps, build(g, xt, "sigmaEps", eps)))
    if "sigmaQ_random" in cfg.schemes:
        qrng = np.random.default_rng(cfg.q_seed)
        margin = cfg.optimizer.margin
        q = qrng.uniform(mu + margin, 1 - margin, size=g.n)
        schemes.append(("sigmaQ_random", "Q_check", None, build_sigmaQ(g, xt, q)))
    trace = None
    if "sigmaQ_greedy" in cfg.schemes:
        trace = greedy_optimize(g, cfg.optimizer)
        schemes.append(("sigmaQ_greedy", "Q_check", None, build_sigmaQ(g, xt, trace.final_q)))

    sims = {}
    for label, dom, param, sch in schemes:
        ok = converges(sch)
        row = SchemeRow(label, dom, param, sch.cri(), ok, q=sch.q.tolist() if label.startswith("sigmaQ") else None)
        if ok:
            res = run_sync(g, make_rules(g, m, sch.q), max_rounds=cfg.max_rounds, tol=cfg.tol, stride=cfg.stride)
            rate, pts = fit_rate(res.residuals)
            row.sim_converged = res.converged
            row.rounds = res.rounds_run
            row.empirical_rate = rate
            row.rate_points = pts
            row.relative_diff_error = res.relative_diff_error
            sims[f"{label}_{dom}"] = res
        rows.append(row)
    return ExperimentReport(cfg.name or g.name, g, rows, spectral, bounds, trace, sims)


# -- output -----------------------------------------------------------------------

REPORT_COLUMNS = ("scheme", "domain", "parameter", "cri", "converged", "sim_converged", "rounds",
                  "empirical_rate", "rate_points", "relative_diff_error")


def _fmt(v, precision):
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return f"{v:.{precision}g}"
    return str(v)


def write_outputs(report: ExperimentReport, cfg: ExperimentConfig, out_dir=None) -> Path:
    out = Path(out_dir or cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "report.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(REPORT_COLUMNS)
        for r in report.rows:
            w.writerow([_fmt(getattr(r, c), cfg.precision) for c in REPORT_COLUMNS])
    write_spectrum_csv(report.graph, out / "spectrum.csv")
    for key, res in report.simulations.items():
        res.write_trajectory_csv(out / f"trace_{key}.csv")
        res.write_residual_csv(out / f"residual_{key}.csv", stride=max(cfg.stride, 1))
    if report.optimizer_trace is not None:
        report.optimizer_trace.write_csv(out / "optimizer_trace.csv", q_stride=cfg.q_stride)
    summary = {
        "name": report.name,
        "graph": gr.dumps_edge_list(report.graph).splitlines()[0],
        "spectral": report.spectral,
        "bounds": report.bounds,
        "schemes": [asdict(r) for r in report.rows],
    }
    (out / "report.json").write_text(json.dumps(summary, indent=2, default=_json_default) + "\n")
    return out


def write_spectrum_csv(g: gr.Graph, path):
    nl = normalized_laplacian_spectrum(g).values
    lap = laplacian_spectrum(g).values
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "eigenvalue", "laplacian_eigenvalue"])
        for i, (a, b) in enumerate(zip(nl, lap)):
            w.writerow([i, repr(float(a)), repr(float(b))])


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.bool_):
        return bool(v)
    if isinstance(v, float) and math.isinf(v):
        return str(v)
    raise TypeError(type(v))


def format_table(report: ExperimentReport, precision=4) -> str:
    lines = [f"{report.name}: n={report.graph.n}, |E|={report.graph.num_edges}"]
    sp = report.spectral
    lines.append(
        f"  varsigma_NL={sp['varsigma_NL']:.{precision}f}  varsigma_L={sp['varsigma_L']:.{precision}f}  "
        f"mu={sp['mu']:.{precision}f}  bipartite={sp['bipartite']}"
    )
    head = f"  {'scheme':<14}{'domain':<10}{'param':>12}{'CRI':>10}{'conv':>6}{'rate':>10}{'rounds':>8}"
    lines.append(head)
    for r in report.rows:
        param = "" if r.parameter is None else f"{r.parameter:.{precision}f}"
        rate = "" if r.empirical_rate is None else f"{r.empirical_rate:.{precision}f}"
        rounds = "" if r.rounds is None else str(r.rounds)
        lines.append(
            f"  {r.scheme:<14}{r.domain:<10}{param:>12}{r.cri:>10.{precision}f}{'yes' if r.converged else 'no':>6}{rate:>10}{rounds:>8}"
        )
    return "\n".join(lines)


def rate_matches(row: SchemeRow, rtol=0.05) -> bool | None:
    """Whether a simulated row's fitted rate is within ``rtol`` of its CRI.

    ``None`` when the fit had too few rounds to judge.
    """
    if row.empirical_rate is None or row.rate_points is None or row.rate_points < MIN_RATE_POINTS:
        return None
    return abs(row.empirical_rate - row.cri) <= rtol * row.cri
