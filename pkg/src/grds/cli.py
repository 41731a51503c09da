"""Command-line entry point: ``grds run | preset | spectral``."""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import graph as gr
from .estimation import EstimationError
from .experiment import ConfigError, format_table, load_config, preset, run_experiment, write_outputs, write_spectrum_csv
from .schemes import SchemeError, extended_domains, optimal_parameters, theorem2_domain
from .simulator import SimulationError
from .spectral import CHEEGER_MAX_N, SpectralError, bound_report, spectral_summary

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="grds", description="Regularized distributed estimation from relative measurements.")
    sub = p.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", help="output directory")
    common.add_argument("--seed", type=int, help="override measurement, optimizer and random-q seeds")
    common.add_argument("--max-rounds", type=int, help="simulation round limit")
    common.add_argument("--stride", type=int, help="trajectory recording stride")

    r = sub.add_parser("run", parents=[common], help="run an experiment from a config file")
    r.add_argument("config")
    pr = sub.add_parser("preset", parents=[common], help="run a built-in case study")
    pr.add_argument("name", choices=["smallworld22", "circulant36", "friendship19", "ramanujan16"])
    sp = sub.add_parser("spectral", parents=[common], help="spectral summary of an edge-list graph")
    sp.add_argument("edge_list")
    return p


def _apply_overrides(cfg, args):
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.max_rounds is not None:
        cfg = replace(cfg, max_rounds=args.max_rounds)
    if args.stride is not None:
        cfg = replace(cfg, stride=args.stride)
    if args.out is not None:
        cfg = replace(cfg, out=args.out)
    return cfg


def _spectral(args):
    g = gr.read_edge_list(args.edge_list)
    if not gr.is_connected(g):
        raise gr.GraphError("graph is disconnected")
    s = spectral_summary(g)
    out = {
        "n": g.n,
        "edges": g.num_edges,
        "bipartite": gr.is_bipartite(g),
        "lambda1_NL": s.lambda1_NL,
        "lambdaN1_NL": s.lambdaN1_NL,
        "varsigma_NL": s.varsigma_NL,
        "varsigma_L": s.varsigma_L,
        "mu": theorem2_domain(g).lower,
        "extended_domains": {k: [d.lower, d.upper] for k, d in extended_domains(g).items()},
        "optimal_extended": optimal_parameters(g, "extended"),
        "optimal_classic": optimal_parameters(g, "classic"),
    }
    if g.n <= CHEEGER_MAX_N:
        b = bound_report(g)
        out["bounds"] = {
            "cheeger": b.cheeger,
            "hg": b.hg,
            "lambda1_le_2Cheeger": b.lambda1_le_2Cheeger,
            "lambdaN1_le_2_1mHG": b.lambdaN1_le_2_1mHG,
            "varsigma_lt_1": b.varsigma_lt_1,
        }
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        write_spectrum_csv(g, Path(args.out) / "spectrum.csv")
    print(json.dumps(out, indent=2, default=lambda v: v.item() if isinstance(v, np.generic) else str(v)))


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "spectral":
            _spectral(args)
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
        else:
            cfg = replace(preset(args.name), out=str(Path("results") / args.name))
        cfg = _apply_overrides(cfg, args)
        report = run_experiment(cfg)
        out = write_outputs(report, cfg)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except gr.GenerationError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except gr.GraphError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SpectralError, SchemeError, EstimationError, SimulationError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(format_table(report))
    print(f"outputs written to {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
