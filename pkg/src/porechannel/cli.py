"""Command-line front end: graph building, simulation, detection, rate sweeps.

Subcommands: graph, simulate, detect, rate, sweep, oracle-check. A flat
``key = value`` config file can supply any flag; command-line flags win.
Exit codes: 0 success, 2 config error, 3 data error, 4 infeasible instance.
"""
from __future__ import annotations

import argparse
import csv
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import fixtures
from .channel import NoiseModel, load_trace, save_trace, simulate
from .detection import (SegmentLikelihood, backward, forward, point_mass,
                        posteriors, viterbi)
from .errors import (ConfigError, DataError, InfeasibleTraceError,
                     PorechannelError, UndefinedEntropyError)
from .kmer_space import (ChannelMapping, StateGraph, jump_constrained_reduce,
                         load_kmer_table, max_entropy_component,
                         perron_entropy, strongly_connected_components,
                         write_edge_list)
from .rates import monte_carlo_rate
from .source import DurationModel, MarkovSource, parry_kernel, uniform_kernel

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_INFEASIBLE = 4

CONFIG_KEYS = ("model", "fixture", "tau", "jmin", "kernel", "lambda", "sigma",
               "m", "block", "seed", "out", "workers", "prune_delta")


@dataclass(frozen=True)
class ExperimentConfig:
    model: Optional[str] = None
    fixture: Optional[str] = None
    tau: Optional[int] = None
    jmin: float = 0.0
    kernel: str = "uniform"
    lambda_specs: tuple[str, ...] = ("1",)
    sigmas: tuple[float, ...] = (0.3,)
    m: int = 10_000
    block: int = 200
    seed: int = 0
    out: str = "."
    workers: int = 1
    prune_delta: Optional[float] = None

    def __post_init__(self):
        for spec in self.lambda_specs:
            parse_lambda_spec(spec)
        if any(s <= 0 for s in self.sigmas):
            raise ConfigError("sigma must be positive")
        if self.m < 1 or self.block < 1:
            raise ConfigError("m and block must be positive")
        if self.kernel not in ("uniform", "parry"):
            raise ConfigError(f"unknown kernel {self.kernel!r}")


def parse_lambda_spec(spec: str) -> tuple[int, ...]:
    """Parse a duration support: '1..5', '{2,3}', '2,3', or '4'."""
    text = spec.strip().strip("{}")
    try:
        if ".." in text:
            lo, hi = text.split("..")
            values = tuple(range(int(lo), int(hi) + 1))
        else:
            values = tuple(int(v) for v in text.split(","))
    except ValueError:
        raise ConfigError(f"cannot parse duration support {spec!r}") from None
    if not values or min(values) < 1:
        raise ConfigError(f"duration support {spec!r} must be positive integers")
    return tuple(sorted(set(values)))


def read_config_file(path) -> dict:
    values: dict[str, str] = {}
    try:
        lines = Path(path).read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from None
    for lineno, raw in enumerate(lines, 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, eq, value = line.partition("=")
        key = key.strip()
        if not eq or key not in CONFIG_KEYS:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value' with a "
                              f"known key, got {line!r}")
        values[key] = value.strip()
    return values


def _config_from(args: argparse.Namespace) -> ExperimentConfig:
    values: dict = {}
    if getattr(args, "config", None):
        raw = read_config_file(args.config)
        if "lambda" in raw:
            values["lambda_specs"] = tuple(raw.pop("lambda").split())
        if "sigma" in raw:
            values["sigmas"] = tuple(float(v) for v in raw.pop("sigma").split(","))
        for key in ("tau", "m", "block", "seed", "workers"):
            if key in raw:
                values[key] = int(raw.pop(key))
        for key in ("jmin", "prune_delta"):
            if key in raw:
                values[key] = float(raw.pop(key))
        values.update(raw)
    overrides: dict = {}
    for key in ("model", "fixture", "jmin", "kernel", "m", "block", "seed",
                "out", "workers", "prune_delta", "tau"):
        val = getattr(args, key, None)
        if val is not None:
            overrides[key] = val
    if getattr(args, "lam", None):
        overrides["lambda_specs"] = tuple(args.lam)
    if getattr(args, "sigma", None):
        overrides["sigmas"] = tuple(args.sigma)
    values.update(overrides)
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


def build_mapping(cfg: ExperimentConfig) -> ChannelMapping:
    if cfg.model:
        return load_kmer_table(cfg.model)
    if cfg.fixture:
        return fixtures.fixture_mapping(cfg.fixture)
    raise ConfigError("either --model or --fixture is required")


def build_graph(cfg: ExperimentConfig) -> StateGraph:
    from .kmer_space import full_graph, induced_graph

    mapping = build_mapping(cfg)
    g = full_graph(mapping) if mapping.complete else induced_graph(mapping)
    reduced = jump_constrained_reduce(g, cfg.jmin)
    comps = strongly_connected_components(reduced)
    return max_entropy_component(comps)


def build_source(cfg: ExperimentConfig, graph: StateGraph) -> MarkovSource:
    return parry_kernel(graph) if cfg.kernel == "parry" else uniform_kernel(graph)


def cmd_graph(args) -> int:
    cfg = _config_from(args)
    mapping = build_mapping(cfg)
    from .kmer_space import full_graph, induced_graph

    g = full_graph(mapping) if mapping.complete else induced_graph(mapping)
    reduced = jump_constrained_reduce(g, cfg.jmin)
    comps = strongly_connected_components(reduced)
    chosen = max_entropy_component(comps)
    entropy = perron_entropy(chosen)

    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    write_edge_list(reduced, out / "reduced_edges.csv")
    write_edge_list(chosen, out / "component_edges.csv")
    with open(out / "scc_report.csv", "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["component", "nodes", "edges", "min_kmer"])
        for idx, comp in enumerate(comps):
            writer.writerow([idx, comp.n, len(comp.edges), comp.kmers[0]])
    print(f"graph: {g.n} nodes, {len(g.edges)} edges")
    print(f"reduced (jmin={cfg.jmin}): {len(reduced.edges)} edges, "
          f"{len(comps)} components")
    print(f"chosen component: {chosen.n} nodes, {len(chosen.edges)} edges, "
          f"entropy {entropy:.6f} bits/base")
    return EXIT_OK


def cmd_simulate(args) -> int:
    cfg = _config_from(args)
    graph = build_graph(cfg)
    src = build_source(cfg, graph)
    dur = DurationModel.uniform(parse_lambda_spec(cfg.lambda_specs[0]))
    noise = NoiseModel(cfg.sigmas[0])
    trace = simulate(src, dur, noise, None, cfg.m, cfg.seed)
    out = Path(cfg.out)
    if out.is_dir():
        out = out / f"trace_seed{cfg.seed}.csv"
    save_trace(trace, out)
    print(f"wrote {out}: m={trace.m}, T_m={trace.t_m}")
    return EXIT_OK


def _psi_entropy(row: np.ndarray) -> float:
    nz = row[row > 0]
    return float(-(nz * np.log2(nz)).sum())


def cmd_detect(args) -> int:
    cfg = _config_from(args)
    trace = load_trace(args.trace)
    graph = build_graph(cfg)
    src = build_source(cfg, graph)
    dur = DurationModel.uniform(trace.lambda_support)
    sl = SegmentLikelihood.build(src, dur, trace.sigma, trace.samples)
    mu0 = point_mass(graph, trace.s0)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    if args.mode == "symbol":
        fl = forward(sl, mu0, trace.m, prune_delta=cfg.prune_delta)
        bl = backward(sl, trace.m, prune_delta=cfg.prune_delta)
        post = posteriors(fl, bl, sl)
        path = out / "symbol_report.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["l", "state", "max_psi", "psi_entropy"])
            for ell in range(1, trace.m + 1):
                row = post.psi[ell]
                s = int(np.argmax(row))
                writer.writerow([ell, graph.kmers[s],
                                 format(row[s], ".17g"),
                                 format(_psi_entropy(row), ".17g")])
        print(f"log-evidence: {post.log_evidence:.6f}")
        print(f"wrote {path}")
    else:
        vr = viterbi(sl, mu0, trace.m)
        path = out / "segmentation.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["l", "kmer", "t_start", "t_end"])
            t_prev = 0
            for ell, (kmer, t_end) in enumerate(
                    zip(vr.states, vr.jump_times), 1):
                writer.writerow([ell, kmer, t_prev + 1, t_end])
                t_prev = t_end
        print(f"log-score: {vr.log_score:.6f}")
        print(f"wrote {path}")
    return EXIT_OK


def _rate_point(payload):
    cfg, lam_spec, sigma, point_seed = payload
    graph = build_graph(cfg)
    src = build_source(cfg, graph)
    dur = DurationModel.uniform(parse_lambda_spec(lam_spec))
    est = monte_carlo_rate(src, dur, NoiseModel(sigma), None, cfg.m, cfg.block,
                           point_seed, prune_delta=cfg.prune_delta)
    return (sigma, lam_spec, est, point_seed)


def _write_rate_rows(path, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sigma", "lambda_spec", "rate_bits_per_base", "stderr",
                         "entropy_term", "t_term", "m_total", "blocks", "seed"])
        for sigma, lam_spec, est, seed in rows:
            writer.writerow([
                format(sigma, ".17g"), lam_spec,
                format(est.rate, ".17g"), format(est.stderr, ".17g"),
                format(est.entropy_term, ".17g"), format(est.t_term, ".17g"),
                est.m_total, est.blocks, seed,
            ])


def cmd_rate(args) -> int:
    cfg = _config_from(args)
    sigma, lam_spec = cfg.sigmas[0], cfg.lambda_specs[0]
    _, _, est, seed = _rate_point((cfg, lam_spec, sigma, cfg.seed))
    out = Path(cfg.out)
    if out.is_dir():
        out = out / "rate.csv"
    _write_rate_rows(out, [(sigma, lam_spec, est, seed)])
    print(f"sigma={sigma} lambda={lam_spec}: rate={est.rate:.4f} "
          f"+- {est.stderr:.4f} bits/base "
          f"(entropy {est.entropy_term:.4f}, T-term {est.t_term:.4f})")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _config_from(args)
    points = []
    idx = 0
    for lam_spec in cfg.lambda_specs:
        for sigma in cfg.sigmas:
            points.append((cfg, lam_spec, sigma, cfg.seed + idx))
            idx += 1
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_rate_point, points))
    else:
        rows = [_rate_point(p) for p in points]
    out = Path(cfg.out)
    if out.is_dir():
        out = out / "sweep.csv"
    _write_rate_rows(out, rows)
    for sigma, lam_spec, est, _ in rows:
        print(f"sigma={sigma} lambda={lam_spec}: rate={est.rate:.4f} "
              f"+- {est.stderr:.4f}")
    print(f"wrote {out}")
    return EXIT_OK


def cmd_oracle_check(args) -> int:
    from .oracle import enumerate_paths
    from .source import markov_source

    rng = np.random.default_rng(args.seed)
    worst_psi = worst_ev = 0.0
    count = 0
    g = fixtures.two_state_graph()
    src = uniform_kernel(g)
    for _ in range(args.count):
        lam = tuple(sorted(rng.choice([1, 2, 3], size=2, replace=False)))
        dur = DurationModel.uniform(lam)
        sigma = float(rng.uniform(0.2, 2.0))
        noise = NoiseModel(sigma)
        m = int(rng.integers(2, 5))
        trace = simulate(src, dur, noise, None, m, int(rng.integers(1 << 30)))
        mu0 = point_mass(g, trace.s0)
        sl = SegmentLikelihood.build(src, dur, sigma, trace.samples)
        post = posteriors(forward(sl, mu0, m), backward(sl, m), sl)
        en = enumerate_paths(src, dur, noise, mu0, m, trace.t_m, trace.samples)
        worst_ev = max(worst_ev, abs(post.log_evidence - en.log_evidence))
        worst_psi = max(worst_psi, float(np.abs(post.psi - en.psi).max()))
        count += 1
    print(f"checked {count} instances: max |evidence| dev {worst_ev:.3g}, "
          f"max |psi| dev {worst_psi:.3g}")
    ok = worst_ev < 1e-9 and worst_psi < 1e-9
    print("oracle check:", "PASS" if ok else "FAIL")
    return EXIT_OK if ok else 1


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key = value config file")
    p.add_argument("--model", help="k-mer model TSV path")
    p.add_argument("--fixture", help="bundled fixture id "
                   f"({', '.join(sorted(fixtures.FIXTURES))})")
    p.add_argument("--tau", type=int)
    p.add_argument("--jmin", type=float)
    p.add_argument("--kernel", choices=["uniform", "parry"])
    p.add_argument("--lambda", dest="lam", action="append",
                   help="duration support, e.g. '1..5' or '{2,3}'; repeatable")
    p.add_argument("--sigma", type=float, action="append")
    p.add_argument("--m", type=int)
    p.add_argument("--block", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.add_argument("--workers", type=int)
    p.add_argument("--prune-delta", dest="prune_delta", type=float)


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="porechannel",
        description="Simulate and decode the duplicating, noisy k-mer channel")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, fn in (("graph", cmd_graph), ("simulate", cmd_simulate),
                     ("rate", cmd_rate), ("sweep", cmd_sweep)):
        p = sub.add_parser(name)
        _add_common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("detect")
    _add_common(p)
    p.add_argument("--trace", required=True)
    p.add_argument("--mode", choices=["symbol", "sequence"], default="symbol")
    p.set_defaults(fn=cmd_detect)

    p = sub.add_parser("oracle-check")
    p.add_argument("--count", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(fn=cmd_oracle_check)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InfeasibleTraceError, UndefinedEntropyError) as exc:
        print(f"infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except PorechannelError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
