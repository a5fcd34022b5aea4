"""Command-line entry point: ``heatmoments <subcommand> ...``.

Exit codes: 0 success, 2 configuration or input error, 3 runtime failure.
Errors are reported as one JSON object on stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ConfigError, load_config
from .discretization import recover_initial
from .experiment import build_mesh, build_rule, readings_for, run_experiment, synthesize_readings
from .heat_forward import read_readings_csv
from .measures import read_atoms_csv, read_moments_csv, write_atoms_csv, write_moments_csv
from .metrics import MassMismatchError, cluster, kantorovich_norm, w1_distance
from .moment_dynamics import build_A, invert_moments
from .quadrature import observe_moments

log = logging.getLogger("heatmoments")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        _emit_error("usage", message, EXIT_CONFIG)
        self.print_usage(sys.stderr)
        sys.exit(EXIT_CONFIG)


def _emit_error(kind: str, message: str, code: int) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")


def _config(args):
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg = cfg.with_overrides(seed=args.seed)
    return cfg


def _times(cfg, T):
    return cfg.T if T is None else (float(T),)


def cmd_forward(args) -> int:
    cfg = _config(args)
    if cfg.truth is None:
        raise ConfigError("forward needs a [truth] section in the config")
    out = Path(args.out or "readings.csv")
    nodes_all, vals_all, times_all = [], [], []
    for T in _times(cfg, args.T):
        rule = build_rule(cfg, T)
        nodes_all.append(rule.nodes)
        vals_all.append(synthesize_readings(cfg, T, rule))
        times_all.append(np.full(len(rule), T))
    _write_stacked_readings(out, nodes_all, times_all, vals_all)
    log.info("wrote %s", out)
    return EXIT_OK


def _write_stacked_readings(path: Path, nodes, times, values) -> None:
    d = nodes[0].shape[1]
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j + 1}" for j in range(d)] + ["t", "value"])
        for X, t, v in zip(nodes, times, values):
            for x, ti, vi in zip(X, t, v):
                w.writerow(["%.17g" % c for c in x] + ["%.17g" % ti, "%.17g" % vi])


def cmd_observe(args) -> int:
    cfg = _config(args)
    try:
        table = read_readings_csv(args.readings)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read readings: {exc}") from exc
    times = np.unique(table[1])
    if args.T is None and times.size != 1:
        raise ConfigError(f"readings hold {times.size} terminal times; choose one with --T")
    T = float(args.T) if args.T is not None else float(times[0])
    k = cfg.k_max if args.k is None else args.k
    rule = build_rule(cfg, T)
    vals = readings_for(cfg.with_overrides(readings_path=Path(args.readings)), T, rule, table)
    y = observe_moments(rule, vals, k, T).y
    write_moments_csv(y, Path(args.out or "moments.csv"))
    return EXIT_OK


def cmd_invert(args) -> int:
    try:
        y = read_moments_csv(args.moments)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read moments: {exc}") from exc
    if args.T is None:
        raise ConfigError("invert needs --T")
    if args.k is not None:
        if args.k > y.order:
            raise ConfigError(f"--k {args.k} exceeds the moment order {y.order} in {args.moments}")
        y = y.truncate(args.k)
    z = invert_moments(y, float(args.T), build_A(y.dim, y.order))
    write_moments_csv(z, Path(args.out or "initial_moments.csv"))
    return EXIT_OK


def cmd_recover(args) -> int:
    cfg = _config(args)
    try:
        z = read_moments_csv(args.moments)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read moments: {exc}") from exc
    if z.dim != cfg.dimension:
        raise ConfigError(f"moments are {z.dim}-D but the config is {cfg.dimension}-D")
    res = recover_initial(z, build_mesh(cfg), pivot_tol=cfg.solver.pivot_tol, max_iters=cfg.solver.max_iters)
    out = Path(args.out or "atoms.csv")
    write_atoms_csv(res.measure, out)
    if cfg.metrics.cluster_threshold > 0:
        write_atoms_csv(cluster(res.measure, cfg.metrics.cluster_threshold, cfg.metrics.ground_metric),
                        out.with_name("clustered_" + out.name))
    print(json.dumps({"tv": res.tv, "residual": res.residual, "atom_count": res.atom_count}))
    return EXIT_OK


def cmd_metrics(args) -> int:
    try:
        a, b = read_atoms_csv(args.a), read_atoms_csv(args.b)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read atoms: {exc}") from exc
    report = {"kantorovich": kantorovich_norm(a - b, args.metric)}
    try:
        report["w1"] = w1_distance(a, b, args.metric)
    except MassMismatchError as exc:
        report["w1"] = None
        report["w1_note"] = str(exc)
    text = json.dumps(report)
    if args.out:
        Path(args.out).write_text(text + "\n", encoding="utf-8")
    print(text)
    return EXIT_OK


def cmd_experiment(args) -> int:
    cfg = _config(args)
    report = run_experiment(cfg, out_dir=args.out, parallel=max(1, args.parallel))
    failed = sum(1 for r in report.rows if r["status"] != "optimal")
    out = Path(args.out) if args.out else cfg.output_dir
    print(json.dumps({"rows": len(report.rows), "failed": failed, "summary": str(out / "summary.csv")}))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML config path or bundled config name")
    common.add_argument("--out", help="output file (or directory for experiment)")
    common.add_argument("--seed", type=int, help="override the config seed")
    common.add_argument("--parallel", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--verbose", "-v", action="store_true")

    p = _Parser(prog="heatmoments", description="Recover atomic initial data of the heat equation from moments.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("forward", parents=[common], help="truth + sensor layout -> readings CSV")
    s.add_argument("--T", type=float, help="single terminal time (default: all in config)")
    s.set_defaults(func=cmd_forward)

    s = sub.add_parser("observe", parents=[common], help="readings -> terminal moments CSV")
    s.add_argument("--readings", required=True)
    s.add_argument("--T", type=float)
    s.add_argument("--k", type=int, help="moment order (default: config maximum)")
    s.set_defaults(func=cmd_observe)

    s = sub.add_parser("invert", parents=[common], help="terminal moments -> initial moments CSV")
    s.add_argument("--moments", required=True)
    s.add_argument("--T", type=float)
    s.add_argument("--k", type=int, help="truncate to this order first")
    s.set_defaults(func=cmd_invert)

    s = sub.add_parser("recover", parents=[common], help="initial moments -> atoms CSV")
    s.add_argument("--moments", required=True)
    s.set_defaults(func=cmd_recover)

    s = sub.add_parser("metrics", parents=[common], help="W1 and Kantorovich distance of two atoms CSVs")
    s.add_argument("a")
    s.add_argument("b")
    s.add_argument("--metric", default="euclidean", choices=["euclidean", "linf"])
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("experiment", parents=[common], help="full (T, k) sweep from a config")
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        _emit_error("config", str(exc), EXIT_CONFIG)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        _emit_error("config", str(exc), EXIT_CONFIG)
        return EXIT_CONFIG
    except Exception as exc:
        log.debug("runtime failure", exc_info=True)
        _emit_error(type(exc).__name__, str(exc), EXIT_RUNTIME)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
