"""Sweeps over (T, k): synthesize or ingest readings, recover, score, persist."""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .config import ConfigError, ExperimentConfig
from .discretization import (
    Mesh,
    auto_select_k,
    padua_points,
    recover_initial,
    satisfies_apriori_bound,
    uniform_mesh,
)
from .heat_forward import heat_moments_exact, read_readings_csv, sample_readings, write_readings_csv
from .measures import MomentVector, exact_moments, write_atoms_csv, write_moments_csv
from .metrics import MassMismatchError, cluster, kantorovich_norm, w1_distance
from .moment_dynamics import build_A, invert_moments
from .quadrature import QuadratureRule, gh_sensors, observe_moments, uniform_sensors

__all__ = [
    "ExperimentReport",
    "build_mesh",
    "build_rule",
    "synthesize_readings",
    "readings_for",
    "run_experiment",
    "atoms_filename",
    "fmt_T",
]

log = logging.getLogger(__name__)


def fmt_T(T: float) -> str:
    return "%g" % T


def atoms_filename(T: float, k: int, prefix: str = "atoms") -> str:
    return f"{prefix}_T{fmt_T(T)}_k{k}.csv"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def build_mesh(cfg: ExperimentConfig) -> Mesh:
    if cfg.mesh.type == "padua":
        deg = cfg.mesh.degree
        if deg is None:
            deg = cfg.k_max + (cfg.k_max % 2)
        return padua_points(deg, cfg.R)
    return uniform_mesh(cfg.R, cfg.mesh.n_per_axis, cfg.dimension)


def build_rule(cfg: ExperimentConfig, T: float, n: int | None = None, method: str | None = None) -> QuadratureRule:
    q = cfg.quadrature
    n = q.n if n is None else n
    method = q.method if method is None else method
    if method == "gauss_hermite":
        return gh_sensors(n, T, cfg.dimension)
    return uniform_sensors(q.L, n, cfg.dimension, placement=q.placement)


def _noise_rng_seed(seed: int, T: float) -> list[int]:
    # one independent stream per terminal time, stable under reordering of T
    return [int(seed), int(round(T * 1_000_000))]


def synthesize_readings(cfg: ExperimentConfig, T: float, rule: QuadratureRule) -> np.ndarray:
    if cfg.truth is None:
        raise ConfigError("synthetic readings need a [truth] section")
    vals = sample_readings(cfg.truth, rule.nodes, T)
    if cfg.noise > 0:
        rng = np.random.default_rng(_noise_rng_seed(cfg.seed, T))
        vals = vals + rng.uniform(-cfg.noise, cfg.noise, size=vals.shape)
    return vals


def readings_for(cfg: ExperimentConfig, T: float, rule: QuadratureRule, table=None) -> np.ndarray:
    """Sensor values at time T, from the truth or from the configured readings file."""
    if cfg.readings_path is None:
        return synthesize_readings(cfg, T, rule)
    nodes, times, values = table if table is not None else read_readings_csv(cfg.readings_path)
    sel = np.isclose(times, T, rtol=1e-12, atol=0.0)
    if not sel.any():
        raise ConfigError(f"{cfg.readings_path}: no readings at t={fmt_T(T)}")
    if nodes.shape[1] != cfg.dimension:
        raise ConfigError(f"{cfg.readings_path}: readings are {nodes.shape[1]}-D, config says {cfg.dimension}")
    got = nodes[sel]
    if got.shape != rule.nodes.shape or not np.allclose(got, rule.nodes, rtol=1e-12, atol=1e-12):
        raise ConfigError(
            f"{cfg.readings_path}: sensor positions at t={fmt_T(T)} do not match the "
            f"configured {rule.summary()} layout"
        )
    return values[sel]


@dataclass
class ExperimentReport:
    rows: list[dict]
    files: list[Path] = field(default_factory=list)
    timings: list[tuple[float, int, float]] = field(default_factory=list)


def _solve_task(args):
    """One (T, k) recovery; runs in a worker process when parallel."""
    T, k, z_vals, d, mesh, solver, metrics, truth = args
    t0 = time.perf_counter()
    row = {"T": T, "k": k}
    clustered = None
    mu = None
    try:
        z = MomentVector(d, k, z_vals)
        res = recover_initial(z, mesh, pivot_tol=solver.pivot_tol, max_iters=solver.max_iters)
        mu = res.measure
        row.update(
            status=res.status,
            tv=res.tv,
            residual=res.residual,
            rel_residual=res.relative_residual,
            atom_count=res.atom_count,
            mass=math.fsum(mu.amplitudes),
            tv_bound_ok=satisfies_apriori_bound(res, d, mesh.R),
        )
        scored = mu
        if metrics.cluster_threshold > 0:
            clustered = cluster(mu, metrics.cluster_threshold, metrics.ground_metric)
            scored = clustered
            row["cluster_count"] = len(clustered)
        if truth is not None:
            row["mass_error"] = abs(row["mass"] - math.fsum(truth.amplitudes))
            row["kantorovich"] = kantorovich_norm(scored - truth, metrics.ground_metric)
            try:
                row["w1"] = w1_distance(scored, truth, metrics.ground_metric)
                row["w1_status"] = "ok"
            except MassMismatchError:
                row["w1"] = None
                row["w1_status"] = "mass_mismatch"
    except Exception as exc:  # isolated per (T, k)
        row["status"] = f"error:{type(exc).__name__}"
        row["message"] = str(exc)
        mu = clustered = None
    return row, mu, clustered, 1000.0 * (time.perf_counter() - t0)


def _write_csv(path: Path, header: list[str], rows) -> Path:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _rel_err(approx: float, exact: float) -> float:
    return abs(approx - exact) / abs(exact) if exact != 0 else abs(approx)


def _quadrature_figures(cfg: ExperimentConfig, out: Path, observed: dict) -> list[Path]:
    """Plot data: quadrature error of the fourth moment vs n and vs T, and
    the time-zero moment error vs k."""
    files = []
    truth = cfg.truth
    f = cfg.figures
    if truth is None or cfg.dimension != 1 or not f.enabled:
        return files
    L = f.uniform_L
    T = f.T_fixed
    exact4 = float(heat_moments_exact(truth, 4, T).values[4])
    rows = []
    for n in range(1, f.n_max + 1):
        gh = gh_sensors(n, T)
        e_gh = _rel_err(observe_moments(gh, sample_readings(truth, gh.nodes, T), 4, T).y.values[4], exact4)
        e_un = None
        if n >= 2:
            un = uniform_sensors(L, n, placement=cfg.quadrature.placement)
            e_un = _rel_err(observe_moments(un, sample_readings(truth, un.nodes, T), 4, T).y.values[4], exact4)
        rows.append((n, T, e_gh, e_un))
    files.append(_write_csv(out / "quad_error_vs_n.csv", ["n", "T", "gauss_hermite", "uniform"], rows))

    rows = []
    n = f.n_fixed
    for T in f.T_values:
        exact4 = float(heat_moments_exact(truth, 4, T).values[4])
        gh = gh_sensors(n, T)
        un = uniform_sensors(L, n, placement=cfg.quadrature.placement)
        e_gh = _rel_err(observe_moments(gh, sample_readings(truth, gh.nodes, T), 4, T).y.values[4], exact4)
        e_un = _rel_err(observe_moments(un, sample_readings(truth, un.nodes, T), 4, T).y.values[4], exact4)
        rows.append((T, n, e_gh, e_un))
    files.append(_write_csv(out / "quad_error_vs_T.csv", ["T", "n", "gauss_hermite", "uniform"], rows))

    rows = []
    kmax = cfg.k_max
    m0 = exact_moments(truth, kmax).values
    for T in cfg.T:
        y = observed.get(T)
        if y is None:
            continue
        for k in cfg.k_values:
            z = invert_moments(y.truncate(k), T, build_A(1, k)).values
            rows.append((T, k, float(np.max(np.abs(z - m0[: k + 1]))), float(abs(z[k] - m0[k]))))
    files.append(_write_csv(out / "moment0_error_vs_k.csv", ["T", "k", "error_inf", "error_k"], rows))
    return files


SUMMARY_BASE = ["T", "k", "status", "tv", "residual", "rel_residual", "atom_count", "mass", "tv_bound_ok"]
SUMMARY_TRUTH = ["mass_error", "w1", "w1_status", "kantorovich"]
SUMMARY_TAIL = ["auto_k", "best_w1"]


def run_experiment(
    cfg: ExperimentConfig,
    out_dir=None,
    parallel: int = 1,
) -> ExperimentReport:
    """Full sweep; writes summary.csv plus every artifact listed in manifest.txt."""
    out = Path(out_dir) if out_dir is not None else cfg.output_dir
    for sub in ("atoms", "moments", "readings"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    files: list[Path] = []
    mesh = build_mesh(cfg)
    table = read_readings_csv(cfg.readings_path) if cfg.readings_path is not None else None
    truth = cfg.truth

    observed: dict[float, MomentVector] = {}
    obs_error: dict[float, str] = {}
    tasks = []
    for T in cfg.T:
        try:
            rule = build_rule(cfg, T)
            vals = readings_for(cfg, T, rule, table)
            if cfg.readings_path is None:
                p = out / "readings" / f"readings_T{fmt_T(T)}.csv"
                write_readings_csv(rule.nodes, T, vals, p)
                files.append(p)
            y = observe_moments(rule, vals, cfg.k_max, T).y
        except ConfigError:
            raise
        except Exception as exc:
            log.warning("observation failed at T=%s: %s", fmt_T(T), exc)
            obs_error[T] = f"error:{type(exc).__name__}"
            continue
        observed[T] = y
        p = out / "moments" / f"observed_T{fmt_T(T)}.csv"
        write_moments_csv(y, p)
        files.append(p)
        for k in cfg.k_values:
            try:
                z = invert_moments(y.truncate(k), T, build_A(cfg.dimension, k))
            except Exception as exc:
                tasks.append(("fail", T, k, f"error:{type(exc).__name__}"))
                continue
            p = out / "moments" / f"initial_T{fmt_T(T)}_k{k}.csv"
            write_moments_csv(z, p)
            files.append(p)
            tasks.append(("ok", T, k, (T, k, z.values, cfg.dimension, mesh, cfg.solver, cfg.metrics, truth)))

    jobs = [t[3] for t in tasks if t[0] == "ok"]
    log.info("running %d recoveries on a %d-point mesh", len(jobs), len(mesh))
    if parallel > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(_solve_task, jobs))
    else:
        results = [_solve_task(j) for j in jobs]
    by_key = {(r[0]["T"], r[0]["k"]): r for r in results}

    rows, timings = [], []
    for T in cfg.T:
        for k in cfg.k_values:
            if T in obs_error:
                rows.append({"T": T, "k": k, "status": obs_error[T]})
                continue
            hit = by_key.get((T, k))
            if hit is None:
                status = next(t[3] for t in tasks if t[0] == "fail" and t[1] == T and t[2] == k)
                rows.append({"T": T, "k": k, "status": status})
                continue
            row, mu, clustered, ms = hit
            timings.append((T, k, ms))
            if mu is not None:
                p = out / "atoms" / atoms_filename(T, k)
                write_atoms_csv(mu, p)
                files.append(p)
            if clustered is not None:
                p = out / "atoms" / atoms_filename(T, k, "clustered")
                write_atoms_csv(clustered, p)
                files.append(p)
            rows.append(row)

    # per-T annotations: auto-selected order and the W1-minimising order
    for T in cfg.T:
        mine = [r for r in rows if r["T"] == T]
        tvs = [r.get("tv", float("nan")) if r["status"] == "optimal" else float("nan") for r in mine]
        sel = auto_select_k(tvs, cfg.rho) if cfg.auto_k and np.isfinite(tvs[0]) else None
        w1s = [r.get("w1") for r in mine]
        finite = [i for i, w in enumerate(w1s) if w is not None and np.isfinite(w)]
        best = min(finite, key=lambda i: w1s[i]) if finite else None
        for i, r in enumerate(mine):
            r["auto_k"] = sel is not None and i == sel
            r["best_w1"] = best is not None and i == best

    header = SUMMARY_BASE + (SUMMARY_TRUTH if truth is not None else []) + SUMMARY_TAIL
    if cfg.metrics.cluster_threshold > 0:
        header.insert(header.index("atom_count") + 1, "cluster_count")
    files.append(_write_csv(out / "summary.csv", header, ([r.get(h) for h in header] for r in rows)))
    files.append(_write_csv(out / "timings.csv", ["T", "k", "wall_ms"], timings))
    if truth is not None:
        files.append(_write_csv(
            out / "w1_vs_k.csv",
            ["T", "k", "w1", "kantorovich"],
            ([r["T"], r["k"], r.get("w1"), r.get("kantorovich")] for r in rows),
        ))
        files.extend(_quadrature_figures(cfg, out, observed))
    manifest = out / "manifest.txt"
    manifest.write_text("".join(f"{p.relative_to(out).as_posix()}\n" for p in files + [manifest]),
                        encoding="utf-8")
    files.append(manifest)
    return ExperimentReport(rows, files, timings)
