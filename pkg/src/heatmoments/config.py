"""Experiment configuration: TOML parsing and validation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

import numpy as np

from .measures import AtomicMeasure

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "bundled_configs"]


class ConfigError(ValueError):
    """Invalid or inconsistent configuration; ``errors`` lists every problem found."""

    def __init__(self, errors):
        self.errors = list(errors) if not isinstance(errors, str) else [errors]
        super().__init__("; ".join(self.errors))


@dataclass(frozen=True)
class MeshSpec:
    type: str = "uniform"
    n_per_axis: int = 101
    # Padua degree; defaults to the largest even k <= k_max
    degree: int | None = None


@dataclass(frozen=True)
class QuadratureSpec:
    method: str = "gauss_hermite"
    n: int = 100
    L: float = 50.0
    placement: str = "endpoints"


@dataclass(frozen=True)
class SolverSpec:
    pivot_tol: float = 1e-9
    max_iters: int | None = None


@dataclass(frozen=True)
class MetricsSpec:
    cluster_threshold: float = 0.0
    ground_metric: str = "euclidean"


@dataclass(frozen=True)
class FigureSpec:
    enabled: bool = True
    T_fixed: float = 10.0
    n_max: int = 100
    n_fixed: int = 100
    T_values: tuple[float, ...] = (1.0, 2.0, 5.0, 10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)
    uniform_L: float = 50.0


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    dimension: int
    R: float
    T: tuple[float, ...]
    k_values: tuple[int, ...]
    auto_k: bool = True
    rho: float = 5.0
    mesh: MeshSpec = field(default_factory=MeshSpec)
    quadrature: QuadratureSpec = field(default_factory=QuadratureSpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    metrics: MetricsSpec = field(default_factory=MetricsSpec)
    figures: FigureSpec = field(default_factory=FigureSpec)
    truth: AtomicMeasure | None = None
    readings_path: Path | None = None
    seed: int = 0
    noise: float = 0.0
    output_dir: Path = Path("out")

    @property
    def k_max(self) -> int:
        return max(self.k_values)

    def with_overrides(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_TOP_KEYS = {
    "name", "dimension", "R", "T", "k", "k_sweep", "mesh", "quadrature", "solver",
    "metrics", "figures", "truth", "readings", "seed", "noise", "output_dir",
}


def _section(raw: dict, key: str, errors: list, allowed: set) -> dict:
    sec = raw.get(key, {})
    if not isinstance(sec, dict):
        errors.append(f"[{key}] must be a table")
        return {}
    for extra in sorted(set(sec) - allowed):
        errors.append(f"unknown key {key}.{extra}")
    return sec


def parse_config(raw: dict, base_dir: Path | None = None, name: str = "experiment") -> ExperimentConfig:
    """Validate a decoded TOML document and build an :class:`ExperimentConfig`."""
    errors: list[str] = []
    base_dir = Path(base_dir) if base_dir is not None else Path.cwd()
    for extra in sorted(set(raw) - _TOP_KEYS):
        errors.append(f"unknown key {extra}")

    d = raw.get("dimension")
    if not isinstance(d, int) or isinstance(d, bool) or not 1 <= d <= 3:
        errors.append(f"dimension must be 1, 2 or 3 (got {d!r})")
        d = 1
    R = raw.get("R")
    if not isinstance(R, (int, float)) or isinstance(R, bool) or not R > 0:
        errors.append(f"R must be a positive number (got {R!r})")
        R = 1.0

    T = raw.get("T")
    if isinstance(T, (int, float)) and not isinstance(T, bool):
        T = [T]
    if not isinstance(T, list) or not T or not all(isinstance(t, (int, float)) and t > 0 for t in T):
        errors.append(f"T must be a positive number or a non-empty list of them (got {T!r})")
        T = [1.0]

    auto, rho = False, 5.0
    if "k" in raw and "k_sweep" in raw:
        errors.append("give either k or [k_sweep], not both")
    if "k_sweep" in raw:
        ks = _section(raw, "k_sweep", errors, {"max", "min", "auto", "rho"})
        kmax, kmin = ks.get("max"), ks.get("min", 0)
        if not isinstance(kmax, int) or kmax < 0:
            errors.append(f"k_sweep.max must be a nonnegative integer (got {kmax!r})")
            kmax = 0
        if not isinstance(kmin, int) or not 0 <= kmin <= kmax:
            errors.append(f"k_sweep.min must be an integer in [0, max] (got {kmin!r})")
            kmin = 0
        k_values = tuple(range(kmin, kmax + 1))
        auto = bool(ks.get("auto", True))
        rho = ks.get("rho", 5.0)
        if not isinstance(rho, (int, float)) or rho <= 1:
            errors.append(f"k_sweep.rho must exceed 1 (got {rho!r})")
            rho = 5.0
    else:
        k = raw.get("k")
        if isinstance(k, int) and not isinstance(k, bool):
            k = [k]
        if not isinstance(k, list) or not k or not all(isinstance(v, int) and v >= 0 for v in k):
            errors.append(f"k must be a nonnegative integer or list of them, or give [k_sweep] (got {k!r})")
            k = [0]
        k_values = tuple(sorted(set(k)))

    m = _section(raw, "mesh", errors, {"type", "n_per_axis", "degree"})
    mesh = MeshSpec(m.get("type", "uniform"), m.get("n_per_axis", 101), m.get("degree"))
    if mesh.type not in ("uniform", "padua"):
        errors.append(f"mesh.type must be 'uniform' or 'padua' (got {mesh.type!r})")
    if mesh.type == "uniform" and (not isinstance(mesh.n_per_axis, int) or mesh.n_per_axis < 1):
        errors.append(f"mesh.n_per_axis must be a positive integer (got {mesh.n_per_axis!r})")
    if mesh.type == "padua" and d != 2:
        errors.append("Padua meshes are two-dimensional")

    q = _section(raw, "quadrature", errors, {"method", "n", "L", "placement"})
    quad = QuadratureSpec(q.get("method", "gauss_hermite"), q.get("n", 100), float(q.get("L", 50.0)),
                          q.get("placement", "endpoints"))
    if quad.method not in ("gauss_hermite", "uniform"):
        errors.append(f"quadrature.method must be 'gauss_hermite' or 'uniform' (got {quad.method!r})")
    if not isinstance(quad.n, int) or quad.n < 1:
        errors.append(f"quadrature.n must be a positive integer (got {quad.n!r})")
    if quad.placement not in ("endpoints", "midpoints"):
        errors.append(f"quadrature.placement must be 'endpoints' or 'midpoints' (got {quad.placement!r})")

    s = _section(raw, "solver", errors, {"pivot_tol", "max_iters"})
    max_iters = s.get("max_iters")
    solver = SolverSpec(float(s.get("pivot_tol", 1e-9)), int(max_iters) if max_iters else None)
    if not solver.pivot_tol > 0:
        errors.append("solver.pivot_tol must be positive")

    mt = _section(raw, "metrics", errors, {"cluster_threshold", "ground_metric"})
    metrics = MetricsSpec(float(mt.get("cluster_threshold", 0.0)), mt.get("ground_metric", "euclidean"))
    if metrics.cluster_threshold < 0:
        errors.append("metrics.cluster_threshold must be >= 0 (0 disables clustering)")
    if metrics.ground_metric not in ("euclidean", "linf"):
        errors.append(f"metrics.ground_metric must be 'euclidean' or 'linf' (got {metrics.ground_metric!r})")

    f = _section(raw, "figures", errors, {"enabled", "T_fixed", "n_max", "n_fixed", "T_values", "uniform_L"})
    figures = FigureSpec()
    figures = FigureSpec(
        bool(f.get("enabled", figures.enabled)),
        float(f.get("T_fixed", figures.T_fixed)),
        int(f.get("n_max", figures.n_max)),
        int(f.get("n_fixed", figures.n_fixed)),
        tuple(float(t) for t in f.get("T_values", figures.T_values)),
        float(f.get("uniform_L", figures.uniform_L)),
    )

    truth = None
    readings = None
    if "truth" in raw:
        t = _section(raw, "truth", errors, {"positions", "amplitudes"})
        try:
            pos = np.asarray(t["positions"], dtype=float)
            amp = np.asarray(t["amplitudes"], dtype=float)
            if pos.ndim == 1:
                pos = pos.reshape(-1, 1) if d == 1 else pos.reshape(-1, d)
            truth = AtomicMeasure(pos, amp, dim=d)
        except (KeyError, ValueError, TypeError) as exc:
            errors.append(f"truth: {exc}")
    if "readings" in raw:
        r = _section(raw, "readings", errors, {"path"})
        if "path" not in r:
            errors.append("readings.path is required")
        else:
            readings = Path(r["path"])
            if not readings.is_absolute():
                readings = base_dir / readings
    if truth is None and readings is None:
        errors.append("either [truth] or [readings] must be given")

    seed = raw.get("seed", 0)
    if not isinstance(seed, int):
        errors.append(f"seed must be an integer (got {seed!r})")
        seed = 0
    noise = raw.get("noise", 0.0)
    if not isinstance(noise, (int, float)) or noise < 0 or not math.isfinite(noise):
        errors.append(f"noise must be a finite number >= 0 (got {noise!r})")
        noise = 0.0

    if errors:
        raise ConfigError(errors)
    return ExperimentConfig(
        name=str(raw.get("name", name)),
        dimension=d,
        R=float(R),
        T=tuple(float(t) for t in T),
        k_values=k_values,
        auto_k=auto,
        rho=float(rho),
        mesh=mesh,
        quadrature=quad,
        solver=solver,
        metrics=metrics,
        figures=figures,
        truth=truth,
        readings_path=readings,
        seed=seed,
        noise=float(noise),
        output_dir=Path(raw.get("output_dir", f"out/{raw.get('name', name)}")),
    )


def bundled_configs() -> list[str]:
    pkg = resources.files("heatmoments") / "configs"
    return sorted(p.name[:-5] for p in pkg.iterdir() if p.name.endswith(".toml"))


def load_config(source) -> ExperimentConfig:
    """Load a config from a TOML path, or by name from the bundled set."""
    path = Path(source)
    if path.is_file():
        text, base, name = path.read_text(encoding="utf-8"), path.parent, path.stem
    else:
        res = resources.files("heatmoments") / "configs" / f"{source}.toml"
        if not res.is_file():
            raise ConfigError(f"no config file {source!r} and no bundled config of that name "
                              f"(bundled: {', '.join(bundled_configs())})")
        text, base, name = res.read_text(encoding="utf-8"), Path.cwd(), str(source)
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    return parse_config(raw, base_dir=base, name=name)
