"""Run orchestration: sweeps, analysis and persisted outputs.

Every data file is a plain CSV with a one-line header and repr-formatted
floats. Wall-clock content (timestamps, per-size timings) lives only in the
``header`` block of the JSON report, so all CSVs and the rest of the report
depend on the configuration and package version alone.
"""

from __future__ import annotations

import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from contextlib import contextmanager
from dataclasses import asdict, dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, Iterator

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from .basis import build_operator_pair
from .errors import ConfigError, FssError, MissingInputError, NumericalError
from .fem import assemble, build_mesh, mesh_for_size
from .fss import (
    ExpectationTable,
    data_collapse,
    gamma_curve,
    pseudocritical_sequence,
)
from .hulthen import correlation_length, energy_level, max_bound_level
from .larged import extract_exponents, minimize_ground

log = logging.getLogger(__name__)

METHODS = ("analytic", "basis", "fem-linear", "fem-hermite", "large-d")
TABLE_METHODS = ("basis", "fem-linear", "fem-hermite")
FEM_ORDERS = {"fem-linear": "linear", "fem-hermite": "hermite-quintic"}
DEFAULT_SIZES = {
    "basis": (8, 48, 2),
    "fem-linear": (100, 380, 20),
    "fem-hermite": (100, 380, 20),
}
DEFAULT_LAMBDA = (0.46, 0.56, 1001)
DEFAULT_Z = (1.0, 2.0, 101)
R_C_POLICIES = ("grow", "fixed")

EXPECTATIONS = "expectations.csv"
GAMMA = "gamma_curves.csv"
PSEUDOCRITICAL = "pseudocritical.csv"
COLLAPSE = "collapse.csv"
LARGED = "larged.csv"
ANALYTIC = "analytic.csv"
REPORT = "{command}_report.json"


@dataclass(frozen=True)
class RunConfig:
    """One run's settings.

    ``sizes`` is (min, max, step) of the size ladder and ``lambda_grid`` is
    (min, max, count). With the ``grow`` cutoff policy FEM size M uses
    elements of length ``h`` out to r_c = M·h; with ``fixed`` the cutoff is
    ``r_c`` and the ladder refines h = r_c/M.
    """

    method: str = "basis"
    sizes: tuple[int, int, int] | None = None
    lambda_grid: tuple[float, float, int] = DEFAULT_LAMBDA
    h: float = 0.5
    r_c_policy: str = "grow"
    r_c: float = 50.0
    output_dir: str = "fsscrit-out"
    threads: int | str = "auto"
    z_grid: tuple[float, float, int] = DEFAULT_Z
    lambda_c: float | None = None
    alpha: float | None = None
    nu: float | None = None
    recompute: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {', '.join(METHODS)}")
        if self.sizes is not None:
            lo, hi, step = self.sizes
            if step <= 0 or lo <= 0 or hi < lo:
                raise ConfigError(f"invalid size ladder {lo}:{hi}:{step}")
        lo, hi, count = self.lambda_grid
        if count < 2 or not hi > lo:
            raise ConfigError(f"invalid λ-grid {lo}:{hi}:{count} (need max > min, count >= 2)")
        zlo, zhi, zcount = self.z_grid
        if zcount < 1 or zhi < zlo:
            raise ConfigError(f"invalid Z-grid {zlo}:{zhi}:{zcount}")
        if not self.h > 0:
            raise ConfigError(f"h must be positive, got {self.h}")
        if self.r_c_policy not in R_C_POLICIES:
            raise ConfigError(f"r_c policy must be one of {R_C_POLICIES}, got {self.r_c_policy!r}")
        if not self.r_c > 0:
            raise ConfigError(f"r_c must be positive, got {self.r_c}")
        if self.threads != "auto" and (not isinstance(self.threads, int) or self.threads < 1):
            raise ConfigError(f"threads must be a positive integer or 'auto', got {self.threads!r}")

    @property
    def ladder(self) -> tuple[int, ...]:
        lo, hi, step = self.sizes or DEFAULT_SIZES.get(self.method, (0, -1, 1))
        return tuple(range(lo, hi + 1, step))

    @property
    def lambdas(self) -> np.ndarray:
        lo, hi, count = self.lambda_grid
        return np.linspace(lo, hi, count)

    @property
    def workers(self) -> int:
        if self.threads == "auto":
            return os.cpu_count() or 1
        return int(self.threads)

    def echo(self) -> dict:
        out = asdict(self)
        out["sizes"] = list(self.sizes or DEFAULT_SIZES.get(self.method, ())) or None
        return out


@dataclass
class RunReport:
    command: str
    config: dict
    results: dict = field(default_factory=dict)
    manifest: list[str] = field(default_factory=list)
    timings: dict = field(default_factory=dict)
    started: str = ""

    def write(self, directory: Path) -> Path:
        name = REPORT.format(command=self.command)
        self.manifest = sorted(set(self.manifest) | {name})
        doc = {
            # the only non-reproducible block
            "header": {"started": self.started, "timings_s": self.timings},
            "version": __version__,
            "command": self.command,
            "config": self.config,
            "results": _jsonable(self.results),
            "manifest": self.manifest,
        }
        path = directory / name
        path.write_text(json.dumps(doc, indent=2, sort_keys=True, allow_nan=False) + "\n")
        return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


class StageError(FssError):
    """Wraps a failure with the name of the pipeline stage that raised it."""

    def __init__(self, stage: str, cause: FssError):
        super().__init__(f"stage '{stage}': {cause}")
        self.stage = stage
        self.cause = cause


@contextmanager
def stage(name: str) -> Iterator[None]:
    try:
        yield
    except StageError:
        raise
    except FssError as exc:
        raise StageError(name, exc) from exc
    except (np.linalg.LinAlgError, FloatingPointError, ZeroDivisionError) as exc:
        raise StageError(name, NumericalError(str(exc))) from exc


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        out.writerows(rows)


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


# ---------------------------------------------------------------------------
# Models and the expectation sweep
# ---------------------------------------------------------------------------


def build_model(config: RunConfig, size: int):
    """Operator pair (basis) or assembled system (FEM) for one ladder size."""
    if config.method == "basis":
        return build_operator_pair(size)
    if config.method in FEM_ORDERS:
        order = FEM_ORDERS[config.method]
        if config.r_c_policy == "grow":
            mesh = mesh_for_size(size, config.h)
        else:
            mesh = build_mesh(config.r_c, config.r_c / size)
        return assemble(mesh, order)
    raise ConfigError(f"method {config.method!r} has no size ladder")


def _sweep(model, lambdas: np.ndarray) -> tuple[np.ndarray, np.ndarray, float]:
    start = time.perf_counter()
    energy = np.empty(len(lambdas))
    dv = np.empty(len(lambdas))
    for j, lam in enumerate(lambdas):
        gp = model.ground_point(float(lam))
        energy[j], dv[j] = gp.energy, gp.dv_expectation
    return energy, dv, time.perf_counter() - start


def build_table(config: RunConfig) -> tuple[ExpectationTable, dict, dict[int, float]]:
    """Expectation table over the ladder, one worker task per size.

    Results are collected by ladder position, so the table does not depend
    on the worker count. BLAS is pinned to one thread for the same reason.
    """
    sizes = config.ladder
    if len(sizes) < 3:
        raise ConfigError(f"need at least 3 sizes for a pseudocritical sequence, got {len(sizes)}")
    lambdas = config.lambdas
    models = {}
    with threadpool_limits(limits=1):
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            built = list(pool.map(lambda n: build_model(config, n), sizes))
            models = dict(zip(sizes, built))
            sweeps = list(pool.map(lambda m: _sweep(m, lambdas), built))
    energy = np.array([s[0] for s in sweeps])
    dv = np.array([s[1] for s in sweeps])
    timings = {n: round(s[2], 3) for n, s in zip(sizes, sweeps)}
    table = ExpectationTable(config.method, sizes, lambdas, energy, dv)
    return table, models, timings


def make_evaluator(models: dict) -> Callable[[int, float], tuple[float, float]]:
    def evaluate(n: int, lam: float) -> tuple[float, float]:
        gp = models[n].ground_point(lam)
        return gp.energy, gp.dv_expectation

    return evaluate


# ---------------------------------------------------------------------------
# Writers
# ---------------------------------------------------------------------------


def write_gamma_curves(table: ExpectationTable, path: Path) -> None:
    rows = []
    for n, m in zip(table.sizes, table.sizes[1:]):
        curve = gamma_curve(table, n, m)
        for lam, g in zip(curve.lambdas, curve.values):
            rows.append([n, m, _fmt(lam), _fmt(g) if math.isfinite(g) else "nan"])
    _write_csv(path, ["N", "Nprime", "lambda", "gamma"], rows)


def write_pseudocritical(seq, path: Path) -> None:
    rows = [
        [e.n, _fmt(1.0 / e.n), _fmt(e.lambda_c), _fmt(e.alpha), _fmt(e.nu)] for e in seq.entries
    ]
    _write_csv(path, ["N", "inv_N", "lambda_c", "alpha", "nu"], rows)


def write_collapse(dataset, path: Path) -> None:
    rows = []
    for n in sorted(dataset.x):
        rows.extend([n, _fmt(x), _fmt(y)] for x, y in zip(dataset.x[n], dataset.y[n]))
    _write_csv(path, ["N", "x", "y"], rows)


def _sequence_results(seq) -> dict:
    out = {
        "pseudocritical": [
            {
                "N": e.n,
                "Nprime": e.n_prime,
                "Nsecond": e.n_second,
                "lambda_c": e.lambda_c,
                "alpha": e.alpha,
                "nu": e.nu,
            }
            for e in seq.entries
        ],
        "extrapolated": None,
    }
    if seq.extrapolated is not None:
        out["extrapolated"] = asdict(seq.extrapolated)
    return out


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def _output_dir(config: RunConfig) -> Path:
    path = Path(config.output_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from exc
    return path


def run_fss(config: RunConfig) -> RunReport:
    """Sweep the ladder, locate pseudocritical points, extrapolate, score the collapse."""
    if config.method not in TABLE_METHODS:
        raise StageError("config", ConfigError(f"fss needs a numerical method, got {config.method!r}"))
    if len(config.ladder) < 3:
        raise StageError(
            "config", ConfigError(f"need at least 3 sizes for a pseudocritical sequence, got {len(config.ladder)}")
        )
    out = _output_dir(config)
    report = RunReport("fss", config.echo(), started=_now())
    with stage("sweep"):
        table, models, timings = build_table(config)
    report.timings = {"per_size": timings}
    table.to_csv(out / EXPECTATIONS)
    with stage("gamma-curves"):
        write_gamma_curves(table, out / GAMMA)
    with stage("pseudocritical"):
        with threadpool_limits(limits=1):
            seq = pseudocritical_sequence(table, make_evaluator(models))
        if not seq.entries:
            raise NumericalError("no Γ crossings found on the λ-grid")
    write_pseudocritical(seq, out / PSEUDOCRITICAL)
    report.results.update(_sequence_results(seq))
    report.manifest += [EXPECTATIONS, GAMMA, PSEUDOCRITICAL]
    if seq.extrapolated is not None:
        ex = seq.extrapolated
        with stage("collapse"):
            dataset = data_collapse(table, ex.lambda_c, ex.alpha, ex.nu)
        write_collapse(dataset, out / COLLAPSE)
        report.results["collapse"] = _collapse_results(dataset, "extrapolated")
        report.manifest.append(COLLAPSE)
    report.write(out)
    return report


def _collapse_results(dataset, source: str) -> dict:
    return {
        "lambda_c": dataset.lambda_c,
        "alpha": dataset.alpha,
        "nu": dataset.nu,
        "quality": dataset.quality,
        "parameters_from": source,
    }


def _prior_extrapolation(out: Path) -> dict | None:
    path = out / REPORT.format(command="fss")
    if not path.exists():
        return None
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError):
        return None
    return doc.get("results", {}).get("extrapolated")


def run_collapse(config: RunConfig) -> RunReport:
    """Rescale a stored (or recomputed) table and score the collapse.

    Parameters not overridden come from the extrapolated row of a prior
    ``fss`` report in the same directory, or else from a fresh
    pseudocritical analysis of the table.
    """
    out = _output_dir(config)
    report = RunReport("collapse", config.echo(), started=_now())
    table_path = out / EXPECTATIONS
    with stage("load-table"):
        if table_path.exists():
            table = ExpectationTable.from_csv(table_path, config.method)
            source = "file"
        elif config.recompute:
            if config.method not in TABLE_METHODS:
                raise ConfigError(f"cannot recompute a table for method {config.method!r}")
            table, _, timings = build_table(config)
            report.timings = {"per_size": timings}
            table.to_csv(table_path)
            report.manifest.append(EXPECTATIONS)
            source = "recomputed"
        else:
            raise MissingInputError(f"{table_path} not found and recomputation is disabled")
    report.results["table"] = source

    params = {"lambda_c": config.lambda_c, "alpha": config.alpha, "nu": config.nu}
    origin = "override"
    if any(v is None for v in params.values()):
        with stage("parameters"):
            prior = _prior_extrapolation(out)
            if prior is None:
                seq = pseudocritical_sequence(table)
                if seq.extrapolated is None:
                    raise NumericalError("too few crossings to extrapolate collapse parameters")
                prior = asdict(seq.extrapolated)
                origin = "table"
            else:
                origin = "report"
        params = {k: (v if v is not None else prior[k]) for k, v in params.items()}
        if all(getattr(config, k) is None for k in params):
            origin = "extrapolated-" + origin
    with stage("collapse"):
        dataset = data_collapse(table, params["lambda_c"], params["alpha"], params["nu"])
    write_collapse(dataset, out / COLLAPSE)
    report.results["collapse"] = _collapse_results(dataset, origin)
    report.manifest.append(COLLAPSE)
    report.write(out)
    return report


def run_larged(config: RunConfig) -> RunReport:
    """η(Z) curve on the Z-grid, the critical charge and the mean-field exponents."""
    out = _output_dir(config)
    report = RunReport("larged", replace(config, method="large-d").echo(), started=_now())
    zlo, zhi, count = config.z_grid
    grid = np.linspace(zlo, zhi, count)
    start = time.perf_counter()

    def solve(z):
        try:
            return minimize_ground(float(z))
        except FssError as exc:
            raise type(exc)(f"Z = {float(z)!r}: {exc}") from exc

    with stage("minimize"):
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            states = list(pool.map(solve, grid))
    rows = [
        [_fmt(s.Z), _fmt(s.r1), _fmt(s.r2), _fmt(s.eta), _fmt(s.energy), _fmt(s.hess_min)]
        for s in states
    ]
    _write_csv(out / LARGED, ["Z", "r1", "r2", "eta", "energy", "hess_min"], rows)
    with stage("exponents"):
        exps = extract_exponents()
    report.timings = {"total": round(time.perf_counter() - start, 3)}
    report.results = {
        "z_c": exps.z_c,
        "exponents": {
            name: asdict(getattr(exps, name))
            for name in ("beta", "alpha_E", "delta", "gamma", "beta_corrected")
        },
    }
    report.manifest.append(LARGED)
    report.write(out)
    return report


def run_analytic(config: RunConfig) -> RunReport:
    """Closed-form levels E1..E3, bound-level count and ξ on the λ-grid."""
    out = _output_dir(config)
    report = RunReport("analytic", replace(config, method="analytic").echo(), started=_now())

    def cell(value):
        return "nan" if value is None else _fmt(value)

    rows = []
    with stage("analytic"):
        for lam in config.lambdas:
            lam = float(lam)
            levels = [energy_level(n, lam) for n in (1, 2, 3)]
            xi = correlation_length(lam) if levels[0] is not None else None
            rows.append([_fmt(lam), max_bound_level(lam), *map(cell, levels), cell(xi)])
    _write_csv(out / ANALYTIC, ["lambda", "n_max", "E1", "E2", "E3", "xi"], rows)
    report.results = {"lambda_c": [0.5, 2.0, 4.5], "alpha": 2.0, "nu": 1.0}
    report.manifest.append(ANALYTIC)
    report.write(out)
    return report
