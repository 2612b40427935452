import json
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import pytest

from fsscrit.fss import ExpectationTable
from fsscrit.pipeline import RunConfig, build_table, make_evaluator, run_fss


@dataclass
class FssRun:
    out: Path
    report: dict
    table: ExpectationTable
    seconds: float

    @property
    def extrapolated(self) -> dict:
        return self.report["results"]["extrapolated"]

    @property
    def entries(self) -> list[dict]:
        return self.report["results"]["pseudocritical"]


def _fss(tmp_path_factory, name, **kwargs) -> FssRun:
    out = tmp_path_factory.mktemp(name)
    start = time.perf_counter()
    run_fss(RunConfig(output_dir=str(out), **kwargs))
    seconds = time.perf_counter() - start
    report = json.loads((out / "fss_report.json").read_text())
    table = ExpectationTable.from_csv(out / "expectations.csv", kwargs["method"])
    return FssRun(out, report, table, seconds)


@pytest.fixture(scope="session")
def basis_run(tmp_path_factory):
    return _fss(tmp_path_factory, "basis1", method="basis", sizes=(8, 48, 2), threads=1)


@pytest.fixture(scope="session")
def basis_run_threads8(tmp_path_factory):
    return _fss(tmp_path_factory, "basis8", method="basis", sizes=(8, 48, 2), threads=8)


@pytest.fixture(scope="session")
def hermite_run(tmp_path_factory):
    return _fss(tmp_path_factory, "hermite", method="fem-hermite", sizes=(100, 380, 20), h=0.5)


@pytest.fixture(scope="session")
def linear_run(tmp_path_factory):
    return _fss(tmp_path_factory, "linear", method="fem-linear", sizes=(100, 380, 20), h=0.5)


@pytest.fixture(scope="session")
def basis_models():
    """Basis models for 40, 42, 44 and a fine grid around threshold."""
    cfg = RunConfig(method="basis", sizes=(40, 44, 2), lambda_grid=(0.49, 0.51, 2001), threads=1)
    table, models, _ = build_table(cfg)
    return table, make_evaluator(models)


def scaling_table(sizes=(10, 12, 14, 16, 18), lambdas=None) -> ExpectationTable:
    """E = -N^-2 e^{N(λ - ½)} and its exact λ-derivative: (λc, α, ν) = (½, 2, 1)."""
    lambdas = np.linspace(0.46, 0.56, 1001) if lambdas is None else lambdas
    n = np.array(sizes, dtype=float)[:, None]
    x = n * (lambdas[None, :] - 0.5)
    return ExpectationTable("synthetic", tuple(sizes), lambdas, -np.exp(x) / n**2, -np.exp(x) / n)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
