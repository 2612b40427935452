"""Acceptance criteria, one PASS/FAIL line each.

Every check runs at its stated tolerance. The lines are collected and shown
in the pytest terminal summary; each test also fails on its own when any
part of its criterion misses.
"""

import math
import time

import numpy as np

import conftest
from fsscrit.basis import basis_function, build_operator_pair
from fsscrit.fem import assemble, build_mesh, build_system
from fsscrit.fss import data_collapse
from fsscrit.hulthen import energy_level
from fsscrit.larged import extract_exponents
from fsscrit.numerics import gauss_laguerre

CSV_FILES = ("expectations.csv", "gamma_curves.csv", "pseudocritical.csv", "collapse.csv")


class Criterion:
    def __init__(self, number: int, title: str):
        self.number, self.title = number, title
        self.parts: list[tuple[str, bool]] = []

    def check(self, label: str, value: float, target: float, tol: float) -> None:
        ok = bool(abs(value - target) <= tol)
        self.parts.append((f"{label}={value:.6g} (want {target:g} ± {tol:g})", ok))

    def bound(self, label: str, value: float, op: str, limit: float) -> None:
        ok = bool(value < limit if op == "<" else value >= limit)
        self.parts.append((f"{label}={value:.6g} (want {op} {limit:g})", ok))

    def flag(self, label: str, ok: bool) -> None:
        self.parts.append((label, bool(ok)))

    def finish(self) -> None:
        passed = all(ok for _, ok in self.parts)
        detail = "; ".join(f"{text}{'' if ok else ' MISS'}" for text, ok in self.parts)
        line = f"[{'PASS' if passed else 'FAIL'}] {self.number}. {self.title}: {detail}"
        conftest.ACCEPTANCE_LINES.append(line)
        print(line)
        assert passed, line


def _fss_criterion(number, title, run, targets, runtime):
    c = Criterion(number, title)
    ex = run.extrapolated
    for key, (target, tol) in targets.items():
        c.check(key, ex[key], target, tol)
    c.bound("runtime_s", run.seconds, "<", runtime)
    c.finish()


def test_criterion_1_basis_table(basis_run):
    _fss_criterion(
        1, "basis set, sizes 8:48:2", basis_run,
        {"lambda_c": (0.49999, 2e-4), "alpha": (1.996, 0.02), "nu": (0.999, 0.01)}, 120,
    )


def test_criterion_2_hermite_table(hermite_run):
    _fss_criterion(
        2, "FEM Hermite, sizes 100:380:20, h=0.5", hermite_run,
        {"lambda_c": (0.5, 2e-4), "alpha": (2.0, 0.01), "nu": (1.0, 0.01)}, 600,
    )


def test_criterion_3_linear_table(linear_run):
    _fss_criterion(
        3, "FEM linear, sizes 100:380:20, h=0.5", linear_run,
        {"lambda_c": (0.5018, 1e-3), "alpha": (2.0, 0.02), "nu": (1.001, 0.01)}, 300,
    )


def test_criterion_4_analytic_oracle():
    c = Criterion(4, "analytic oracle")
    exact = energy_level(1, 1.0)
    c.bound("|E1 basis N=48 - exact|", abs(build_operator_pair(48).ground_point(1.0).energy - exact), "<", 1e-6)
    c.bound("|E1 Hermite M=100 - exact|", abs(build_system(100, "hermite-quintic").ground_point(1.0).energy - exact), "<", 1e-6)
    c.bound("|E1 linear M=100 - exact|", abs(build_system(100, "linear").ground_point(1.0).energy - exact), "<", 5e-3)
    d = np.logspace(-4, -2, 17)
    e = np.array([-energy_level(1, 0.5 + x) for x in d])
    c.check("threshold slope", np.polyfit(np.log(d), np.log(e), 1)[0], 2.0, 0.01)
    c.finish()


def _hellmann_feynman_worst(make, sizes, rng, points=20, step=1e-5):
    worst = 0.0
    cache = {}
    for _ in range(points):
        n = int(rng.choice(sizes))
        lam = float(rng.uniform(0.46, 0.56))
        model = cache.setdefault(n, make(n))
        gp = model.ground_point(lam)
        fd = (model.ground_point(lam + step).energy - model.ground_point(lam - step).energy) / (2 * step)
        worst = max(worst, abs(fd - gp.dv_expectation) / abs(gp.dv_expectation))
    return worst


def _observed_orders(order, hs, r_c=40.0):
    exact = energy_level(1, 1.0)
    errs = [abs(assemble(build_mesh(r_c, h), order).ground_point(1.0).energy - exact) for h in hs]
    return [math.log2(a / b) for a, b in zip(errs, errs[1:])]


def test_criterion_5_properties(basis_run):
    c = Criterion(5, "property suite")
    q = gauss_laguerre(200)
    phi = np.array([basis_function(n, q.nodes) * np.exp(q.nodes / 2) for n in range(49)])
    gram = 4 * math.pi * (phi * q.weights * q.nodes**2) @ phi.T
    c.bound("orthonormality err (n,m<=48)", float(np.max(np.abs(gram - np.eye(49)))), "<", 1e-10)

    rng = np.random.default_rng(20240601)
    hf = {
        "basis": _hellmann_feynman_worst(build_operator_pair, np.arange(8, 49, 2), rng),
        "linear": _hellmann_feynman_worst(lambda n: build_system(n, "linear"), np.arange(100, 381, 20), rng),
        "hermite": _hellmann_feynman_worst(lambda n: build_system(n, "hermite-quintic"), np.arange(100, 381, 20), rng),
    }
    for name, worst in hf.items():
        c.bound(f"HF rel err {name}", worst, "<", 1e-6)

    energy = basis_run.table.energy
    c.bound("max E(N+2)-E(N)", float(np.max(np.diff(energy, axis=0))), "<", 1e-12)

    # the finest pair is the most asymptotic estimate; quintic saturates at round-off below h=0.5
    linear = _observed_orders("linear", [0.5, 0.25, 0.125, 0.0625, 0.03125])
    hermite = _observed_orders("hermite-quintic", [2.0, 1.0, 0.5])
    c.bound("linear order", linear[-1], ">=", 2.0)
    c.bound("Hermite order", hermite[-1], ">=", 6.0)
    c.finish()


def test_criterion_6_collapse(basis_run, hermite_run):
    c = Criterion(6, "data collapse")
    for name, run, params in [
        ("basis", basis_run, (0.49999, 1.9960, 0.99910)),
        ("Hermite", hermite_run, (0.50000, 2.00011, 1.000322)),
    ]:
        good = data_collapse(run.table, *params).quality
        bad = data_collapse(run.table, params[0], params[1], 2.0).quality
        c.bound(f"{name} quality", good, "<", 1e-3)
        c.bound(f"{name} nu=2 degradation", bad / good, ">=", 10.0)
    c.finish()


def test_criterion_7_large_d():
    c = Criterion(7, "large-D mean field")
    start = time.perf_counter()
    exps = extract_exponents()
    elapsed = time.perf_counter() - start
    c.check("Z_c", exps.z_c, 1.41421, 1e-5)
    c.check("beta", exps.beta.value, 0.5, 0.01)
    c.check("delta", exps.delta.value, 3.0, 0.05)
    c.check("gamma", exps.gamma.value, 1.0, 0.02)
    c.check("alpha_E", exps.alpha_E.value, 2.0, 0.05)
    c.bound("runtime_s", elapsed, "<", 60)
    c.finish()


def test_criterion_8_determinism(basis_run, basis_run_threads8):
    c = Criterion(8, "determinism, threads 1 vs 8")
    for name in CSV_FILES:
        same = (basis_run.out / name).read_bytes() == (basis_run_threads8.out / name).read_bytes()
        c.flag(f"{name} {'identical' if same else 'differs'}", same)
    c.finish()
