"""Acceptance criteria, one test each. Every test prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines appear uncaptured)
or directly with ``python tests/test_acceptance.py``.
"""
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from measure_forge.analysis import (STRONG_DUALITY_RTOL, certify_bounds, equivalence_check,
                                    reference_optima)
from measure_forge.cgm import SolverConfig, cgm_run
from measure_forge.cli import ExperimentConfig, NoiseSpec, run_experiment
from measure_forge.em import em_run
from measure_forge.fcsolver import (recover_dual, solve_restricted_dual_oracle,
                                    solve_restricted_primal)

from conftest import random_small_problem, spike_problem
from property_suites import SUITES

GAMMA, RADIUS = 1.0, math.sqrt(33)


def report(capsys, number, title, ok, detail, elapsed, budget):
    ok = ok and elapsed < budget
    line = (f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} -- {detail} "
            f"({elapsed:.2f}s, budget {budget:g}s)")
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


def spike_setup(iterations=50, grid=1000):
    problem = spike_problem()
    return problem, SolverConfig(grid=problem.dictionary.make_grid(grid),
                                 max_iterations=iterations)


def criterion_1(capsys=None):
    start = time.perf_counter()
    problem, cfg = spike_setup(30)
    rep = equivalence_check(cgm_run(problem, cfg), em_run(problem, cfg), tol=1e-8)
    detail = (f"{rep.iterations_compared} supports compared, match={rep.supports_match}, "
              f"max value discrepancy {rep.max_value_discrepancy:.1e}")
    return report(capsys, 1, "CGM/EM support and value identity", rep.passed and
                  rep.iterations_compared >= 1, detail, time.perf_counter() - start, 10)


def _certificates(kinds):
    problem, cfg = spike_setup(50)
    tc, te = cgm_run(problem, cfg), em_run(problem, cfg)
    refs = reference_optima(problem, cfg, 500)
    certs = [c for c in certify_bounds(tc, te, refs, GAMMA, RADIUS, 0.0) if c.kind in kinds]
    return certs


def criterion_2(capsys=None):
    start = time.perf_counter()
    certs = _certificates({"primal-rate-13"})
    bad = [c for c in certs if not c.lhs <= c.rhs]
    detail = f"{len(certs)} primal-rate certificates, {len(bad)} violated"
    return report(capsys, 2, "primal rate bound", bool(certs) and not bad, detail,
                  time.perf_counter() - start, 30)


def criterion_3(capsys=None):
    start = time.perf_counter()
    kinds = {"dual-rate-14", "lambda-rate-15", "alpha-rate-16", "feasibility-17"}
    certs = _certificates(kinds)
    bad = [c for c in certs if not c.satisfied]
    seen = {c.kind for c in certs}
    detail = f"{len(certs)} certificates over {len(seen)} families, {len(bad)} violated"
    return report(capsys, 3, "dual rate, iterate bounds and feasibility decay",
                  seen == kinds and not bad, detail, time.perf_counter() - start, 30)


def criterion_4(capsys=None):
    start = time.perf_counter()
    rng = np.random.default_rng(404)
    worst = 0.0
    cases = [random_small_problem(rng) for _ in range(20)] + [spike_problem()]
    for p in cases:
        grid = p.dictionary.make_grid(1000)
        refs = reference_optima(p, SolverConfig(grid=grid, max_iterations=25), 500)
        worst = max(worst, abs(refs.v_p - refs.v_d) / (STRONG_DUALITY_RTOL * (1 + abs(refs.v_p))))
    detail = f"{len(cases)} instances, worst |v_p - v_d| at {worst:.1e} of tolerance"
    return report(capsys, 4, "strong duality", worst <= 1.0, detail,
                  time.perf_counter() - start, 10)


def criterion_5(capsys=None):
    start = time.perf_counter()
    rng = np.random.default_rng(505)
    worst = 0.0
    for _ in range(20):
        p = random_small_problem(rng)
        T = p.dictionary.points
        if rng.uniform() < 0.5:
            T = np.sort(rng.choice(T, size=max(1, T.size // 3), replace=False))
        sol = solve_restricted_primal(p.dictionary, T, p.y)
        kkt = recover_dual(sol, T, p.dictionary, p.y)
        oracle = solve_restricted_dual_oracle(p.dictionary, T, p.y)
        worst = max(worst, abs(kkt.value - oracle.value) / (1 + abs(kkt.value)))
    detail = f"20 instances, worst relative discrepancy {worst:.1e} (tol 1e-4)"
    return report(capsys, 5, "KKT recovery vs subgradient oracle", worst <= 1e-4, detail,
                  time.perf_counter() - start, 20)


def criterion_6(capsys=None, out=None):
    import tempfile
    start = time.perf_counter()
    sweep = [100, 1000, 10_000]
    with tempfile.TemporaryDirectory() as tmp:
        base = Path(out or tmp)
        clean = run_experiment(ExperimentConfig(sweep=sweep, max_iterations=50),
                               base / "clean", timing=False)
        noisy = run_experiment(ExperimentConfig(sweep=sweep, max_iterations=50,
                                                noise=NoiseSpec("gaussian", 0.01, 0)),
                               base / "noisy", timing=False)
    by_grid = lambda s: [next(r for r in s["runs"] if r["grid"] == n) for n in sweep]
    w_clean = [r["cgm"]["final_wasserstein"] for r in by_grid(clean)]
    w_noisy = [r["cgm"]["final_wasserstein"] for r in by_grid(noisy)]
    monotone = all(b <= a for a, b in zip(w_clean, w_clean[1:]))
    band = max(w_noisy) / min(w_noisy)
    equivalent = all(r["equivalence"]["passed"] for r in clean["runs"] + noisy["runs"])
    ok = monotone and band <= 2.0 and equivalent and clean["ok"] and noisy["ok"]
    detail = (f"noise-free W1 {', '.join(f'{w:.2e}' for w in w_clean)}; noisy W1 "
              f"{', '.join(f'{w:.2e}' for w in w_noisy)} (band {band:.2f}x); "
              f"equivalence {'passed' if equivalent else 'FAILED'}")
    return report(capsys, 6, "grid-sweep recovery behaviour", ok, detail,
                  time.perf_counter() - start, 120)


def criterion_7(capsys=None):
    start = time.perf_counter()
    results = {name: suite() for name, suite in SUITES.items()}
    failed = [name for name, (ok, _) in results.items() if not ok]
    detail = f"{len(results)} suites, failed: {', '.join(failed) or 'none'}"
    return report(capsys, 7, "property suites", not failed, detail,
                  time.perf_counter() - start, 30)


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7]


@pytest.mark.parametrize("criterion", CRITERIA, ids=lambda f: f.__name__)
def test_acceptance(criterion, capsys):
    assert criterion(capsys)


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    sys.exit(0 if all(results) else 1)
