"""Randomized property suites. Each returns ``(ok, detail)``.

Run standalone with ``pytest tests/test_properties.py``.
"""
import numpy as np

from measure_forge.analysis import wasserstein1
from measure_forge.cgm import SolverConfig, cgm_run
from measure_forge.core import DiscreteMeasure, ProblemInstance, ScaledQuadraticLoss, synthesize, tv_mass
from measure_forge.dictionaries import FourierDictionary, GaussianDictionary, chebyshev_check
from measure_forge.em import em_run
from measure_forge.fcsolver import project_capped_simplex

from conftest import spike_problem
from oracles import projection_by_enumeration


def _rng(k):
    return np.random.default_rng(1000 + k)


def projection_oracle(cases=1000):
    rng = _rng(1)
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 4))
        a = rng.normal(scale=1.5, size=n)
        tau = float(rng.uniform(0.1, 2.0))
        worst = max(worst, float(np.abs(project_capped_simplex(a, tau)
                                        - projection_by_enumeration(a, tau)).max()))
    return worst <= 1e-12, f"{cases} cases, max deviation {worst:.1e}"


def fenchel_young(cases=100):
    rng = _rng(2)
    worst_gap, worst_eq = np.inf, 0.0
    for _ in range(cases):
        loss = ScaledQuadraticLoss(float(rng.uniform(0.2, 5)))
        z, lam = rng.normal(size=10), rng.normal(size=10)
        worst_gap = min(worst_gap, loss.value(z) + loss.conjugate(lam) - lam @ z)
        g = loss.gradient(z)
        worst_eq = max(worst_eq, abs(loss.value(z) + loss.conjugate(g) - g @ z))
    return worst_gap >= -1e-10 and worst_eq <= 1e-10, \
        f"min slack {worst_gap:.2e}, max equality residual {worst_eq:.1e}"


def smooth_convex_sandwich(cases=100):
    rng = _rng(3)
    worst = -np.inf
    for _ in range(cases):
        loss = ScaledQuadraticLoss(float(rng.uniform(0.2, 5)))
        x, xp = rng.normal(size=10), rng.normal(size=10)
        u = x - xp
        mid = loss.value(x) - loss.value(xp) - u @ loss.gradient(xp)
        lo, hi = u @ u / (2 * loss.gamma), loss.gamma * (u @ u) / 2
        worst = max(worst, lo - mid, mid - hi)
    return worst <= 1e-10, f"max violation {worst:.1e}"


def wasserstein_axioms(triples=100):
    rng = _rng(4)

    def measure():
        k = int(rng.integers(1, 6))
        w = rng.uniform(0.05, 1, k)
        return DiscreteMeasure(rng.uniform(0, 1, k), w / w.sum())

    worst = 0.0
    for _ in range(triples):
        a, b, c = measure(), measure(), measure()
        ab, ba = wasserstein1(a, b), wasserstein1(b, a)
        worst = max(worst, abs(ab - ba), ab - wasserstein1(a, c) - wasserstein1(c, b))
        if wasserstein1(a, a) != 0 or (ab == 0) != (a == b) or ab < 0:
            return False, "identity of indiscernibles failed"
    return worst <= 1e-12, f"{triples} triples, max symmetry/triangle violation {worst:.1e}"


def _points(rng, m, lo, hi, gap=0.02):
    while True:
        pts = np.sort(rng.uniform(lo, hi, m))
        if np.all(np.diff(pts) >= gap):
            return pts


def chebyshev_sets(sets=50):
    rng = _rng(5)
    checked = 0
    for d in (FourierDictionary(3), FourierDictionary(5), FourierDictionary(7)):
        for _ in range(sets):
            if not chebyshev_check(d, _points(rng, d.m, 0.0, 0.999)):
                return False, f"fourier m={d.m} rejected a distinct point set"
            checked += 1
    # narrow windows: clustered points are independent in exact arithmetic but
    # fall below the 1e-10 rank tolerance, so keep them 0.2 apart
    g = GaussianDictionary.uniform(5, 100)
    for _ in range(sets):
        if not chebyshev_check(g, _points(rng, 5, 0.0, 1.0, gap=0.2)):
            return False, "gaussian m=5 rejected a distinct point set"
        checked += 1
    return True, f"{checked} point sets"


def gradient_finite_differences(cases=100):
    rng = _rng(6)
    worst = 0.0
    for _ in range(cases):
        loss = ScaledQuadraticLoss(float(rng.uniform(0.2, 5)))
        z = rng.normal(size=8)
        h = 1e-6
        fd = np.array([(loss.value(z + h * e) - loss.value(z - h * e)) / (2 * h) for e in np.eye(8)])
        g = loss.gradient(z)
        worst = max(worst, np.linalg.norm(fd - g) / np.linalg.norm(g))
    return worst <= 1e-6, f"max relative error {worst:.1e}"


def trace_invariants():
    problems = [spike_problem(), spike_problem(0.1, seed=0)]
    g = GaussianDictionary.uniform(33, 100)
    truth = DiscreteMeasure([0.2, 0.45, 0.5, 0.8], [0.3, 0.2, 0.2, 0.2])
    problems.append(ProblemInstance(synthesize(g, truth), g))
    traces = 0
    for p in problems:
        for n in (100, 1000):
            cfg = SolverConfig(grid=p.dictionary.make_grid(n), max_iterations=50)
            for trace in (cgm_run(p, cfg), em_run(p, cfg)):
                prev = set()
                for rec in trace.records:
                    cur = set(rec.support)
                    if not prev <= cur or tv_mass(rec.measure) > p.tv_bound + 1e-9:
                        return False, f"{trace.algorithm} l={rec.l} broke nesting or TV bound"
                    prev = cur
                traces += 1
    return True, f"{traces} traces"


SUITES = {
    "projection-oracle": projection_oracle,
    "fenchel-young": fenchel_young,
    "smooth-convex-sandwich": smooth_convex_sandwich,
    "wasserstein-axioms": wasserstein_axioms,
    "chebyshev-sets": chebyshev_sets,
    "gradient-finite-differences": gradient_finite_differences,
    "trace-invariants": trace_invariants,
}
