"""Experiment harness: super-resolution instances, solver runs, traces, sweeps.

Subcommands::

    measure-forge solve   --algo cgm|em|both   one algorithm on one instance
    measure-forge compare                      CGM and EM plus equivalence report
    measure-forge bench                        grid sweep with certificates
    measure-forge certify --out DIR            re-verify bounds from stored traces
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .analysis import (ReferenceOptima, alpha_rate_rhs, certify_bounds, equivalence_check,
                       lambda_rate_rhs, mass_difference, primal_rate_rhs, reference_optima,
                       wasserstein1, CERT_SLACK, STRONG_DUALITY_RTOL)
from .cgm import SolverConfig, cgm_run
from .core import (DiscreteMeasure, DomainError, ParameterError, ProblemInstance,
                   ScaledQuadraticLoss, cvec_to_json, synthesize)
from .dictionaries import from_spec
from .em import em_run

log = logging.getLogger("measure_forge")

CSV_COLUMNS = ["iter", "t_added", "primal_value", "dual_value", "gap", "alpha",
               "gradient_norm", "violation", "wasserstein", "bound13_rhs", "bound14_rhs",
               "bound15_lhs", "bound15_rhs", "bound16_lhs", "bound16_rhs", "bound17_lhs",
               "bound17_rhs", "wall_ms"]

DEFAULT_SPIKES = [0.1 * math.pi, 0.2 * math.pi, 0.3 * math.pi, 0.31 * math.pi]
DEFAULT_GRID = 1000
PRNG = "numpy.random.PCG64 via default_rng(seed)"
NOISE_MODEL = ("i.i.d. zero-mean Gaussian with the given variance added to every real "
               "coordinate of the clean observations (real and imaginary parts independently)")


@dataclass
class NoiseSpec:
    kind: str = "none"
    variance: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        if self.kind not in ("none", "gaussian"):
            raise ParameterError(f"unknown noise kind {self.kind!r}")
        if self.variance < 0:
            raise ParameterError("noise variance must be >= 0")
        if self.kind == "gaussian" and self.seed is None:
            raise ParameterError("gaussian noise needs a seed")


@dataclass
class ExperimentConfig:
    dictionary: dict = field(default_factory=lambda: {"family": "fourier", "m": 33})
    ground_truth: DiscreteMeasure = field(
        default_factory=lambda: DiscreteMeasure(DEFAULT_SPIKES, [0.25] * 4))
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    sigma: float = 1.0
    tv_bound: float = 1.0
    eta: float = 0.0
    max_iterations: int = 50
    lmo_epsilon: float = 0.0
    inner_tol: float = 1e-10
    inner_method: str = "auto"
    gap_tol: float | None = None
    sweep: list = field(default_factory=list)
    reference_iterations: int | None = None
    output: str = "out"

    @property
    def grids(self) -> list:
        return list(self.sweep) or [DEFAULT_GRID]

    @classmethod
    def from_json(cls, obj: dict) -> "ExperimentConfig":
        cfg = cls()
        if "dictionary" in obj:
            cfg.dictionary = obj["dictionary"]
        if "ground_truth" in obj:
            cfg.ground_truth = DiscreteMeasure.from_json(obj["ground_truth"])
        if "noise" in obj:
            cfg.noise = NoiseSpec(**obj["noise"])
        solver = obj.get("solver", {})
        for key in ("eta", "max_iterations", "lmo_epsilon", "inner_tol", "inner_method",
                    "gap_tol"):
            if key in solver:
                setattr(cfg, key, solver[key])
        if "grid" in solver:
            cfg.sweep = [int(solver["grid"])]
        cfg.sigma = float(obj.get("loss", {}).get("sigma", cfg.sigma))
        cfg.tv_bound = float(obj.get("tv_bound", cfg.tv_bound))
        if obj.get("sweep"):
            cfg.sweep = [int(n) for n in obj["sweep"]]
        cfg.reference_iterations = obj.get("reference_iterations", cfg.reference_iterations)
        cfg.output = obj.get("output", cfg.output)
        cfg.noise.__post_init__()
        return cfg

    def to_json(self) -> dict:
        return {
            "dictionary": self.dictionary,
            "ground_truth": self.ground_truth.to_json(),
            "noise": {"kind": self.noise.kind, "variance": self.noise.variance,
                      "seed": self.noise.seed},
            "loss": {"sigma": self.sigma},
            "tv_bound": self.tv_bound,
            "solver": {"eta": self.eta, "max_iterations": self.max_iterations,
                       "lmo_epsilon": self.lmo_epsilon, "inner_tol": self.inner_tol,
                       "inner_method": self.inner_method, "gap_tol": self.gap_tol},
            "sweep": self.grids,
            "reference_iterations": self.reference_iterations,
            "output": self.output,
        }


@dataclass(eq=False)
class GroundTruth:
    measure: DiscreteMeasure
    clean_observations: np.ndarray
    noisy_observations: np.ndarray
    seed: int | None


def gen_superres_instance(config: ExperimentConfig):
    """Dictionary, clean and noisy observations for the configured spikes."""
    dictionary = from_spec(config.dictionary)
    try:
        clean = synthesize(dictionary, config.ground_truth)
    except DomainError as exc:
        raise ParameterError(f"ground-truth spikes outside the domain: {exc}") from exc
    noisy = clean.copy()
    noise = config.noise
    if noise.kind == "gaussian" and noise.variance > 0:
        rng = np.random.default_rng(noise.seed)
        e = rng.normal(0.0, math.sqrt(noise.variance), size=2 * dictionary.m)
        noisy = clean + (e[:dictionary.m] + 1j * e[dictionary.m:])
    problem = ProblemInstance(noisy, dictionary, ScaledQuadraticLoss(config.sigma),
                              config.tv_bound)
    return problem, GroundTruth(config.ground_truth, clean, noisy, noise.seed)


def solver_config(config: ExperimentConfig, problem: ProblemInstance, n: int) -> SolverConfig:
    return SolverConfig(grid=problem.dictionary.make_grid(n), eta=config.eta,
                        max_iterations=config.max_iterations, lmo_epsilon=config.lmo_epsilon,
                        inner_tol=config.inner_tol, inner_method=config.inner_method,
                        gap_tol=config.gap_tol, seed=config.noise.seed)


# ---------------------------------------------------------------------------
# traces

def _fmt(v) -> str:
    if v is None:
        return ""
    return repr(float(v))


def trace_rows(trace, truth: GroundTruth, domain, gamma, r, eps, refs=None, timing=True):
    rows = []
    for rec in trace.records:
        l = rec.l
        row = dict.fromkeys(CSV_COLUMNS, "")
        row.update(iter=str(l), t_added=_fmt(rec.t_added), primal_value=_fmt(rec.primal_value),
                   dual_value=_fmt(rec.dual_value), gap=_fmt(rec.gap), alpha=_fmt(rec.alpha),
                   gradient_norm=_fmt(rec.gradient_norm), violation=_fmt(rec.violation),
                   wasserstein=_fmt(wasserstein1(rec.measure, truth.measure, domain)),
                   wall_ms=_fmt(1e3 * rec.wall_time if timing else 0.0))
        if trace.algorithm == "cgm":
            if l >= 1:
                row["bound13_rhs"] = _fmt(primal_rate_rhs(l, gamma, r, eps))
        else:
            row["bound14_rhs"] = _fmt(primal_rate_rhs(l, gamma, r, eps))
            row["bound15_rhs"] = _fmt(lambda_rate_rhs(l, gamma, r, eps))
            row["bound16_rhs"] = _fmt(alpha_rate_rhs(l, gamma, r, eps))
            row["bound17_rhs"] = _fmt(alpha_rate_rhs(l, gamma, r, eps))
            if refs is not None:
                row["bound15_lhs"] = _fmt(np.linalg.norm(rec.lam - refs.lambda_d))
                row["bound16_lhs"] = _fmt(abs(rec.alpha - refs.alpha_d))
                row["bound17_lhs"] = _fmt(rec.gauge - refs.alpha_d)
        rows.append(row)
    return rows


def write_csv(path: Path, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)


def read_csv(path: Path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ---------------------------------------------------------------------------
# experiments

def thread_cap() -> int:
    env = os.environ.get("MEASURE_FORGE_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _run_grid(config, problem, truth, n, algos, certify, timing, out: Path):
    cfg = solver_config(config, problem, n)
    gamma = problem.loss.gamma
    r = problem.dictionary.radius(cfg.grid)
    eps = config.lmo_epsilon
    domain = problem.dictionary.domain
    traces = {}
    for algo in algos:
        traces[algo] = (cgm_run if algo == "cgm" else em_run)(problem, cfg)
        log.info("grid %d %s: %s after %d records", n, algo, traces[algo].termination,
                 len(traces[algo].records))
    entry = {"grid": n, "grid_spacing": cfg.grid.spacing, "radius": r, "gamma": gamma,
             "epsilon": eps, "ok": True}
    refs = None
    certs = []
    if certify:
        refs = reference_optima(problem, cfg, config.reference_iterations)
        certs = certify_bounds(traces["cgm"], traces["em"], refs, gamma, r, eps)
        entry["references"] = refs.to_json()
        sd = abs(refs.v_p - refs.v_d)
        entry["strong_duality"] = {"gap": sd,
                                   "tolerance": STRONG_DUALITY_RTOL * (1 + abs(refs.v_p)),
                                   "satisfied": sd <= STRONG_DUALITY_RTOL * (1 + abs(refs.v_p))}
        failed = [c for c in certs if not c.satisfied]
        entry["certificates"] = {"count": len(certs), "failed": len(failed)}
        entry["ok"] &= not failed
    if "cgm" in traces and "em" in traces:
        report = equivalence_check(traces["cgm"], traces["em"])
        entry["equivalence"] = report.to_json()
        entry["ok"] &= report.passed
    for algo, trace in traces.items():
        rows = trace_rows(trace, truth, domain, gamma, r, eps, refs, timing)
        write_csv(out / f"trace_{algo}_{n}.csv", rows)
        final = trace.final_measure
        entry[algo] = {
            "termination": trace.termination,
            "records": len(trace.records),
            "final_value": trace.records[-1].primal_value,
            "final_wasserstein": wasserstein1(final, truth.measure, domain),
            "mass_difference": mass_difference(final, truth.measure),
            "sparsity_ok": trace.metadata["sparsity_ok"],
            "final_measure": final.to_json(),
        }
    return entry, [c.to_json() for c in certs]


def run_experiment(config: ExperimentConfig, out=None, *, algos=("cgm", "em"),
                   certify=True, timing=True) -> dict:
    """Run the configured sweep and write traces, summary and certificates.

    Returns the summary dictionary; ``summary["ok"]`` is False iff any
    certificate or equivalence check failed.
    """
    out = Path(out or config.output)
    out.mkdir(parents=True, exist_ok=True)
    problem, truth = gen_superres_instance(config)
    grids = config.grids
    with ThreadPoolExecutor(max_workers=min(thread_cap(), len(grids))) as pool:
        futures = [pool.submit(_run_grid, config, problem, truth, n, algos, certify,
                               timing, out) for n in grids]
        results = [f.result() for f in futures]
    summary = {
        "created": time.strftime("%Y-%m-%dT%H:%M:%S%z"),
        "backend": kernels.BACKEND,
        "prng": PRNG,
        "noise_model": NOISE_MODEL,
        "config": config.to_json(),
        "clean_observations": cvec_to_json(truth.clean_observations),
        "observations": cvec_to_json(truth.noisy_observations),
        "runs": [entry for entry, _ in results],
    }
    summary["ok"] = all(entry["ok"] for entry in summary["runs"])
    (out / "summary.json").write_text(json.dumps(summary, indent=2))
    if certify:
        certificates = {str(entry["grid"]): certs for entry, certs in results}
        (out / "certificates.json").write_text(json.dumps(certificates, indent=2))
    return summary


def certify_stored(out) -> tuple:
    """Recheck every bound from ``summary.json`` and the stored CSV traces.

    Returns ``(checked, failures)`` where failures are human-readable lines.
    """
    out = Path(out)
    summary = json.loads((out / "summary.json").read_text())
    checked, failures = 0, []
    for run in summary["runs"]:
        if "references" not in run:
            continue
        n, gamma, r, eps = run["grid"], run["gamma"], run["radius"], run["epsilon"]
        refs = ReferenceOptima.from_json(run["references"])

        def check(kind, l, lhs, rhs):
            nonlocal checked
            checked += 1
            if not lhs <= rhs + CERT_SLACK:
                failures.append(f"grid {n} {kind} l={l}: {lhs:.6g} > {rhs:.6g}")

        for row in read_csv(out / f"trace_cgm_{n}.csv"):
            l = int(row["iter"])
            if l >= 1:
                check("primal-rate-13", l, float(row["primal_value"]) - refs.v_p,
                      primal_rate_rhs(l, gamma, r, eps))
        for row in read_csv(out / f"trace_em_{n}.csv"):
            l = int(row["iter"])
            check("dual-rate-14", l, float(row["dual_value"]) - refs.v_d,
                  primal_rate_rhs(l, gamma, r, eps))
            check("lambda-rate-15", l, float(row["bound15_lhs"]), lambda_rate_rhs(l, gamma, r, eps))
            check("alpha-rate-16", l, float(row["bound16_lhs"]), alpha_rate_rhs(l, gamma, r, eps))
            check("feasibility-17", l, float(row["bound17_lhs"]), alpha_rate_rhs(l, gamma, r, eps))
        check("strong-duality", refs.iterations, abs(refs.v_p - refs.v_d),
              STRONG_DUALITY_RTOL * (1 + abs(refs.v_p)))
    return checked, failures


# ---------------------------------------------------------------------------
# command line

def _parser():
    p = argparse.ArgumentParser(prog="measure-forge", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, grid_default=None):
        sp.add_argument("--config", type=Path, help="experiment config JSON")
        sp.add_argument("--grid", type=int, default=grid_default, help="single grid size")
        sp.add_argument("--iters", type=int, help="CGM/EM iterations")
        sp.add_argument("--eta", type=float, help="stopping tolerance")
        sp.add_argument("--seed", type=int, help="noise seed")
        sp.add_argument("--noise-variance", type=float,
                        help="add Gaussian noise of this variance per real coordinate")
        sp.add_argument("--ref-iters", type=int, help="reference run iterations")
        sp.add_argument("--out", type=Path, help="output directory")
        sp.add_argument("--no-timing", action="store_true",
                        help="write wall_ms as 0 so reruns are byte-identical")
        sp.add_argument("-v", "--verbose", action="store_true")

    sp = sub.add_parser("solve", help="run one algorithm on one instance")
    common(sp)
    sp.add_argument("--algo", choices=["cgm", "em", "both"], default="cgm")
    common(sub.add_parser("compare", help="run CGM and EM and report equivalence"))
    sp = sub.add_parser("bench", help="grid sweep with certificates")
    common(sp)
    sp.add_argument("--sweep", type=int, nargs="+", default=[100, 1000, 10000])
    sp = sub.add_parser("certify", help="re-verify bounds from stored traces")
    sp.add_argument("--out", type=Path, required=True)
    sp.add_argument("-v", "--verbose", action="store_true")
    return p


def _load_config(args) -> ExperimentConfig:
    cfg = ExperimentConfig()
    if args.config is not None:
        cfg = ExperimentConfig.from_json(json.loads(args.config.read_text()))
    if getattr(args, "sweep", None) and not cfg.sweep:
        cfg.sweep = list(args.sweep)
    if args.grid is not None:
        cfg.sweep = [args.grid]
    if args.iters is not None:
        cfg.max_iterations = args.iters
    if args.eta is not None:
        cfg.eta = args.eta
    if args.noise_variance is not None:
        cfg.noise = NoiseSpec("gaussian", args.noise_variance,
                              args.seed if args.seed is not None else 0)
    elif args.seed is not None:
        cfg.noise = replace(cfg.noise, seed=args.seed)
    if args.ref_iters is not None:
        cfg.reference_iterations = args.ref_iters
    if args.out is not None:
        cfg.output = str(args.out)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "certify":
            checked, failures = certify_stored(args.out)
            for line in failures:
                print(f"FAIL {line}")
            print(f"{checked} certificates checked, {len(failures)} failed")
            return 1 if failures or not checked else 0

        cfg = _load_config(args)
        if args.command == "solve":
            cfg.sweep = cfg.grids[:1]
            algos = ("cgm", "em") if args.algo == "both" else (args.algo,)
            summary = run_experiment(cfg, algos=algos, certify=False,
                                     timing=not args.no_timing)
        elif args.command == "compare":
            summary = run_experiment(cfg, certify=False, timing=not args.no_timing)
        else:
            summary = run_experiment(cfg, certify=True, timing=not args.no_timing)
    except (ParameterError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for run in summary["runs"]:
        parts = [f"grid {run['grid']:>6}"]
        for algo in ("cgm", "em"):
            if algo in run:
                a = run[algo]
                parts.append(f"{algo}: {a['termination']} after {a['records']} records, "
                             f"W1 {a['final_wasserstein']:.3e}")
        if "equivalence" in run:
            parts.append("equivalent" if run["equivalence"]["passed"] else "NOT EQUIVALENT")
        if "certificates" in run:
            c = run["certificates"]
            parts.append(f"certificates {c['count'] - c['failed']}/{c['count']}")
        print(" | ".join(parts))
    print(f"outputs in {cfg.output}")
    return 0 if summary["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
