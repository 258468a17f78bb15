"""Recovery metrics, rate certificates and the CGM/EM equivalence checker."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

import numpy as np

from .cgm import RunTrace, SolverConfig, cgm_run, lmo_min
from .core import DiscreteMeasure, ParameterDomain, ParameterError, ProblemInstance, to_real
from .em import em_run

CERT_SLACK = 1e-9
STRONG_DUALITY_RTOL = 1e-6

KINDS = ("primal-rate-13", "dual-rate-14", "lambda-rate-15", "alpha-rate-16",
         "feasibility-17", "strong-duality")


class ConfigMismatch(ValueError):
    """Two traces were produced under configurations that cannot be compared."""


@dataclass(frozen=True)
class BoundCertificate:
    l: int
    lhs: float
    rhs: float
    kind: str

    @property
    def satisfied(self) -> bool:
        return self.lhs <= self.rhs + CERT_SLACK

    def to_json(self) -> dict:
        return {**asdict(self), "satisfied": self.satisfied}


@dataclass(frozen=True)
class EquivalenceReport:
    iterations_compared: int
    supports_match: bool
    max_support_discrepancy: float
    max_value_discrepancy: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.supports_match and self.max_value_discrepancy <= self.tol

    def to_json(self) -> dict:
        return {**asdict(self), "passed": self.passed}


@dataclass(frozen=True, eq=False)
class ReferenceOptima:
    v_p: float
    v_d: float
    lambda_d: np.ndarray
    alpha_d: float
    iterations: int
    cgm_termination: str = ""
    em_termination: str = ""

    def to_json(self) -> dict:
        return {"v_p": self.v_p, "v_d": self.v_d, "alpha_d": self.alpha_d,
                "lambda_d": [[float(z.real), float(z.imag)] for z in self.lambda_d],
                "iterations": self.iterations, "cgm_termination": self.cgm_termination,
                "em_termination": self.em_termination}

    @classmethod
    def from_json(cls, obj) -> "ReferenceOptima":
        lam = np.array([complex(a, b) for a, b in obj["lambda_d"]])
        return cls(obj["v_p"], obj["v_d"], lam, obj["alpha_d"], obj["iterations"],
                   obj.get("cgm_termination", ""), obj.get("em_termination", ""))


# ---------------------------------------------------------------------------
# metrics

def wasserstein1(x1: DiscreteMeasure, x2: DiscreteMeasure,
                 domain: ParameterDomain | None = None) -> float:
    """L1 distance between the cumulative weight functions of two measures.

    Equals the 1-Wasserstein distance when the masses agree. With unequal
    masses the tail ``(hi - last atom) * |mass1 - mass2|`` is included when a
    domain is given.
    """
    if domain is not None:
        for x in (x1, x2):
            if len(x):
                domain.check(x.locations)
    locs = np.concatenate([x1.locations, x2.locations])
    if locs.size == 0:
        return 0.0
    jumps = np.concatenate([x1.weights, -x2.weights])
    order = np.argsort(locs, kind="stable")
    locs, jumps = locs[order], jumps[order]
    diff = np.cumsum(jumps)
    total = float(np.sum(np.abs(diff[:-1]) * np.diff(locs)))
    if domain is not None:
        total += abs(float(diff[-1])) * (domain.hi - locs[-1])
    return total


def mass_difference(x1: DiscreteMeasure, x2: DiscreteMeasure) -> float:
    return abs(float(x1.weights.sum() - x2.weights.sum()))


def gauge_value(dictionary, grid, lam) -> float:
    """Support function of the atom hull (gauge of its polar) on the grid."""
    return -lmo_min(dictionary, grid, -np.asarray(lam))[1]


def feasibility_violation(lam, alpha: float, dictionary, grid) -> float:
    """max_t Re<lam, Phi(t)> - alpha over the grid; negative means strictly feasible."""
    return gauge_value(dictionary, grid, lam) - alpha


def full_dual_objective(problem: ProblemInstance, grid, lam) -> float:
    lam_r = to_real(lam)
    gauge = gauge_value(problem.dictionary, grid, lam)
    return (float(lam_r @ problem.y_real) - problem.loss.conjugate(-lam_r)
            - problem.tv_bound * max(0.0, gauge))


# ---------------------------------------------------------------------------
# certificates

def primal_rate_rhs(l, gamma, r, eps=0.0):
    return 4.0 * gamma * r * r * (1.0 + eps) / (l + 2.0)


def lambda_rate_rhs(l, gamma, r, eps=0.0):
    return math.sqrt(8.0 * gamma ** 2 * r ** 2 * (1.0 + eps) / (l + 2.0))


def alpha_rate_rhs(l, gamma, r, eps=0.0):
    return math.sqrt(8.0 * gamma ** 2 * r ** 4 * (1.0 + eps) / (l + 2.0))


def reference_optima(problem: ProblemInstance, config: SolverConfig,
                     iterations: int | None = None) -> ReferenceOptima:
    """Long CGM and EM runs on the same grid, giving (v_p, v_d, lambda_d, alpha_d)."""
    iterations = iterations or max(500, 20 * config.max_iterations)
    ref_cfg = replace(config, max_iterations=iterations, eta=0.0,
                      inner_tol=min(config.inner_tol, 1e-12))
    tc = cgm_run(problem, ref_cfg)
    te = em_run(problem, ref_cfg)
    v_p = float(min(r.primal_value for r in tc.records))
    last = te.records[-1]
    v_d = last.primal_value - last.gap
    return ReferenceOptima(v_p, v_d, last.lam, max(0.0, last.gauge), iterations,
                           tc.termination, te.termination)


def _max_iterations(trace: RunTrace) -> int:
    return max(r.l for r in trace.records)


def certify_bounds(trace_cgm: RunTrace, trace_em: RunTrace, refs: ReferenceOptima | None,
                   gamma: float, r: float, eps: float = 0.0) -> list:
    """One certificate per iteration per bound family, plus strong duality."""
    if refs is None:
        raise ParameterError("certify_bounds needs reference optima")
    needed = 10 * max(_max_iterations(trace_cgm), _max_iterations(trace_em) - 1)
    if refs.iterations < needed:
        raise ParameterError(f"reference run of {refs.iterations} iterations is shorter "
                             f"than 10x the traces ({needed})")
    certs = []
    for rec in trace_cgm.records:
        if rec.l >= 1:
            certs.append(BoundCertificate(rec.l, rec.primal_value - refs.v_p,
                                          primal_rate_rhs(rec.l, gamma, r, eps),
                                          "primal-rate-13"))
    for rec in trace_em.records:
        l = rec.l
        certs.append(BoundCertificate(l, rec.dual_value - refs.v_d,
                                      primal_rate_rhs(l, gamma, r, eps), "dual-rate-14"))
        certs.append(BoundCertificate(l, float(np.linalg.norm(rec.lam - refs.lambda_d)),
                                      lambda_rate_rhs(l, gamma, r, eps), "lambda-rate-15"))
        certs.append(BoundCertificate(l, abs(rec.alpha - refs.alpha_d),
                                      alpha_rate_rhs(l, gamma, r, eps), "alpha-rate-16"))
        certs.append(BoundCertificate(l, rec.gauge - refs.alpha_d,
                                      alpha_rate_rhs(l, gamma, r, eps), "feasibility-17"))
    certs.append(BoundCertificate(refs.iterations, abs(refs.v_p - refs.v_d),
                                  STRONG_DUALITY_RTOL * (1.0 + abs(refs.v_p)),
                                  "strong-duality"))
    return certs


def equivalence_check(trace_cgm: RunTrace, trace_em: RunTrace, tol: float = 1e-8
                      ) -> EquivalenceReport:
    """Compare T_CGM^l with T_EM^l and v_CGM^l with v_EM^{l+1}.

    Value discrepancies are relative, ``|v_CGM^l - v_EM^{l+1}| / (1 + |v_CGM^l|)``.
    """
    kc = trace_cgm.metadata.get("comparison_key")
    ke = trace_em.metadata.get("comparison_key")
    if kc is None or kc != ke:
        raise ConfigMismatch(f"traces were produced under different configurations ({kc} vs {ke})")
    cgm = {r.l: r for r in trace_cgm.records}
    em = {r.l: r for r in trace_em.records}
    supports_match = True
    support_gap = 0.0
    compared = 0
    for l, rec in em.items():
        if rec.t_added is None or l not in cgm:
            continue
        compared += 1
        a, b = np.array(cgm[l].support), np.array(rec.support)
        if a.shape != b.shape or not np.array_equal(a, b):
            supports_match = False
            support_gap = max(support_gap, _hausdorff(a, b))
    value_gap = 0.0
    for l, rec in cgm.items():
        if l + 1 in em:
            v = rec.primal_value
            value_gap = max(value_gap, abs(v - em[l + 1].dual_value) / (1.0 + abs(v)))
    return EquivalenceReport(compared, supports_match, support_gap, value_gap, tol)


def _hausdorff(a, b) -> float:
    if a.size == 0 or b.size == 0:
        return math.inf if a.size != b.size else 0.0
    dist = np.abs(a[:, None] - b[None, :])
    return float(max(dist.min(axis=1).max(), dist.min(axis=0).max()))


# ---------------------------------------------------------------------------
# geometric diagnostics

def restricted_feasibility(trace_em: RunTrace, dictionary) -> float:
    """Largest Re<lam^l, Phi(t)> - alpha^l over t in T^{l-1}, across all EM records.

    Nonpositive (up to rounding) when every iterate lies in its scaled
    restricted polar.
    """
    worst = -math.inf
    for rec in trace_em.records:
        prev = [t for t in rec.support if t != rec.t_added]
        if not prev:
            continue
        scores = np.real(dictionary.evaluate_many(prev).conj() @ rec.lam)
        worst = max(worst, float(scores.max()) - rec.alpha)
    return worst


def gauge_identity_residual(trace_em: RunTrace, dictionary) -> float:
    """max_l |alpha^l - max(0, max_{T^{l-1}} Re<lam^l, Phi(t)>)|."""
    worst = 0.0
    for rec in trace_em.records:
        prev = [t for t in rec.support if t != rec.t_added]
        top = 0.0
        if prev:
            top = max(0.0, float(np.real(dictionary.evaluate_many(prev).conj() @ rec.lam).max()))
        worst = max(worst, abs(rec.alpha - top))
    return worst


def holder_residual(trace_em: RunTrace, tau: float = 1.0) -> float:
    """max_l |Re<y^l, lam^l> - tau alpha^l| over records with alpha^l > 0."""
    worst = 0.0
    for rec in trace_em.records:
        if rec.alpha > 0:
            worst = max(worst, abs(float(np.real(np.vdot(rec.fitted, rec.lam))) - tau * rec.alpha))
    return worst


def caratheodory_sparse(x: DiscreteMeasure, m: int, threshold: float = 1e-6) -> bool:
    """At most m atoms carry weight above ``threshold``."""
    return int(np.sum(x.weights > threshold)) <= m
