"""Restricted primal/dual subproblems over a finite support.

The restricted primal is

    min_a  L(A a - y)   s.t.  a >= 0,  sum(a) <= tau,

with ``A`` the real-embedded atoms of the support. Its dual is the exchange
method's restricted program, recovered from the primal solution through the
KKT conditions in :func:`recover_dual`. :func:`solve_restricted_dual_oracle`
maximizes the dual directly and is kept only as an independent cross-check.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import kernels
from .core import (LossModel, ParameterError, ScaledQuadraticLoss, cvec,
                   from_real, to_real)

INNER_MAX_ITER = 10_000
INNER_TOL = 1e-10
KKT_RTOL = 1e-6
NEG_WEIGHT_TOL = 1e-12


class SolverError(RuntimeError):
    """A restricted solve failed a contract (non-convergence, bad weights)."""


@dataclass(frozen=True, eq=False)
class SupportSet:
    """Distinct sorted support locations."""

    locations: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        t = np.asarray(self.locations, dtype=float).ravel()
        if np.any(np.diff(t) <= 0):
            raise ParameterError("support locations must be distinct and sorted")
        object.__setattr__(self, "locations", t)

    def __len__(self):
        return self.locations.size

    def __iter__(self):
        return iter(self.locations.tolist())


@dataclass(eq=False)
class RestrictedSolution:
    support: np.ndarray
    weights: np.ndarray
    value: float
    fitted: np.ndarray
    converged: bool
    inner_iterations: int

    @property
    def fitted_real(self) -> np.ndarray:
        return to_real(self.fitted)


@dataclass(eq=False)
class DualPoint:
    lam: np.ndarray
    alpha: float
    value: float
    kkt_residual: float = 0.0

    @property
    def lam_real(self) -> np.ndarray:
        return to_real(self.lam)


def project_capped_simplex(a, tau: float = 1.0) -> np.ndarray:
    """Euclidean projection of ``a`` onto ``{x >= 0, sum(x) <= tau}``."""
    a = np.asarray(a, dtype=float).ravel()
    if not np.all(np.isfinite(a)):
        raise ParameterError("projection input must be finite")
    if a.size == 0:
        return a.copy()
    return kernels.project_capped_simplex(a, float(tau))


# ---------------------------------------------------------------------------
# restricted primal

def _eq_lstsq(B, y, tau):
    """min |B z - y| subject to sum(z) = tau, eliminating the last coordinate."""
    p = B.shape[1]
    if p == 1:
        return np.array([tau])
    b0 = B[:, -1]
    D = B[:, :-1] - b0[:, None]
    z, *_ = scipy.linalg.lstsq(D, y - tau * b0, lapack_driver="gelsd")
    return np.append(z, tau - z.sum())


def _active_set(A, y, tau, a0=None, max_iter=INNER_MAX_ITER):
    """Least squares over the capped simplex, exactly, by an active-set method.

    A zero slack column turns ``sum(a) <= tau`` into the simplex
    ``sum(w) = tau``; passive-set subproblems are equality-constrained least
    squares. Returns ``(weights, iterations, converged)``.
    """
    d, k = A.shape
    B = np.hstack([A, np.zeros((d, 1))])
    n = k + 1
    w = np.zeros(n)
    if a0 is not None and k:
        w0 = np.maximum(np.asarray(a0, dtype=float), 0.0)
        s = w0.sum()
        if s > tau:
            w0 *= tau / s
        w[:k] = w0
    w[-1] = max(tau - w[:k].sum(), 0.0)
    passive = w > 0
    zero_tol = 1e-15 * max(tau, 1.0)

    def settle(P, w, entering):
        # Move from feasible w toward the passive-set optimum, dropping
        # coordinates that hit zero. Returns None if ``entering`` is rejected.
        its = 0
        while True:
            its += 1
            idx = np.flatnonzero(P)
            z = _eq_lstsq(B[:, idx], y, tau)
            if np.all(z > 0):
                out = np.zeros(n)
                out[idx] = z
                return out, P, its
            if entering is not None and its == 1:
                pos = np.searchsorted(idx, entering)
                if z[pos] <= 0:
                    return None, None, its
            cur = w[idx]
            neg = z <= 0
            ratios = cur[neg] / (cur[neg] - z[neg])
            step = ratios.min()
            new = cur + step * (z - cur)
            hit = np.flatnonzero(neg)[np.argmin(ratios)]
            new[hit] = 0.0
            new[new <= zero_tol] = 0.0
            w = np.zeros(n)
            w[idx] = new
            P = w > 0
            if its > n + 5:
                return w, P, its

    w, passive, iters = settle(passive, w, None)
    blocked = np.zeros(n, dtype=bool)
    converged = False
    while iters < max_iter:
        r = y - B @ w
        g = B.T @ r
        nu = g[passive].mean()
        thresh = 1e-12 * (1.0 + np.abs(g).max())
        cand = ~passive & ~blocked & (g > nu + thresh)
        if not cand.any():
            converged = True
            break
        gi = np.where(cand, g, -np.inf)
        i = int(np.argmax(gi))
        P = passive.copy()
        P[i] = True
        new_w, new_P, its = settle(P, w, i)
        iters += its
        if new_w is None:
            blocked[i] = True
            continue
        w, passive = new_w, new_P
        blocked[:] = False
    return w[:k], iters, converged


def _apg(A, y, loss, tau, a0=None, tol=INNER_TOL, max_iter=INNER_MAX_ITER):
    """Accelerated projected gradient with function-value restart."""
    k = A.shape[1]
    lip = loss.smoothness * max(np.linalg.norm(A, 2) ** 2, 1e-300)
    step = 1.0 / lip
    x = project_capped_simplex(np.zeros(k) if a0 is None else a0, tau)
    z = x.copy()
    t = 1.0
    f_prev = loss.value(A @ x - y)
    for it in range(1, max_iter + 1):
        grad = A.T @ loss.gradient(A @ z - y)
        x_new = project_capped_simplex(z - step * grad, tau)
        if np.linalg.norm(x_new - z) / step <= tol:
            return x_new, it, True
        f_new = loss.value(A @ x_new - y)
        # a plain step from x (t == 1) can only rise by rounding; take it
        if f_new > f_prev and t > 1.0:
            z, t = x.copy(), 1.0
            continue
        t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        z = x_new + ((t - 1.0) / t_new) * (x_new - x)
        x, t, f_prev = x_new, t_new, f_new
    return x, max_iter, False


def _clamp(weights):
    if weights.size and weights.min() < -NEG_WEIGHT_TOL:
        raise SolverError(f"restricted solver produced weight {weights.min():.3e} < 0")
    return np.maximum(weights, 0.0)


def solve_columns(A, y, loss: LossModel, tau: float = 1.0, *, warm_start=None,
                  tol: float = INNER_TOL, max_iter: int = INNER_MAX_ITER,
                  method: str = "auto"):
    """Restricted primal on explicit real atom columns ``A`` (2m x k).

    Returns ``(weights, value, fitted_real, converged, iterations)``.
    """
    d, k = A.shape
    if k == 0:
        fitted = np.zeros(d)
        return np.zeros(0), loss.value(-y), fitted, True, 0
    if method == "auto":
        method = "active-set" if isinstance(loss, ScaledQuadraticLoss) else "apg"
    if method == "active-set":
        if not isinstance(loss, ScaledQuadraticLoss):
            raise ParameterError("active-set method requires the scaled quadratic loss")
        a, its, ok = _active_set(A, y, tau, warm_start, max_iter)
    elif method == "apg":
        a, its, ok = _apg(A, y, loss, tau, warm_start, tol, max_iter)
    else:
        raise ParameterError(f"unknown restricted solver {method!r}")
    a = _clamp(a)
    fitted = A @ a
    return a, loss.value(fitted - y), fitted, ok, its


def _support_matrix(dictionary, support) -> np.ndarray:
    t = np.asarray(support, dtype=float).ravel()
    if t.size == 0:
        return np.zeros((2 * dictionary.m, 0))
    dictionary.domain.check(t)
    return to_real(dictionary.evaluate_many(t)).T


def solve_restricted_primal(dictionary, support, y, loss: LossModel | None = None,
                            tau: float = 1.0, tol: float = INNER_TOL, *,
                            warm_start=None, max_iter: int = INNER_MAX_ITER,
                            method: str = "auto") -> RestrictedSolution:
    """Fully-corrective step: best nonnegative weights on ``support`` with mass <= tau."""
    loss = loss or ScaledQuadraticLoss()
    T = SupportSet(support).locations
    A = _support_matrix(dictionary, T)
    yr = to_real(cvec(y))
    a, value, fitted, ok, its = solve_columns(A, yr, loss, tau, warm_start=warm_start,
                                              tol=tol, max_iter=max_iter, method=method)
    return RestrictedSolution(T, a, value, from_real(fitted), ok, its)


def dual_from_fit(A, y, fitted, loss: LossModel, tau: float = 1.0):
    """KKT recovery on real columns: ``(lam, alpha, value, kkt_residual)``."""
    lam = -loss.gradient(fitted - y)
    alpha = 0.0
    if A.shape[1]:
        alpha = max(0.0, float((A.T @ lam).max()))
    value = float(lam @ y) - loss.conjugate(-lam) - tau * alpha
    resid = abs(float(fitted @ lam) - tau * alpha) if alpha > 0 else 0.0
    return lam, alpha, value, resid


def recover_dual(sol: RestrictedSolution, support, dictionary, y,
                 loss: LossModel | None = None, tau: float = 1.0,
                 kkt_rtol: float = KKT_RTOL) -> DualPoint:
    """Restricted dual optimum from the restricted primal optimum.

    ``lam = -grad L(y^l - y)`` and ``alpha = max(0, max_T Re<lam, Phi(t)>)``.
    """
    if not sol.converged:
        raise SolverError("recover_dual needs a converged restricted solution")
    loss = loss or ScaledQuadraticLoss()
    A = _support_matrix(dictionary, SupportSet(support).locations)
    lam, alpha, value, resid = dual_from_fit(A, to_real(cvec(y)), sol.fitted_real, loss, tau)
    if resid > kkt_rtol * (1.0 + tau * alpha):
        raise SolverError(f"KKT identity violated by {resid:.3e}")
    return DualPoint(from_real(lam), alpha, value, resid)


def restricted_dual_objective(A, y, lam, loss: LossModel, tau: float = 1.0) -> float:
    alpha = max(0.0, float((A.T @ lam).max())) if A.shape[1] else 0.0
    return float(lam @ y) - loss.conjugate(-lam) - tau * alpha


def _subgradient_generic(A, y, loss, tau, iterations):
    lam = -loss.gradient(-y)
    avg = np.zeros_like(lam)
    wsum = 0.0
    mu = 1.0 / loss.smoothness
    for it in range(iterations):
        g = y - loss.conjugate_gradient(-lam)
        if A.shape[1]:
            scores = A.T @ lam
            j = int(np.argmax(scores))
            if scores[j] > 0:
                g = g - tau * A[:, j]
        avg += (it + 1.0) * lam
        wsum += it + 1.0
        lam = lam + (2.0 / (mu * (it + 2.0))) * g
    return avg / wsum, lam


def solve_restricted_dual_oracle(dictionary, support, y, loss: LossModel | None = None,
                                 tau: float = 1.0, iterations: int = 100_000) -> DualPoint:
    """Maximize the restricted dual directly by subgradient ascent.

    Objective: ``Re<lam, y> - L*(-lam) - tau * max(0, max_T Re<lam, Phi(t)>)``,
    which is strongly concave. Verification only; the solvers use
    :func:`recover_dual`.
    """
    loss = loss or ScaledQuadraticLoss()
    A = _support_matrix(dictionary, SupportSet(support).locations)
    yr = to_real(cvec(y))
    if isinstance(loss, ScaledQuadraticLoss):
        avg, last = kernels.dual_subgradient(np.ascontiguousarray(A.T), yr,
                                             loss.sigma, float(tau), int(iterations))
    else:
        avg, last = _subgradient_generic(A, yr, loss, tau, iterations)
    best = max((avg, last), key=lambda lam: restricted_dual_objective(A, yr, lam, loss, tau))
    alpha = max(0.0, float((A.T @ best).max())) if A.shape[1] else 0.0
    value = restricted_dual_objective(A, yr, best, loss, tau)
    return DualPoint(from_real(best), alpha, value)
