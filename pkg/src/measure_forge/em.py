"""Exchange method on the dual semi-infinite program."""
from __future__ import annotations

import time

import numpy as np

from .cgm import (RestrictedState, RunTrace, SolverConfig, IterationRecord, TIE_RTOL,
                  _scan, check_sparsity, lmo_min, trace_metadata)
from .core import ProblemInstance, from_real
from .fcsolver import KKT_RTOL, SolverError, dual_from_fit


def lmo_max(dictionary, grid, lam, rtol: float = TIE_RTOL):
    """Grid maximizer of Re<lam, Phi(t)>; defined as ``lmo_min`` at ``-lam``."""
    t, value = lmo_min(dictionary, grid, -np.asarray(lam), rtol)
    return t, -value


def em_run(problem: ProblemInstance, config: SolverConfig) -> RunTrace:
    """Exchange method: alternate the restricted dual and the most violated constraint.

    The restricted dual over T^{l-1} is obtained from the restricted primal by
    KKT recovery. With ``max_iterations = K`` the run makes at most K
    additions and K + 1 restricted-dual solves.
    """
    loss, tau = problem.loss, problem.tv_bound
    state = RestrictedState(problem, config)
    atoms = state.atoms
    grid_pts = config.grid.points
    records = []
    termination = "max-iterations"
    clock = time.perf_counter()
    for l in range(1, config.max_iterations + 2):
        state.solve(f"EM iteration {l}")
        lam, alpha, v_em, resid = dual_from_fit(state.columns(), state.y, state.fitted, loss, tau)
        if resid > KKT_RTOL * (1.0 + tau * alpha):
            raise SolverError(f"EM iteration {l}: KKT identity violated by {resid:.3e}")
        idx, val = _scan(atoms, -lam, config.tie_rtol)
        gauge = -val
        violation = gauge - alpha
        full = float(lam @ state.y) - loss.conjugate(-lam) - tau * max(0.0, gauge)
        measure = state.measure()
        primal, fitted = state.value, state.fitted

        stop = None
        if violation <= config.eta:
            stop = "tolerance-met"
        elif l == config.max_iterations + 1:
            stop = "max-iterations"
        elif idx in state:
            stop = "stalled"
        t_added = None
        if stop is None:
            state.add(idx)
            t_added = float(grid_pts[idx])

        now = time.perf_counter()
        records.append(IterationRecord(
            l=l, t_added=t_added, support=state.locations(), measure=measure,
            primal_value=primal, fitted=from_real(fitted),
            gradient_norm=float(np.linalg.norm(loss.gradient(fitted - state.y))),
            wall_time=now - clock, dual_value=v_em, lam=from_real(lam), alpha=alpha,
            gauge=gauge, violation=violation, gap=primal - full,
            inner_iterations=state.inner_iterations))
        clock = now
        if stop is not None:
            termination = stop
            break

    meta = trace_metadata(problem, config)
    trace = RunTrace("em", records, records[-1].measure, termination, meta)
    meta["sparsity_ok"] = check_sparsity(trace, problem.dictionary.m)
    return trace
