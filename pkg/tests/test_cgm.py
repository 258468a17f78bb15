import numpy as np
import pytest

from measure_forge.analysis import reference_optima, primal_rate_rhs
from measure_forge.cgm import SolverConfig, cgm_run, lmo_min
from measure_forge.core import ProblemInstance, tv_mass
from measure_forge.dictionaries import FourierDictionary, TabulatedDictionary

from conftest import spike_problem
from oracles import exhaustive_argmin


def test_config_validation():
    grid = FourierDictionary(3).make_grid(10)
    with pytest.raises(ValueError):
        SolverConfig(grid=grid, max_iterations=0)
    with pytest.raises(ValueError):
        SolverConfig(grid=grid, eta=-1.0)


def test_lmo_dirichlet_peak():
    d = FourierDictionary(33)
    grid = d.make_grid(1000)
    t0 = grid.points[314]
    t, value = lmo_min(d, grid, -d.evaluate(t0))
    scores = [-np.real(np.vdot(d.evaluate(s), d.evaluate(t0))) for s in grid.points]
    assert t == grid.points[exhaustive_argmin(scores)] == t0
    assert value == pytest.approx(-33)


def test_lmo_ties_pick_smallest():
    tab = TabulatedDictionary([0.2, 0.5, 0.9], [[1, 1j]] * 3)
    t, _ = lmo_min(tab, tab.make_grid(), np.array([-1.0, 0.5]))
    assert t == 0.2
    d = FourierDictionary(5)
    grid = d.make_grid(20)
    assert lmo_min(d, grid, np.zeros(5)) == (0.0, 0.0)


def test_lmo_random_vs_exhaustive(rng):
    d = FourierDictionary(9)
    grid = d.make_grid(200)
    for _ in range(20):
        g = rng.normal(size=9) + 1j * rng.normal(size=9)
        scores = [float(np.real(np.vdot(d.evaluate(s), g))) for s in grid.points]
        t, value = lmo_min(d, grid, g)
        assert t == grid.points[exhaustive_argmin(scores)]
        assert value == pytest.approx(min(scores), abs=1e-12)


def test_exact_one_atom_recovery():
    d = FourierDictionary(33)
    grid = d.make_grid(1000)
    t0 = grid.points[271]
    problem = ProblemInstance(d.evaluate(t0), d)
    trace = cgm_run(problem, SolverConfig(grid=grid, eta=1e-9))
    assert trace.termination == "tolerance-met"
    assert [r.l for r in trace.records] == [0, 1]
    assert trace.final_measure.locations.tolist() == [t0]
    assert trace.final_measure.weights == pytest.approx([1.0])
    assert trace.records[-1].primal_value == pytest.approx(0, abs=1e-20)


def test_zero_observations_stop_immediately():
    d = FourierDictionary(5)
    trace = cgm_run(ProblemInstance(np.zeros(5), d), SolverConfig(grid=d.make_grid(50)))
    assert trace.termination == "tolerance-met"
    assert len(trace.records) == 1 and len(trace.final_measure) == 0


def test_invariants_on_spike_instance(spike_runs):
    _, _, trace, _ = spike_runs
    values = trace.values("primal_value")
    assert np.all(np.diff(values) <= 1e-12)
    prev = set()
    for rec in trace.records:
        support = set(rec.support)
        assert len(support) <= rec.l
        assert prev <= support
        assert tv_mass(rec.measure) <= 1 + 1e-9
        prev = support
    assert trace.metadata["sparsity_ok"]
    assert trace.metadata["radius"] == pytest.approx(np.sqrt(33))


def test_primal_rate(spike_runs):
    problem, cfg, trace, _ = spike_runs
    refs = reference_optima(problem, cfg, 500)
    for rec in trace.records[1:]:
        assert rec.primal_value - refs.v_p <= primal_rate_rhs(rec.l, 1.0, np.sqrt(33))


def test_deterministic_support_sequence():
    problem = spike_problem(0.1, seed=3)
    cfg = SolverConfig(grid=problem.dictionary.make_grid(1000), max_iterations=20)
    a = [r.t_added for r in cgm_run(problem, cfg).records]
    b = [r.t_added for r in cgm_run(problem, cfg).records]
    assert a == b


def test_gap_tolerance_stops_early():
    problem = spike_problem()
    cfg = SolverConfig(grid=problem.dictionary.make_grid(1000), max_iterations=50, gap_tol=1e-3)
    trace = cgm_run(problem, cfg)
    assert trace.termination == "tolerance-met"
    assert trace.records[-1].gap <= 1e-3
    assert all(r.gap > 1e-3 for r in trace.records[:-1])


def test_max_iterations_honored():
    problem = spike_problem(0.1)
    trace = cgm_run(problem, SolverConfig(grid=problem.dictionary.make_grid(10_000),
                                          max_iterations=5))
    assert trace.termination == "max-iterations"
    assert trace.records[-1].l == 5
