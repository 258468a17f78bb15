import math

import numpy as np
import pytest

from measure_forge.cgm import SolverConfig, cgm_run
from measure_forge.core import DiscreteMeasure, ProblemInstance, ScaledQuadraticLoss, synthesize
from measure_forge.dictionaries import FourierDictionary, TabulatedDictionary
from measure_forge.em import em_run

SPIKES = [0.1 * math.pi, 0.2 * math.pi, 0.3 * math.pi, 0.31 * math.pi]


def spike_truth():
    return DiscreteMeasure(SPIKES, [0.25] * 4)


def spike_problem(noise_sd=0.0, seed=0):
    d = FourierDictionary(33)
    y = synthesize(d, spike_truth())
    if noise_sd:
        e = np.random.default_rng(seed).normal(0.0, noise_sd, 66)
        y = y + e[:33] + 1j * e[33:]
    return ProblemInstance(y, d, ScaledQuadraticLoss(1.0), 1.0)


def random_tabulated(rng, m=None, k=None):
    m = m or int(rng.integers(2, 9))
    k = k or int(rng.integers(2, 33))
    atoms = rng.normal(size=(k, m)) + 1j * rng.normal(size=(k, m))
    return TabulatedDictionary(np.arange(k) / k, atoms)


def random_small_problem(rng, scale=1.5):
    d = random_tabulated(rng)
    y = scale * (rng.normal(size=d.m) + 1j * rng.normal(size=d.m))
    return ProblemInstance(y, d, ScaledQuadraticLoss(1.0), 1.0)


@pytest.fixture(scope="session")
def spike_runs():
    """CGM and EM traces on the noise-free spike instance, grid 1000, 50 iterations."""
    problem = spike_problem()
    cfg = SolverConfig(grid=problem.dictionary.make_grid(1000), max_iterations=50)
    return problem, cfg, cgm_run(problem, cfg), em_run(problem, cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
