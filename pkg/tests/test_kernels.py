import numpy as np
import pytest

from measure_forge import kernels

BACKENDS = kernels.available()


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.get(request.param)


def test_compiled_backend_builds():
    assert "python" in BACKENDS
    assert kernels.BACKEND in BACKENDS
    with pytest.raises(ValueError):
        kernels.get("fortran")


def test_lmo_scan(backend, rng):
    atoms = np.ascontiguousarray(rng.normal(size=(500, 12)))
    for _ in range(20):
        g = rng.normal(size=12)
        idx, value = backend.lmo_scan(atoms, g, 1e-12)
        scores = atoms @ g
        assert idx == int(np.argmin(scores))
        assert value == pytest.approx(scores.min(), abs=1e-12)


def test_lmo_scan_tie_break(backend):
    atoms = np.ascontiguousarray(np.tile([1.0, -2.0], (6, 1)))
    atoms[0] = [5.0, 5.0]
    idx, value = backend.lmo_scan(atoms, np.array([1.0, 1.0]), 1e-12)
    assert idx == 1 and value == -1.0


def test_correlate(backend, rng):
    atoms = np.ascontiguousarray(rng.normal(size=(40, 6)))
    g = rng.normal(size=6)
    np.testing.assert_allclose(backend.correlate(atoms, g), atoms @ g, atol=1e-12)


def test_projection(backend, rng):
    for _ in range(200):
        a = rng.normal(size=int(rng.integers(1, 20)))
        tau = float(rng.uniform(0.1, 3))
        np.testing.assert_allclose(backend.project_capped_simplex(a, tau),
                                   kernels.fallback.project_capped_simplex(a, tau), atol=1e-12)


def test_dual_subgradient(backend, rng):
    atoms = np.ascontiguousarray(rng.normal(size=(5, 8)))
    y = rng.normal(size=8)
    avg, last = backend.dual_subgradient(atoms, y, 1.0, 1.0, 2000)
    ref_avg, ref_last = kernels.fallback.dual_subgradient(atoms, y, 1.0, 1.0, 2000)
    np.testing.assert_allclose(avg, ref_avg, atol=1e-9)
    np.testing.assert_allclose(last, ref_last, atol=1e-9)


def test_dual_subgradient_empty(backend):
    y = np.array([1.0, -2.0])
    avg, last = backend.dual_subgradient(np.zeros((0, 2)), y, 2.0, 1.0, 100)
    np.testing.assert_allclose(avg, 2 * y)
    np.testing.assert_allclose(last, 2 * y)
