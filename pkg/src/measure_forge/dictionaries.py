"""Atom families Phi: I -> C^m, evaluation grids and dictionary diagnostics."""
from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np

from .core import DomainError, ParameterDomain, ParameterError, to_real

CHEBYSHEV_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Grid:
    """Strictly increasing evaluation points inside a dictionary's domain."""

    points: np.ndarray
    spacing: float
    label: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        if pts.size < 2 and self.label != "tabulated":
            raise ParameterError("a grid needs at least two points")
        if np.any(np.diff(pts) <= 0):
            raise ParameterError("grid points must be strictly increasing")
        pts.flags.writeable = False
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.size

    def fingerprint(self) -> str:
        import hashlib
        return hashlib.sha1(self.points.tobytes()).hexdigest()[:16]


class AtomDictionary:
    """Base class for a continuous map ``t -> Phi(t)`` in C^m.

    Subclasses implement ``evaluate_many``. Atom matrices on a grid are
    cached per grid object, so repeated LMO scans reuse them.
    """

    family = "abstract"
    m: int
    domain: ParameterDomain

    def __init__(self):
        self._cache = {}
        self._lock = threading.Lock()

    def evaluate_many(self, ts) -> np.ndarray:
        """Rows ``Phi(t)`` for each ``t``, shape (len(ts), m)."""
        raise NotImplementedError

    def evaluate(self, t: float) -> np.ndarray:
        return self.evaluate_many(np.array([t], dtype=float))[0]

    def make_grid(self, n: int) -> Grid:
        raise NotImplementedError

    def radius(self, grid: Grid | None = None) -> float:
        if grid is None:
            raise ParameterError(f"{self.family} radius needs a grid")
        return float(np.sqrt(np.max(np.sum(np.abs(self.evaluate_many(grid.points)) ** 2, axis=1))))

    def atom_matrix(self, grid: Grid) -> np.ndarray:
        """Real embeddings of all grid atoms, C-contiguous (n, 2m)."""
        key = id(grid)
        hit = self._cache.get(key)
        if hit is not None and hit[0] is grid:
            return hit[1]
        mat = np.ascontiguousarray(to_real(self.evaluate_many(grid.points)))
        mat.flags.writeable = False
        with self._lock:
            self._cache[key] = (grid, mat)
        return mat

    def describe(self) -> dict:
        raise NotImplementedError


class FourierDictionary(AtomDictionary):
    """Trigonometric moments ``exp(pi i k t)``, k = -(m-1), -(m-3), ..., m-1, on [0, 1)."""

    family = "fourier"

    def __init__(self, m: int):
        super().__init__()
        if m < 1 or m % 2 == 0:
            raise ParameterError(f"fourier dictionary needs odd m >= 1, got {m}")
        self.m = int(m)
        self.domain = ParameterDomain(0.0, 1.0, include_hi=False)
        self.frequencies = np.arange(-(m - 1), m, 2, dtype=float)

    def evaluate_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float).ravel()
        return np.exp(1j * np.pi * np.outer(ts, self.frequencies))

    def make_grid(self, n: int) -> Grid:
        return Grid(np.arange(n) / n, 1.0 / n, label=f"fourier-{n}")

    def radius(self, grid=None) -> float:
        return float(np.sqrt(self.m))

    def describe(self) -> dict:
        return {"family": "fourier", "m": self.m}


class GaussianDictionary(AtomDictionary):
    """Gaussian window translates ``exp(-c (t - s_j)^2)`` on [lo, hi]."""

    family = "gaussian"

    def __init__(self, samples, c: float = 100.0, lo: float = 0.0, hi: float = 1.0):
        super().__init__()
        s = np.asarray(samples, dtype=float).ravel()
        if s.size < 1 or not c > 0:
            raise ParameterError("gaussian dictionary needs samples and c > 0")
        self.samples = s
        self.c = float(c)
        self.m = s.size
        self.domain = ParameterDomain(lo, hi, include_hi=True)

    @classmethod
    def uniform(cls, count: int, c: float = 100.0, lo: float = 0.0, hi: float = 1.0):
        return cls(np.linspace(lo, hi, count), c, lo, hi)

    def evaluate_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float).ravel()
        return np.exp(-self.c * (ts[:, None] - self.samples[None, :]) ** 2).astype(complex)

    def make_grid(self, n: int) -> Grid:
        lo, hi = self.domain.lo, self.domain.hi
        return Grid(lo + (hi - lo) * np.arange(n) / (n - 1), (hi - lo) / (n - 1),
                    label=f"gaussian-{n}")

    def describe(self) -> dict:
        return {"family": "gaussian", "c": self.c, "samples": self.samples.tolist(),
                "lo": self.domain.lo, "hi": self.domain.hi}


class TabulatedDictionary(AtomDictionary):
    """Explicit finite map from parameter values to atoms."""

    family = "tabulated"

    def __init__(self, points, atoms):
        super().__init__()
        pts = np.asarray(points, dtype=float).ravel()
        vals = np.atleast_2d(np.asarray(atoms, dtype=complex))
        if vals.shape[0] != pts.size:
            raise ParameterError("one atom per tabulated point required")
        order = np.argsort(pts)
        pts, vals = pts[order], vals[order]
        if np.any(np.diff(pts) <= 0):
            raise ParameterError("tabulated points must be distinct")
        if not np.all(np.isfinite(vals)):
            raise ParameterError("tabulated atoms must be finite")
        self.points = pts
        self.atoms = vals
        self.m = vals.shape[1]
        hi = pts[-1] if pts.size > 1 else pts[0] + 1.0
        self.domain = ParameterDomain(pts[0], hi, include_hi=True)

    def evaluate_many(self, ts) -> np.ndarray:
        ts = np.asarray(ts, dtype=float).ravel()
        idx = np.searchsorted(self.points, ts)
        idx = np.clip(idx, 0, self.points.size - 1)
        if not np.all(self.points[idx] == ts):
            raise DomainError("tabulated dictionary evaluated off its table")
        return self.atoms[idx]

    def make_grid(self, n: int | None = None) -> Grid:
        gaps = np.diff(self.points)
        return Grid(self.points, float(gaps.min()) if gaps.size else 1.0, label="tabulated")

    def describe(self) -> dict:
        return {"family": "tabulated", "points": self.points.tolist(),
                "atoms": [[[z.real, z.imag] for z in row] for row in self.atoms]}


def fourier_atom(t: float, m: int) -> np.ndarray:
    if m < 1 or m % 2 == 0:
        raise ParameterError(f"m must be odd, got {m}")
    k = np.arange(-(m - 1), m, 2, dtype=float)
    return np.exp(1j * np.pi * k * float(t))


def gaussian_atom(t: float, samples, c: float) -> np.ndarray:
    s = np.asarray(samples, dtype=float)
    return np.exp(-c * (float(t) - s) ** 2).astype(complex)


def dict_radius(dictionary: AtomDictionary, grid: Grid | None = None) -> float:
    """max_t |Phi(t)|_2 (closed form for Fourier, grid scan otherwise)."""
    return dictionary.radius(grid)


def chebyshev_check(dictionary: AtomDictionary, points, rtol: float = CHEBYSHEV_RTOL) -> bool:
    """True iff ``[Phi(t_1) ... Phi(t_m)]`` is numerically nonsingular."""
    pts = np.asarray(points, dtype=float).ravel()
    if pts.size != dictionary.m:
        raise ParameterError(f"need exactly m={dictionary.m} points, got {pts.size}")
    if np.unique(pts).size != pts.size:
        raise ParameterError("chebyshev_check needs distinct points")
    dictionary.domain.check(pts)
    sv = np.linalg.svd(dictionary.evaluate_many(pts).T, compute_uv=False)
    return bool(sv[-1] > rtol * sv[0])


def from_spec(spec: dict) -> AtomDictionary:
    """Build a dictionary from its config JSON object."""
    family = spec.get("family")
    if family == "fourier":
        return FourierDictionary(int(spec["m"]))
    if family == "gaussian":
        c = float(spec.get("c", 100.0))
        samples = spec["samples"]
        if isinstance(samples, dict):
            return GaussianDictionary.uniform(int(samples["count"]), c,
                                              float(samples.get("lo", 0.0)),
                                              float(samples.get("hi", 1.0)))
        return GaussianDictionary(samples, c, float(spec.get("lo", 0.0)),
                                  float(spec.get("hi", 1.0)))
    if family == "tabulated":
        atoms = [[complex(re, im) for re, im in row] for row in spec["atoms"]]
        return TabulatedDictionary(spec["points"], atoms)
    raise ParameterError(f"unknown dictionary family {family!r}")
