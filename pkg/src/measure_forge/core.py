"""Shared domain types: complex vectors, discrete measures, losses, problems.

Complex vectors in C^m are numpy ``complex128`` arrays at the public surface.
Solvers work on the real embedding ``[Re z, Im z]`` in R^{2m}, where the real
part of the Hermitian inner product is the ordinary dot product.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np


class ParameterError(ValueError):
    """Invalid parameters for an operation or type."""


class DomainError(ParameterError):
    """A location lies outside the parameter domain."""


def cvec(values) -> np.ndarray:
    """Validate and return a finite complex vector."""
    z = np.asarray(values, dtype=complex).ravel()
    if z.size == 0:
        raise ParameterError("complex vector must have m >= 1 entries")
    if not np.all(np.isfinite(z)):
        raise ParameterError("complex vector has non-finite entries")
    return z


def to_real(z) -> np.ndarray:
    z = np.asarray(z, dtype=complex)
    return np.concatenate([z.real, z.imag], axis=-1)


def from_real(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    m = v.shape[-1] // 2
    return v[..., :m] + 1j * v[..., m:]


def re_inner(a, b) -> float:
    """Re<a, b> with <a, b> = sum(conj(a) * b)."""
    return float(np.real(np.vdot(a, b)))


def cvec_to_json(z) -> list:
    return [[float(c.real), float(c.imag)] for c in np.asarray(z, dtype=complex)]


def cvec_from_json(pairs) -> np.ndarray:
    return cvec([complex(re, im) for re, im in pairs])


@dataclass(frozen=True)
class ParameterDomain:
    """Compact interval [lo, hi], optionally half-open at ``hi``."""

    lo: float
    hi: float
    include_hi: bool = True

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)) or self.lo >= self.hi:
            raise ParameterError(f"invalid domain [{self.lo}, {self.hi}]")

    def contains(self, t) -> np.ndarray | bool:
        t = np.asarray(t, dtype=float)
        upper = t <= self.hi if self.include_hi else t < self.hi
        inside = (t >= self.lo) & upper
        return bool(inside) if inside.ndim == 0 else inside

    def check(self, t):
        inside = np.atleast_1d(self.contains(t))
        if not np.all(inside):
            bad = np.atleast_1d(np.asarray(t, dtype=float))[~inside]
            bracket = "]" if self.include_hi else ")"
            raise DomainError(
                f"locations {bad.tolist()} outside [{self.lo}, {self.hi}{bracket}")

    @property
    def length(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Finitely supported nonnegative measure ``sum_i a_i delta_{t_i}``.

    Construction canonicalizes: atoms are sorted by location, duplicate
    locations are merged by summing weights and zero weights are dropped.
    """

    locations: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def __post_init__(self):
        t = np.asarray(self.locations, dtype=float).ravel()
        a = np.asarray(self.weights, dtype=float).ravel()
        if t.shape != a.shape:
            raise ParameterError("locations and weights differ in length")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(a))):
            raise ParameterError("measure has non-finite entries")
        if np.any(a < 0):
            raise ParameterError("measure weights must be nonnegative")
        order = np.argsort(t, kind="stable")
        t, a = t[order], a[order]
        if t.size:
            uniq, start = np.unique(t, return_index=True)
            a = np.add.reduceat(a, start)
            t = uniq
        keep = a > 0
        t, a = t[keep], a[keep]
        t.flags.writeable = False
        a.flags.writeable = False
        object.__setattr__(self, "locations", t)
        object.__setattr__(self, "weights", a)

    @classmethod
    def from_atoms(cls, atoms) -> "DiscreteMeasure":
        atoms = list(atoms)
        return cls(np.array([t for t, _ in atoms], dtype=float),
                   np.array([a for _, a in atoms], dtype=float))

    def __len__(self):
        return self.locations.size

    def __add__(self, other: "DiscreteMeasure") -> "DiscreteMeasure":
        return DiscreteMeasure(np.concatenate([self.locations, other.locations]),
                               np.concatenate([self.weights, other.weights]))

    def __eq__(self, other):
        if not isinstance(other, DiscreteMeasure):
            return NotImplemented
        return (np.array_equal(self.locations, other.locations)
                and np.array_equal(self.weights, other.weights))

    def __hash__(self):
        return hash((self.locations.tobytes(), self.weights.tobytes()))

    def scaled(self, c: float) -> "DiscreteMeasure":
        return DiscreteMeasure(self.locations, c * self.weights)

    def to_json(self) -> dict:
        return {"atoms": [{"t": float(t), "a": float(a)}
                          for t, a in zip(self.locations, self.weights)]}

    @classmethod
    def from_json(cls, obj) -> "DiscreteMeasure":
        if isinstance(obj, str):
            obj = json.loads(obj)
        return cls.from_atoms((d["t"], d["a"]) for d in obj["atoms"])

    def __repr__(self):
        atoms = ", ".join(f"{a:.4g}@{t:.6g}" for t, a in zip(self.locations, self.weights))
        return f"DiscreteMeasure([{atoms}])"


def tv_mass(x: DiscreteMeasure) -> float:
    """Total variation of a nonnegative measure, i.e. its total mass."""
    return float(np.sum(x.weights))


def synthesize(dictionary, x: DiscreteMeasure) -> np.ndarray:
    """Measurements ``sum_i a_i Phi(t_i)`` of a discrete measure."""
    if len(x) == 0:
        return np.zeros(dictionary.m, dtype=complex)
    dictionary.domain.check(x.locations)
    return x.weights @ dictionary.evaluate_many(x.locations)


class LossModel:
    """Interface for a strongly smooth and strongly convex loss on C^m.

    All methods take and return real embeddings (length 2m). ``gamma`` is the
    constant for which ``|u|^2/(2 gamma) <= L(x) - L(x') - <x - x', grad L(x')>
    <= gamma |u|^2 / 2`` with ``u = x - x'``; ``smoothness`` is the upper
    curvature alone.
    """

    gamma: float
    smoothness: float

    def value(self, z) -> float:
        raise NotImplementedError

    def gradient(self, z) -> np.ndarray:
        raise NotImplementedError

    def conjugate(self, lam) -> float:
        raise NotImplementedError

    def conjugate_gradient(self, lam) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class ScaledQuadraticLoss(LossModel):
    """``L(z) = sigma/2 |z|^2``, with conjugate ``|lam|^2 / (2 sigma)``."""

    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise ParameterError("sigma must be positive")

    @property
    def gamma(self) -> float:
        return max(self.sigma, 1.0 / self.sigma)

    @property
    def smoothness(self) -> float:
        return self.sigma

    def value(self, z) -> float:
        z = np.asarray(z, dtype=float)
        return 0.5 * self.sigma * float(z @ z)

    def gradient(self, z) -> np.ndarray:
        return self.sigma * np.asarray(z, dtype=float)

    def conjugate(self, lam) -> float:
        lam = np.asarray(lam, dtype=float)
        return float(lam @ lam) / (2.0 * self.sigma)

    def conjugate_gradient(self, lam) -> np.ndarray:
        return np.asarray(lam, dtype=float) / self.sigma

    def to_json(self) -> dict:
        return {"kind": "scaled-quadratic", "sigma": self.sigma}


def loss_eval(loss: LossModel, z):
    """Value and gradient of ``loss`` at a complex vector ``z``."""
    zr = to_real(cvec(z))
    return loss.value(zr), from_real(loss.gradient(zr))


def loss_conjugate(loss: LossModel, lam) -> float:
    """Fenchel conjugate ``sup_z Re<lam, z> - L(z)``."""
    return loss.conjugate(to_real(cvec(lam)))


@dataclass(frozen=True, eq=False)
class ProblemInstance:
    """Observations ``y`` with the dictionary, loss and TV bound tau."""

    y: np.ndarray
    dictionary: object
    loss: LossModel = field(default_factory=ScaledQuadraticLoss)
    tv_bound: float = 1.0

    def __post_init__(self):
        y = cvec(self.y)
        if y.size != self.dictionary.m:
            raise ParameterError(
                f"observation length {y.size} != dictionary dimension {self.dictionary.m}")
        if not self.tv_bound > 0:
            raise ParameterError("tv_bound must be positive")
        object.__setattr__(self, "y", y)

    @property
    def y_real(self) -> np.ndarray:
        return to_real(self.y)
