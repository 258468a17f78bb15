"""Sparse inverse problems over nonnegative measures.

Fully-corrective conditional gradient on the primal program, the exchange
method on its dual semi-infinite program, and numeric certificates tying
the two together.
"""
from .core import (DiscreteMeasure, DomainError, ParameterDomain, ParameterError,
                   ProblemInstance, ScaledQuadraticLoss, loss_conjugate, loss_eval,
                   synthesize, tv_mass)
from .dictionaries import (FourierDictionary, GaussianDictionary, Grid,
                           TabulatedDictionary, chebyshev_check, dict_radius,
                           fourier_atom, gaussian_atom)
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "DiscreteMeasure", "DomainError", "FourierDictionary", "GaussianDictionary",
    "Grid", "ParameterDomain", "ParameterError", "ProblemInstance", "ScaledQuadraticLoss",
    "TabulatedDictionary", "chebyshev_check", "dict_radius", "fourier_atom", "gaussian_atom",
    "loss_conjugate", "loss_eval", "synthesize", "tv_mass",
]
