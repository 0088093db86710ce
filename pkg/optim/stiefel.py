#!/usr/bin/env python3
"""
Stiefel manifold helpers: membership check, tangent projection and QR retraction.
"""

import numpy as np

from common.exceptions import InvalidInputError, ModelStateError, NumericError
from geometry.matfun import sym


STIEFEL_TOLERANCE = 1e-6
RANK_TOLERANCE = 1e-12


def stiefel_deviation(w: np.ndarray) -> float:
    """||W^T W - I||_F"""
    return float(np.linalg.norm(w.T @ w - np.eye(w.shape[1])))


def check_stiefel(w: np.ndarray, name: str = "W", tol: float = STIEFEL_TOLERANCE) -> np.ndarray:
    """Raise ModelStateError unless W has orthonormal columns within tol"""
    w = np.asarray(w, dtype=np.float64)
    if w.ndim != 2 or w.shape[0] < w.shape[1]:
        raise InvalidInputError(f"{name} must be an (n, p) matrix with n >= p, got shape {w.shape}")
    deviation = stiefel_deviation(w)
    if not deviation < tol:
        raise ModelStateError(name, deviation)
    return w


def stiefel_project(w: np.ndarray, euclidean_grad: np.ndarray) -> np.ndarray:
    """Canonical tangent projection G - W sym(W^T G)"""
    w = check_stiefel(w)
    g = np.asarray(euclidean_grad, dtype=np.float64)
    if g.shape != w.shape:
        raise InvalidInputError(f"gradient shape {g.shape} does not match W shape {w.shape}")
    return g - w @ sym(w.T @ g)


def stiefel_retract(w: np.ndarray, step: np.ndarray) -> np.ndarray:
    """QR retraction: Q factor of W + step with a positive R diagonal"""
    w = check_stiefel(w)
    step = np.asarray(step, dtype=np.float64)
    if step.shape != w.shape:
        raise InvalidInputError(f"step shape {step.shape} does not match W shape {w.shape}")

    q, r = np.linalg.qr(w + step)
    diagonal = np.diag(r)
    scale = max(1.0, float(np.max(np.abs(diagonal))))
    if np.any(np.abs(diagonal) <= RANK_TOLERANCE * scale):
        raise NumericError("Stiefel retraction hit a rank-deficient matrix",
                           {"smallest_r_diagonal": float(np.min(np.abs(diagonal)))})
    return q * np.where(diagonal < 0.0, -1.0, 1.0)[None, :]


def random_stiefel(n: int, p: int, rng: np.random.Generator) -> np.ndarray:
    """Uniformly distributed (n, p) matrix with orthonormal columns"""
    q, r = np.linalg.qr(rng.standard_normal((n, p)))
    return q * np.where(np.diag(r) < 0.0, -1.0, 1.0)[None, :]
