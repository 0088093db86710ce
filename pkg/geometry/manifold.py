#!/usr/bin/env python3
"""
AIRM Geometry Module

Distance, Log/Exp maps, geodesics, Frechet mean and variance (Karcher flow)
and parallel transport on the manifold of SPD matrices equipped with the
affine invariant Riemannian metric.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from common.exceptions import InvalidInputError, SpdDomainError
from .matfun import (
    ScalarFun,
    apply_spectrum,
    ensure_spd,
    ensure_symmetric,
    spd_map,
    sym,
    sym_eig,
)


KARCHER_MAX_ITERATIONS = 100
KARCHER_TOLERANCE_PER_DIM = 1e-9


@dataclass
class FrechetStats:
    """Frechet mean and the variance attained at it"""
    mean: np.ndarray
    variance: float
    iterations_used: int
    gradient_norm: float

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "variance": self.variance,
            "iterations_used": self.iterations_used,
            "gradient_norm": self.gradient_norm,
        }


def _check_same_dim(a: np.ndarray, b: np.ndarray, what: str):
    if a.shape[-1] != b.shape[-1]:
        raise InvalidInputError(f"{what}: dimension mismatch ({a.shape[-1]} vs {b.shape[-1]})")


def _as_point_stack(points, name: str = "points") -> np.ndarray:
    if isinstance(points, np.ndarray):
        stack = points
    else:
        points = list(points)
        if not points:
            raise InvalidInputError(f"{name} must be a non-empty collection of SPD matrices")
        stack = np.stack([np.asarray(p, dtype=np.float64) for p in points])
    if stack.ndim == 2:
        stack = stack[None]
    if stack.ndim != 3 or stack.shape[0] == 0:
        raise InvalidInputError(f"{name} must be a non-empty collection of SPD matrices, got shape {stack.shape}")
    return ensure_spd(stack, name)


class _Whitener:
    """Caches base^{1/2} and base^{-1/2} from a single eigendecomposition"""

    def __init__(self, base: np.ndarray):
        eig = sym_eig(base)
        if np.any(eig.eigenvalues[..., -1] <= 0.0):
            raise SpdDomainError("base point", float(np.min(eig.eigenvalues[..., -1])))
        self.sqrt = apply_spectrum(eig, np.sqrt(eig.eigenvalues))
        self.inv_sqrt = apply_spectrum(eig, 1.0 / np.sqrt(eig.eigenvalues))

    def whiten(self, z: np.ndarray) -> np.ndarray:
        return sym(self.inv_sqrt @ z @ self.inv_sqrt)

    def colour(self, s: np.ndarray) -> np.ndarray:
        return sym(self.sqrt @ s @ self.sqrt)


def airm_dist(z1, z2) -> Union[float, np.ndarray]:
    """AIRM distance ||log(Z1^{-1/2} Z2 Z1^{-1/2})||_F (broadcast over leading axes)"""
    z1 = ensure_spd(z1, "Z1")
    z2 = ensure_spd(z2, "Z2")
    _check_same_dim(z1, z2, "airm_dist")

    relative = _Whitener(z1).whiten(z2)
    eigenvalues = sym_eig(relative).eigenvalues
    distance = np.sqrt(np.sum(np.log(eigenvalues) ** 2, axis=-1))
    return float(distance) if np.ndim(distance) == 0 else distance


def log_map(base, z) -> np.ndarray:
    """Riemannian logarithm of Z at base"""
    base = ensure_spd(base, "base")
    z = ensure_spd(z, "Z")
    _check_same_dim(base, z, "log_map")

    whitener = _Whitener(base)
    return whitener.colour(spd_map(whitener.whiten(z), ScalarFun.log()))


def exp_map(base, s) -> np.ndarray:
    """Riemannian exponential of the symmetric tangent vector S at base"""
    base = ensure_spd(base, "base")
    s = ensure_symmetric(s, "S")
    _check_same_dim(base, s, "exp_map")

    whitener = _Whitener(base)
    return whitener.colour(spd_map(whitener.whiten(s), ScalarFun.exp()))


def geodesic(z1, z2, gamma: float) -> np.ndarray:
    """Point at fraction gamma along the geodesic from Z1 to Z2"""
    gamma = float(gamma)
    if not 0.0 <= gamma <= 1.0:
        raise InvalidInputError(f"geodesic weight must lie in [0, 1], got {gamma}")
    z1 = ensure_spd(z1, "Z1")
    z2 = ensure_spd(z2, "Z2")
    _check_same_dim(z1, z2, "geodesic")

    # endpoints are returned exactly
    if gamma == 0.0:
        return np.broadcast_to(z1, np.broadcast_shapes(z1.shape, z2.shape)).copy()
    if gamma == 1.0:
        return np.broadcast_to(z2, np.broadcast_shapes(z1.shape, z2.shape)).copy()

    whitener = _Whitener(z1)
    return whitener.colour(spd_map(whitener.whiten(z2), ScalarFun.power(gamma)))


def frechet_variance(points, ref) -> float:
    """Mean squared AIRM distance from ref to the points"""
    stack = _as_point_stack(points)
    ref = ensure_spd(ref, "ref")
    _check_same_dim(stack, ref, "frechet_variance")

    eigenvalues = sym_eig(_Whitener(ref).whiten(stack)).eigenvalues
    return float(np.mean(np.sum(np.log(eigenvalues) ** 2, axis=-1)))


def frechet_mean(points,
                 steps: Optional[int] = None,
                 init=None,
                 weights: Optional[Sequence[float]] = None,
                 max_iterations: int = KARCHER_MAX_ITERATIONS,
                 tol: Optional[float] = None) -> FrechetStats:
    """Karcher flow for the (weighted) Frechet mean.

    Args:
        points: Non-empty stack or list of SPD matrices
        steps: Fixed number of Karcher steps, or None to iterate until the
            tangent mean norm drops below tol (at most max_iterations steps)
        init: Starting point (identity when omitted)
        weights: Optional non-negative sample weights
        max_iterations: Iteration cap for the convergence mode
        tol: Convergence tolerance on the whitened tangent mean (default 1e-9 * D)

    Returns:
        FrechetStats with the mean, the attained variance, the number of
        steps taken and the tangent mean norm at the returned mean
    """
    stack = _as_point_stack(points)
    count, dim = stack.shape[0], stack.shape[-1]

    if weights is None:
        w = np.full(count, 1.0 / count)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (count,) or np.any(w < 0) or not np.sum(w) > 0:
            raise InvalidInputError("weights must be non-negative, one per point, with a positive sum")
        w = w / np.sum(w)

    if steps is not None and steps < 1:
        raise InvalidInputError(f"steps must be a positive integer, got {steps}")

    mean = np.eye(dim) if init is None else ensure_spd(init, "init")
    _check_same_dim(stack, mean, "frechet_mean")
    tol = KARCHER_TOLERANCE_PER_DIM * dim if tol is None else tol
    limit = steps if steps is not None else max_iterations

    iterations = 0
    for _ in range(limit):
        whitener = _Whitener(mean)
        tangent = np.einsum("m,mij->ij", w, spd_map(whitener.whiten(stack), ScalarFun.log()))
        if steps is None and np.linalg.norm(tangent) < tol:
            break
        mean = whitener.colour(spd_map(tangent, ScalarFun.exp()))
        iterations += 1

    logs = spd_map(_Whitener(mean).whiten(stack), ScalarFun.log())
    gradient_norm = float(np.linalg.norm(np.einsum("m,mij->ij", w, logs)))
    variance = float(np.sum(w * np.sum(logs * logs, axis=(-2, -1))))
    return FrechetStats(mean=mean, variance=variance, iterations_used=iterations, gradient_norm=gradient_norm)


def transport_matrix(source, target) -> np.ndarray:
    """E = A^{-1/2} (A^{1/2} B^{-1} A^{1/2})^{-1/2} A^{1/2}, a square root of A^{-1} B"""
    source = ensure_spd(source, "from")
    target = ensure_spd(target, "to")
    _check_same_dim(source, target, "parallel_transport")

    whitener = _Whitener(source)
    inner = whitener.colour(spd_map(target, ScalarFun.power(-1.0)))
    return whitener.inv_sqrt @ spd_map(inner, ScalarFun.inv_sqrt()) @ whitener.sqrt


def parallel_transport(z, source, target) -> np.ndarray:
    """Transport Z (or a stack) from the base point source to target: E^T Z E"""
    z = ensure_spd(z, "Z")
    e = transport_matrix(source, target)
    _check_same_dim(z, e, "parallel_transport")
    return sym(np.swapaxes(e, -1, -2) @ z @ e)


def log_euclidean_mean(points) -> np.ndarray:
    """exp(mean_j log Z_j)"""
    stack = _as_point_stack(points)
    return spd_map(np.mean(spd_map(stack, ScalarFun.log()), axis=0), ScalarFun.exp())


def random_spd(dim: int, rng: np.random.Generator, spread: float = 1.0, size: Optional[int] = None) -> np.ndarray:
    """Random SPD matrices exp(S) with S a symmetric Gaussian matrix scaled by spread"""
    shape = (dim, dim) if size is None else (size, dim, dim)
    s = sym(rng.standard_normal(shape)) * spread / np.sqrt(dim)
    return spd_map(s, ScalarFun.exp())


__all__ = [
    "FrechetStats",
    "airm_dist",
    "log_map",
    "exp_map",
    "geodesic",
    "frechet_mean",
    "frechet_variance",
    "transport_matrix",
    "parallel_transport",
    "log_euclidean_mean",
    "random_spd",
]
