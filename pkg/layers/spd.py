#!/usr/bin/env python3
"""
SPD network layers: covariance pooling, BiMap subspace projection, ReEig
eigenvalue rectification, and the tangent space mapping that chains
domain-specific normalization, the matrix logarithm and upper-triangular
vectorization.
"""

from typing import Dict, Optional, Tuple

import numpy as np

from common.exceptions import InvalidInputError
from geometry.matfun import (
    ScalarFun,
    apply_spectrum,
    ensure_symmetric,
    loewner_backward,
    sym,
    sym_eig,
)
from optim.params import Parameter, ParamSpace
from optim.stiefel import check_stiefel, random_stiefel
from .base import Layer, Mode
from .dsbn import DispatchInfo, SPDDSMBN
from .spdbn import SpdBnConfig


BIMAP_STIEFEL_TOLERANCE = 1e-6


def upper_indices(dim: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Row/column indices of the upper triangle and the norm-preserving weights"""
    rows, cols = np.triu_indices(dim)
    weights = np.where(rows == cols, 1.0, np.sqrt(2.0))
    return rows, cols, weights


def upper_vectorize(s: np.ndarray) -> np.ndarray:
    """Upper triangle of symmetric matrices with off-diagonal entries scaled by sqrt(2)"""
    rows, cols, weights = upper_indices(s.shape[-1])
    return s[..., rows, cols] * weights


def upper_vectorize_backward(grad: np.ndarray, dim: int) -> np.ndarray:
    """Symmetric matrix gradient of upper_vectorize"""
    rows, cols, weights = upper_indices(dim)
    if grad.shape[-1] != rows.size:
        raise InvalidInputError(f"expected vectors of length {rows.size}, got {grad.shape[-1]}")
    scaled = grad * np.where(rows == cols, 1.0, 1.0 / weights)
    out = np.zeros(grad.shape[:-1] + (dim, dim))
    out[..., rows, cols] = scaled
    out[..., cols, rows] = scaled
    return out


def vector_to_symmetric(v: np.ndarray, dim: int) -> np.ndarray:
    """Inverse of upper_vectorize"""
    rows, cols, weights = upper_indices(dim)
    out = np.zeros(v.shape[:-1] + (dim, dim))
    out[..., rows, cols] = v / weights
    out[..., cols, rows] = v / weights
    return out


class CovariancePooling(Layer):
    """Sample covariance over time, centred, 1/(T-1) normalization: [M,S,T] -> [M,S,S]"""

    name = "covpool"

    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        x = self._check_ndim(x, 3, self.name)
        samples = x.shape[-1]
        if samples < 2:
            raise InvalidInputError(f"{self.name} needs at least 2 time samples, got {samples}")
        centred = x - x.mean(axis=-1, keepdims=True)
        self._cache = centred
        return sym(centred @ np.swapaxes(centred, -1, -2) / (samples - 1))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        centred = self._require_cache()
        samples = centred.shape[-1]
        d_centred = (grad + np.swapaxes(grad, -1, -2)) @ centred / (samples - 1)
        return d_centred - d_centred.mean(axis=-1, keepdims=True)


def bimap(z: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Congruence W^T Z W"""
    return sym(w.T @ z @ w)


def bimap_backward(z: np.ndarray, w: np.ndarray, grad: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(dZ, dW) for the congruence W^T Z W; dW is the Euclidean gradient summed over the batch"""
    g = sym(grad)
    d_z = sym(w @ g @ w.T)
    d_w = 2.0 * np.einsum("mij,jk,mkl->il", z, w, g)
    return d_z, d_w


class BiMap(Layer):
    """Bilinear subspace projection with a Stiefel-constrained weight: [M,n,n] -> [M,p,p]"""

    name = "bimap"

    def __init__(self, in_dim: int = 40, out_dim: int = 20, rng: Optional[np.random.Generator] = None,
                 weight: Optional[np.ndarray] = None):
        super().__init__()
        if not 0 < out_dim <= in_dim:
            raise InvalidInputError(f"BiMap needs 0 < out_dim <= in_dim, got {in_dim} -> {out_dim}")
        self.in_dim = in_dim
        self.out_dim = out_dim
        if weight is None:
            weight = random_stiefel(in_dim, out_dim, rng or np.random.default_rng(0))
        self.weight = Parameter(f"{self.name}.weight", weight, ParamSpace.stiefel((in_dim, out_dim)))

    def parameters(self) -> Dict[str, Parameter]:
        return {self.weight.name: self.weight}

    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        z = ensure_symmetric(self._check_ndim(x, 3, self.name), "BiMap input")
        if z.shape[-1] != self.in_dim:
            raise InvalidInputError(f"{self.name} expects {self.in_dim}x{self.in_dim} inputs, got {z.shape[-1]}")
        w = check_stiefel(self.weight.value, self.weight.name, BIMAP_STIEFEL_TOLERANCE)
        self._cache = z
        return bimap(z, w)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        z = self._require_cache()
        d_z, d_w = bimap_backward(z, self.weight.value, grad)
        self.weight.accumulate(d_w)
        return d_z


class ReEig(Layer):
    """Eigenvalue rectification max(lambda, eps); counts how many eigenvalues were clamped"""

    name = "reeig"

    def __init__(self, eps: float = 1e-4):
        super().__init__()
        self.function = ScalarFun.re_threshold(eps)
        self.eps = eps
        self.activations = 0
        self.evaluated = 0

    def reset_activations(self):
        self.activations = 0
        self.evaluated = 0

    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        eig = sym_eig(self._check_ndim(x, 3, self.name))
        self.activations += int(np.count_nonzero(eig.eigenvalues < self.eps))
        self.evaluated += int(eig.eigenvalues.size)
        self._cache = eig
        return apply_spectrum(eig, self.function.value(eig.eigenvalues))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        return loewner_backward(self._require_cache(), self.function, grad)


class TangentSpaceMapping(Layer):
    """Domain-specific SPD normalization followed by LogEig and upper-triangular vectorization"""

    name = "tsm"

    def __init__(self, dim: int, bn_config: Optional[SpdBnConfig] = None, domain_specific: bool = True):
        super().__init__()
        self.dim = dim
        self.bn = SPDDSMBN(dim, bn_config, domain_specific, param_name=f"{self.name}.log_nu")
        self.log = ScalarFun.log()
        self.last_info: Optional[DispatchInfo] = None

    @property
    def output_dim(self) -> int:
        return self.dim * (self.dim + 1) // 2

    def parameters(self) -> Dict[str, Parameter]:
        return self.bn.parameters()

    def forward(self, x: np.ndarray, domains=None, mode: Mode = Mode.EVAL) -> np.ndarray:
        x = self._check_ndim(x, 3, self.name)
        if domains is None:
            domains = np.zeros(x.shape[0], dtype=np.int64)
        normalized, info = self.bn.forward(x, domains, mode)
        eig = sym_eig(normalized)
        self.last_info = info
        self._cache = eig
        return upper_vectorize(apply_spectrum(eig, self.log.value(eig.eigenvalues)))

    def backward(self, grad: np.ndarray) -> np.ndarray:
        eig = self._require_cache()
        d_log = upper_vectorize_backward(np.asarray(grad, dtype=np.float64), self.dim)
        return self.bn.backward(loewner_backward(eig, self.log, d_log))
