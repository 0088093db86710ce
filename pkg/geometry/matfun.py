#!/usr/bin/env python3
"""
Matrix Functions Module

Symmetric eigendecomposition and eigenvalue-wise matrix functions
(log, exp, powers, square roots, eigenvalue thresholding) together with
their backward passes. Every routine accepts a single (D, D) matrix or a
stack of matrices with shape (..., D, D); all arithmetic is float64.

Backward passes use the Loewner (Daleckii-Krein) matrix of the scalar
function; eigenvalues closer than TIE_TOLERANCE * max(1, lambda_max) fall
back to the derivative at their midpoint.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from common.config import config
from common.exceptions import InvalidInputError, SpdDomainError


SYMMETRY_TOLERANCE = 1e-12
SPD_RELATIVE_TOLERANCE = 1e-12
TIE_TOLERANCE = 1e-10
SIGN_TOLERANCE = 1e-12


def sym(x: np.ndarray) -> np.ndarray:
    """Symmetric part (X + X^T) / 2 over the last two axes"""
    return 0.5 * (x + np.swapaxes(x, -1, -2))


def identity_like(x: np.ndarray) -> np.ndarray:
    """Identity matrices broadcast to the shape of x"""
    return np.broadcast_to(np.eye(x.shape[-1]), x.shape).copy()


def ensure_symmetric(x, name: str = "input") -> np.ndarray:
    """Validate a (stack of) symmetric matrices and return an exactly symmetric float64 copy"""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim < 2 or x.shape[-1] != x.shape[-2]:
        raise InvalidInputError(f"{name} must be a square matrix or a stack of square matrices, got shape {x.shape}")
    if x.shape[-1] == 0:
        raise InvalidInputError(f"{name} must have a positive dimension")
    if not np.all(np.isfinite(x)):
        raise InvalidInputError(f"{name} contains non-finite entries")

    scale = max(1.0, float(np.max(np.abs(x))))
    deviation = float(np.max(np.abs(x - np.swapaxes(x, -1, -2))))
    if deviation > SYMMETRY_TOLERANCE * scale:
        raise InvalidInputError(f"{name} is not symmetric (max |X - X^T| = {deviation:.3g})")

    return sym(x)


def ensure_spd(x, name: str = "input") -> np.ndarray:
    """Validate a (stack of) SPD matrices; the smallest eigenvalue must exceed 1e-12 * the largest"""
    x = ensure_symmetric(x, name)
    eigenvalues = np.linalg.eigvalsh(x)
    smallest = eigenvalues[..., 0]
    largest = eigenvalues[..., -1]
    bad = smallest <= SPD_RELATIVE_TOLERANCE * np.maximum(largest, 0.0)
    if np.any(bad):
        raise SpdDomainError(name, float(np.min(smallest)))
    return x


class FunKind(str, Enum):
    """Supported eigenvalue-wise scalar functions"""
    LOG = "log"
    EXP = "exp"
    POWER = "power"
    SQRT = "sqrt"
    INV_SQRT = "inv_sqrt"
    RE_THRESHOLD = "re_threshold"


@dataclass(frozen=True)
class ScalarFun:
    """A scalar function f applied to eigenvalues, with its derivative f'"""
    kind: FunKind
    param: float = 0.0

    def __post_init__(self):
        if self.kind == FunKind.RE_THRESHOLD and not self.param > 0:
            raise InvalidInputError(f"re_threshold needs a positive eps, got {self.param}")

    @classmethod
    def log(cls) -> 'ScalarFun':
        return cls(FunKind.LOG)

    @classmethod
    def exp(cls) -> 'ScalarFun':
        return cls(FunKind.EXP)

    @classmethod
    def power(cls, p: float) -> 'ScalarFun':
        return cls(FunKind.POWER, float(p))

    @classmethod
    def sqrt(cls) -> 'ScalarFun':
        return cls(FunKind.SQRT)

    @classmethod
    def inv_sqrt(cls) -> 'ScalarFun':
        return cls(FunKind.INV_SQRT)

    @classmethod
    def re_threshold(cls, eps: float) -> 'ScalarFun':
        return cls(FunKind.RE_THRESHOLD, float(eps))

    @property
    def requires_spd(self) -> bool:
        """Whether the function is only defined on positive eigenvalues"""
        if self.kind in (FunKind.LOG, FunKind.SQRT, FunKind.INV_SQRT):
            return True
        return self.kind == FunKind.POWER and not float(self.param).is_integer()

    def value(self, lam: np.ndarray) -> np.ndarray:
        """f(lambda)"""
        if self.kind == FunKind.LOG:
            return np.log(lam)
        if self.kind == FunKind.EXP:
            return np.exp(lam)
        if self.kind == FunKind.POWER:
            return np.power(lam, self.param)
        if self.kind == FunKind.SQRT:
            return np.sqrt(lam)
        if self.kind == FunKind.INV_SQRT:
            return 1.0 / np.sqrt(lam)
        return np.maximum(lam, self.param)

    def derivative(self, lam: np.ndarray) -> np.ndarray:
        """f'(lambda)"""
        if self.kind == FunKind.LOG:
            return 1.0 / lam
        if self.kind == FunKind.EXP:
            return np.exp(lam)
        if self.kind == FunKind.POWER:
            if self.param == 0.0:
                return np.zeros_like(lam)
            return self.param * np.power(lam, self.param - 1.0)
        if self.kind == FunKind.SQRT:
            return 0.5 / np.sqrt(lam)
        if self.kind == FunKind.INV_SQRT:
            return -0.5 * np.power(lam, -1.5)
        return np.where(lam > self.param, 1.0, 0.0)

    def __str__(self) -> str:
        if self.kind in (FunKind.POWER, FunKind.RE_THRESHOLD):
            return f"{self.kind.value}({self.param:g})"
        return self.kind.value


@dataclass
class EigenPair:
    """Eigenvalues sorted descending and the matching orthonormal eigenvector columns"""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[-1]

    def reconstruct(self) -> np.ndarray:
        """U diag(lambda) U^T"""
        return apply_spectrum(self, self.eigenvalues)


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    # first component above SIGN_TOLERANCE made positive, per column
    significant = np.abs(vectors) > SIGN_TOLERANCE
    first = np.argmax(significant, axis=-2)
    leading = np.take_along_axis(vectors, first[..., None, :], axis=-2)[..., 0, :]
    signs = np.where(leading < 0.0, -1.0, 1.0)
    return vectors * signs[..., None, :]


def jacobi_eigh(matrix: np.ndarray, tol: float = 1e-15, max_sweeps: int = 64):
    """Cyclic Jacobi eigenvalue algorithm for one symmetric matrix.

    Returns (eigenvalues, eigenvectors) in the order the rotations leave them;
    sym_eig takes care of sorting and sign conventions.
    """
    a = np.array(matrix, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    norm = max(np.linalg.norm(a), np.finfo(np.float64).tiny)

    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(np.diag(a) ** 2), 0.0))
        if off <= tol * norm:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                t = (1.0 if theta >= 0 else -1.0) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c

                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = a[q, p] = 0.0

                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

    return np.diag(a).copy(), v


def _jacobi_stack(x: np.ndarray):
    eigenvalues = np.empty(x.shape[:-1])
    eigenvectors = np.empty(x.shape)
    for index in np.ndindex(*x.shape[:-2]):
        eigenvalues[index], eigenvectors[index] = jacobi_eigh(x[index])
    return eigenvalues, eigenvectors


def sym_eig(s, solver: Optional[str] = None) -> EigenPair:
    """Eigendecomposition of symmetric matrices with descending eigenvalues and deterministic signs"""
    s = ensure_symmetric(s)
    solver = solver or config.eig_solver

    if solver == "jacobi":
        eigenvalues, eigenvectors = _jacobi_stack(s)
    else:
        eigenvalues, eigenvectors = np.linalg.eigh(s)

    order = np.argsort(-eigenvalues, axis=-1, kind="stable")
    eigenvalues = np.take_along_axis(eigenvalues, order, axis=-1)
    eigenvectors = np.take_along_axis(eigenvectors, order[..., None, :], axis=-1)
    return EigenPair(eigenvalues, _fix_signs(eigenvectors))


def apply_spectrum(eig: EigenPair, values: np.ndarray) -> np.ndarray:
    """U diag(values) U^T for a precomputed eigendecomposition"""
    u = eig.eigenvectors
    return sym((u * values[..., None, :]) @ np.swapaxes(u, -1, -2))


def _check_domain(eig: EigenPair, f: ScalarFun):
    if f.requires_spd:
        smallest = eig.eigenvalues[..., -1]
        if np.any(smallest <= 0.0):
            raise SpdDomainError(str(f), float(np.min(smallest)))


def spd_map(z, f: ScalarFun, eig: Optional[EigenPair] = None) -> np.ndarray:
    """Apply f to the eigenvalues: U diag(f(lambda)) U^T"""
    if eig is None:
        eig = sym_eig(z)
    _check_domain(eig, f)
    return apply_spectrum(eig, f.value(eig.eigenvalues))


def loewner_matrix(eigenvalues: np.ndarray, f: ScalarFun) -> np.ndarray:
    """K[i, j] = (f(li) - f(lj)) / (li - lj), or f'((li + lj) / 2) for near-ties"""
    lam_i = eigenvalues[..., :, None]
    lam_j = eigenvalues[..., None, :]
    diff = lam_i - lam_j

    tau = TIE_TOLERANCE * np.maximum(1.0, np.max(eigenvalues, axis=-1))
    tied = np.abs(diff) <= tau[..., None, None]

    f_values = f.value(eigenvalues)
    quotient = (f_values[..., :, None] - f_values[..., None, :]) / np.where(tied, 1.0, diff)
    return np.where(tied, f.derivative(0.5 * (lam_i + lam_j)), quotient)


def loewner_backward(eig: EigenPair, f: ScalarFun, upstream: np.ndarray) -> np.ndarray:
    """Adjoint of spd_map for a precomputed eigendecomposition"""
    _check_domain(eig, f)
    u = eig.eigenvectors
    ut = np.swapaxes(u, -1, -2)
    inner = ut @ sym(np.asarray(upstream, dtype=np.float64)) @ u
    return sym(u @ (loewner_matrix(eig.eigenvalues, f) * inner) @ ut)


def spd_map_backward(z, f: ScalarFun, upstream, eig: Optional[EigenPair] = None) -> np.ndarray:
    """Gradient of <upstream, spd_map(Z, f)> with respect to Z"""
    if eig is None:
        eig = sym_eig(z)
    return loewner_backward(eig, f, upstream)


# Shorthands used throughout the geometry code
def logm(z, eig: Optional[EigenPair] = None) -> np.ndarray:
    return spd_map(z, ScalarFun.log(), eig)


def expm(s, eig: Optional[EigenPair] = None) -> np.ndarray:
    return spd_map(s, ScalarFun.exp(), eig)


def sqrtm(z, eig: Optional[EigenPair] = None) -> np.ndarray:
    return spd_map(z, ScalarFun.sqrt(), eig)


def invsqrtm(z, eig: Optional[EigenPair] = None) -> np.ndarray:
    return spd_map(z, ScalarFun.inv_sqrt(), eig)


def powm(z, p: float, eig: Optional[EigenPair] = None) -> np.ndarray:
    return spd_map(z, ScalarFun.power(p), eig)
