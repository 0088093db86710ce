#!/usr/bin/env python3
"""
SPD Batch Normalization Module

Riemannian batch normalization on SPD matrices: recentring by parallel
transport (rbn), batch-statistics SPD batch normalization (spdbn) and SPD
momentum batch normalization (spdmbn) with separate running statistics for
training and testing. Running statistics never receive gradients.
"""

from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, Optional, Tuple

import numpy as np

from common.exceptions import ConfigError, InvalidInputError, NumericError, UsageError
from geometry.manifold import (
    frechet_mean,
    frechet_variance,
    geodesic,
    log_euclidean_mean,
    transport_matrix,
)
from geometry.matfun import (
    EigenPair,
    ScalarFun,
    apply_spectrum,
    ensure_spd,
    loewner_backward,
    sym,
    sym_eig,
)
from optim.params import Parameter, ParamSpace
from .base import Mode


class ScheduleKind(Enum):
    """Enum for momentum schedule variants"""
    CLAMPED_EXPONENTIAL = "clamped_exponential"
    POWER_DECAY = "power_decay"
    CONSTANT = "constant"


@dataclass(frozen=True)
class MomentumSchedule:
    """Training momentum gamma(k) as a function of the update index k"""
    kind: ScheduleKind = ScheduleKind.CLAMPED_EXPONENTIAL
    gamma_min: float = 0.2
    K: int = 40
    alpha: float = 0.5
    value: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.gamma_min <= 1.0:
            raise ConfigError(f"gamma_min must lie in [0, 1], got {self.gamma_min}", "gamma_min")
        if self.kind == ScheduleKind.CLAMPED_EXPONENTIAL and (int(self.K) != self.K or self.K < 2):
            raise ConfigError(f"K must be an integer >= 2, got {self.K}", "K")
        if self.kind == ScheduleKind.POWER_DECAY and not self.alpha > 0:
            raise ConfigError(f"alpha must be positive, got {self.alpha}", "alpha")
        if self.kind == ScheduleKind.CONSTANT and not 0.0 <= self.value <= 1.0:
            raise ConfigError(f"constant momentum must lie in [0, 1], got {self.value}", "value")

    @classmethod
    def clamped_exponential(cls, gamma_min: float = 0.2, K: int = 40) -> 'MomentumSchedule':
        return cls(ScheduleKind.CLAMPED_EXPONENTIAL, gamma_min=gamma_min, K=K)

    @classmethod
    def power_decay(cls, alpha: float) -> 'MomentumSchedule':
        return cls(ScheduleKind.POWER_DECAY, gamma_min=0.0, alpha=alpha)

    @classmethod
    def constant(cls, value: float) -> 'MomentumSchedule':
        return cls(ScheduleKind.CONSTANT, gamma_min=min(max(value, 0.0), 1.0), value=value)

    def __call__(self, k: int) -> float:
        return schedule_value(self, k)

    def to_dict(self) -> Dict[str, Any]:
        return {"kind": self.kind.value, "gamma_min": self.gamma_min, "K": self.K,
                "alpha": self.alpha, "value": self.value}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'MomentumSchedule':
        return cls(kind=ScheduleKind(data["kind"]), gamma_min=data["gamma_min"], K=data["K"],
                   alpha=data["alpha"], value=data["value"])


def schedule_value(schedule: MomentumSchedule, k: int) -> float:
    """Evaluate the momentum schedule at update index k"""
    if k < 0:
        raise InvalidInputError(f"schedule index must be non-negative, got {k}")

    if schedule.kind == ScheduleKind.CLAMPED_EXPONENTIAL:
        exponent = max(schedule.K - k, 0) / (schedule.K - 1)
        raw = 1.0 - schedule.gamma_min ** exponent + schedule.gamma_min
        return float(min(max(raw, schedule.gamma_min), 1.0))

    if schedule.kind == ScheduleKind.POWER_DECAY:
        if k < 1:
            raise InvalidInputError("power_decay schedule is defined for k >= 1")
        return float(k ** (-schedule.alpha))

    return float(schedule.value)


class BnMode(Enum):
    """Enum for the SPD batch normalization variants"""
    RBN = "rbn"
    SPDBN = "spdbn"
    SPDMBN = "spdmbn"


@dataclass
class SpdBnConfig:
    """Hyperparameters of an SPD batch normalization layer"""
    mode: BnMode = BnMode.SPDMBN
    eps: float = 1e-5
    gamma_test: float = 0.1
    schedule: MomentumSchedule = field(default_factory=MomentumSchedule.clamped_exponential)
    bias_mean: Optional[np.ndarray] = None
    learn_variance: bool = True

    def __post_init__(self):
        if not isinstance(self.mode, BnMode):
            try:
                self.mode = BnMode(self.mode)
            except ValueError:
                raise ConfigError(f"unknown normalization mode '{self.mode}'", "mode")
        if not self.eps > 0:
            raise ConfigError(f"eps must be positive, got {self.eps}", "eps")
        if not 0.0 <= self.gamma_test <= 1.0:
            raise ConfigError(f"gamma_test must lie in [0, 1], got {self.gamma_test}", "gamma_test")
        if self.bias_mean is not None:
            self.bias_mean = ensure_spd(self.bias_mean, "bias_mean")


@dataclass
class RunningGeoStats:
    """Running Frechet means and variances for training and testing"""
    train_mean: np.ndarray
    train_var: float
    test_mean: np.ndarray
    test_var: float
    step: int = 0

    @classmethod
    def identity(cls, dim: int) -> 'RunningGeoStats':
        return cls(np.eye(dim), 1.0, np.eye(dim), 1.0, 0)

    @property
    def dim(self) -> int:
        return self.train_mean.shape[-1]

    def copy(self) -> 'RunningGeoStats':
        return RunningGeoStats(self.train_mean.copy(), self.train_var,
                               self.test_mean.copy(), self.test_var, self.step)

    def to_dict(self) -> Dict[str, Any]:
        return {"train_mean": self.train_mean.copy(), "train_var": self.train_var,
                "test_mean": self.test_mean.copy(), "test_var": self.test_var, "step": self.step}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'RunningGeoStats':
        return cls(ensure_spd(data["train_mean"], "train_mean"), float(data["train_var"]),
                   ensure_spd(data["test_mean"], "test_mean"), float(data["test_var"]), int(data["step"]))


class NormParams:
    """Learnable dispersion nu = exp(log_nu) and the fixed bias mean G_phi"""

    def __init__(self, dim: int, bias_mean: Optional[np.ndarray] = None, log_nu: float = 0.0,
                 learnable: bool = True, name: str = "spdbn.log_nu"):
        self.dim = dim
        self.bias_mean = np.eye(dim) if bias_mean is None else ensure_spd(bias_mean, "bias_mean")
        if self.bias_mean.shape != (dim, dim):
            raise InvalidInputError(f"bias_mean must be {dim}x{dim}, got {self.bias_mean.shape}")
        self.learnable = learnable
        self.log_nu = Parameter(name, np.array(float(log_nu)), ParamSpace.euclidean(()))

    @property
    def nu(self) -> float:
        return float(np.exp(self.log_nu.value))

    def parameters(self) -> Dict[str, Parameter]:
        return {self.log_nu.name: self.log_nu} if self.learnable else {}


@dataclass
class NormCache:
    """Intermediates of normalize_batch needed by its backward pass"""
    whitening: np.ndarray
    rebias: np.ndarray
    eig: EigenPair
    exponent: float
    rescale: bool


def batch_mean_estimate(batch) -> np.ndarray:
    """One Karcher step from the identity, i.e. exp(mean_j log Z_j)"""
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 3 or batch.shape[0] == 0:
        raise InvalidInputError(f"batch must be a non-empty (M, D, D) stack, got shape {batch.shape}")
    return log_euclidean_mean(batch)


def update_running(stats: RunningGeoStats, batch_mean: np.ndarray, batch: np.ndarray,
                   schedule: MomentumSchedule, gamma_test: float, k: Optional[int] = None) -> RunningGeoStats:
    """Momentum update of the training and testing statistics; returns a new object"""
    k = stats.step + 1 if k is None else k
    gamma_train = schedule_value(schedule, k)

    train_mean = geodesic(stats.train_mean, batch_mean, gamma_train)
    train_var = (1.0 - gamma_train) * stats.train_var + gamma_train * frechet_variance(batch, train_mean)
    test_mean = geodesic(stats.test_mean, batch_mean, gamma_test)
    test_var = (1.0 - gamma_test) * stats.test_var + gamma_test * frechet_variance(batch, test_mean)

    return RunningGeoStats(train_mean, float(train_var), test_mean, float(test_var), stats.step + 1)


def _normalize(batch, use_mean, use_var: float, nu: float, bias_mean, eps: float,
               rescale: bool = True) -> Tuple[np.ndarray, NormCache]:
    batch = ensure_spd(batch, "batch")
    if batch.ndim != 3 or batch.shape[0] == 0:
        raise InvalidInputError(f"batch must be a non-empty (M, D, D) stack, got shape {batch.shape}")
    if use_var < 0 or (use_var == 0 and eps <= 0):
        raise InvalidInputError(f"use_var must be positive (or eps > 0 when it is 0), got {use_var}")

    dim = batch.shape[-1]
    identity = np.eye(dim)
    whitening = transport_matrix(use_mean, identity)
    rebias = transport_matrix(identity, bias_mean)

    centred = sym(np.swapaxes(whitening, -1, -2) @ batch @ whitening)
    eig = sym_eig(centred)
    smallest = eig.eigenvalues[..., -1]
    if np.any(smallest <= 0.0):
        index = int(np.argmin(smallest))
        raise NumericError("recentred matrix is not SPD",
                           {"observation": index, "smallest_eigenvalue": float(smallest[index])})

    exponent = nu / (np.sqrt(use_var) + eps) if rescale else 1.0
    powered = apply_spectrum(eig, eig.eigenvalues ** exponent) if rescale else centred
    out = sym(rebias.T @ powered @ rebias)
    return out, NormCache(whitening, rebias, eig, float(exponent), rescale)


def normalize_batch(batch, use_mean, use_var: float, params: NormParams, eps: float,
                    rescale: bool = True) -> np.ndarray:
    """Whiten by use_mean, rescale dispersion by nu / (sqrt(use_var) + eps), rebias to G_phi"""
    out, _ = _normalize(batch, use_mean, use_var, params.nu, params.bias_mean, eps, rescale)
    return out


def normalize_batch_backward(cache: NormCache, upstream: np.ndarray) -> Tuple[np.ndarray, float]:
    """Gradients of normalize_batch with respect to its inputs and log_nu"""
    upstream = sym(np.asarray(upstream, dtype=np.float64))
    d_powered = sym(cache.rebias @ upstream @ cache.rebias.T)

    if cache.rescale:
        f = ScalarFun.power(cache.exponent)
        d_centred = loewner_backward(cache.eig, f, d_powered)
        u = cache.eig.eigenvectors
        inner_diag = np.einsum("mji,mjk,mki->mi", u, d_powered, u)
        lam = cache.eig.eigenvalues
        d_exponent = float(np.sum(inner_diag * lam ** cache.exponent * np.log(lam)))
        # exponent is proportional to exp(log_nu)
        d_log_nu = d_exponent * cache.exponent
    else:
        d_centred = d_powered
        d_log_nu = 0.0

    d_batch = sym(cache.whitening @ d_centred @ cache.whitening.T)
    return d_batch, d_log_nu


class SPDMBN:
    """SPD (momentum) batch normalization layer for a single domain"""

    name = "spdmbn"

    def __init__(self, dim: int, config: Optional[SpdBnConfig] = None,
                 params: Optional[NormParams] = None, stats: Optional[RunningGeoStats] = None,
                 domain_id: Optional[int] = None):
        self.dim = dim
        self.config = config or SpdBnConfig()
        self.params = params or NormParams(dim, self.config.bias_mean, learnable=self.config.learn_variance)
        self.stats = stats.copy() if stats is not None else RunningGeoStats.identity(dim)
        self.domain_id = domain_id
        self.momentum_step: Optional[int] = None
        self.update_count = 0
        self._frozen = False
        self._cache: Optional[NormCache] = None

    @property
    def rescale(self) -> bool:
        return self.config.mode != BnMode.RBN

    @contextmanager
    def frozen_statistics(self):
        """Train-mode forward passes use the current running statistics without updating them"""
        previous = self._frozen
        self._frozen = True
        try:
            yield self
        finally:
            self._frozen = previous

    def _record_update(self, batch: np.ndarray, batch_mean: np.ndarray):
        if self.config.mode == BnMode.SPDMBN:
            schedule = self.config.schedule
        else:
            schedule = MomentumSchedule.constant(self.config.gamma_test)
        self.stats = update_running(self.stats, batch_mean, batch, schedule,
                                    self.config.gamma_test, self.momentum_step)
        self.update_count += 1

    def forward(self, batch: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        mode = Mode.parse(mode)
        batch = ensure_spd(batch, "batch")
        if batch.ndim != 3 or batch.shape[0] == 0:
            raise InvalidInputError(f"{self.name} expects a non-empty (M, D, D) batch, got shape {batch.shape}")
        if batch.shape[-1] != self.dim:
            raise InvalidInputError(f"{self.name} expects {self.dim}x{self.dim} inputs, got {batch.shape[-1]}")

        if mode == Mode.EVAL:
            use_mean, use_var = self.stats.test_mean, self.stats.test_var
        elif self._frozen:
            use_mean, use_var = self.stats.train_mean, self.stats.train_var
        else:
            batch_mean = batch_mean_estimate(batch)
            self._record_update(batch, batch_mean)
            if self.config.mode == BnMode.SPDMBN:
                use_mean, use_var = self.stats.train_mean, self.stats.train_var
            else:
                use_mean, use_var = batch_mean, frechet_variance(batch, batch_mean)

        out, cache = _normalize(batch, use_mean, use_var, self.params.nu, self.params.bias_mean,
                                self.config.eps, self.rescale)
        self._cache = cache if mode == Mode.TRAIN else None
        return out

    def backward(self, upstream: np.ndarray) -> Tuple[np.ndarray, float]:
        """Input gradients and d log_nu for the last train-mode forward pass"""
        if self._cache is None:
            raise UsageError(f"{self.name}: backward called without a recorded train-mode forward pass")
        return normalize_batch_backward(self._cache, upstream)

    def fit(self, domain_data: np.ndarray) -> RunningGeoStats:
        return fit_domain_stats(self, domain_data)

    def adapt_incremental(self, domain_data: np.ndarray, batch_size: int = 50) -> RunningGeoStats:
        """Stream a domain through the testing-statistics update, batch by batch"""
        data = ensure_spd(domain_data, "domain_data")
        if data.shape[0] < 2:
            raise InvalidInputError(f"incremental adaptation needs at least 2 observations, got {data.shape[0]}")
        gamma = self.config.gamma_test
        stats = self.stats.copy()
        for start in range(0, data.shape[0], batch_size):
            chunk = data[start:start + batch_size]
            batch_mean = batch_mean_estimate(chunk)
            stats.test_mean = geodesic(stats.test_mean, batch_mean, gamma)
            stats.test_var = float((1.0 - gamma) * stats.test_var + gamma * frechet_variance(chunk, stats.test_mean))
        self.stats = stats
        return stats


def fit_domain_stats(layer: SPDMBN, domain_data) -> RunningGeoStats:
    """Set the testing statistics from the full-convergence Frechet mean and variance of a domain"""
    data = ensure_spd(domain_data, "domain_data")
    if data.ndim != 3 or data.shape[0] < 2:
        count = data.shape[0] if data.ndim == 3 else 1
        raise InvalidInputError(f"fitting domain statistics needs at least 2 observations, got {count}")

    result = frechet_mean(data)
    layer.stats = replace(layer.stats.copy(), test_mean=result.mean, test_var=result.variance)
    return layer.stats
