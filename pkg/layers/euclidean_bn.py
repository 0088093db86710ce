#!/usr/bin/env python3
"""
Euclidean counterparts used by the ablation model: log-variance pooling and
(domain-specific) momentum batch normalization over feature vectors.
"""

from contextlib import contextmanager
from dataclasses import dataclass
from typing import Any, Dict, Optional, Tuple

import numpy as np

from common.exceptions import InvalidInputError, UsageError
from optim.params import Parameter, ParamSpace
from .base import Layer, Mode
from .dsbn import DomainSpecificBN
from .spdbn import BnMode, MomentumSchedule, SpdBnConfig, schedule_value


VARIANCE_FLOOR = 1e-10


class LogVariancePooling(Layer):
    """log(max(var_t(x), 1e-10)) per channel: [M,S,T] -> [M,S]"""

    name = "logvar"

    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        x = self._check_ndim(x, 3, self.name)
        if x.shape[-1] < 2:
            raise InvalidInputError(f"{self.name} needs at least 2 time samples, got {x.shape[-1]}")
        centred = x - x.mean(axis=-1, keepdims=True)
        variance = np.sum(centred * centred, axis=-1) / (x.shape[-1] - 1)
        floored = np.maximum(variance, VARIANCE_FLOOR)
        self._cache = (centred, floored, variance > VARIANCE_FLOOR)
        return np.log(floored)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        centred, floored, active = self._require_cache()
        d_var = np.where(active, grad / floored, 0.0)
        return 2.0 * d_var[..., None] * centred / (centred.shape[-1] - 1)


@dataclass
class EuclideanRunningStats:
    """Running feature means and variances for training and testing"""
    train_mean: np.ndarray
    train_var: np.ndarray
    test_mean: np.ndarray
    test_var: np.ndarray
    step: int = 0

    @classmethod
    def identity(cls, features: int) -> 'EuclideanRunningStats':
        return cls(np.zeros(features), np.ones(features), np.zeros(features), np.ones(features), 0)

    def copy(self) -> 'EuclideanRunningStats':
        return EuclideanRunningStats(self.train_mean.copy(), self.train_var.copy(),
                                     self.test_mean.copy(), self.test_var.copy(), self.step)

    def to_dict(self) -> Dict[str, Any]:
        return {"train_mean": self.train_mean.copy(), "train_var": self.train_var.copy(),
                "test_mean": self.test_mean.copy(), "test_var": self.test_var.copy(), "step": self.step}

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'EuclideanRunningStats':
        return cls(np.asarray(data["train_mean"], dtype=np.float64), np.asarray(data["train_var"], dtype=np.float64),
                   np.asarray(data["test_mean"], dtype=np.float64), np.asarray(data["test_var"], dtype=np.float64),
                   int(data["step"]))


class EuclideanMBN:
    """Momentum batch normalization of feature vectors with a shared log-scale"""

    name = "euclidean_mbn"

    def __init__(self, features: int, config: Optional[SpdBnConfig] = None,
                 log_scale: Optional[Parameter] = None, domain_id: Optional[int] = None):
        self.features = features
        self.config = config or SpdBnConfig()
        self.log_scale = log_scale or Parameter("ebn.log_scale", np.array(0.0), ParamSpace.euclidean(()))
        self.stats = EuclideanRunningStats.identity(features)
        self.domain_id = domain_id
        self.momentum_step: Optional[int] = None
        self.update_count = 0
        self._frozen = False
        self._cache = None

    @contextmanager
    def frozen_statistics(self):
        previous = self._frozen
        self._frozen = True
        try:
            yield self
        finally:
            self._frozen = previous

    def _update(self, x: np.ndarray, batch_mean: np.ndarray):
        stats = self.stats
        k = stats.step + 1 if self.momentum_step is None else self.momentum_step
        if self.config.mode == BnMode.SPDMBN:
            gamma = schedule_value(self.config.schedule, k)
        else:
            gamma = schedule_value(MomentumSchedule.constant(self.config.gamma_test), k)
        gamma_test = self.config.gamma_test

        train_mean = (1.0 - gamma) * stats.train_mean + gamma * batch_mean
        train_var = (1.0 - gamma) * stats.train_var + gamma * np.mean((x - train_mean) ** 2, axis=0)
        test_mean = (1.0 - gamma_test) * stats.test_mean + gamma_test * batch_mean
        test_var = (1.0 - gamma_test) * stats.test_var + gamma_test * np.mean((x - test_mean) ** 2, axis=0)
        self.stats = EuclideanRunningStats(train_mean, train_var, test_mean, test_var, stats.step + 1)
        self.update_count += 1

    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        mode = Mode.parse(mode)
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[0] == 0 or x.shape[1] != self.features:
            raise InvalidInputError(f"{self.name} expects a non-empty [M, {self.features}] batch, got {x.shape}")

        if mode == Mode.EVAL:
            mean, var = self.stats.test_mean, self.stats.test_var
        elif self._frozen:
            mean, var = self.stats.train_mean, self.stats.train_var
        else:
            batch_mean = x.mean(axis=0)
            self._update(x, batch_mean)
            if self.config.mode == BnMode.SPDMBN:
                mean, var = self.stats.train_mean, self.stats.train_var
            else:
                mean, var = batch_mean, x.var(axis=0)

        rescale = self.config.mode != BnMode.RBN
        denominator = np.sqrt(var) + self.config.eps if rescale else np.ones(self.features)
        scale = float(np.exp(self.log_scale.value)) if rescale else 1.0
        standardized = (x - mean) / denominator
        self._cache = (standardized, denominator, scale, rescale) if mode == Mode.TRAIN else None
        return scale * standardized

    def backward(self, grad: np.ndarray) -> Tuple[np.ndarray, float]:
        if self._cache is None:
            raise UsageError(f"{self.name}: backward called without a recorded train-mode forward pass")
        standardized, denominator, scale, rescale = self._cache
        grad = np.asarray(grad, dtype=np.float64)
        d_log_scale = float(scale * np.sum(grad * standardized)) if rescale else 0.0
        return grad * scale / denominator, d_log_scale

    def fit(self, data: np.ndarray) -> EuclideanRunningStats:
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 2:
            raise InvalidInputError(f"fitting domain statistics needs at least 2 observations, got shape {data.shape}")
        self.stats = self.stats.copy()
        self.stats.test_mean = data.mean(axis=0)
        self.stats.test_var = data.var(axis=0)
        return self.stats

    def adapt_incremental(self, data: np.ndarray, batch_size: int = 50) -> EuclideanRunningStats:
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 2:
            raise InvalidInputError(f"incremental adaptation needs at least 2 observations, got shape {data.shape}")
        gamma = self.config.gamma_test
        stats = self.stats.copy()
        for start in range(0, data.shape[0], batch_size):
            chunk = data[start:start + batch_size]
            stats.test_mean = (1.0 - gamma) * stats.test_mean + gamma * chunk.mean(axis=0)
            stats.test_var = (1.0 - gamma) * stats.test_var + gamma * np.mean((chunk - stats.test_mean) ** 2, axis=0)
        self.stats = stats
        return stats


class EuclideanDSMBN(DomainSpecificBN):
    """Domain-specific Euclidean momentum batch normalization"""

    name = "euclidean_dsmbn"

    def __init__(self, features: int, config: Optional[SpdBnConfig] = None, domain_specific: bool = True,
                 param_name: str = "ebn.log_scale"):
        self.features = features
        self.config = config or SpdBnConfig()
        self.log_scale = Parameter(param_name, np.array(0.0), ParamSpace.euclidean(()))
        scale = self.log_scale if self.config.learn_variance else None
        super().__init__(self._make_layer, scale, domain_specific)

    def _make_layer(self, key: int) -> EuclideanMBN:
        return EuclideanMBN(self.features, self.config, self.log_scale, domain_id=key)

    def state_dict(self) -> Dict[int, Dict[str, Any]]:
        return {key: layer.stats.to_dict() for key, layer in self.layers.items()}

    def load_state_dict(self, state: Dict[int, Dict[str, Any]]):
        self.layers = {}
        self.counters = {}
        for key, stats in state.items():
            layer = self.layer_for(int(key))
            layer.stats = EuclideanRunningStats.from_dict(stats)
