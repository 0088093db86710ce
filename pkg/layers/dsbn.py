#!/usr/bin/env python3
"""
Domain-Specific Batch Normalization Module

Keeps one normalization layer per source domain and routes every
observation to the layer of its domain. All domain layers share the same
learnable dispersion parameter; only their running statistics differ.
Layers for unseen domains are added on the fly in training mode, and
fitted (or replaced by identity statistics) at test time.
"""

from contextlib import contextmanager, nullcontext
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np

from common import console
from common.exceptions import InvalidBatchError, InvalidInputError, UsageError
from optim.params import Parameter
from .base import Mode
from .spdbn import NormParams, RunningGeoStats, SPDMBN, SpdBnConfig


SHARED_DOMAIN = -1


@dataclass
class DispatchInfo:
    """Routing metadata of one dispatcher forward pass"""
    routed: Dict[int, int] = field(default_factory=dict)
    fallback_domains: List[int] = field(default_factory=list)

    @property
    def used_fallback(self) -> bool:
        return bool(self.fallback_domains)

    def merge(self, other: 'DispatchInfo') -> 'DispatchInfo':
        routed = dict(self.routed)
        for domain, count in other.routed.items():
            routed[domain] = routed.get(domain, 0) + count
        fallback = sorted(set(self.fallback_domains) | set(other.fallback_domains))
        return DispatchInfo(routed, fallback)


class DomainSpecificBN:
    """Dispatcher over per-domain normalization layers with a shared scale parameter"""

    name = "dsbn"

    def __init__(self, layer_factory: Callable[[int], object], scale: Optional[Parameter],
                 domain_specific: bool = True):
        self._layer_factory = layer_factory
        self.scale = scale
        self.domain_specific = domain_specific
        self.layers: Dict[int, object] = {}
        self.counters: Dict[int, Dict[str, int]] = {}
        self._momentum_step: Optional[int] = None
        self._frozen = False
        self._cache: Optional[List[Tuple[int, np.ndarray, object]]] = None

    def route(self, domain_id: int) -> int:
        """Layer key an observation of domain_id is normalized with"""
        return int(domain_id) if self.domain_specific else SHARED_DOMAIN

    def parameters(self) -> Dict[str, Parameter]:
        return {self.scale.name: self.scale} if self.scale is not None else {}

    @property
    def known_domains(self) -> List[int]:
        return sorted(self.layers)

    def _new_layer(self, key: int):
        layer = self._layer_factory(key)
        layer.momentum_step = self._momentum_step
        return layer

    def layer_for(self, domain_id: int, create: bool = True):
        key = self.route(domain_id)
        if key not in self.layers:
            if not create:
                return None
            console.debug(f"{self.name}: adding normalization layer for domain {key}")
            self.layers[key] = self._new_layer(key)
            self.counters[key] = {"observations": 0, "train_batches": 0}
        return self.layers[key]

    def set_momentum_step(self, k: Optional[int]):
        """Fix the momentum schedule index used by subsequent training updates"""
        self._momentum_step = k
        for layer in self.layers.values():
            layer.momentum_step = k

    @contextmanager
    def frozen_statistics(self):
        """Train-mode passes keep all statistics, also those of domains first seen inside the block"""
        previous = self._frozen
        self._frozen = True
        try:
            yield self
        finally:
            self._frozen = previous

    def _groups(self, domains: np.ndarray) -> Dict[int, np.ndarray]:
        keys = np.array([self.route(d) for d in domains], dtype=np.int64)
        return {int(key): np.flatnonzero(keys == key) for key in np.unique(keys)}

    def forward(self, x: np.ndarray, domains, mode: Mode = Mode.EVAL) -> Tuple[np.ndarray, DispatchInfo]:
        mode = Mode.parse(mode)
        x = np.asarray(x, dtype=np.float64)
        domains = np.asarray(domains).astype(np.int64).reshape(-1)
        if domains.shape[0] != x.shape[0]:
            raise InvalidInputError(f"{self.name}: {x.shape[0]} observations but {domains.shape[0]} domain ids")
        if x.shape[0] == 0:
            raise InvalidInputError(f"{self.name}: empty batch")

        groups = self._groups(domains)
        if mode == Mode.TRAIN:
            for key, index in groups.items():
                if index.size < 2:
                    raise InvalidBatchError(key, int(index.size))

        out = np.empty_like(x)
        info = DispatchInfo()
        cache = []
        for key, index in groups.items():
            if mode == Mode.TRAIN:
                layer = self.layer_for(key)
                frozen = self._frozen or getattr(layer, "_frozen", False)
                with layer.frozen_statistics() if self._frozen else nullcontext():
                    out[index] = layer.forward(x[index], mode)
                self.counters[key]["observations"] += int(index.size)
                if not frozen:
                    self.counters[key]["train_batches"] += 1
                cache.append((key, index, layer))
            else:
                layer = self.layers.get(key)
                if layer is None:
                    # unseen domain without adaptation: identity statistics
                    layer = self._new_layer(key)
                    info.fallback_domains.append(key)
                out[index] = layer.forward(x[index], mode)
            info.routed[key] = int(index.size)

        self._cache = cache if mode == Mode.TRAIN else None
        return out, info

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Scatter upstream gradients to the domain layers; the shared scale gradient is accumulated"""
        if self._cache is None:
            raise UsageError(f"{self.name}: backward called without a recorded train-mode forward pass")
        grad = np.asarray(grad, dtype=np.float64)
        d_input = np.zeros_like(grad)
        d_scale = 0.0
        for _, index, layer in self._cache:
            d_input[index], d_layer_scale = layer.backward(grad[index])
            d_scale += d_layer_scale
        if self.scale is not None:
            self.scale.accumulate(np.asarray(d_scale).reshape(self.scale.value.shape))
        return d_input

    def fit_domain(self, domain_id: int, data: np.ndarray, adapt: str = "full"):
        """Register a fresh layer for domain_id and estimate its statistics from unlabeled data"""
        if not self.domain_specific:
            console.debug(f"{self.name}: shared statistics, no per-domain adaptation for domain {domain_id}")
            return self.layer_for(domain_id).stats

        key = self.route(domain_id)
        layer = self._new_layer(key)
        if adapt == "full":
            stats = layer.fit(data)
        elif adapt == "incremental":
            stats = layer.adapt_incremental(data)
        else:
            raise InvalidInputError(f"Unknown adaptation mode: {adapt}. Valid modes: full, incremental")
        self.layers[key] = layer
        self.counters.setdefault(key, {"observations": 0, "train_batches": 0})
        return stats

    def forget_domain(self, domain_id: int):
        key = self.route(domain_id)
        self.layers.pop(key, None)
        self.counters.pop(key, None)


class SPDDSMBN(DomainSpecificBN):
    """SPD domain-specific momentum batch normalization"""

    name = "spddsmbn"

    def __init__(self, dim: int, config: Optional[SpdBnConfig] = None, domain_specific: bool = True,
                 param_name: str = "tsm.log_nu"):
        self.dim = dim
        self.config = config or SpdBnConfig()
        self.params = NormParams(dim, self.config.bias_mean, learnable=self.config.learn_variance,
                                 name=param_name)
        scale = self.params.log_nu if self.config.learn_variance else None
        super().__init__(self._make_layer, scale, domain_specific)

    def _make_layer(self, key: int) -> SPDMBN:
        return SPDMBN(self.dim, self.config, self.params, domain_id=key)

    def state_dict(self) -> Dict[int, Dict[str, object]]:
        return {key: layer.stats.to_dict() for key, layer in self.layers.items()}

    def load_state_dict(self, state: Dict[int, Dict[str, object]]):
        self.layers = {}
        self.counters = {}
        for key, stats in state.items():
            layer = self.layer_for(int(key))
            layer.stats = RunningGeoStats.from_dict(stats)
