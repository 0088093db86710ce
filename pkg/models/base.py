#!/usr/bin/env python3
"""
Base class for end-to-end models h = g o m o f: a linear feature extractor
f, a domain-specific normalizing map m and a linear softmax classifier g.
"""

from abc import ABC, abstractmethod
from collections import OrderedDict
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np

from common.exceptions import InvalidInputError
from layers.base import Layer, Mode
from layers.classifier import LinearSoftmax
from layers.dsbn import DispatchInfo, DomainSpecificBN
from optim.params import Parameter
from .batch import EpochBatch
from .config import TsmNetConfig


@dataclass
class ModelOutput:
    """Class probabilities, predictions, loss (if labels were given) and routing metadata"""
    probabilities: np.ndarray
    predictions: np.ndarray
    loss: Optional[float]
    features: np.ndarray
    info: DispatchInfo


class NetworkModel(ABC):
    """Abstract base class for models trained with explicit backward passes"""

    arm = "base"

    def __init__(self, config: TsmNetConfig, domain_specific: bool = True, seed: int = 0):
        self.config = config
        self.domain_specific = domain_specific
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.classifier: Optional[LinearSoftmax] = None

    @property
    @abstractmethod
    def feature_layers(self) -> List[Layer]:
        """Layers of the feature extractor f, in order"""
        pass

    @property
    @abstractmethod
    def normalization(self) -> DomainSpecificBN:
        """The domain-specific normalization dispatcher"""
        pass

    @abstractmethod
    def _map_forward(self, features: np.ndarray, domains: np.ndarray, mode: Mode):
        """Return (vectors, DispatchInfo) for the classifier input"""
        pass

    @abstractmethod
    def _map_backward(self, grad: np.ndarray) -> np.ndarray:
        pass

    def parameters(self) -> Dict[str, Parameter]:
        params: Dict[str, Parameter] = OrderedDict()
        for layer in self.feature_layers:
            params.update(layer.parameters())
        params.update(self.normalization.parameters())
        params.update(self.classifier.parameters())
        return params

    def zero_grad(self):
        for param in self.parameters().values():
            param.zero_grad()

    def _prepare_input(self, data: np.ndarray) -> np.ndarray:
        data = np.asarray(data, dtype=np.float64)
        expected = (self.config.channels, self.config.time)
        if data.ndim != 3 or data.shape[1:] != expected:
            raise InvalidInputError(f"model expects trials of shape [M, {expected[0]}, {expected[1]}], "
                                    f"got {list(data.shape)}")
        return data[:, None]

    def extract_features(self, data: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        """Apply the feature extractor f"""
        x = self._prepare_input(data)
        for layer in self.feature_layers:
            x = layer.forward(x, mode)
        return x

    def forward(self, batch: EpochBatch, mode: Mode = Mode.EVAL) -> ModelOutput:
        mode = Mode.parse(mode)
        features = self.extract_features(batch.data, mode)
        vectors, info = self._map_forward(features, batch.domains, mode)
        output = self.classifier.forward(vectors, mode, labels=batch.labels)
        return ModelOutput(output.probabilities, output.predictions, output.loss, vectors, info)

    def backward(self):
        """Accumulate gradients of the last forward pass's loss into every parameter"""
        grad = self.classifier.backward(1.0)
        grad = self._map_backward(grad)
        for layer in reversed(self.feature_layers):
            grad = layer.backward(grad)

    def predict(self, data: np.ndarray, domains) -> ModelOutput:
        return self.forward(EpochBatch(data, domains), Mode.EVAL)

    def adapt_domain(self, domain_id: int, data: np.ndarray, adapt: str = "full"):
        """Unsupervised test-time adaptation: estimate the domain's statistics from unlabeled trials"""
        return self.normalization.fit_domain(domain_id, self.extract_features(data, Mode.EVAL), adapt)

    def set_momentum_step(self, k: Optional[int]):
        self.normalization.set_momentum_step(k)

    def frozen_statistics(self):
        return self.normalization.frozen_statistics()

    def state_dict(self) -> Dict[str, Any]:
        return {
            "params": {name: param.value.copy() for name, param in self.parameters().items()},
            "domains": self.normalization.state_dict(),
        }

    def load_state_dict(self, state: Dict[str, Any]):
        params = self.parameters()
        missing = set(params) - set(state["params"])
        if missing:
            raise InvalidInputError(f"state is missing parameters: {sorted(missing)}")
        for name, param in params.items():
            value = np.asarray(state["params"][name], dtype=np.float64)
            if value.shape != param.value.shape:
                raise InvalidInputError(f"parameter {name} has shape {value.shape}, expected {param.value.shape}")
            param.value = value.copy()
            param.zero_grad()
        self.normalization.load_state_dict(state["domains"])
