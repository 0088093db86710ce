#!/usr/bin/env python3
"""
Base classes shared by all network layers.
"""

from abc import ABC, abstractmethod
from enum import Enum
from typing import Any, Dict

import numpy as np

from common.exceptions import InvalidInputError, UsageError
from optim.params import Parameter


class Mode(Enum):
    """Enum for forward-pass modes"""
    TRAIN = "train"
    EVAL = "eval"

    @classmethod
    def parse(cls, value) -> 'Mode':
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidInputError(f"Unknown mode: {value}. Valid modes: train, eval")


class Layer(ABC):
    """Abstract base class for layers with an explicit backward pass"""

    name = "layer"

    def __init__(self):
        self._cache: Any = None

    def parameters(self) -> Dict[str, Parameter]:
        """Trainable parameters keyed by their qualified name"""
        return {}

    def zero_grad(self):
        for param in self.parameters().values():
            param.zero_grad()

    def clear_cache(self):
        self._cache = None

    def _require_cache(self):
        if self._cache is None:
            raise UsageError(f"{self.name}: backward called without a recorded forward pass")
        return self._cache

    @staticmethod
    def _check_ndim(x: np.ndarray, ndim: int, what: str) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != ndim:
            raise InvalidInputError(f"{what} expects a {ndim}-d array, got shape {x.shape}")
        return x

    @abstractmethod
    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        """Compute the layer output and record what backward needs"""
        pass

    @abstractmethod
    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients and return the input gradient"""
        pass
