#!/usr/bin/env python3
"""
Trainable parameters and the spaces they live in.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Tuple

import numpy as np

from common.exceptions import ConfigError, InvalidInputError


class ParamKind(Enum):
    """Enum for the manifolds a parameter can be constrained to"""
    EUCLIDEAN = "euclidean"
    STIEFEL = "stiefel"


@dataclass(frozen=True)
class ParamSpace:
    """Constraint set of a parameter and whether weight decay applies to it"""
    kind: ParamKind
    shape: Tuple[int, ...]
    weight_decay_applies: bool = True

    def __post_init__(self):
        if self.kind == ParamKind.STIEFEL:
            if self.weight_decay_applies:
                raise ConfigError("weight decay cannot be applied to a Stiefel parameter", "weight_decay_applies")
            if len(self.shape) != 2 or self.shape[0] < self.shape[1]:
                raise ConfigError(f"a Stiefel parameter needs shape (n, p) with n >= p, got {self.shape}", "shape")

    @classmethod
    def euclidean(cls, shape, weight_decay: bool = True) -> 'ParamSpace':
        return cls(ParamKind.EUCLIDEAN, tuple(shape), weight_decay)

    @classmethod
    def stiefel(cls, shape) -> 'ParamSpace':
        return cls(ParamKind.STIEFEL, tuple(shape), False)


@dataclass
class Parameter:
    """A named parameter value with its accumulated gradient"""
    name: str
    value: np.ndarray
    space: ParamSpace
    grad: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.value = np.array(self.value, dtype=np.float64)
        if self.value.shape != self.space.shape:
            raise InvalidInputError(
                f"parameter '{self.name}' has shape {self.value.shape}, its space expects {self.space.shape}")
        if self.grad is None:
            self.grad = np.zeros_like(self.value)

    @property
    def is_stiefel(self) -> bool:
        return self.space.kind == ParamKind.STIEFEL

    def zero_grad(self):
        self.grad = np.zeros_like(self.value)

    def accumulate(self, grad):
        """Add a gradient contribution"""
        grad = np.asarray(grad, dtype=np.float64)
        if grad.shape != self.value.shape:
            raise InvalidInputError(
                f"gradient for '{self.name}' has shape {grad.shape}, expected {self.value.shape}")
        self.grad = self.grad + grad
