#!/usr/bin/env python3
"""
Linear softmax classifier with mean cross-entropy loss.
"""

from dataclasses import dataclass
from typing import Dict, Optional

import numpy as np

from common.exceptions import InvalidInputError, UsageError
from optim.params import Parameter, ParamSpace
from .base import Layer, Mode


@dataclass
class ClassifierOutput:
    """Logits, class probabilities and (when labels were given) the mean cross-entropy"""
    logits: np.ndarray
    probabilities: np.ndarray
    loss: Optional[float] = None

    @property
    def predictions(self) -> np.ndarray:
        return np.argmax(self.probabilities, axis=-1)


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def check_labels(labels, count: int, classes: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.shape != (count,):
        raise InvalidInputError(f"expected {count} labels, got shape {labels.shape}")
    if not np.issubdtype(labels.dtype, np.integer):
        if not np.all(np.mod(labels, 1) == 0):
            raise InvalidInputError("labels must be integers")
        labels = labels.astype(np.int64)
    if np.any(labels < 0) or np.any(labels >= classes):
        raise InvalidInputError(f"labels must lie in [0, {classes}), got range [{labels.min()}, {labels.max()}]")
    return labels


class LinearSoftmax(Layer):
    """Affine map with a bias row followed by softmax: weight shape [features + 1, classes]"""

    name = "classifier"

    def __init__(self, features: int, classes: int, weight: Optional[np.ndarray] = None):
        super().__init__()
        if features < 1 or classes < 2:
            raise InvalidInputError(f"classifier needs features >= 1 and classes >= 2, got {features}, {classes}")
        self.features = features
        self.classes = classes
        shape = (features + 1, classes)
        self.weight = Parameter(f"{self.name}.weight", np.zeros(shape) if weight is None else weight,
                                ParamSpace.euclidean(shape))

    def parameters(self) -> Dict[str, Parameter]:
        return {self.weight.name: self.weight}

    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL, labels=None) -> ClassifierOutput:
        v = self._check_ndim(x, 2, self.name)
        if v.shape[1] != self.features:
            raise InvalidInputError(f"{self.name} expects {self.features} features, got {v.shape[1]}")

        w = self.weight.value
        logits = v @ w[:-1] + w[-1]
        probabilities = softmax(logits)

        loss = None
        if labels is not None:
            labels = check_labels(labels, v.shape[0], self.classes)
            shifted = logits - logits.max(axis=-1, keepdims=True)
            log_probs = shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))
            loss = float(-np.mean(log_probs[np.arange(v.shape[0]), labels]))

        self._cache = (v, probabilities, labels)
        return ClassifierOutput(logits, probabilities, loss)

    def backward(self, grad: float = 1.0) -> np.ndarray:
        """Gradient of grad * loss; returns the feature gradient"""
        v, probabilities, labels = self._require_cache()
        if labels is None:
            raise UsageError(f"{self.name}: backward needs a forward pass with labels")

        d_logits = probabilities.copy()
        d_logits[np.arange(v.shape[0]), labels] -= 1.0
        d_logits *= float(grad) / v.shape[0]

        d_w = np.empty_like(self.weight.value)
        d_w[:-1] = v.T @ d_logits
        d_w[-1] = d_logits.sum(axis=0)
        self.weight.accumulate(d_w)
        return d_logits @ self.weight.value[:-1].T
