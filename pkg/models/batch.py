#!/usr/bin/env python3
"""
Minibatch container passed through the models.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from common.exceptions import InvalidInputError


@dataclass
class EpochBatch:
    """Trials [M, P, T] with their domain ids and (optionally) class labels"""
    data: np.ndarray
    domains: np.ndarray
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=np.float64)
        self.domains = np.asarray(self.domains).astype(np.int64).reshape(-1)
        if self.data.ndim != 3:
            raise InvalidInputError(f"batch data must have shape [M, P, T], got {self.data.shape}")
        if self.domains.shape[0] != self.data.shape[0]:
            raise InvalidInputError(f"{self.data.shape[0]} trials but {self.domains.shape[0]} domain ids")
        if self.labels is not None:
            self.labels = np.asarray(self.labels).astype(np.int64).reshape(-1)
            if self.labels.shape[0] != self.data.shape[0]:
                raise InvalidInputError(f"{self.data.shape[0]} trials but {self.labels.shape[0]} labels")

    @property
    def size(self) -> int:
        return self.data.shape[0]

    def subset(self, index) -> 'EpochBatch':
        labels = None if self.labels is None else self.labels[index]
        return EpochBatch(self.data[index], self.domains[index], labels)

    def without_labels(self) -> 'EpochBatch':
        return EpochBatch(self.data, self.domains, None)
