#!/usr/bin/env python3
"""
Convolutional feature extractor layers: temporal FIR filter bank and
spatio-spectral filters. Both are bias-free linear maps.
"""

from typing import Dict, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from common.exceptions import InvalidInputError
from optim.params import Parameter, ParamSpace
from .base import Layer, Mode


class TemporalConv(Layer):
    """Per-channel temporal convolution with 'same' reflect padding: [M,1,P,T] -> [M,F,P,T]"""

    name = "temporal"

    def __init__(self, filters: int = 4, kernel: int = 25, rng: Optional[np.random.Generator] = None,
                 weight: Optional[np.ndarray] = None):
        super().__init__()
        if filters < 1 or kernel < 1:
            raise InvalidInputError(f"temporal conv needs positive filters and kernel, got {filters}, {kernel}")
        self.filters = filters
        self.kernel = kernel
        self.pad_left = (kernel - 1) // 2
        self.pad_right = kernel // 2

        if weight is None:
            rng = rng or np.random.default_rng(0)
            weight = rng.standard_normal((filters, 1, 1, kernel)) / np.sqrt(kernel)
        self.weight = Parameter(f"{self.name}.weight", weight, ParamSpace.euclidean((filters, 1, 1, kernel)))

    def parameters(self) -> Dict[str, Parameter]:
        return {self.weight.name: self.weight}

    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        x = self._check_ndim(x, 4, self.name)
        if x.shape[1] != 1:
            raise InvalidInputError(f"{self.name} expects a single input feature map, got {x.shape[1]}")
        if x.shape[-1] < self.kernel:
            raise InvalidInputError(f"{self.name}: {x.shape[-1]} time samples is shorter than the kernel ({self.kernel})")

        padded = np.pad(x[:, 0], ((0, 0), (0, 0), (self.pad_left, self.pad_right)), mode="reflect")
        windows = sliding_window_view(padded, self.kernel, axis=-1)
        self._cache = (windows, x.shape)
        return np.einsum("mptl,fl->mfpt", windows, self.weight.value[:, 0, 0, :])

    def backward(self, grad: np.ndarray) -> np.ndarray:
        windows, shape = self._require_cache()
        kernel = self.weight.value[:, 0, 0, :]
        self.weight.accumulate(np.einsum("mfpt,mptl->fl", grad, windows)[:, None, None, :])

        samples = shape[-1]
        d_padded = np.zeros(shape[:1] + shape[2:3] + (samples + self.kernel - 1,))
        for lag in range(self.kernel):
            d_padded[..., lag:lag + samples] += np.einsum("mfpt,f->mpt", grad, kernel[:, lag])

        # fold reflected samples back onto their sources
        d_x = d_padded[..., self.pad_left:self.pad_left + samples].copy()
        for i in range(self.pad_left):
            d_x[..., self.pad_left - i] += d_padded[..., i]
        for j in range(self.pad_right):
            d_x[..., samples - 2 - j] += d_padded[..., self.pad_left + samples + j]
        return d_x[:, None]


class SpatialConv(Layer):
    """Full-height spatio-spectral filters over (F, P): [M,F,P,T] -> [M,S,T]"""

    name = "spatial"

    def __init__(self, out_filters: int = 40, in_filters: int = 4, channels: int = 22,
                 rng: Optional[np.random.Generator] = None, weight: Optional[np.ndarray] = None):
        super().__init__()
        if min(out_filters, in_filters, channels) < 1:
            raise InvalidInputError("spatial conv dimensions must be positive")
        self.out_filters = out_filters
        self.in_filters = in_filters
        self.channels = channels

        shape = (out_filters, in_filters, channels, 1)
        if weight is None:
            rng = rng or np.random.default_rng(0)
            weight = rng.standard_normal(shape) / np.sqrt(in_filters * channels)
        self.weight = Parameter(f"{self.name}.weight", weight, ParamSpace.euclidean(shape))

    def parameters(self) -> Dict[str, Parameter]:
        return {self.weight.name: self.weight}

    def forward(self, x: np.ndarray, mode: Mode = Mode.EVAL) -> np.ndarray:
        x = self._check_ndim(x, 4, self.name)
        if x.shape[1:3] != (self.in_filters, self.channels):
            raise InvalidInputError(f"{self.name} expects inputs [M, {self.in_filters}, {self.channels}, T], "
                                    f"got {list(x.shape)}")
        self._cache = x
        return np.einsum("sfp,mfpt->mst", self.weight.value[..., 0], x)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        x = self._require_cache()
        self.weight.accumulate(np.einsum("mst,mfpt->sfp", grad, x)[..., None])
        return np.einsum("sfp,mst->mfpt", self.weight.value[..., 0], grad)
