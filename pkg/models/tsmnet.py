#!/usr/bin/env python3
"""
TSMNet: temporal and spatio-spectral convolutions, covariance pooling,
BiMap, ReEig, SPD domain-specific momentum batch normalization, LogEig and
a linear softmax classifier.
"""

from typing import List, Optional

import numpy as np

from layers.base import Layer, Mode
from layers.classifier import LinearSoftmax
from layers.conv import SpatialConv, TemporalConv
from layers.dsbn import SPDDSMBN
from layers.spd import BiMap, CovariancePooling, ReEig, TangentSpaceMapping
from layers.spdbn import SpdBnConfig
from .base import NetworkModel
from .config import TsmNetConfig


class TsmNetModel(NetworkModel):
    """Tangent space mapping network on SPD features"""

    arm = "spddsmbn"

    def __init__(self, config: TsmNetConfig, bn_config: Optional[SpdBnConfig] = None,
                 domain_specific: bool = True, seed: int = 0):
        super().__init__(config, domain_specific, seed)
        self.bn_config = bn_config or SpdBnConfig()

        self.temporal = TemporalConv(config.temporal_filters, config.temporal_kernel, self.rng)
        self.spatial = SpatialConv(config.spatio_spectral_filters, config.temporal_filters, config.channels, self.rng)
        self.covpool = CovariancePooling()
        self.bimap = BiMap(config.spatio_spectral_filters, config.subspace_dim, self.rng)
        self.reeig = ReEig(config.reeig_eps)
        self.tsm = TangentSpaceMapping(config.subspace_dim, self.bn_config, domain_specific)
        self.classifier = LinearSoftmax(config.tangent_dim, config.classes)

    @property
    def feature_layers(self) -> List[Layer]:
        return [self.temporal, self.spatial, self.covpool, self.bimap, self.reeig]

    @property
    def normalization(self) -> SPDDSMBN:
        return self.tsm.bn

    def _map_forward(self, features: np.ndarray, domains: np.ndarray, mode: Mode):
        vectors = self.tsm.forward(features, domains, mode)
        return vectors, self.tsm.last_info

    def _map_backward(self, grad: np.ndarray) -> np.ndarray:
        return self.tsm.backward(grad)
