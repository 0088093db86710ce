#!/usr/bin/env python3
"""
Euclidean ablation of TSMNet: covariance pooling, BiMap, ReEig, SPD
normalization and LogEig are replaced by log-variance pooling followed by
Euclidean (domain-specific) momentum batch normalization.
"""

from typing import List, Optional

import numpy as np

from layers.base import Layer, Mode
from layers.classifier import LinearSoftmax
from layers.conv import SpatialConv, TemporalConv
from layers.euclidean_bn import EuclideanDSMBN, LogVariancePooling
from layers.spdbn import SpdBnConfig
from .base import NetworkModel
from .config import TsmNetConfig


class EuclideanTsmNet(NetworkModel):
    """Log-variance features with Euclidean (DS)MBN"""

    arm = "euclid_dsmbn"

    def __init__(self, config: TsmNetConfig, bn_config: Optional[SpdBnConfig] = None,
                 domain_specific: bool = True, seed: int = 0):
        super().__init__(config, domain_specific, seed)
        self.bn_config = bn_config or SpdBnConfig()

        self.temporal = TemporalConv(config.temporal_filters, config.temporal_kernel, self.rng)
        self.spatial = SpatialConv(config.spatio_spectral_filters, config.temporal_filters, config.channels, self.rng)
        self.logvar = LogVariancePooling()
        self.ebn = EuclideanDSMBN(config.spatio_spectral_filters, self.bn_config, domain_specific)
        self.classifier = LinearSoftmax(config.spatio_spectral_filters, config.classes)

    @property
    def feature_layers(self) -> List[Layer]:
        return [self.temporal, self.spatial, self.logvar]

    @property
    def normalization(self) -> EuclideanDSMBN:
        return self.ebn

    def _map_forward(self, features: np.ndarray, domains: np.ndarray, mode: Mode):
        return self.ebn.forward(features, domains, mode)

    def _map_backward(self, grad: np.ndarray) -> np.ndarray:
        return self.ebn.backward(grad)
