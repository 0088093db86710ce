#!/usr/bin/env python3
"""
Models package: TSMNet, its Euclidean ablation and the arm factory.
"""

from .batch import EpochBatch
from .config import TsmNetConfig, NormSection
from .base import ModelOutput, NetworkModel
from .tsmnet import TsmNetModel
from .euclidean import EuclideanTsmNet
from .factory import AblationArm, ModelFactory

__all__ = [
    'EpochBatch',
    'TsmNetConfig',
    'NormSection',
    'ModelOutput',
    'NetworkModel',
    'TsmNetModel',
    'EuclideanTsmNet',
    'AblationArm',
    'ModelFactory'
]
