#!/usr/bin/env python3
"""
Synthetic data package: generator, on-disk format, loader and sampler.
"""

from .config import GenConfig
from .tensor_io import TENSOR_MAGIC, TENSOR_VERSION, encode_tensor, read_tensor, read_tensor_from, write_tensor
from .generator import (
    MANIFEST_NAME, FORMAT_VERSION, NOISE_MODEL,
    DomainEntry, DatasetManifest, GeneratedDomain,
    smoothing_filter, simulate, generate
)
from .dataset import (
    TrackedLabels, DomainData, SyntheticDataset, DomainBatchSampler,
    load, next_event, simulate_dataset
)

__all__ = [
    'GenConfig',
    'TENSOR_MAGIC',
    'TENSOR_VERSION',
    'encode_tensor',
    'read_tensor',
    'read_tensor_from',
    'write_tensor',
    'MANIFEST_NAME',
    'FORMAT_VERSION',
    'NOISE_MODEL',
    'DomainEntry',
    'DatasetManifest',
    'GeneratedDomain',
    'smoothing_filter',
    'simulate',
    'generate',
    'TrackedLabels',
    'DomainData',
    'SyntheticDataset',
    'DomainBatchSampler',
    'load',
    'next_event',
    'simulate_dataset'
]
