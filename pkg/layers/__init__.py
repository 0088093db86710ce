#!/usr/bin/env python3
"""
Layers package: TSMNet building blocks with explicit backward passes.
"""

from .base import Mode, Layer
from .spdbn import (
    ScheduleKind, MomentumSchedule, schedule_value,
    BnMode, SpdBnConfig, RunningGeoStats, NormParams, NormCache,
    batch_mean_estimate, update_running, normalize_batch, normalize_batch_backward,
    SPDMBN, fit_domain_stats
)
from .dsbn import SHARED_DOMAIN, DispatchInfo, DomainSpecificBN, SPDDSMBN
from .conv import TemporalConv, SpatialConv
from .spd import (
    upper_vectorize, upper_vectorize_backward, vector_to_symmetric,
    CovariancePooling, bimap, bimap_backward, BiMap, ReEig, TangentSpaceMapping
)
from .classifier import ClassifierOutput, LinearSoftmax, softmax
from .euclidean_bn import LogVariancePooling, EuclideanRunningStats, EuclideanMBN, EuclideanDSMBN

__all__ = [
    'Mode',
    'Layer',
    'ScheduleKind',
    'MomentumSchedule',
    'schedule_value',
    'BnMode',
    'SpdBnConfig',
    'RunningGeoStats',
    'NormParams',
    'NormCache',
    'batch_mean_estimate',
    'update_running',
    'normalize_batch',
    'normalize_batch_backward',
    'SPDMBN',
    'fit_domain_stats',
    'SHARED_DOMAIN',
    'DispatchInfo',
    'DomainSpecificBN',
    'SPDDSMBN',
    'TemporalConv',
    'SpatialConv',
    'upper_vectorize',
    'upper_vectorize_backward',
    'vector_to_symmetric',
    'CovariancePooling',
    'bimap',
    'bimap_backward',
    'BiMap',
    'ReEig',
    'TangentSpaceMapping',
    'ClassifierOutput',
    'LinearSoftmax',
    'softmax',
    'LogVariancePooling',
    'EuclideanRunningStats',
    'EuclideanMBN',
    'EuclideanDSMBN'
]
