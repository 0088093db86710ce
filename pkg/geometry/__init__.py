#!/usr/bin/env python3
"""
Geometry package: matrix functions and AIRM geometry on SPD matrices.
"""

from .matfun import (
    FunKind, ScalarFun, EigenPair,
    sym, ensure_symmetric, ensure_spd, identity_like,
    sym_eig, jacobi_eigh, apply_spectrum,
    spd_map, spd_map_backward, loewner_matrix, loewner_backward,
    logm, expm, sqrtm, invsqrtm, powm
)
from .manifold import (
    FrechetStats, airm_dist, log_map, exp_map, geodesic,
    frechet_mean, frechet_variance, transport_matrix, parallel_transport,
    log_euclidean_mean, random_spd
)

__all__ = [
    'FunKind',
    'ScalarFun',
    'EigenPair',
    'sym',
    'ensure_symmetric',
    'ensure_spd',
    'identity_like',
    'sym_eig',
    'jacobi_eigh',
    'apply_spectrum',
    'spd_map',
    'spd_map_backward',
    'loewner_matrix',
    'loewner_backward',
    'logm',
    'expm',
    'sqrtm',
    'invsqrtm',
    'powm',
    'FrechetStats',
    'airm_dist',
    'log_map',
    'exp_map',
    'geodesic',
    'frechet_mean',
    'frechet_variance',
    'transport_matrix',
    'parallel_transport',
    'log_euclidean_mean',
    'random_spd'
]
