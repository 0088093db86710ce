#!/usr/bin/env python3
"""
Optimization package: parameter spaces, Stiefel geometry and Riemannian ADAM.
"""

from .params import ParamKind, ParamSpace, Parameter
from .stiefel import (
    stiefel_deviation, check_stiefel, stiefel_project, stiefel_retract, random_stiefel
)
from .riemannian_adam import AdamState, RiemannianAdam

__all__ = [
    'ParamKind',
    'ParamSpace',
    'Parameter',
    'stiefel_deviation',
    'check_stiefel',
    'stiefel_project',
    'stiefel_retract',
    'random_stiefel',
    'AdamState',
    'RiemannianAdam'
]
