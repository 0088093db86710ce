#!/usr/bin/env python3
"""
Architecture and normalization settings of the TSMNet family.
"""

from typing import Literal, Optional

from pydantic import Field, model_validator

from common.schema import StrictModel
from layers.spdbn import BnMode, MomentumSchedule, SpdBnConfig


class TsmNetConfig(StrictModel):
    """Layer sizes of h = g o m o f; channels, time and classes are taken from the dataset"""
    channels: int = Field(12, ge=1, description="Number of input channels P")
    time: int = Field(250, ge=2, description="Number of time samples T per trial")
    classes: int = Field(2, ge=2, description="Number of classes C")
    temporal_filters: int = Field(4, ge=1, description="Temporal FIR filters")
    temporal_kernel: int = Field(25, ge=1, description="Temporal kernel length")
    spatio_spectral_filters: int = Field(40, ge=1, description="Spatio-spectral filters")
    subspace_dim: int = Field(20, ge=1, description="BiMap output dimension")
    reeig_eps: float = Field(1e-4, gt=0, description="ReEig eigenvalue threshold")

    @model_validator(mode="after")
    def _check_dims(self) -> 'TsmNetConfig':
        if self.subspace_dim > self.spatio_spectral_filters:
            raise ValueError(f"subspace_dim ({self.subspace_dim}) must not exceed "
                             f"spatio_spectral_filters ({self.spatio_spectral_filters})")
        if self.temporal_kernel > self.time:
            raise ValueError(f"temporal_kernel ({self.temporal_kernel}) must not exceed time ({self.time})")
        return self

    @property
    def tangent_dim(self) -> int:
        return self.subspace_dim * (self.subspace_dim + 1) // 2

    def for_data(self, channels: int, time: int, classes: int) -> 'TsmNetConfig':
        """Copy with the data-dependent sizes replaced"""
        return TsmNetConfig.model_validate({**self.model_dump(), "channels": channels, "time": time,
                                            "classes": classes})


class NormSection(StrictModel):
    """Normalization-layer knobs"""
    mode: Literal["rbn", "spdbn", "spdmbn"] = Field("spdmbn", description="Normalization variant")
    eps: float = Field(1e-5, gt=0, description="Stabilizer in the dispersion exponent")
    gamma_test: float = Field(0.1, ge=0, le=1, description="Momentum of the testing statistics")
    gamma_min: float = Field(0.2, ge=0, le=1, description="Final training momentum")
    schedule_epochs: int = Field(40, ge=2, description="Epoch K at which gamma_min is reached")
    learn_variance: bool = Field(True, description="Learn the shared dispersion nu")

    def to_bn_config(self, mode: Optional[str] = None) -> SpdBnConfig:
        return SpdBnConfig(mode=BnMode(mode or self.mode), eps=self.eps, gamma_test=self.gamma_test,
                           schedule=MomentumSchedule.clamped_exponential(self.gamma_min, self.schedule_epochs),
                           learn_variance=self.learn_variance)
