#!/usr/bin/env python3
"""
Generator configuration for synthetic multi-domain trials.
"""

from typing import List, Literal, Optional

from pydantic import Field, model_validator

from common.schema import StrictModel


class GenConfig(StrictModel):
    """Linear instantaneous mixture of sources with domain-specific mixing matrices"""
    channels: int = Field(12, ge=1, description="Channels P")
    time: int = Field(250, ge=2, description="Time samples T per trial")
    sources: int = Field(8, ge=1, description="Latent sources Q")
    discriminative_sources: int = Field(2, ge=0, description="Sources K whose log-variance depends on the class")
    classes: int = Field(2, ge=2, description="Classes C")
    source_domains: int = Field(8, ge=1, description="Domains available for training")
    target_domains: int = Field(4, ge=0, description="Held-out domains for adaptation and evaluation")
    trials_per_domain: int = Field(100, ge=2, description="Trials M per domain")
    mixing_perturbation: float = Field(0.3, ge=0, description="Inter-domain shift strength rho")
    noise_scale: float = Field(0.5, ge=0, description="Additive white noise scale sigma")
    class_gain: Optional[List[List[float]]] = Field(
        None, description="[C][K] log-variance offsets; defaults to +/-0.5 alternating per class")
    trial_jitter: float = Field(0.1, ge=0, description="Per-trial log-variance jitter (standard deviation)")
    base_log_variance: float = Field(0.0, description="Log-variance of every source before class offsets")
    fir_length: int = Field(9, ge=1, description="Hann smoothing length for band-limited sources")
    base_mixing: Literal["random", "identity"] = Field("random", description="Shared mixing matrix A0")
    seed: Optional[int] = Field(None, ge=0, description="Generator seed; the run seed is used when omitted")

    @model_validator(mode="after")
    def _check_structure(self) -> 'GenConfig':
        if self.sources > self.channels:
            raise ValueError(f"sources ({self.sources}) exceed channels ({self.channels})")
        if self.discriminative_sources > self.sources:
            raise ValueError(f"discriminative_sources ({self.discriminative_sources}) exceed sources ({self.sources})")
        if self.trials_per_domain < self.classes:
            raise ValueError(f"trials_per_domain ({self.trials_per_domain}) is smaller than classes ({self.classes})")
        if self.class_gain is not None:
            rows_ok = len(self.class_gain) == self.classes
            cols_ok = all(len(row) == self.discriminative_sources for row in self.class_gain)
            if not (rows_ok and cols_ok):
                raise ValueError(f"class_gain must have shape [{self.classes}][{self.discriminative_sources}]")
        return self

    @property
    def total_domains(self) -> int:
        return self.source_domains + self.target_domains

    def resolved_gain(self) -> List[List[float]]:
        """class_gain, or the default +/-0.5 pattern"""
        if self.class_gain is not None:
            return [list(row) for row in self.class_gain]
        return [[0.5 if (c + k) % 2 == 0 else -0.5 for k in range(self.discriminative_sources)]
                for c in range(self.classes)]
