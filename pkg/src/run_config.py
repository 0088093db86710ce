#!/usr/bin/env python3
"""
Run Configuration Module

One JSON file per run, parsed strictly: every section rejects unknown keys
and every default mirrors the published training constants. The resolved
configuration is canonicalised and hashed; the hash and the seed are
embedded in every artifact a run writes.
"""

import json
import os
from typing import List, Literal, Optional

from pydantic import Field, ValidationError, field_validator

from common.exceptions import ConfigError, FormatError, MissingFileError
from common.schema import StrictModel
from models.config import NormSection, TsmNetConfig
from synthdata.config import GenConfig
from utils.hashing import config_hash


class ModelSection(StrictModel):
    """Which arm to build and how"""
    arm: str = Field("spddsmbn", description="Ablation arm of the model")
    net: TsmNetConfig = Field(default_factory=TsmNetConfig, description="Layer sizes")
    norm: NormSection = Field(default_factory=NormSection, description="Normalization settings")


class TrainProtocol(StrictModel):
    """Training loop constants"""
    epochs: int = Field(50, ge=0, description="Passes over the training split")
    domains_per_batch: int = Field(5, ge=1, description="Distinct domains per minibatch")
    trials_per_domain: int = Field(10, ge=2, description="Trials per domain per minibatch")
    validation_fraction: float = Field(0.2, ge=0, lt=1, description="Stratified validation share")
    lr: float = Field(1e-3, gt=0, description="Learning rate")
    betas: List[float] = Field(default_factory=lambda: [0.9, 0.999], description="ADAM betas")
    weight_decay: float = Field(1e-4, ge=0, description="Decoupled weight decay")
    adam_eps: float = Field(1e-8, gt=0, description="ADAM denominator stabilizer")
    select_best: bool = Field(True, description="Keep the snapshot with minimal validation loss")

    @field_validator("betas")
    @classmethod
    def _check_betas(cls, value: List[float]) -> List[float]:
        if len(value) != 2 or not all(0.0 <= b < 1.0 for b in value):
            raise ValueError("betas must be two values in [0, 1)")
        return value


class EvaluationSection(StrictModel):
    """Test-time adaptation and target selection"""
    adapt: Literal["full", "incremental", "none"] = Field("full", description="Adaptation of target statistics")
    targets: Optional[List[int]] = Field(None, description="Target domain ids (default: all generator targets)")
    folds: bool = Field(False, description="Also run leave-domains-out folds over the source domains")


class AblationSection(StrictModel):
    """Arms and repetitions of the ablation study"""
    arms: List[str] = Field(default_factory=lambda: ["spddsmbn", "spdbn_ds", "spdmbn_no_ds",
                                                     "euclid_dsmbn", "euclid_mbn_no_ds"],
                            description="Arms to compare; the first must be the proposed arm")
    seeds: List[int] = Field(default_factory=lambda: [0, 1, 2, 3, 4], description="Seeds per arm")
    permutations: int = Field(10000, ge=0, description="Sign-flip permutations for the optional t-test column")
    permutation_test: bool = Field(False, description="Compute the permutation t-test column")


class ConvergenceConfig(StrictModel):
    """Running-mean convergence experiments"""
    kind: Literal["decaying", "fixed", "both"] = Field("both", description="Which experiment to run")
    dim: int = Field(6, ge=1, description="SPD dimension D")
    steps: int = Field(2000, ge=1, description="Streamed batches per run")
    batch_size: int = Field(10, ge=1, description="Observations per batch")
    alpha: float = Field(0.6, description="Power-decay exponent of the momentum")
    seeds: int = Field(20, ge=1, description="Independent runs of the decaying-momentum experiment")
    dataset_size: int = Field(2000, ge=2, description="Size of the finite population the oracle mean is computed on")
    dispersion: float = Field(0.25, gt=0, description="Frobenius scale of the tangent perturbations")
    mean_spread: float = Field(0.4, ge=0, description="Half-range of the population mean's log-eigenvalues")
    replicates: int = Field(100, ge=2, description="Replicate streams of the fixed-momentum experiment")
    replicate_steps: int = Field(200, ge=3, description="Steps per replicate stream")
    gamma: float = Field(0.1, gt=0, le=1, description="Fixed momentum of the replicate experiment")
    drift_fraction: float = Field(0.5, ge=0, le=1, description="Parameter drift per step as a share of the bound")
    significance: float = Field(0.05, gt=0, lt=1, description="Level of the one-sided slope test")

    @field_validator("alpha")
    @classmethod
    def _check_alpha(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("alpha must be positive")
        return value


class PathsSection(StrictModel):
    """Input and output locations"""
    dataset: Optional[str] = Field(None, description="Dataset directory or manifest")
    checkpoint: Optional[str] = Field(None, description="Checkpoint file")


class RunConfig(StrictModel):
    """Complete configuration of one CLI run"""
    seed: int = Field(ge=0, description="Master seed")
    generator: GenConfig = Field(default_factory=GenConfig)
    model: ModelSection = Field(default_factory=ModelSection)
    protocol: TrainProtocol = Field(default_factory=TrainProtocol)
    evaluation: EvaluationSection = Field(default_factory=EvaluationSection)
    ablation: AblationSection = Field(default_factory=AblationSection)
    experiment: ConvergenceConfig = Field(default_factory=ConvergenceConfig)
    paths: PathsSection = Field(default_factory=PathsSection)

    def resolved(self) -> dict:
        return self.model_dump(mode="json")

    @property
    def hash(self) -> str:
        return config_hash(self.resolved())


def parse_run_config(data: dict, seed_override: Optional[int] = None) -> RunConfig:
    """Validate a config dict; seed_override replaces the seed before hashing"""
    if not isinstance(data, dict):
        raise ConfigError("run configuration must be a JSON object")
    data = dict(data)
    if seed_override is not None:
        data["seed"] = seed_override
    try:
        return RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError.from_validation_error(e)


def load_run_config(path: Optional[str], seed_override: Optional[int] = None) -> RunConfig:
    """Read and validate a run configuration file (all defaults when path is None)"""
    if path is None:
        return parse_run_config({"seed": 0}, seed_override)
    if not os.path.isfile(path):
        raise MissingFileError(path, "run configuration")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise FormatError(path, "json", str(e))
    return parse_run_config(data, seed_override)
