#!/usr/bin/env python3
"""
Ablation Study

Trains every arm on identical splits and seeds, evaluates it on the target
domains, and reports the balanced-accuracy difference to the proposed arm
(percentage points, mean and std over seeds) next to the wall-clock fit
time. A paired sign-flip permutation t-test with t-max correction across
arms is available as an optional column.
"""

import time
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from common import console
from common.exceptions import InvalidInputError
from models.factory import AblationArm, ModelFactory
from synthdata.dataset import SyntheticDataset
from .evaluation import adapt_and_eval
from .run_config import RunConfig
from .splits import make_split_plan
from .trainer import Trainer


class ArmResult(BaseModel):
    """One row of the comparison table"""
    arm: str
    scores: List[float] = Field(description="Mean target balanced accuracy per seed")
    delta_mean: float = Field(description="Mean difference to the proposed arm in percentage points")
    delta_std: float
    fit_time_mean: float = Field(description="Wall-clock training time in seconds")
    fit_time_std: float
    p_value: Optional[float] = Field(None, description="t-max corrected permutation p-value")


class AblationTable(BaseModel):
    proposed: str
    seeds: List[int]
    config_hash: str = ""
    permutations: int = 0
    rows: List[ArmResult] = Field(default_factory=list)

    def row(self, arm: str) -> ArmResult:
        for row in self.rows:
            if row.arm == arm:
                return row
        raise KeyError(arm)


def paired_t(differences: np.ndarray) -> np.ndarray:
    """One-sample t statistics along the last axis; zero where the differences have no spread"""
    n = differences.shape[-1]
    mean = differences.mean(axis=-1)
    std = differences.std(axis=-1, ddof=1) if n > 1 else np.zeros_like(mean)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(std > 0, mean / (std / np.sqrt(n)), 0.0)
    return t


def sign_flip_tmax(differences: np.ndarray, permutations: int, seed: int = 0) -> np.ndarray:
    """
    Paired permutation t-test over seeds with family-wise (t-max) correction.

    Args:
        differences: [arms, seeds] paired differences to the reference arm
        permutations: Number of random sign-flip patterns
        seed: Seed of the permutation draws

    Returns:
        Two-sided corrected p-value per arm
    """
    differences = np.atleast_2d(np.asarray(differences, dtype=np.float64))
    observed = np.abs(paired_t(differences))
    rng = np.random.default_rng(seed)
    signs = rng.choice([-1.0, 1.0], size=(permutations, 1, differences.shape[1]))
    null_max = np.abs(paired_t(signs * differences[None])).max(axis=1)
    exceed = (null_max[:, None] >= observed[None, :] - 1e-12).sum(axis=0)
    return (exceed + 1.0) / (permutations + 1.0)


def _resolve_arms(arms: Sequence[str]) -> List[AblationArm]:
    resolved = []
    for arm in arms:
        parsed = ModelFactory.parse_arm(arm)
        if parsed not in resolved:
            resolved.append(parsed)
    if ModelFactory.PROPOSED not in resolved:
        console.info(f"adding the proposed arm {ModelFactory.PROPOSED.value} as the reference")
        resolved.insert(0, ModelFactory.PROPOSED)
    return resolved


def ablation_run(dataset: SyntheticDataset, run_config: RunConfig, arms: Optional[Sequence[str]] = None,
                 seeds: Optional[Sequence[int]] = None) -> AblationTable:
    """Train and evaluate every arm for every seed and compare to the proposed arm"""
    arms = _resolve_arms(run_config.ablation.arms if arms is None else arms)
    seeds = list(run_config.ablation.seeds if seeds is None else seeds)
    net = run_config.model.net.for_data(dataset.channels, dataset.time, dataset.classes)
    protocol = run_config.protocol
    targets = run_config.evaluation.targets

    scores: Dict[AblationArm, List[float]] = {arm: [] for arm in arms}
    fit_times: Dict[AblationArm, List[float]] = {arm: [] for arm in arms}
    for seed in seeds:
        plan = make_split_plan(dataset, seed, protocol.validation_fraction)
        for arm in arms:
            console.rule(f"arm {arm.value}, seed {seed}")
            model = ModelFactory.create_model(arm, net, run_config.model.norm, seed)
            trainer = Trainer(model, protocol, seed, run_config.hash)
            started = time.perf_counter()
            trainer.train(dataset, plan)
            fit_times[arm].append(time.perf_counter() - started)
            report = adapt_and_eval(model, dataset, targets, run_config.evaluation.adapt, seed, run_config.hash)
            if report.mean_balanced_accuracy is None:
                raise InvalidInputError(f"arm {arm.value}, seed {seed}: no target domain could be evaluated")
            scores[arm].append(report.mean_balanced_accuracy)

    reference = np.asarray(scores[ModelFactory.PROPOSED])
    differences = np.stack([100.0 * (np.asarray(scores[arm]) - reference) for arm in arms])

    p_values = [None] * len(arms)
    if run_config.ablation.permutation_test and run_config.ablation.permutations > 0:
        others = [i for i, arm in enumerate(arms) if arm != ModelFactory.PROPOSED]
        if others:
            corrected = sign_flip_tmax(differences[others], run_config.ablation.permutations, run_config.seed)
            for i, p in zip(others, corrected):
                p_values[i] = float(p)

    table = AblationTable(proposed=ModelFactory.PROPOSED.value, seeds=seeds, config_hash=run_config.hash,
                          permutations=run_config.ablation.permutations if run_config.ablation.permutation_test else 0)
    for i, arm in enumerate(arms):
        table.rows.append(ArmResult(
            arm=arm.value,
            scores=[float(s) for s in scores[arm]],
            delta_mean=float(differences[i].mean()),
            delta_std=float(differences[i].std()),
            fit_time_mean=float(np.mean(fit_times[arm])),
            fit_time_std=float(np.std(fit_times[arm])),
            p_value=p_values[i],
        ))
    return table
