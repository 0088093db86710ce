#!/usr/bin/env python3
"""
Unsupervised test-time adaptation and scoring on target domains.

For every target domain the normalization statistics are estimated from the
unlabeled trials, predictions are made, and only then are the labels read
through the TrackedLabels wrapper.
"""

from typing import List, Literal, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from common import console
from common.config import config
from models.base import NetworkModel
from models.factory import ModelFactory
from synthdata.dataset import SyntheticDataset
from .metrics import confusion_matrix, score_balanced_accuracy
from .run_config import RunConfig
from .splits import leave_domains_out_folds, make_split_plan
from .trainer import Trainer


AdaptMode = Literal["full", "incremental", "none"]


class DomainScore(BaseModel):
    """Score of one target domain"""
    domain_id: int
    trials: int
    balanced_accuracy: float = Field(ge=0.0, le=1.0)
    confusion: List[List[int]] = Field(description="Counts [true class][predicted class]")
    classes_present: List[int]
    single_class: bool = Field(False, description="Labels contain one class only")
    identity_statistics: bool = Field(False, description="Normalized without domain statistics")
    labels_read_after_prediction: bool = True


class SkippedDomain(BaseModel):
    domain_id: int
    reason: str


class EvalReport(BaseModel):
    """Per-target-domain balanced accuracy plus aggregate and run metadata"""
    arm: str
    seed: int
    config_hash: str = ""
    version: str = config.VERSION
    adapt: str = "full"
    domains: List[DomainScore] = Field(default_factory=list)
    skipped: List[SkippedDomain] = Field(default_factory=list)
    mean_balanced_accuracy: Optional[float] = None
    std_balanced_accuracy: Optional[float] = None

    def finalize(self) -> 'EvalReport':
        scores = [d.balanced_accuracy for d in self.domains]
        if scores:
            self.mean_balanced_accuracy = float(np.mean(scores))
            self.std_balanced_accuracy = float(np.std(scores))
        return self

    def score_of(self, domain_id: int) -> DomainScore:
        for score in self.domains:
            if score.domain_id == domain_id:
                return score
        raise KeyError(domain_id)


def evaluate_domain(model: NetworkModel, dataset: SyntheticDataset, domain_id: int,
                    adapt: AdaptMode = "full") -> DomainScore:
    """Adapt to one domain without labels, predict, then score"""
    domain = dataset.domain(domain_id)
    tracked = domain.tracked_labels()

    if adapt == "none":
        if model.domain_specific:
            model.normalization.forget_domain(domain_id)
    else:
        model.adapt_domain(domain_id, domain.data, adapt)

    output = model.predict(domain.data, np.full(domain.trials, domain_id, dtype=np.int64))
    tracked.mark_predicted()
    labels = tracked.reveal()

    present = sorted(int(c) for c in np.unique(labels))
    score = DomainScore(
        domain_id=domain_id,
        trials=domain.trials,
        balanced_accuracy=score_balanced_accuracy(output.predictions, labels),
        confusion=confusion_matrix(output.predictions, labels, dataset.classes).tolist(),
        classes_present=present,
        single_class=len(present) < 2,
        identity_statistics=output.info.used_fallback,
        labels_read_after_prediction=tracked.revealed_at > tracked.predicted_at,
    )
    if score.single_class:
        console.warning(f"domain {domain_id}: labels contain a single class, "
                        "balanced accuracy is computed over the present class only")
    return score


def adapt_and_eval(model: NetworkModel, dataset: SyntheticDataset, target_ids: Optional[Sequence[int]] = None,
                   adapt: AdaptMode = "full", seed: int = 0, config_hash: str = "") -> EvalReport:
    """
    Evaluate a trained model on target domains after unsupervised adaptation.

    Args:
        model: Trained model
        dataset: Dataset holding the target domains
        target_ids: Domains to evaluate (default: the dataset's target domains)
        adapt: "full" (Frechet mean of the whole domain), "incremental" or "none"
        seed: Run seed recorded in the report
        config_hash: Run config hash recorded in the report

    Returns:
        EvalReport with domains that have fewer than 2 trials listed as skipped
    """
    target_ids = dataset.target_ids if target_ids is None else list(target_ids)
    report = EvalReport(arm=model.arm, seed=seed, config_hash=config_hash, adapt=adapt)
    for domain_id in target_ids:
        trials = dataset.domain(domain_id).trials
        if trials < 2:
            reason = f"{trials} trial(s); at least 2 are needed to estimate domain statistics"
            console.warning(f"skipping target domain {domain_id}: {reason}")
            report.skipped.append(SkippedDomain(domain_id=domain_id, reason=reason))
            continue
        score = evaluate_domain(model, dataset, domain_id, adapt)
        console.debug(f"domain {domain_id}: balanced accuracy {score.balanced_accuracy:.3f}")
        report.domains.append(score)
    return report.finalize()


class FoldResult(BaseModel):
    held_out: List[int]
    report: EvalReport


class FoldsReport(BaseModel):
    """Leave-domains-out cross-validation over the source domains"""
    arm: str
    seed: int
    config_hash: str = ""
    folds: List[FoldResult] = Field(default_factory=list)
    mean_balanced_accuracy: Optional[float] = None


def cross_validate(dataset: SyntheticDataset, run_config: RunConfig) -> FoldsReport:
    """Hold out max(1, ceil(5%)) source domains per fold, train on the rest and adapt to the held-out ones"""
    seed = run_config.seed
    net = run_config.model.net.for_data(dataset.channels, dataset.time, dataset.classes)
    result = FoldsReport(arm=ModelFactory.parse_arm(run_config.model.arm).value, seed=seed,
                         config_hash=run_config.hash)
    for held_out in leave_domains_out_folds(dataset.source_ids, seed):
        console.rule(f"fold: holding out domains {held_out}")
        sources = [d for d in dataset.source_ids if d not in held_out]
        plan = make_split_plan(dataset, seed, run_config.protocol.validation_fraction, sources, held_out)
        model = ModelFactory.create_model(run_config.model.arm, net, run_config.model.norm, seed)
        Trainer(model, run_config.protocol, seed, run_config.hash).train(dataset, plan)
        report = adapt_and_eval(model, dataset, held_out, run_config.evaluation.adapt, seed, run_config.hash)
        result.folds.append(FoldResult(held_out=held_out, report=report))

    scores = [fold.report.mean_balanced_accuracy for fold in result.folds
              if fold.report.mean_balanced_accuracy is not None]
    if scores:
        result.mean_balanced_accuracy = float(np.mean(scores))
    return result
