#!/usr/bin/env python3
"""
Training Loop

Minibatches of domain-grouped chunks are pushed through the model in train
mode and the Riemannian ADAM optimizer takes one step per batch. The
momentum schedule index is the epoch. At the end of every epoch the
validation loss is measured with the testing statistics; the snapshot with
the smallest validation loss is restored when training finishes.
"""

import math
from dataclasses import dataclass
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel, Field

from common import console
from common.exceptions import InvalidInputError, NonFiniteGradientError, TrainingDivergedError
from layers.base import Mode
from layers.spdbn import schedule_value
from models.base import NetworkModel
from optim.riemannian_adam import RiemannianAdam
from synthdata.dataset import DomainBatchSampler, SyntheticDataset
from .metrics import score_balanced_accuracy
from .run_config import TrainProtocol
from .splits import SplitPlan


class EpochRecord(BaseModel):
    """One line of the training log"""
    epoch: int = Field(description="Epoch index, starting at 0")
    batches: int = Field(description="Optimizer steps taken in this epoch")
    gamma_train: float = Field(description="Training momentum used for this epoch")
    train_loss: float = Field(description="Mean minibatch loss")
    val_loss: Optional[float] = Field(None, description="Validation loss with testing statistics")
    val_balanced_accuracy: Optional[float] = Field(None, description="Validation balanced accuracy")
    reeig_activations: int = Field(0, description="Eigenvalues clamped by ReEig during the epoch")
    reeig_evaluated: int = Field(0, description="Eigenvalues seen by ReEig during the epoch")


class TrainingLog(BaseModel):
    """Deterministic record of a training run (no wall-clock fields)"""
    arm: str
    seed: int
    config_hash: str = ""
    initial_val_loss: Optional[float] = None
    initial_val_balanced_accuracy: Optional[float] = None
    best_epoch: int = Field(-1, description="Selected epoch; -1 is the initialized model")
    best_val_loss: Optional[float] = None
    epochs: List[EpochRecord] = Field(default_factory=list)

    @property
    def reeig_activations(self) -> int:
        return sum(record.reeig_activations for record in self.epochs)


@dataclass
class TrainingResult:
    """The trained model (best snapshot restored), its log and optimizer"""
    model: NetworkModel
    log: TrainingLog
    optimizer: RiemannianAdam
    best_state: Dict[str, Any]


def _snapshot(model: NetworkModel, optimizer: RiemannianAdam) -> Dict[str, Any]:
    return {"model": model.state_dict(), "optimizer": optimizer.state_dict()}


class Trainer:
    """Runs the training protocol on one model"""

    def __init__(self, model: NetworkModel, protocol: Optional[TrainProtocol] = None, seed: int = 0,
                 config_hash: str = ""):
        self.model = model
        self.protocol = protocol or TrainProtocol()
        self.seed = seed
        self.config_hash = config_hash
        self.optimizer = RiemannianAdam(model.parameters().values(), lr=self.protocol.lr,
                                        betas=tuple(self.protocol.betas),
                                        weight_decay=self.protocol.weight_decay, eps=self.protocol.adam_eps)

    def _sampler(self, plan: SplitPlan) -> DomainBatchSampler:
        trials = {d: idx for d, idx in plan.train_index.items() if idx.size}
        per_batch = self.protocol.domains_per_batch
        if len(trials) < per_batch:
            console.warning(f"only {len(trials)} source domains available, "
                            f"using {len(trials)} domains per batch instead of {per_batch}")
            per_batch = len(trials)
        return DomainBatchSampler(trials, per_batch, self.protocol.trials_per_domain, self.seed)

    def _validate(self, dataset: SyntheticDataset, plan: SplitPlan):
        selection = plan.val_selection()
        if not selection:
            return None, None
        batch = dataset.gather(selection)
        output = self.model.forward(batch, Mode.EVAL)
        return output.loss, score_balanced_accuracy(output.predictions, batch.labels)

    def _reeig(self):
        return getattr(self.model, "reeig", None)

    def train(self, dataset: SyntheticDataset, plan: SplitPlan) -> TrainingResult:
        """
        Train the model on the plan's source-domain training trials.

        Returns:
            TrainingResult with the validation-loss-minimizing snapshot loaded into the model

        Raises:
            TrainingDivergedError: if a minibatch loss or gradient becomes non-finite
        """
        model = self.model
        sampler = self._sampler(plan)
        schedule = model.normalization.config.schedule
        log = TrainingLog(arm=model.arm, seed=self.seed, config_hash=self.config_hash)

        if plan.validation_trials == 0:
            console.warning("no validation trials; selecting the snapshot with the lowest training loss")

        # the initialized model has identity statistics for every domain
        log.initial_val_loss, log.initial_val_balanced_accuracy = self._validate(dataset, plan)
        best_state = _snapshot(model, self.optimizer)
        best_loss = log.initial_val_loss if log.initial_val_loss is not None else math.inf
        log.best_val_loss = log.initial_val_loss

        for epoch in range(self.protocol.epochs):
            model.set_momentum_step(epoch)
            reeig = self._reeig()
            if reeig is not None:
                reeig.reset_activations()

            batches = sampler.epoch(epoch)
            if not batches:
                raise InvalidInputError("the training split is too small to form a single minibatch "
                                        f"({sampler.domains_per_batch} domains x {sampler.trials_per_domain} trials)")
            losses = []
            for index, selection in enumerate(batches):
                batch = dataset.gather(selection)
                model.zero_grad()
                output = model.forward(batch, Mode.TRAIN)
                if output.loss is None or not np.isfinite(output.loss):
                    raise TrainingDivergedError(epoch, index, best_state)
                model.backward()
                try:
                    self.optimizer.step()
                except NonFiniteGradientError as e:
                    raise TrainingDivergedError(epoch, index, best_state) from e
                losses.append(output.loss)

            # the validation pass below must not count towards training activations
            activations = (reeig.activations, reeig.evaluated) if reeig is not None else (0, 0)
            val_loss, val_bacc = self._validate(dataset, plan)
            record = EpochRecord(epoch=epoch, batches=len(batches),
                                 gamma_train=schedule_value(schedule, epoch),
                                 train_loss=float(np.mean(losses)), val_loss=val_loss,
                                 val_balanced_accuracy=val_bacc,
                                 reeig_activations=activations[0], reeig_evaluated=activations[1])
            log.epochs.append(record)

            criterion = val_loss if val_loss is not None else record.train_loss
            if self.protocol.select_best and criterion < best_loss:
                best_loss = criterion
                best_state = _snapshot(model, self.optimizer)
                log.best_epoch = epoch
                log.best_val_loss = val_loss
            elif not self.protocol.select_best:
                best_state = _snapshot(model, self.optimizer)
                log.best_epoch = epoch
                log.best_val_loss = val_loss

            console.info(f"epoch {epoch:3d}  train {record.train_loss:.4f}  "
                         f"val {'n/a' if val_loss is None else f'{val_loss:.4f}'}  gamma {record.gamma_train:.3f}")

        model.load_state_dict(best_state["model"])
        self.optimizer.load_state_dict(best_state["optimizer"])
        if log.best_epoch >= 0:
            console.info(f"Selected epoch {log.best_epoch} (validation loss {best_loss:.4f})")
        else:
            console.info("Kept the initialized model")
        return TrainingResult(model, log, self.optimizer, best_state)
