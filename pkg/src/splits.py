#!/usr/bin/env python3
"""
Split plans: source/target domain assignment and the stratified
within-source train/validation split.
"""

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from common.exceptions import InvalidInputError


@dataclass
class SplitPlan:
    """Disjoint source and target domains plus per-source-domain trial indices"""
    source_ids: List[int]
    target_ids: List[int]
    train_index: Dict[int, np.ndarray] = field(default_factory=dict)
    val_index: Dict[int, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        overlap = set(self.source_ids) & set(self.target_ids)
        if overlap:
            raise InvalidInputError(f"source and target domains overlap: {sorted(overlap)}")
        if not self.source_ids:
            raise InvalidInputError("a split plan needs at least one source domain")

    def train_selection(self):
        return [(d, self.train_index[d]) for d in self.source_ids if self.train_index[d].size]

    def val_selection(self):
        return [(d, self.val_index[d]) for d in self.source_ids if self.val_index[d].size]

    @property
    def validation_trials(self) -> int:
        return int(sum(idx.size for idx in self.val_index.values()))

    def to_dict(self) -> dict:
        return {
            "source_ids": list(self.source_ids),
            "target_ids": list(self.target_ids),
            "train_index": {str(d): idx.tolist() for d, idx in self.train_index.items()},
            "val_index": {str(d): idx.tolist() for d, idx in self.val_index.items()},
        }


def stratified_split(labels: np.ndarray, fraction: float, rng: np.random.Generator):
    """Per-class random split; each class contributes round(fraction * count) validation trials"""
    labels = np.asarray(labels)
    train, val = [], []
    for label in np.unique(labels):
        members = rng.permutation(np.flatnonzero(labels == label))
        n_val = int(round(fraction * members.size))
        val.append(members[:n_val])
        train.append(members[n_val:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(val))


def make_split_plan(dataset, seed: int, validation_fraction: float = 0.2,
                    source_ids: Optional[Sequence[int]] = None,
                    target_ids: Optional[Sequence[int]] = None) -> SplitPlan:
    """Split every source domain's trials 80/20 (stratified by label)"""
    source_ids = sorted(dataset.source_ids if source_ids is None else source_ids)
    target_ids = sorted(dataset.target_ids if target_ids is None else target_ids)
    plan = SplitPlan(list(source_ids), list(target_ids))
    for domain_id in source_ids:
        rng = np.random.default_rng([seed, domain_id])
        train, val = stratified_split(dataset.domain(domain_id).labels, validation_fraction, rng)
        plan.train_index[domain_id] = train
        plan.val_index[domain_id] = val
    return plan


def leave_domains_out_folds(domain_ids: Sequence[int], seed: int, fraction: float = 0.05) -> List[List[int]]:
    """Partition domains into held-out groups of max(1, ceil(fraction * N)) domains"""
    domain_ids = sorted(int(d) for d in domain_ids)
    if len(domain_ids) < 2:
        raise InvalidInputError("leave-domains-out folds need at least 2 domains")
    size = max(1, math.ceil(fraction * len(domain_ids)))
    if size >= len(domain_ids):
        raise InvalidInputError(f"holding out {size} of {len(domain_ids)} domains leaves nothing to train on")
    order = np.random.default_rng(seed).permutation(domain_ids)
    return [sorted(int(d) for d in order[i:i + size]) for i in range(0, len(order), size)]
