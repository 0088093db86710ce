#!/usr/bin/env python3
"""
Dataset loading, label access tracking and domain-grouped minibatch sampling.
"""

import itertools
import json
import os
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from common.exceptions import FormatError, InvalidInputError, MissingFileError, UsageError
from models.batch import EpochBatch
from .config import GenConfig
from .generator import FORMAT_VERSION, MANIFEST_NAME, DatasetManifest, build_manifest, domain_entry, resolve_seed, simulate
from .tensor_io import read_tensor


_event_clock = itertools.count(1)


def next_event() -> int:
    """Monotonic event counter used to order predictions and label reads"""
    return next(_event_clock)


class TrackedLabels:
    """Labels of an evaluation domain that may only be read once predictions exist"""

    def __init__(self, labels: np.ndarray, domain_id: int):
        self._labels = np.asarray(labels, dtype=np.int64)
        self.domain_id = domain_id
        self.predicted_at: Optional[int] = None
        self.revealed_at: Optional[int] = None

    def __len__(self) -> int:
        return self._labels.shape[0]

    def mark_predicted(self) -> int:
        self.predicted_at = next_event()
        return self.predicted_at

    def reveal(self) -> np.ndarray:
        if self.predicted_at is None:
            raise UsageError(f"labels of domain {self.domain_id} were requested before any predictions were made")
        self.revealed_at = next_event()
        return self._labels.copy()


@dataclass
class DomainData:
    """Trials and labels of one domain"""
    domain_id: int
    role: str
    data: np.ndarray
    labels: np.ndarray = field(repr=False)

    @property
    def trials(self) -> int:
        return self.data.shape[0]

    def tracked_labels(self) -> TrackedLabels:
        return TrackedLabels(self.labels, self.domain_id)


class SyntheticDataset:
    """In-memory dataset loaded from a manifest"""

    def __init__(self, manifest: DatasetManifest, domains: Dict[int, DomainData], root: str = ""):
        self.manifest = manifest
        self.domains = domains
        self.root = root

    @classmethod
    def from_domains(cls, manifest: DatasetManifest, arrays: Iterable) -> 'SyntheticDataset':
        """Build from in-memory generated domains (no disk round trip)"""
        domains = {d.domain_id: DomainData(d.domain_id, d.role, d.data, d.labels) for d in arrays}
        return cls(manifest, domains)

    @property
    def source_ids(self) -> List[int]:
        return sorted(d for d, v in self.domains.items() if v.role == "source")

    @property
    def target_ids(self) -> List[int]:
        return sorted(d for d, v in self.domains.items() if v.role == "target")

    @property
    def classes(self) -> int:
        return len(self.manifest.class_names)

    @property
    def channels(self) -> int:
        return self.manifest.generator.channels

    @property
    def time(self) -> int:
        return self.manifest.generator.time

    def domain(self, domain_id: int) -> DomainData:
        if domain_id not in self.domains:
            raise InvalidInputError(f"Unknown domain id {domain_id}. Known: {sorted(self.domains)}")
        return self.domains[domain_id]

    def gather(self, selection: Sequence[Tuple[int, np.ndarray]], with_labels: bool = True) -> EpochBatch:
        """Concatenate (domain id, trial indices) selections into one batch"""
        data, domains, labels = [], [], []
        for domain_id, index in selection:
            domain = self.domain(domain_id)
            index = np.asarray(index, dtype=np.int64)
            data.append(domain.data[index])
            domains.append(np.full(index.size, domain_id, dtype=np.int64))
            labels.append(domain.labels[index])
        return EpochBatch(np.concatenate(data), np.concatenate(domains),
                          np.concatenate(labels) if with_labels else None)


def simulate_dataset(config: GenConfig, seed: Optional[int] = None) -> SyntheticDataset:
    """Generate a dataset in memory without writing any files"""
    seed = resolve_seed(config, seed)
    domains = simulate(config, seed)
    manifest = build_manifest(config, seed, [domain_entry(d) for d in domains])
    return SyntheticDataset.from_domains(manifest, domains)


def load(path: str) -> SyntheticDataset:
    """Load a dataset from its directory or manifest path"""
    manifest_path = os.path.join(path, MANIFEST_NAME) if os.path.isdir(path) else path
    if not os.path.isfile(manifest_path):
        raise MissingFileError(manifest_path, "dataset manifest")
    root = os.path.dirname(os.path.abspath(manifest_path))

    try:
        with open(manifest_path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except json.JSONDecodeError as e:
        raise FormatError(manifest_path, "json", str(e))

    version = raw.get("format_version") if isinstance(raw, dict) else None
    if version != FORMAT_VERSION:
        raise FormatError(manifest_path, "format_version", f"expected {FORMAT_VERSION}, found {version}")
    try:
        manifest = DatasetManifest.model_validate(raw)
    except ValidationError as e:
        first = e.errors()[0]
        raise FormatError(manifest_path, ".".join(str(p) for p in first.get("loc", ())), first.get("msg", ""))

    gen = manifest.generator
    domains = {}
    for entry in manifest.domains:
        field_name = f"domains[{entry.domain_id}]"
        expected = [gen.trials_per_domain, gen.channels, gen.time]
        if entry.shape != expected:
            raise FormatError(manifest_path, f"{field_name}.shape", f"declared {entry.shape}, generator says {expected}")
        if len(entry.labels) != entry.shape[0]:
            raise FormatError(manifest_path, f"{field_name}.labels", f"{len(entry.labels)} labels for {entry.shape[0]} trials")
        if entry.domain_id in domains:
            raise FormatError(manifest_path, f"{field_name}.domain_id", "duplicate domain id")
        data = read_tensor(os.path.join(root, entry.file), entry.shape)
        domains[entry.domain_id] = DomainData(entry.domain_id, entry.role, data,
                                              np.asarray(entry.labels, dtype=np.int64))
    return SyntheticDataset(manifest, domains, root)


class DomainBatchSampler:
    """Minibatches made of equally sized chunks from distinct domains.

    Each epoch shuffles every domain's trials, cuts them into chunks of
    trials_per_domain (dropping the remainder) and repeatedly combines
    domains_per_batch chunks from the domains with the most chunks left.
    Chunks that cannot be combined are dropped. The order depends only on
    the seed and the epoch index.
    """

    def __init__(self, trials: Dict[int, np.ndarray], domains_per_batch: int = 5,
                 trials_per_domain: int = 10, seed: int = 0):
        if domains_per_batch < 1 or trials_per_domain < 2:
            raise InvalidInputError("domains_per_batch must be >= 1 and trials_per_domain >= 2")
        if len(trials) < domains_per_batch:
            raise InvalidInputError(f"{len(trials)} domains cannot fill batches of {domains_per_batch} domains")
        self.trials = {int(d): np.asarray(idx, dtype=np.int64) for d, idx in trials.items()}
        self.domains_per_batch = domains_per_batch
        self.trials_per_domain = trials_per_domain
        self.seed = seed

    def epoch(self, epoch: int) -> List[List[Tuple[int, np.ndarray]]]:
        rng = np.random.default_rng([self.seed, epoch])
        size = self.trials_per_domain
        chunks: Dict[int, List[np.ndarray]] = {}
        for domain_id in sorted(self.trials):
            order = rng.permutation(self.trials[domain_id])
            chunks[domain_id] = [order[i * size:(i + 1) * size] for i in range(order.size // size)]

        batches = []
        while True:
            available = [d for d in sorted(chunks) if chunks[d]]
            if len(available) < self.domains_per_batch:
                break
            tiebreak = rng.permutation(len(available))
            ranked = sorted(range(len(available)), key=lambda i: (-len(chunks[available[i]]), tiebreak[i]))
            chosen = sorted(available[i] for i in ranked[:self.domains_per_batch])
            batches.append([(d, chunks[d].pop()) for d in chosen])
        return batches

    def batches_per_epoch(self) -> int:
        return len(self.epoch(0))
