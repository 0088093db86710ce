#!/usr/bin/env python3
"""
Synthetic Multi-Domain Trial Generator

Each domain i mixes latent sources with its own matrix A_i = A0 (I + rho E_i):

    X = A_i S + sigma N

Sources are band-limited Gaussian noise (white noise smoothed by a unit-energy
Hann FIR filter). The log-variance of the first K sources carries the class
through a [C, K] gain matrix; every source gets a small per-trial jitter.
N is white Gaussian noise. Labels are balanced within each domain.
"""

import os
from dataclasses import dataclass
from typing import List, Optional

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from pydantic import Field

from common import console
from common.schema import StrictModel
from utils.hashing import config_hash
from utils.output_dir import write_json
from .config import GenConfig
from .tensor_io import write_tensor


MANIFEST_NAME = "manifest.json"
FORMAT_VERSION = 1
NOISE_MODEL = "white_gaussian"


class DomainEntry(StrictModel):
    """One domain's tensor file, shape, labels and mixing matrix"""
    domain_id: int = Field(description="Domain identifier")
    role: str = Field(description="'source' or 'target'")
    file: str = Field(description="Tensor file name relative to the manifest")
    shape: List[int] = Field(description="[trials, channels, time]")
    labels: List[int] = Field(description="Class label per trial")
    mixing: List[List[float]] = Field(description="Mixing matrix A_i [channels][sources]")


class DatasetManifest(StrictModel):
    """Dataset description written next to the tensor files"""
    format_version: int = Field(FORMAT_VERSION, description="Manifest format version")
    generator: GenConfig = Field(description="Generator configuration echo")
    seed: int = Field(description="Seed the data was generated with")
    config_hash: str = Field(description="Hash of the generator configuration")
    noise_model: str = Field(NOISE_MODEL, description="Spectral structure of the additive noise")
    class_names: List[str] = Field(description="Names of the classes, indexed by label")
    domains: List[DomainEntry] = Field(description="Per-domain entries")

    @property
    def source_ids(self) -> List[int]:
        return [d.domain_id for d in self.domains if d.role == "source"]

    @property
    def target_ids(self) -> List[int]:
        return [d.domain_id for d in self.domains if d.role == "target"]


@dataclass
class GeneratedDomain:
    """In-memory trials of one domain"""
    domain_id: int
    role: str
    data: np.ndarray
    labels: np.ndarray
    mixing: np.ndarray
    source_log_variance: np.ndarray


def smoothing_filter(length: int) -> np.ndarray:
    """Unit-energy Hann window; a length-1 filter is the identity"""
    if length == 1:
        return np.ones(1)
    h = np.hanning(length + 2)[1:-1]
    return h / np.linalg.norm(h)


def base_mixing_matrix(config: GenConfig, rng: np.random.Generator) -> np.ndarray:
    if config.base_mixing == "identity":
        return np.eye(config.channels, config.sources)
    a0 = rng.standard_normal((config.channels, config.sources))
    return a0 / np.linalg.norm(a0, axis=0, keepdims=True)


def simulate_domain(config: GenConfig, domain_id: int, role: str, a0: np.ndarray,
                    rng: np.random.Generator) -> GeneratedDomain:
    """Draw one domain's mixing matrix, labels and trials"""
    q, m = config.sources, config.trials_per_domain
    perturbation = rng.standard_normal((q, q)) / np.sqrt(q)
    mixing = a0 @ (np.eye(q) + config.mixing_perturbation * perturbation)

    labels = rng.permutation(np.arange(m) % config.classes)

    log_variance = np.full((m, q), config.base_log_variance)
    gain = np.asarray(config.resolved_gain(), dtype=np.float64).reshape(config.classes, config.discriminative_sources)
    log_variance[:, :config.discriminative_sources] += gain[labels]
    log_variance += config.trial_jitter * rng.standard_normal((m, q))

    h = smoothing_filter(config.fir_length)
    white = rng.standard_normal((m, q, config.time + h.size - 1))
    sources = sliding_window_view(white, h.size, axis=-1) @ h
    sources *= np.exp(0.5 * log_variance)[..., None]

    data = np.einsum("pq,mqt->mpt", mixing, sources)
    data += config.noise_scale * rng.standard_normal(data.shape)
    return GeneratedDomain(domain_id, role, data, labels.astype(np.int64), mixing, log_variance)


def simulate(config: GenConfig, seed: Optional[int] = None) -> List[GeneratedDomain]:
    """Generate every domain in memory; identical seeds give identical arrays"""
    seed = resolve_seed(config, seed)
    children = np.random.SeedSequence(seed).spawn(config.total_domains + 1)
    a0 = base_mixing_matrix(config, np.random.default_rng(children[0]))

    domains = []
    for domain_id in range(config.total_domains):
        role = "source" if domain_id < config.source_domains else "target"
        domains.append(simulate_domain(config, domain_id, role, a0, np.random.default_rng(children[domain_id + 1])))
    return domains


def resolve_seed(config: GenConfig, seed: Optional[int] = None) -> int:
    """Explicit seed, else the generator config's seed, else 0"""
    seed = config.seed if seed is None else seed
    return 0 if seed is None else seed


def build_manifest(config: GenConfig, seed: int, entries: List[DomainEntry]) -> DatasetManifest:
    return DatasetManifest(generator=config, seed=seed,
                           config_hash=config_hash(config.model_dump(mode="json")),
                           class_names=[f"class_{c}" for c in range(config.classes)],
                           domains=entries)


def domain_entry(domain: GeneratedDomain, file_name: str = "") -> DomainEntry:
    return DomainEntry(domain_id=domain.domain_id, role=domain.role, file=file_name,
                       shape=list(domain.data.shape), labels=domain.labels.tolist(),
                       mixing=domain.mixing.tolist())


def generate(config: GenConfig, out_dir: str, seed: Optional[int] = None) -> DatasetManifest:
    """Generate the dataset and write one tensor file per domain plus the manifest"""
    seed = resolve_seed(config, seed)
    os.makedirs(out_dir, exist_ok=True)

    entries = []
    for domain in simulate(config, seed):
        file_name = f"domain_{domain.domain_id:03d}.tsr"
        write_tensor(os.path.join(out_dir, file_name), domain.data)
        entries.append(domain_entry(domain, file_name))
        console.debug(f"Wrote domain {domain.domain_id} ({domain.role}) to {file_name}")

    manifest = build_manifest(config, seed, entries)
    write_json(os.path.join(out_dir, MANIFEST_NAME), manifest.model_dump(mode="json"))
    return manifest
