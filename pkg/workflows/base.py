#!/usr/bin/env python3
"""
Base Workflow Module

Shared plumbing for the command workflows: run context, dataset resolution,
artifact writing and plain-text tables.
"""

import os
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, List, Optional, Sequence

from common import console
from src.run_config import RunConfig
from synthdata.dataset import SyntheticDataset, load, simulate_dataset
from utils.output_dir import atomic_write_text, write_json


@dataclass
class WorkflowContext:
    """Everything a workflow needs from the command line"""
    run_config: RunConfig
    out_dir: str
    config_path: Optional[str] = None

    @property
    def seed(self) -> int:
        return self.run_config.seed

    @property
    def dataset_seed(self) -> int:
        """Generator seed when the generator section sets one, else the run seed"""
        gen_seed = self.run_config.generator.seed
        return self.seed if gen_seed is None else gen_seed

    @property
    def config_hash(self) -> str:
        return self.run_config.hash

    def path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)


class Workflow(ABC):
    """Base class for command workflows"""

    name = "workflow"
    default_dir = "run"

    @abstractmethod
    def run(self, context: WorkflowContext) -> bool:
        """Execute the command; True if its contract fully succeeded"""
        pass

    def load_dataset(self, context: WorkflowContext) -> SyntheticDataset:
        """Dataset from paths.dataset, or generated in memory from the generator section"""
        path = context.run_config.paths.dataset
        if path:
            console.info(f"Loading dataset from {path}")
            return load(path)
        console.info("No dataset path configured, generating the dataset in memory")
        return simulate_dataset(context.run_config.generator, context.dataset_seed)

    def write_artifact(self, context: WorkflowContext, name: str, payload: dict) -> str:
        """JSON artifact stamped with the config hash, the seed and the resolved run configuration"""
        document = dict(payload)
        document.setdefault("config_hash", context.config_hash)
        document.setdefault("seed", context.seed)
        document["run_config"] = context.run_config.resolved()
        path = context.path(name)
        write_json(path, document)
        console.info(f"Wrote {path}")
        return path

    def write_text(self, context: WorkflowContext, name: str, text: str) -> str:
        path = context.path(name)
        atomic_write_text(path, text)
        return path


def format_table(headers: Sequence[str], rows: List[Sequence[Any]]) -> str:
    """Left-aligned plain-text table"""
    cells = [[str(h) for h in headers]] + [["" if v is None else str(v) for v in row] for row in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(headers))]
    lines = ["  ".join(value.ljust(widths[i]) for i, value in enumerate(row)).rstrip() for row in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines) + "\n"
