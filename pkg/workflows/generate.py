#!/usr/bin/env python3
"""
Dataset generation workflow (gen).
"""

from common import console
from synthdata.generator import generate
from .base import Workflow, WorkflowContext, format_table


class GenerateWorkflow(Workflow):
    """Write the synthetic multi-domain dataset to the output directory"""

    name = "gen"
    default_dir = "dataset"

    def run(self, context: WorkflowContext) -> bool:
        gen = context.run_config.generator
        seed = context.dataset_seed
        manifest = generate(gen, context.out_dir, seed)

        rows = [(d.domain_id, d.role, d.file, "x".join(str(s) for s in d.shape)) for d in manifest.domains]
        print(format_table(["domain", "role", "file", "shape"], rows), end="")
        console.success(f"Generated {len(manifest.source_ids)} source and {len(manifest.target_ids)} target "
                        f"domains (seed {seed}, config {manifest.config_hash}) in {context.out_dir}")
        return True
