#!/usr/bin/env python3
"""
Evaluation workflow (eval): restore a checkpoint, adapt to every target
domain without labels and score it.
"""

import os

from common import console
from common.exceptions import InvalidInputError, MissingFileError
from src.checkpoint import load_checkpoint
from src.evaluation import adapt_and_eval
from .base import Workflow, WorkflowContext, format_table
from .train import CHECKPOINT_NAME


class EvaluateWorkflow(Workflow):
    """Adapt and evaluate a trained model on the target domains"""

    name = "eval"
    default_dir = "eval"

    def _checkpoint_path(self, context: WorkflowContext) -> str:
        path = context.run_config.paths.checkpoint
        if path:
            return path
        fallback = context.path(CHECKPOINT_NAME)
        if os.path.isfile(fallback):
            return fallback
        raise MissingFileError(fallback, "checkpoint (set paths.checkpoint)")

    def run(self, context: WorkflowContext) -> bool:
        checkpoint = load_checkpoint(self._checkpoint_path(context))
        dataset = self.load_dataset(context)
        net = checkpoint.net
        if (net.channels, net.time, net.classes) != (dataset.channels, dataset.time, dataset.classes):
            raise InvalidInputError(f"checkpoint expects {net.channels} channels x {net.time} samples, "
                                    f"{net.classes} classes; dataset has {dataset.channels} x {dataset.time}, "
                                    f"{dataset.classes} classes")

        evaluation = context.run_config.evaluation
        report = adapt_and_eval(checkpoint.model, dataset, evaluation.targets, evaluation.adapt,
                                context.seed, context.config_hash)
        self.write_artifact(context, "eval_report.json", {**report.model_dump(mode="json"),
                                                         "checkpoint_config_hash": checkpoint.config_hash})

        rows = [(d.domain_id, d.trials, f"{d.balanced_accuracy:.3f}",
                 ",".join(f for f, on in (("single_class", d.single_class),
                                          ("identity_stats", d.identity_statistics)) if on))
                for d in report.domains]
        rows += [(s.domain_id, "", "skipped", s.reason) for s in report.skipped]
        print(format_table(["domain", "trials", "bacc", "flags"], rows), end="")
        if report.mean_balanced_accuracy is None:
            console.error("No target domain could be evaluated")
            return False
        console.success(f"Mean balanced accuracy {report.mean_balanced_accuracy:.3f} "
                        f"(std {report.std_balanced_accuracy:.3f}) over {len(report.domains)} target domains")
        return True
