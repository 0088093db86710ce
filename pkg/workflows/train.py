#!/usr/bin/env python3
"""
Training workflow (train): fit one arm on the source domains, save the
selected snapshot as a checkpoint and write the training log.
"""

from common import console
from models.factory import ModelFactory
from src.checkpoint import save_checkpoint
from src.evaluation import cross_validate
from src.splits import make_split_plan
from src.trainer import Trainer
from .base import Workflow, WorkflowContext, format_table


CHECKPOINT_NAME = "checkpoint.spdc"


class TrainWorkflow(Workflow):
    """Train the configured arm and checkpoint it"""

    name = "train"
    default_dir = "train"

    def run(self, context: WorkflowContext) -> bool:
        run_config = context.run_config
        dataset = self.load_dataset(context)
        net = run_config.model.net.for_data(dataset.channels, dataset.time, dataset.classes)
        model = ModelFactory.create_model(run_config.model.arm, net, run_config.model.norm, context.seed)
        plan = make_split_plan(dataset, context.seed, run_config.protocol.validation_fraction)
        console.info(f"Training {model.arm} on {len(plan.source_ids)} source domains "
                     f"for {run_config.protocol.epochs} epochs")

        result = Trainer(model, run_config.protocol, context.seed, context.config_hash).train(dataset, plan)
        log = result.log

        summary = {"best_epoch": log.best_epoch, "best_val_loss": log.best_val_loss,
                   "epochs": len(log.epochs), "initial_val_loss": log.initial_val_loss,
                   "reeig_activations": log.reeig_activations}
        save_checkpoint(context.path(CHECKPOINT_NAME), model, run_config.model.norm, context.seed,
                        context.config_hash, result.optimizer, summary, run_config.resolved())
        self.write_artifact(context, "training_log.json", {"log": log.model_dump(mode="json"),
                                                           "split": plan.to_dict()})

        rows = [(r.epoch, f"{r.train_loss:.4f}", "" if r.val_loss is None else f"{r.val_loss:.4f}",
                 "" if r.val_balanced_accuracy is None else f"{r.val_balanced_accuracy:.3f}",
                 f"{r.gamma_train:.3f}", r.reeig_activations) for r in log.epochs]
        if rows:
            print(format_table(["epoch", "train_loss", "val_loss", "val_bacc", "gamma", "reeig"], rows), end="")
        if log.reeig_activations:
            console.warning(f"ReEig clamped {log.reeig_activations} eigenvalues during training")

        if run_config.evaluation.folds:
            folds = cross_validate(dataset, run_config)
            self.write_artifact(context, "folds_report.json", folds.model_dump(mode="json"))
            if folds.mean_balanced_accuracy is not None:
                console.info(f"Leave-domains-out mean balanced accuracy: {folds.mean_balanced_accuracy:.3f}")

        console.success(f"Checkpoint written to {context.path(CHECKPOINT_NAME)} (selected epoch {log.best_epoch})")
        return True
