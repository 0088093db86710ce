#!/usr/bin/env python3
"""
Convergence workflow (converge): running-mean experiments with trace files.
"""

from common import console
from src.convergence import convergence_experiment
from .base import Workflow, WorkflowContext


class ConvergenceWorkflow(Workflow):
    """Run the decaying- and fixed-momentum experiments"""

    name = "converge"
    default_dir = "convergence"

    def run(self, context: WorkflowContext) -> bool:
        report = convergence_experiment(context.run_config.experiment, context.seed, context.out_dir,
                                        context.config_hash)
        self.write_artifact(context, "convergence.json", report.model_dump(mode="json"))

        if report.decaying is not None:
            r = report.decaying
            status = "below" if r.passed else "NOT below"
            console.info(f"Decaying momentum: median final distance {r.median_final_distance:.4f} "
                         f"is {status} {r.threshold}")
        if report.fixed is not None:
            r = report.fixed
            console.info(f"Fixed momentum: variance {r.initial_variance:.4g} -> {r.final_variance:.4g}, "
                         f"slope {r.slope:.3g} (p increasing = {r.p_value_increasing:.3g})")
        if not report.passed:
            console.warning("At least one convergence check did not hold for this configuration")
        console.success(f"Traces written to {context.out_dir}")
        return True
