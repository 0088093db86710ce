#!/usr/bin/env python3
"""
Gradient check workflow (gradcheck).
"""

from common import console
from common.exceptions import GradientCheckFailure
from src.gradcheck import run_gradcheck
from .base import Workflow, WorkflowContext, format_table


class GradientCheckWorkflow(Workflow):
    """Compare every backward pass with central finite differences"""

    name = "gradcheck"
    default_dir = "gradcheck"

    def run(self, context: WorkflowContext) -> bool:
        model = context.run_config.model
        report = run_gradcheck(model.net, model.norm, context.seed, context.config_hash)
        self.write_artifact(context, "gradcheck.json", {**report.model_dump(mode="json"), "passed": report.passed})

        rows = [(row.name, f"{row.max_relative_error:.2e}", f"{row.tolerance:.0e}", "ok" if row.passed else "FAIL")
                for row in report.rows]
        print(format_table(["component", "max_rel_error", "tolerance", "status"], rows), end="")
        if not report.passed:
            raise GradientCheckFailure(report.failures())
        console.success(f"All {len(report.rows)} gradient checks passed")
        return True
