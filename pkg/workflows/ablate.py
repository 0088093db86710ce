#!/usr/bin/env python3
"""
Ablation workflow (ablate): compare the arms against the proposed model.
"""

from common import console
from src.ablation import ablation_run
from .base import Workflow, WorkflowContext, format_table


class AblationWorkflow(Workflow):
    """Train every configured arm for every seed and tabulate the differences"""

    name = "ablate"
    default_dir = "ablation"

    def run(self, context: WorkflowContext) -> bool:
        dataset = self.load_dataset(context)
        table = ablation_run(dataset, context.run_config)
        self.write_artifact(context, "ablation.json", table.model_dump(mode="json"))

        headers = ["arm", "delta_bacc_pp", "fit_time_s"]
        if table.permutations:
            headers.append("p_value")
        rows = []
        for row in table.rows:
            line = [row.arm, f"{row.delta_mean:+.1f} ({row.delta_std:.1f})",
                    f"{row.fit_time_mean:.1f} ({row.fit_time_std:.1f})"]
            if table.permutations:
                line.append("" if row.p_value is None else f"{row.p_value:.4f}")
            rows.append(line)
        text = format_table(headers, rows)
        self.write_text(context, "ablation.txt", text)
        print(text, end="")
        console.success(f"Compared {len(table.rows)} arms over seeds {table.seeds}")
        return True
