#!/usr/bin/env python3
"""
Workflows Package

One workflow class per CLI subcommand. Each workflow receives the validated
run configuration and a locked output directory and returns whether its
contract fully succeeded.
"""

from .base import Workflow, WorkflowContext, format_table
from .generate import GenerateWorkflow
from .train import TrainWorkflow
from .evaluate import EvaluateWorkflow
from .ablate import AblationWorkflow
from .converge import ConvergenceWorkflow
from .gradcheck import GradientCheckWorkflow
from .factory import Command, WorkflowFactory

__all__ = [
    'Workflow',
    'WorkflowContext',
    'format_table',
    'GenerateWorkflow',
    'TrainWorkflow',
    'EvaluateWorkflow',
    'AblationWorkflow',
    'ConvergenceWorkflow',
    'GradientCheckWorkflow',
    'Command',
    'WorkflowFactory'
]
