#!/usr/bin/env python3
"""
Workflow Factory for creating command workflow instances
"""

from enum import Enum
from typing import Dict, Type

from common.exceptions import ConfigError
from .ablate import AblationWorkflow
from .base import Workflow
from .converge import ConvergenceWorkflow
from .evaluate import EvaluateWorkflow
from .generate import GenerateWorkflow
from .gradcheck import GradientCheckWorkflow
from .train import TrainWorkflow


class Command(Enum):
    """Enum for the CLI subcommands"""
    GEN = "gen"
    TRAIN = "train"
    EVAL = "eval"
    ABLATE = "ablate"
    CONVERGE = "converge"
    GRADCHECK = "gradcheck"


class WorkflowFactory:
    """Factory for creating workflows by command"""

    _workflow_registry: Dict[Command, Type[Workflow]] = {
        Command.GEN: GenerateWorkflow,
        Command.TRAIN: TrainWorkflow,
        Command.EVAL: EvaluateWorkflow,
        Command.ABLATE: AblationWorkflow,
        Command.CONVERGE: ConvergenceWorkflow,
        Command.GRADCHECK: GradientCheckWorkflow,
    }

    @classmethod
    def create_workflow(cls, command) -> Workflow:
        """
        Create a workflow instance for a command.

        Args:
            command: Command or its string value

        Returns:
            Workflow instance

        Raises:
            ConfigError: If the command is not registered
        """
        try:
            command = command if isinstance(command, Command) else Command(str(command))
        except ValueError:
            raise ConfigError(f"Unsupported command: {command}. "
                              f"Available commands: {', '.join(cls.get_available_commands())}")
        if command not in cls._workflow_registry:
            raise ConfigError(f"Unsupported command: {command.value}")
        return cls._workflow_registry[command]()

    @classmethod
    def get_available_commands(cls) -> list:
        """Get list of all registered commands"""
        return [command.value for command in cls._workflow_registry]

    @classmethod
    def register_workflow(cls, command: Command, workflow_class: Type[Workflow]):
        """Register a new workflow class for a command"""
        cls._workflow_registry[command] = workflow_class

    @classmethod
    def is_command_supported(cls, command) -> bool:
        try:
            command = command if isinstance(command, Command) else Command(str(command))
        except ValueError:
            return False
        return command in cls._workflow_registry
