"""
Harness: run configuration, checkpoints, metrics, training, adaptation and
evaluation, ablations, convergence experiments and the gradient suite.
"""

from .run_config import (
    RunConfig,
    ModelSection,
    TrainProtocol,
    EvaluationSection,
    AblationSection,
    ConvergenceConfig,
    PathsSection,
    load_run_config,
    parse_run_config
)
from .metrics import score_balanced_accuracy, per_class_recall, confusion_matrix
from .splits import SplitPlan, make_split_plan, stratified_split, leave_domains_out_folds
from .trainer import Trainer, TrainingLog, TrainingResult, EpochRecord
from .evaluation import (
    EvalReport,
    DomainScore,
    SkippedDomain,
    FoldsReport,
    adapt_and_eval,
    evaluate_domain,
    cross_validate
)
from .checkpoint import Checkpoint, save_checkpoint, load_checkpoint, encode_checkpoint
from .ablation import AblationTable, ArmResult, ablation_run, sign_flip_tmax
from .convergence import (
    ConvergenceReport,
    DecayingMomentumResult,
    FixedMomentumResult,
    convergence_experiment,
    run_fixed_momentum_experiment,
    run_decaying_momentum_experiment,
    step_bound
)
from .gradcheck import GradCheckReport, GradCheckRow, run_gradcheck, tiny_config

__all__ = [
    'RunConfig',
    'ModelSection',
    'TrainProtocol',
    'EvaluationSection',
    'AblationSection',
    'ConvergenceConfig',
    'PathsSection',
    'load_run_config',
    'parse_run_config',
    'score_balanced_accuracy',
    'per_class_recall',
    'confusion_matrix',
    'SplitPlan',
    'make_split_plan',
    'stratified_split',
    'leave_domains_out_folds',
    'Trainer',
    'TrainingLog',
    'TrainingResult',
    'EpochRecord',
    'EvalReport',
    'DomainScore',
    'SkippedDomain',
    'FoldsReport',
    'adapt_and_eval',
    'evaluate_domain',
    'cross_validate',
    'Checkpoint',
    'save_checkpoint',
    'load_checkpoint',
    'encode_checkpoint',
    'AblationTable',
    'ArmResult',
    'ablation_run',
    'sign_flip_tmax',
    'ConvergenceReport',
    'DecayingMomentumResult',
    'FixedMomentumResult',
    'convergence_experiment',
    'run_fixed_momentum_experiment',
    'run_decaying_momentum_experiment',
    'step_bound',
    'GradCheckReport',
    'GradCheckRow',
    'run_gradcheck',
    'tiny_config'
]
