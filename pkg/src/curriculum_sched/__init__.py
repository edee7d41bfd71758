"""Curriculum sampling schedules for hierarchical classification."""

from .datagen import LabeledDataset, Split, SynthSpec, generate, restrict_training, stratified_split
from .experiments import (
    STANDARD_STRATEGIES,
    RunConfig,
    RunReport,
    Strategy,
    load_config,
    named_strategy,
    report_emit,
    run_suite,
)
from .kernels import BACKEND
from .metrics import (
    ClassTaxonomy,
    aggregate_posterior,
    cohens_kappa,
    paired_t_test,
    weighted_f1,
    within_group_misprediction_rate,
)
from .model import Hyperparams, init_classifier, train
from .scheduler import (
    CurriculumScheduler,
    CurriculumSpec,
    Direction,
    EpochOrder,
    SamplingMode,
    SchedulerState,
    Scheme,
    class_weights,
    decay_step,
    draw_epoch_order,
    init_probabilities,
)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "ClassTaxonomy", "CurriculumScheduler", "CurriculumSpec", "Direction",
    "EpochOrder", "Hyperparams", "LabeledDataset", "STANDARD_STRATEGIES", "RunConfig",
    "RunReport", "SamplingMode", "SchedulerState", "Scheme", "Split", "Strategy",
    "SynthSpec", "aggregate_posterior", "class_weights", "cohens_kappa", "decay_step",
    "draw_epoch_order", "generate", "init_classifier", "init_probabilities",
    "load_config", "named_strategy", "paired_t_test", "report_emit", "restrict_training",
    "run_suite", "stratified_split", "train", "weighted_f1", "within_group_misprediction_rate",
]
