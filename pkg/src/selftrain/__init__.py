"""Model-agnostic self-training for few-shot text classification.

Core pieces: dataset utilities with deterministic splitting and n-shot
sampling, a hashed bag-of-words softmax baseline with hard and soft
(distribution) targets, six instance-selection strategies, the iterative
self-training engine, LLM-assisted labeling pipelines over a generic
chat-completion client, evaluation metrics, and a sweep/CLI harness.
"""

from .classifier import (
    BaselineTextClassifier,
    ClassifierModel,
    Hyperparams,
    ProbDist,
    TextClassifier,
    TrainTarget,
    featurize,
    load_model,
    predict_dist,
    predict_label,
    save_model,
    train,
)
from .data import (
    Dataset,
    Instance,
    SplitSpec,
    load_dataset,
    make_vocab,
    sample_n_shot,
    split_train_test,
    synth_generate,
)
from .engine import (
    EngineConfig,
    IterationRecord,
    SelfTrainState,
    TerminationRule,
    evaluate,
    run_self_training,
    run_supervised,
)
from .metrics import (
    MetricsReport,
    aggregate,
    confusion,
    labeling_accuracy,
    macro_f1,
    report_from_confusion,
)
from .strategies import (
    ConfThreshold,
    EntThreshold,
    MaxConfTopK,
    MinEntTopK,
    Prediction,
    RandomBatch,
    SelectionResult,
    SoftLabel,
    confidence,
    entropy,
    select,
    strategy_from_config,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineTextClassifier",
    "ClassifierModel",
    "ConfThreshold",
    "Dataset",
    "EngineConfig",
    "EntThreshold",
    "Hyperparams",
    "Instance",
    "IterationRecord",
    "MaxConfTopK",
    "MetricsReport",
    "MinEntTopK",
    "Prediction",
    "ProbDist",
    "RandomBatch",
    "SelectionResult",
    "SelfTrainState",
    "SoftLabel",
    "SplitSpec",
    "TerminationRule",
    "TextClassifier",
    "TrainTarget",
    "aggregate",
    "confidence",
    "confusion",
    "entropy",
    "evaluate",
    "featurize",
    "labeling_accuracy",
    "load_dataset",
    "load_model",
    "macro_f1",
    "make_vocab",
    "predict_dist",
    "predict_label",
    "report_from_confusion",
    "run_self_training",
    "run_supervised",
    "sample_n_shot",
    "save_model",
    "select",
    "split_train_test",
    "strategy_from_config",
    "synth_generate",
    "train",
]
