"""The self-training loop.

Train on the labeled seed set, then repeat: infer a distribution for
every pool instance, select per the strategy, migrate the selections
into the labeled set as pseudo-labels (hard strategies) or register
their distributions as soft targets while they stay pool-resident
(soft-label strategy), and retrain from a fresh initialization on the
updated set. Retraining from scratch keeps a run a deterministic
function of (datasets, strategy, seeds).

Termination is any-of: nothing selectable, an iteration cap, or outer
patience on a validation metric (macro-F1). Patience returns the model
from the best-validation iteration; other exits return the final model.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import json

from .classifier import BaselineTextClassifier, Hyperparams, TextClassifier, TrainTarget
from .data import Dataset, Instance
from .errors import ConfigError, DataError, InsufficientClassCount, TrainingError
from .metrics import MetricsReport, confusion, labeling_accuracy, report_from_confusion
from .seeds import mix
from .strategies import Prediction, SelectionStrategy, SoftLabel, select


@dataclass(frozen=True)
class TerminationRule:
    """Any-of loop exit conditions; at least one must be enabled."""

    no_more_selectable: bool = True
    max_iterations: int | None = None
    patience: int | None = 2

    def __post_init__(self):
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ConfigError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.patience is not None and self.patience < 1:
            raise ConfigError(f"patience must be >= 1, got {self.patience}")
        if not (self.no_more_selectable or self.max_iterations or self.patience):
            raise ConfigError("termination rule enables no criterion")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    num_selected: int
    pseudo_label_accuracy: float | None
    validation_metric: float | None
    labeled_size_after: int
    # (instance_id, label-at-migration) pairs; argmax of the soft target
    # in soft-label mode. Lets audits replay the selection decisions.
    selected: tuple[tuple[str, int], ...] = ()

    def to_json_dict(self) -> dict:
        return {
            "iteration": self.iteration,
            "num_selected": self.num_selected,
            "pseudo_label_accuracy": self.pseudo_label_accuracy,
            "validation_metric": self.validation_metric,
            "labeled_size_after": self.labeled_size_after,
            "selected": [[i, y] for i, y in self.selected],
        }


@dataclass
class SelfTrainState:
    """Mutable loop state: T (labeled), T' (pool), the model, history."""

    labeled: list[tuple[Instance, TrainTarget]]
    unlabeled: dict[str, Instance]
    model: TextClassifier | None = None
    iteration: int = 0
    history: list[IterationRecord] = field(default_factory=list)


@dataclass
class EngineConfig:
    hyperparams: Hyperparams = Hyperparams()
    seed: int = 0
    validation: Dataset | None = None
    # Fresh classifier per (re)train; defaults to the built-in baseline.
    classifier_factory: Callable[[], TextClassifier] | None = None


class SelfTrainAborted(TrainingError):
    """Classifier failure mid-run; carries the partial iteration history."""

    def __init__(self, message: str, history: Sequence[IterationRecord]):
        super().__init__(message)
        self.history = list(history)


def _require_all_classes(dataset: Dataset) -> None:
    counts = [0] * dataset.num_classes
    for inst in dataset.instances:
        if inst.gold_label is not None:
            counts[inst.gold_label] += 1
    for c, count in enumerate(counts):
        if count == 0:
            raise InsufficientClassCount(dataset.class_names[c], 0, 1)


def _validation_records(validation: Dataset | None) -> list[tuple[str, int]] | None:
    if validation is None or len(validation) == 0:
        return None
    if not validation.fully_labeled():
        raise DataError("validation set must be fully gold-labeled")
    return [(inst.text, inst.gold_label) for inst in validation.instances]


def _new_classifier(config: EngineConfig, num_classes: int) -> TextClassifier:
    if config.classifier_factory is not None:
        return config.classifier_factory()
    return BaselineTextClassifier(num_classes, config.hyperparams)


def _fit(config, num_classes, examples, val_records, history) -> TextClassifier:
    clf = _new_classifier(config, num_classes)
    try:
        clf.fit(examples, validation=val_records)
    except TrainingError as e:
        raise SelfTrainAborted(f"classifier failed: {e}", history) from e
    return clf


def _validation_macro_f1(model, validation: Dataset | None) -> float | None:
    if validation is None or len(validation) == 0:
        return None
    return evaluate(model, validation).macro_f1


def run_supervised(labeled: Dataset, config: EngineConfig) -> TextClassifier:
    """The supervised (labeled-data-only) baseline: one training pass."""
    if len(labeled) == 0:
        raise DataError("labeled set is empty")
    _require_all_classes(labeled)
    examples = [
        (inst.text, TrainTarget.hard_label(inst.gold_label))
        for inst in labeled.instances
        if inst.gold_label is not None
    ]
    return _fit(
        config, labeled.num_classes, examples, _validation_records(config.validation), []
    )


def run_self_training(
    labeled: Dataset,
    unlabeled: Dataset,
    strategy: SelectionStrategy,
    termination: TerminationRule,
    config: EngineConfig,
) -> tuple[TextClassifier, list[IterationRecord]]:
    if len(labeled) == 0:
        raise DataError("initial labeled set is empty")
    if labeled.class_names != unlabeled.class_names:
        raise DataError("labeled and unlabeled sets disagree on class names")
    overlap = labeled.ids() & unlabeled.ids()
    if overlap:
        raise DataError(f"labeled and unlabeled sets share ids, e.g. {sorted(overlap)[:3]}")
    _require_all_classes(labeled)

    soft_mode = isinstance(strategy, SoftLabel)
    has_validation = config.validation is not None and len(config.validation) > 0
    halting = (
        (termination.no_more_selectable and not soft_mode)
        or termination.max_iterations is not None
        or (termination.patience is not None and has_validation)
    )
    if not halting:
        raise ConfigError(
            "no effective termination: soft-label runs need max_iterations or "
            "patience with a validation set"
        )

    val_records = _validation_records(config.validation)
    num_classes = labeled.num_classes
    state = SelfTrainState(
        labeled=[
            (inst, TrainTarget.hard_label(inst.gold_label))
            for inst in labeled.instances
        ],
        unlabeled={inst.id: inst for inst in unlabeled.instances},
    )
    initial_ids = labeled.ids() | unlabeled.ids()
    shadow = dict(unlabeled.shadow_gold)

    hard_examples = [(inst.text, target) for inst, target in state.labeled]
    state.model = _fit(config, num_classes, hard_examples, val_records, state.history)

    best_metric = _validation_macro_f1(state.model, config.validation)
    best_model = state.model
    stall = 0

    while True:
        state.iteration += 1
        pool = sorted(state.unlabeled.values(), key=lambda inst: inst.id)
        dists = state.model.predict_dist_many([inst.text for inst in pool])
        predictions = [
            Prediction.from_dist(inst.id, dist) for inst, dist in zip(pool, dists)
        ]
        result = select(
            strategy, predictions, rng_seed=mix(config.seed, "select", state.iteration)
        )
        num_selected = len(result)

        if num_selected > 0:
            if soft_mode:
                selected_pairs = tuple(
                    (i, dist.argmax()) for i, dist in result.soft_selected
                )
                train_set = hard_examples + [
                    (state.unlabeled[i].text, TrainTarget.soft_label(dist))
                    for i, dist in result.soft_selected
                ]
                labeled_size_after = len(train_set)
            else:
                selected_pairs = result.hard_selected
                for instance_id, label in result.hard_selected:
                    inst = state.unlabeled.pop(instance_id)
                    state.labeled.append((inst, TrainTarget.hard_label(label)))
                    hard_examples.append((inst.text, TrainTarget.hard_label(label)))
                train_set = hard_examples
                labeled_size_after = len(hard_examples)
                # Algorithm invariant: migration preserves the id universe.
                labeled_ids = {inst.id for inst, _ in state.labeled}
                assert labeled_ids | set(state.unlabeled) == initial_ids
                assert not labeled_ids & set(state.unlabeled)
            pl_acc = None
            if all(i in shadow for i, _ in selected_pairs):
                pl_acc = labeling_accuracy(selected_pairs, shadow)
            state.model = _fit(config, num_classes, train_set, val_records, state.history)
        else:
            # Nothing selected: the training set is unchanged, and retraining
            # from scratch on identical data reproduces the current model.
            selected_pairs = ()
            pl_acc = None
            labeled_size_after = len(hard_examples)

        val_metric = _validation_macro_f1(state.model, config.validation)
        state.history.append(
            IterationRecord(
                iteration=state.iteration,
                num_selected=num_selected,
                pseudo_label_accuracy=pl_acc,
                validation_metric=val_metric,
                labeled_size_after=labeled_size_after,
                selected=tuple(selected_pairs),
            )
        )

        if num_selected == 0 and (termination.no_more_selectable or not state.unlabeled):
            break
        if (
            termination.max_iterations is not None
            and state.iteration >= termination.max_iterations
        ):
            break
        if val_metric is not None and termination.patience is not None:
            if best_metric is None or val_metric > best_metric:
                best_metric, best_model, stall = val_metric, state.model, 0
            else:
                stall += 1
                if stall >= termination.patience:
                    state.model = best_model
                    break

    return state.model, state.history


def evaluate(model: TextClassifier, test: Dataset) -> MetricsReport:
    if len(test) == 0 or not test.fully_labeled():
        raise DataError("evaluation requires a non-empty, fully gold-labeled set")
    dists = model.predict_dist_many([inst.text for inst in test.instances])
    predicted = [d.argmax() for d in dists]
    gold = [inst.gold_label for inst in test.instances]
    cm = confusion(gold, predicted, test.num_classes)
    return report_from_confusion(cm, test.class_names)


def write_history(history: Sequence[IterationRecord], path: str) -> None:
    """history.jsonl: one record per line, byte-deterministic."""
    with open(path, "w", encoding="utf-8") as f:
        for record in history:
            f.write(json.dumps(record.to_json_dict(), sort_keys=True, separators=(",", ":")))
            f.write("\n")
