"""LLM-assisted labeling pipelines.

Two ways an LLM participates:

- subject: the LLM is the classifier, queried per test instance
  (`llm_classify`, or `llm_pseudo_label` in plain OBJ mode over a test set)
- object: the LLM pseudo-labels the unlabeled pool, optionally reporting
  a yes/no confidence (OBJ_CONF) or a numeric score in [0,1]
  (OBJ_CONF_SCORE); filtered labels then train the small model

Every pool instance yields exactly one record: a parsed label or an
error marker. The run aborts only when the failure fraction exceeds the
configured limit.
"""

from __future__ import annotations

import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from ..classifier import (
    BaselineTextClassifier,
    Hyperparams,
    TextClassifier,
    TrainTarget,
)
from ..data import Dataset
from ..errors import (
    ConfigError,
    DataError,
    InsufficientClassCount,
    LabelingAborted,
    LlmError,
    ParseError,
    PromptTooLong,
    TransportError,
)
from .client import LlmClient
from .prompts import (
    PromptTemplate,
    parse_label,
    parse_label_conf,
    parse_label_score,
    render_messages,
)


class LlmMode(str, Enum):
    OBJ = "obj"
    OBJ_CONF = "obj-conf"
    OBJ_CONF_SCORE = "obj-conf-score"


_ANSWER_FORMAT = {
    LlmMode.OBJ: "label",
    LlmMode.OBJ_CONF: "label_conf",
    LlmMode.OBJ_CONF_SCORE: "label_score",
}


@dataclass(frozen=True)
class LlmLabelRecord:
    """One labeling outcome; `error` is set instead of `label` on failure."""

    instance_id: str
    label: int | None
    confident: bool | None = None
    score: float | None = None
    raw_response: str = ""
    error: str | None = None

    def ok(self) -> bool:
        return self.error is None

    def to_json_dict(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "label": self.label,
            "confident": self.confident,
            "score": self.score,
            "raw_response": self.raw_response,
            "error": self.error,
        }


def _check_examples(examples: Sequence[tuple[str, int]], n_shot: int, num_classes: int):
    if n_shot == 0:
        if examples:
            raise ConfigError("zero-shot requests must not carry examples")
    elif len(examples) != n_shot * num_classes:
        raise ConfigError(
            f"few-shot needs n_shot*C = {n_shot * num_classes} examples, got {len(examples)}"
        )


def llm_classify(
    client: LlmClient,
    template: PromptTemplate,
    text: str,
    class_names: Sequence[str],
    examples: Sequence[tuple[str, int]] = (),
    n_shot: int = 0,
) -> int:
    """One classification request; the subject-mode primitive."""
    _check_examples(examples, n_shot, len(class_names))
    messages = render_messages(
        template, class_names, text, examples=examples, answer_format="label"
    )
    response = client.complete(messages)
    return parse_label(response, class_names)


def _parse_for_mode(mode: LlmMode, instance_id: str, response: str, class_names):
    if mode == LlmMode.OBJ:
        return LlmLabelRecord(
            instance_id=instance_id, label=parse_label(response, class_names),
            raw_response=response,
        )
    if mode == LlmMode.OBJ_CONF:
        label, confident = parse_label_conf(response, class_names)
        return LlmLabelRecord(
            instance_id=instance_id, label=label, confident=confident,
            raw_response=response,
        )
    label, score = parse_label_score(response, class_names)
    return LlmLabelRecord(
        instance_id=instance_id, label=label, score=score, raw_response=response
    )


def llm_pseudo_label(
    client: LlmClient,
    template: PromptTemplate,
    pool: Dataset,
    mode: LlmMode,
    examples: Sequence[tuple[str, int]] = (),
    n_shot: int = 0,
) -> list[LlmLabelRecord]:
    """Label every pool instance; one record or failure marker per id.

    Requests run concurrently up to the client's max_in_flight; the
    result is reassembled in instance-id order either way.
    """
    if len(pool) == 0:
        raise DataError("cannot pseudo-label an empty pool")
    mode = LlmMode(mode)
    _check_examples(examples, n_shot, pool.num_classes)
    class_names = pool.class_names
    answer_format = _ANSWER_FORMAT[mode]

    def one(inst) -> LlmLabelRecord:
        messages = render_messages(
            template, class_names, inst.text, examples=examples,
            answer_format=answer_format,
        )
        try:
            response = client.complete(messages, request_key=inst.id)
            return _parse_for_mode(mode, inst.id, response, class_names)
        except (TransportError, ParseError, PromptTooLong) as e:
            raw = getattr(e, "raw_response", "")
            return LlmLabelRecord(
                instance_id=inst.id, label=None, raw_response=raw,
                error=f"{type(e).__name__}: {e}",
            )

    instances = sorted(pool.instances, key=lambda i: i.id)
    if client.config.max_in_flight > 1:
        with ThreadPoolExecutor(max_workers=client.config.max_in_flight) as pool_exec:
            records = list(pool_exec.map(one, instances))
    else:
        records = [one(inst) for inst in instances]
    records.sort(key=lambda r: r.instance_id)

    failures = [r for r in records if not r.ok()]
    if len(failures) / len(records) > client.config.failure_limit:
        by_kind: dict[str, int] = {}
        for r in failures:
            kind = (r.error or "").split(":", 1)[0]
            by_kind[kind] = by_kind.get(kind, 0) + 1
        raise LabelingAborted(
            f"{len(failures)}/{len(records)} instances failed "
            f"(limit {client.config.failure_limit:.0%}); breakdown: {by_kind}",
            records,
        )
    return records


def filter_records(
    records: Sequence[LlmLabelRecord],
    mode: LlmMode,
    threshold: float | None = None,
) -> list[tuple[str, int]]:
    """Keep the (id, label) pairs the mode admits for training.

    OBJ keeps everything parsed; OBJ_CONF keeps confident-only;
    OBJ_CONF_SCORE keeps scores strictly above the threshold. Error
    markers never pass.
    """
    mode = LlmMode(mode)
    if mode == LlmMode.OBJ_CONF_SCORE:
        if threshold is None:
            raise ConfigError("obj-conf-score filtering needs a threshold")
    elif threshold is not None:
        raise ConfigError(f"mode {mode.value} does not take a threshold")
    kept = []
    for rec in records:
        if not rec.ok():
            continue
        if mode == LlmMode.OBJ_CONF:
            if rec.confident is None:
                raise LlmError(f"record {rec.instance_id!r} lacks the confidence flag")
            if not rec.confident:
                continue
        elif mode == LlmMode.OBJ_CONF_SCORE:
            if rec.score is None:
                raise LlmError(f"record {rec.instance_id!r} lacks a confidence score")
            if not rec.score > threshold:
                continue
        kept.append((rec.instance_id, rec.label))
    return kept


def train_slm_on_pseudo_labels(
    filtered: Sequence[tuple[str, int]],
    labeled_seed: Dataset,
    pool: Dataset,
    hyperparams: Hyperparams = Hyperparams(),
    validation: Sequence[tuple[str, int]] | None = None,
) -> TextClassifier:
    """One supervised pass on gold + accepted pseudo-labels.

    Gold wins when an id appears in both. With an empty `filtered` this
    is exactly the supervised baseline.
    """
    if not filtered and len(labeled_seed) == 0:
        raise DataError("nothing to train on: no pseudo-labels and no gold seed")
    pool_by_id = {inst.id: inst for inst in pool.instances}
    gold_ids = labeled_seed.ids()
    examples = [
        (inst.text, TrainTarget.hard_label(inst.gold_label))
        for inst in labeled_seed.instances
        if inst.gold_label is not None
    ]
    for instance_id, label in filtered:
        if instance_id in gold_ids:
            continue
        inst = pool_by_id.get(instance_id)
        if inst is None:
            raise DataError(f"pseudo-labeled id {instance_id!r} is not in the pool")
        examples.append((inst.text, TrainTarget.hard_label(label)))
    clf = BaselineTextClassifier(labeled_seed.num_classes, hyperparams)
    clf.fit(examples, validation=validation)
    return clf


def sample_fewshot_examples(
    labeled: Dataset, n_shot: int, seed: int
) -> list[tuple[str, int]]:
    """n examples per class, class-interleaved, order fixed by the seed."""
    if n_shot < 1:
        return []
    by_class: dict[int, list] = {c: [] for c in range(labeled.num_classes)}
    for inst in labeled.instances:
        if inst.gold_label is not None:
            by_class[inst.gold_label].append(inst)
    rng = random.Random(seed)
    sampled = {}
    for c in range(labeled.num_classes):
        if len(by_class[c]) < n_shot:
            raise InsufficientClassCount(labeled.class_names[c], len(by_class[c]), n_shot)
        sampled[c] = rng.sample(by_class[c], n_shot)
    out = []
    for round_idx in range(n_shot):
        for c in range(labeled.num_classes):
            inst = sampled[c][round_idx]
            out.append((inst.text, c))
    return out
