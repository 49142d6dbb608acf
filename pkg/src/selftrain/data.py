"""Datasets: ingestion, deterministic splitting, n-shot sampling, synthesis.

All operations are pure functions of their inputs and seeds; stdlib
`random.Random` is used throughout because its sequences are stable
across Python versions.
"""

from __future__ import annotations

import csv
import json
import math
import random
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

from .errors import (
    DataError,
    DuplicateId,
    InsufficientClassCount,
    MalformedRecord,
    UnknownLabel,
)

DEFAULT_CLASS_NAMES = ("positive", "negative", "neutral")

# Skewed positive/negative/neutral mix typical of conversational sentiment
# corpora; used as the default shape for synthetic class priors.
DEFAULT_PRIOR_SHAPE = (5658, 2578, 10106)


@dataclass(frozen=True)
class Instance:
    """One text with an opaque id and an optional gold class index."""

    id: str
    text: str
    gold_label: int | None = None

    def __post_init__(self):
        if not self.text.strip():
            raise DataError(f"instance {self.id!r}: text is empty")


@dataclass(frozen=True)
class Dataset:
    """Ordered instances plus class names and a provenance descriptor.

    `shadow_gold` holds withheld gold labels for pseudo-label auditing
    (populated by `sample_n_shot` on the unlabeled pool). It is consumed
    only by metrics code, never by strategies or classifiers.
    """

    instances: tuple[Instance, ...]
    class_names: tuple[str, ...]
    provenance: str = ""
    shadow_gold: Mapping[str, int] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "instances", tuple(self.instances))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if len(set(self.class_names)) != len(self.class_names):
            raise DataError(f"class names are not distinct: {self.class_names}")
        seen = set()
        for inst in self.instances:
            if inst.id in seen:
                raise DataError(f"duplicate instance id {inst.id!r}")
            seen.add(inst.id)
            if inst.gold_label is not None and not (
                0 <= inst.gold_label < len(self.class_names)
            ):
                raise DataError(
                    f"instance {inst.id!r}: gold label {inst.gold_label} out of range"
                )

    def __len__(self) -> int:
        return len(self.instances)

    @property
    def num_classes(self) -> int:
        return len(self.class_names)

    def ids(self) -> set[str]:
        return {inst.id for inst in self.instances}

    def fully_labeled(self) -> bool:
        return all(inst.gold_label is not None for inst in self.instances)


@dataclass(frozen=True)
class SplitSpec:
    test_fraction: float
    seed: int

    def __post_init__(self):
        if not 0.0 < self.test_fraction < 1.0:
            raise DataError(f"test_fraction must be in (0,1), got {self.test_fraction}")


def load_dataset(path: str, format: str, class_names: Sequence[str]) -> Dataset:
    """Load a JSONL or CSV file into a Dataset, preserving file order.

    Records need a non-empty `text`; `label`, when present, must match a
    class name exactly. Missing ids are auto-assigned "row-<k>" by record
    index.
    """
    class_names = tuple(class_names)
    if format == "jsonl":
        records = _read_jsonl(path)
    elif format == "csv":
        records = _read_csv(path)
    else:
        raise DataError(f"unsupported dataset format {format!r}")

    label_to_index = {name: i for i, name in enumerate(class_names)}
    instances = []
    seen_ids = set()
    for k, (line_no, rec) in enumerate(records):
        text = rec.get("text")
        if not isinstance(text, str) or not text.strip():
            raise MalformedRecord(path, line_no, "missing or empty 'text'")
        inst_id = rec.get("id")
        if inst_id is None or inst_id == "":
            inst_id = f"row-{k}"
        inst_id = str(inst_id)
        if inst_id in seen_ids:
            raise DuplicateId(path, line_no, inst_id)
        seen_ids.add(inst_id)
        label = rec.get("label")
        gold = None
        if label is not None and label != "":
            if label not in label_to_index:
                raise UnknownLabel(path, line_no, label, class_names)
            gold = label_to_index[label]
        instances.append(Instance(id=inst_id, text=text, gold_label=gold))
    return Dataset(instances=tuple(instances), class_names=class_names, provenance=path)


def _read_jsonl(path):
    out = []
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise MalformedRecord(path, line_no, f"invalid JSON ({e.msg})") from e
            if not isinstance(rec, dict):
                raise MalformedRecord(path, line_no, "record is not an object")
            out.append((line_no, rec))
    return out


def _read_csv(path):
    out = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None:
            raise MalformedRecord(path, 1, "missing header row")
        missing = {"id", "text", "label"} - set(reader.fieldnames)
        if missing:
            raise MalformedRecord(path, 1, f"header lacks columns {sorted(missing)}")
        for rec in reader:
            out.append((reader.line_num, rec))
    return out


def split_train_test(dataset: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Random exact partition into (train, test); test size is round-half-up
    of test_fraction * |dataset|. Deterministic for a fixed seed."""
    if not dataset.fully_labeled():
        raise DataError("split_train_test requires gold labels on every instance")
    n = len(dataset)
    n_test = int(math.floor(spec.test_fraction * n + 0.5))
    if n_test < 1 or n_test >= n:
        raise DataError(
            f"dataset of {n} cannot be split with test_fraction={spec.test_fraction}: "
            f"one side would be empty"
        )
    rng = random.Random(spec.seed)
    indices = list(range(n))
    rng.shuffle(indices)
    test_idx = set(indices[:n_test])
    train = [inst for i, inst in enumerate(dataset.instances) if i not in test_idx]
    test = [inst for i, inst in enumerate(dataset.instances) if i in test_idx]
    return (
        replace(dataset, instances=tuple(train), provenance=f"{dataset.provenance}#train"),
        replace(dataset, instances=tuple(test), provenance=f"{dataset.provenance}#test"),
    )


def sample_n_shot(train: Dataset, n: int, seed: int) -> tuple[Dataset, Dataset]:
    """Stratified n-per-class sample of the labeled seed set.

    Returns (labeled, unlabeled_pool). Pool instances have their gold
    labels stripped and moved into the pool's `shadow_gold` map so that
    training code cannot see them while metrics still can.
    """
    if n < 1:
        raise DataError(f"n_shot must be positive, got {n}")
    by_class: dict[int, list[Instance]] = {c: [] for c in range(train.num_classes)}
    for inst in train.instances:
        if inst.gold_label is not None:
            by_class[inst.gold_label].append(inst)
    for c, members in by_class.items():
        if len(members) < n:
            raise InsufficientClassCount(train.class_names[c], len(members), n)
    rng = random.Random(seed)
    chosen: set[str] = set()
    for c in range(train.num_classes):
        chosen.update(inst.id for inst in rng.sample(by_class[c], n))
    labeled = [inst for inst in train.instances if inst.id in chosen]
    pool = [inst for inst in train.instances if inst.id not in chosen]
    shadow = {
        inst.id: inst.gold_label for inst in pool if inst.gold_label is not None
    }
    pool_hidden = tuple(replace(inst, gold_label=None) for inst in pool)
    return (
        replace(
            train,
            instances=tuple(labeled),
            provenance=f"{train.provenance}#labeled",
            shadow_gold={},
        ),
        replace(
            train,
            instances=pool_hidden,
            provenance=f"{train.provenance}#pool",
            shadow_gold=shadow,
        ),
    )


def make_vocab(num_classes: int, size: int) -> list[list[str]]:
    """Disjoint-by-construction word lists, `size` words per class."""
    if size < 1:
        raise DataError("vocabulary size must be positive")
    return [[f"c{c}w{i:03d}" for i in range(size)] for c in range(num_classes)]


def counts_from_priors(total: int, priors: Sequence[float]) -> list[int]:
    """Largest-remainder apportionment of `total` instances over priors."""
    weight = sum(priors)
    raw = [total * p / weight for p in priors]
    counts = [int(math.floor(x)) for x in raw]
    remainders = sorted(
        range(len(raw)), key=lambda c: (raw[c] - counts[c], -c), reverse=True
    )
    for c in remainders[: total - sum(counts)]:
        counts[c] += 1
    return counts


def synth_generate(
    n_per_class: int | Sequence[int],
    vocab_per_class: Sequence[Sequence[str]],
    noise: float,
    seed: int,
    class_names: Sequence[str] = DEFAULT_CLASS_NAMES,
    words_min: int = 5,
    words_max: int = 15,
) -> Dataset:
    """Generate a labeled bag-of-words corpus for desk-scale verification.

    Each text is words_min..words_max words; each word comes from the
    instance's own class vocabulary with probability 1 - noise, otherwise
    from the union of the other classes' vocabularies. Pass a sequence for
    `n_per_class` to shape class priors (see `counts_from_priors`).
    """
    class_names = tuple(class_names)
    num_classes = len(class_names)
    if len(vocab_per_class) != num_classes:
        raise DataError(
            f"need {num_classes} vocabularies, got {len(vocab_per_class)}"
        )
    for c, vocab in enumerate(vocab_per_class):
        if not vocab:
            raise DataError(f"class {class_names[c]!r} has an empty vocabulary")
    if not 0.0 <= noise < 1.0:
        raise DataError(f"noise must be in [0,1), got {noise}")
    if isinstance(n_per_class, int):
        counts = [n_per_class] * num_classes
    else:
        counts = list(n_per_class)
        if len(counts) != num_classes:
            raise DataError(f"need {num_classes} per-class counts, got {len(counts)}")

    other_vocab = [
        [w for oc, vocab in enumerate(vocab_per_class) if oc != c for w in vocab]
        for c in range(num_classes)
    ]
    rng = random.Random(seed)
    instances = []
    k = 0
    for c in range(num_classes):
        for _ in range(counts[c]):
            n_words = rng.randint(words_min, words_max)
            words = []
            for _ in range(n_words):
                if noise > 0.0 and rng.random() < noise:
                    words.append(rng.choice(other_vocab[c]))
                else:
                    words.append(rng.choice(list(vocab_per_class[c])))
            instances.append(
                Instance(id=f"syn-{k:05d}", text=" ".join(words), gold_label=c)
            )
            k += 1
    return Dataset(
        instances=tuple(instances),
        class_names=class_names,
        provenance=f"synthetic(seed={seed},noise={noise})",
    )
