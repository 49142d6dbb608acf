"""Instance selection: which pseudo-labeled predictions join the training set.

Six strategies over one batch of model predictions:

- ConfThreshold(t): keep confidence strictly above t
- EntThreshold(t):  keep entropy strictly below t
- MaxConfTopK(k):   keep the k most confident
- MinEntTopK(k):    keep the k lowest-entropy
- RandomBatch(b):   keep b drawn uniformly without replacement
- SoftLabel:        keep every prediction, with its full distribution

After strategy filtering, at most `batch_cap` predictions survive
(default 1000); the cap keeps the most confident, for soft labels too.
Ties anywhere break by instance id; results are ordered by instance id.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from typing import Mapping, Sequence, Union

from .classifier import ProbDist
from .errors import ConfigError

DEFAULT_BATCH_CAP = 1000


def confidence(dist: ProbDist) -> float:
    """The predicted label's probability: the distribution's max entry."""
    return max(dist.probs)


def entropy(dist: ProbDist) -> float:
    """Shannon entropy in nats, with the 0*ln(0) = 0 convention."""
    return -sum(p * math.log(p) for p in dist.probs if p > 0.0)


@dataclass(frozen=True)
class Prediction:
    instance_id: str
    dist: ProbDist
    pseudo_label: int
    confidence: float
    entropy: float

    def __post_init__(self):
        if self.pseudo_label != self.dist.argmax():
            raise ValueError(
                f"pseudo_label {self.pseudo_label} is not the argmax of {self.dist.probs}"
            )

    @classmethod
    def from_dist(cls, instance_id: str, dist: ProbDist) -> "Prediction":
        return cls(
            instance_id=instance_id,
            dist=dist,
            pseudo_label=dist.argmax(),
            confidence=confidence(dist),
            entropy=entropy(dist),
        )


def _positive(name: str, value: int) -> int:
    if value < 1:
        raise ConfigError(f"{name} must be a positive integer, got {value}")
    return value


@dataclass(frozen=True)
class ConfThreshold:
    t: float
    batch_cap: int = DEFAULT_BATCH_CAP

    def __post_init__(self):
        if not 0.0 < self.t <= 1.0:
            raise ConfigError(f"confidence threshold must be in (0,1], got {self.t}")
        _positive("batch_cap", self.batch_cap)


@dataclass(frozen=True)
class EntThreshold:
    t: float
    batch_cap: int = DEFAULT_BATCH_CAP

    def __post_init__(self):
        if self.t < 0.0:
            raise ConfigError(f"entropy threshold must be >= 0, got {self.t}")
        _positive("batch_cap", self.batch_cap)


@dataclass(frozen=True)
class MaxConfTopK:
    k: int
    batch_cap: int = DEFAULT_BATCH_CAP

    def __post_init__(self):
        _positive("k", self.k)
        _positive("batch_cap", self.batch_cap)


@dataclass(frozen=True)
class MinEntTopK:
    k: int
    batch_cap: int = DEFAULT_BATCH_CAP

    def __post_init__(self):
        _positive("k", self.k)
        _positive("batch_cap", self.batch_cap)


@dataclass(frozen=True)
class SoftLabel:
    batch_cap: int = DEFAULT_BATCH_CAP

    def __post_init__(self):
        _positive("batch_cap", self.batch_cap)


@dataclass(frozen=True)
class RandomBatch:
    b: int
    batch_cap: int = DEFAULT_BATCH_CAP

    def __post_init__(self):
        _positive("b", self.b)
        _positive("batch_cap", self.batch_cap)


SelectionStrategy = Union[
    ConfThreshold, EntThreshold, MaxConfTopK, MinEntTopK, SoftLabel, RandomBatch
]

STRATEGY_NAMES = {
    "conf_threshold": ConfThreshold,
    "ent_threshold": EntThreshold,
    "max_conf": MaxConfTopK,
    "min_ent": MinEntTopK,
    "soft_label": SoftLabel,
    "random": RandomBatch,
}


@dataclass(frozen=True)
class SelectionResult:
    """Either hard (id, pseudo-label) pairs or soft (id, distribution) pairs."""

    hard_selected: tuple[tuple[str, int], ...] | None = None
    soft_selected: tuple[tuple[str, ProbDist], ...] | None = None

    def __post_init__(self):
        if (self.hard_selected is None) == (self.soft_selected is None):
            raise ValueError("exactly one of hard_selected/soft_selected must be set")

    def __len__(self) -> int:
        if self.hard_selected is not None:
            return len(self.hard_selected)
        return len(self.soft_selected)

    def ids(self) -> list[str]:
        pairs = self.hard_selected if self.hard_selected is not None else self.soft_selected
        return [instance_id for instance_id, _ in pairs]


def select(
    strategy: SelectionStrategy,
    predictions: Sequence[Prediction],
    rng_seed: int = 0,
) -> SelectionResult:
    """Apply a strategy to one prediction batch.

    Deterministic in (predictions, rng_seed) regardless of input order;
    the output is ordered by instance id. A k or b larger than the batch
    selects everything available.
    """
    preds = sorted(predictions, key=lambda p: p.instance_id)
    if len({p.instance_id for p in preds}) != len(preds):
        raise ValueError("duplicate instance ids in prediction batch")

    if isinstance(strategy, ConfThreshold):
        kept = [p for p in preds if p.confidence > strategy.t]
    elif isinstance(strategy, EntThreshold):
        kept = [p for p in preds if p.entropy < strategy.t]
    elif isinstance(strategy, MaxConfTopK):
        ranked = sorted(preds, key=lambda p: (-p.confidence, p.instance_id))
        kept = ranked[: strategy.k]
    elif isinstance(strategy, MinEntTopK):
        ranked = sorted(preds, key=lambda p: (p.entropy, p.instance_id))
        kept = ranked[: strategy.k]
    elif isinstance(strategy, RandomBatch):
        rng = random.Random(rng_seed)
        kept = rng.sample(preds, min(strategy.b, len(preds)))
    elif isinstance(strategy, SoftLabel):
        kept = list(preds)
    else:
        raise TypeError(f"unknown strategy {strategy!r}")

    if len(kept) > strategy.batch_cap:
        kept = sorted(kept, key=lambda p: (-p.confidence, p.instance_id))
        kept = kept[: strategy.batch_cap]
    kept.sort(key=lambda p: p.instance_id)

    if isinstance(strategy, SoftLabel):
        return SelectionResult(
            soft_selected=tuple((p.instance_id, p.dist) for p in kept)
        )
    return SelectionResult(
        hard_selected=tuple((p.instance_id, p.pseudo_label) for p in kept)
    )


def strategy_from_config(block: Mapping[str, object]) -> SelectionStrategy:
    """Build a strategy from config keys: name plus t / k / b / batch_cap."""
    block = dict(block)
    name = block.pop("name", None)
    if name not in STRATEGY_NAMES:
        raise ConfigError(
            f"unknown strategy {name!r}; expected one of {sorted(STRATEGY_NAMES)}"
        )
    cls = STRATEGY_NAMES[name]
    allowed = set(cls.__dataclass_fields__)
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(
            f"strategy {name!r} does not accept {sorted(unknown)}; allowed: {sorted(allowed)}"
        )
    try:
        return cls(**block)
    except TypeError as e:
        raise ConfigError(f"strategy {name!r}: {e}") from e
