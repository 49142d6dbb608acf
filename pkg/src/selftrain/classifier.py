"""Probabilistic text classifiers.

The built-in baseline is multinomial softmax regression over hashed
bag-of-words features (lowercased unigrams + bigrams), trained by
gradient descent with optional mini-batching. It supports two targets:

- hard class index, optimized with cross-entropy -log p_y
- soft distribution p_hat, optimized with KL(p_hat || p); at a one-hot
  p_hat this reduces exactly to the hard cross-entropy

Both share the gradient (p - target) x^T, so training mixes them freely.
Any backend exposing the `TextClassifier` interface can replace the
baseline; the self-training engine depends only on that interface.
A fine-tuned transformer backend would typically use a far smaller
learning rate (order 1e-5 to 1e-6) than the baseline default here.
"""

from __future__ import annotations

import base64
import hashlib
import json
import math
import re
from abc import ABC, abstractmethod
from dataclasses import dataclass, asdict, field
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.special import logsumexp

from .errors import TrainingDiverged, TrainingError

DEFAULT_FEATURE_DIM = 2**18

# Versions the featurization so saved models reload consistently.
HASH_VERSION = "bow-uni-bi/blake2b8/1"

MODEL_FORMAT = "softmax-bow/1"

_TOKEN_RE = re.compile(r"\w+", re.UNICODE)
_hash_cache: dict[str, int] = {}


@dataclass(frozen=True)
class ProbDist:
    """Probability vector over the classes; entries >= 0, sum 1 within 1e-9."""

    probs: tuple[float, ...]

    def __post_init__(self):
        probs = tuple(float(p) for p in self.probs)
        object.__setattr__(self, "probs", probs)
        if len(probs) < 2:
            raise ValueError("a distribution needs at least two classes")
        if any(not math.isfinite(p) or p < 0.0 for p in probs):
            raise ValueError(f"invalid probabilities {probs}")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities sum to {sum(probs)!r}, not 1")

    def __len__(self) -> int:
        return len(self.probs)

    def argmax(self) -> int:
        """Index of the largest entry, lowest index on ties."""
        return max(range(len(self.probs)), key=lambda c: (self.probs[c], -c))


@dataclass(frozen=True)
class TrainTarget:
    """Either a hard class index or a soft target distribution."""

    hard: int | None = None
    soft: ProbDist | None = None

    def __post_init__(self):
        if (self.hard is None) == (self.soft is None):
            raise ValueError("exactly one of hard/soft must be set")

    @classmethod
    def hard_label(cls, y: int) -> "TrainTarget":
        return cls(hard=int(y))

    @classmethod
    def soft_label(cls, dist: ProbDist) -> "TrainTarget":
        return cls(soft=dist)


@dataclass(frozen=True)
class Hyperparams:
    learning_rate: float = 0.1
    epochs: int = 100
    l2: float = 1e-4
    seed: int = 0
    feature_dim: int = DEFAULT_FEATURE_DIM
    batch_size: int | None = None  # None = full batch
    patience: int | None = 2  # early stop on validation loss
    lr_decay: bool = True  # lr_t = learning_rate / sqrt(epoch)


@dataclass
class ClassifierModel:
    weights: np.ndarray  # C x D
    bias: np.ndarray  # C
    hyperparams: Hyperparams
    hash_version: str = HASH_VERSION
    train_losses: list[float] = field(default_factory=list)

    @property
    def num_classes(self) -> int:
        return self.weights.shape[0]


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())


def _token_hash(token: str) -> int:
    h = _hash_cache.get(token)
    if h is None:
        digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
        h = int.from_bytes(digest, "big")
        _hash_cache[token] = h
    return h


def featurize(text: str, dim: int = DEFAULT_FEATURE_DIM) -> dict[int, float]:
    """Hash lowercased unigrams and bigrams into [0, dim), accumulating counts."""
    tokens = tokenize(text)
    feats: dict[int, float] = {}
    for tok in tokens:
        idx = _token_hash(tok) % dim
        feats[idx] = feats.get(idx, 0.0) + 1.0
    for a, b in zip(tokens, tokens[1:]):
        idx = _token_hash(a + " " + b) % dim
        feats[idx] = feats.get(idx, 0.0) + 1.0
    return feats


def build_feature_matrix(
    feature_dicts: Sequence[Mapping[int, float]], dim: int
) -> sparse.csr_matrix:
    indptr = [0]
    indices: list[int] = []
    data: list[float] = []
    for fd in feature_dicts:
        for idx in sorted(fd):
            indices.append(idx)
            data.append(fd[idx])
        indptr.append(len(indices))
    return sparse.csr_matrix(
        (np.asarray(data, dtype=np.float64), indices, indptr),
        shape=(len(feature_dicts), dim),
    )


def _targets_to_matrix(
    targets: Sequence[TrainTarget], num_classes: int
) -> tuple[np.ndarray, np.ndarray]:
    """Target matrix T plus per-example offsets h = sum(t log t) (0 for hard),
    so that loss_i = h_i - sum_c T_ic log p_ic covers both objectives."""
    t_mat = np.zeros((len(targets), num_classes), dtype=np.float64)
    offsets = np.zeros(len(targets), dtype=np.float64)
    for i, target in enumerate(targets):
        if target.hard is not None:
            if not 0 <= target.hard < num_classes:
                raise TrainingError(
                    f"hard label {target.hard} out of range for C={num_classes}"
                )
            t_mat[i, target.hard] = 1.0
        else:
            probs = np.asarray(target.soft.probs, dtype=np.float64)
            if probs.shape[0] != num_classes:
                raise TrainingError(
                    f"soft target has {probs.shape[0]} classes, expected {num_classes}"
                )
            t_mat[i] = probs
            pos = probs > 0.0
            offsets[i] = float(np.sum(probs[pos] * np.log(probs[pos])))
    return t_mat, offsets


def _batch_loss_grad(weights, bias, x_mat, t_mat, offsets, l2):
    logits = x_mat @ weights.T + bias
    log_probs = logits - logsumexp(logits, axis=1, keepdims=True)
    probs = np.exp(log_probs)
    data_loss = float(np.mean(offsets - np.sum(t_mat * log_probs, axis=1)))
    loss = data_loss + 0.5 * l2 * float(np.sum(weights * weights))
    g = (probs - t_mat) / x_mat.shape[0]
    grad_w = (x_mat.T @ g).T + l2 * weights
    grad_b = g.sum(axis=0)
    return loss, grad_w, grad_b


def loss_and_grad(
    weights: np.ndarray,
    bias: np.ndarray,
    examples: Sequence[tuple[Mapping[int, float], TrainTarget]],
    l2: float,
) -> tuple[float, np.ndarray, np.ndarray]:
    """Mean loss + (l2/2)||W||^2 and its analytic gradient.

    Exposed so the gradient can be verified against finite differences.
    """
    num_classes, dim = weights.shape
    x_mat = build_feature_matrix([fd for fd, _ in examples], dim)
    t_mat, offsets = _targets_to_matrix([t for _, t in examples], num_classes)
    return _batch_loss_grad(weights, bias, x_mat, t_mat, offsets, l2)


def train(
    examples: Sequence[tuple[Mapping[int, float], TrainTarget]],
    hyperparams: Hyperparams = Hyperparams(),
    num_classes: int | None = None,
    validation: Sequence[tuple[Mapping[int, float], int]] | None = None,
) -> ClassifierModel:
    """Fit softmax regression on featurized examples.

    Deterministic for fixed inputs and seed; the seed fixes the mini-batch
    shuffling order (full-batch runs involve no randomness). When a
    validation set is given, training stops after `patience` consecutive
    epochs without validation-loss improvement and the best-epoch
    parameters are restored.
    """
    if not examples:
        raise TrainingError("empty example list")
    if num_classes is None:
        num_classes = _infer_num_classes(examples)
    dim = hyperparams.feature_dim
    x_mat = build_feature_matrix([fd for fd, _ in examples], dim)
    t_mat, offsets = _targets_to_matrix([t for _, t in examples], num_classes)

    weights = np.zeros((num_classes, dim), dtype=np.float64)
    bias = np.zeros(num_classes, dtype=np.float64)
    val_x = val_y = None
    if validation is not None and len(validation) > 0:
        val_x = build_feature_matrix([fd for fd, _ in validation], dim)
        val_y = np.asarray([y for _, y in validation], dtype=np.int64)

    rng = np.random.Generator(np.random.PCG64(hyperparams.seed))
    n = x_mat.shape[0]
    best = None  # (val_loss, weights copy, bias copy)
    stall = 0
    losses: list[float] = []
    for epoch in range(1, hyperparams.epochs + 1):
        lr = hyperparams.learning_rate
        if hyperparams.lr_decay:
            lr /= math.sqrt(epoch)
        if hyperparams.batch_size is None:
            loss, grad_w, grad_b = _batch_loss_grad(
                weights, bias, x_mat, t_mat, offsets, hyperparams.l2
            )
            weights -= lr * grad_w
            bias -= lr * grad_b
            epoch_loss = loss
        else:
            order = rng.permutation(n)
            for start in range(0, n, hyperparams.batch_size):
                batch = order[start : start + hyperparams.batch_size]
                _, grad_w, grad_b = _batch_loss_grad(
                    weights,
                    bias,
                    x_mat[batch],
                    t_mat[batch],
                    offsets[batch],
                    hyperparams.l2,
                )
                weights -= lr * grad_w
                bias -= lr * grad_b
            epoch_loss, _, _ = _batch_loss_grad(
                weights, bias, x_mat, t_mat, offsets, hyperparams.l2
            )
        if not (
            math.isfinite(epoch_loss)
            and np.isfinite(weights).all()
            and np.isfinite(bias).all()
        ):
            raise TrainingDiverged(
                f"non-finite parameters or loss at epoch {epoch} "
                f"(lr={lr:g}, loss={epoch_loss!r})"
            )
        losses.append(epoch_loss)

        if val_x is not None:
            val_loss = _validation_loss(weights, bias, val_x, val_y)
            if best is None or val_loss < best[0]:
                best = (val_loss, weights.copy(), bias.copy())
                stall = 0
            else:
                stall += 1
                if hyperparams.patience is not None and stall >= hyperparams.patience:
                    break
    if best is not None:
        weights, bias = best[1], best[2]
    return ClassifierModel(
        weights=weights, bias=bias, hyperparams=hyperparams, train_losses=losses
    )


def _infer_num_classes(examples) -> int:
    c = 0
    for _, target in examples:
        if target.hard is not None:
            c = max(c, target.hard + 1)
        else:
            c = max(c, len(target.soft))
    if c < 2:
        raise TrainingError("cannot infer class count from examples")
    return c


def _validation_loss(weights, bias, val_x, val_y) -> float:
    logits = val_x @ weights.T + bias
    log_probs = logits - logsumexp(logits, axis=1, keepdims=True)
    return float(-np.mean(log_probs[np.arange(len(val_y)), val_y]))


def predict_logits(model: ClassifierModel, features: Mapping[int, float]) -> np.ndarray:
    logits = model.bias.copy()
    for idx, value in features.items():
        logits += model.weights[:, idx] * value
    return logits


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=-1, keepdims=True)


def predict_dist(model: ClassifierModel, features: Mapping[int, float]) -> ProbDist:
    return ProbDist(tuple(softmax(predict_logits(model, features))))


def predict_label(model: ClassifierModel, features: Mapping[int, float]) -> int:
    return int(np.argmax(predict_logits(model, features)))


def predict_dist_matrix(model: ClassifierModel, x_mat: sparse.csr_matrix) -> np.ndarray:
    return softmax(x_mat @ model.weights.T + model.bias)


def save_model(model: ClassifierModel, path: str) -> None:
    """Write a single self-describing JSON artifact (byte-deterministic)."""
    payload = {
        "format": MODEL_FORMAT,
        "hash_version": model.hash_version,
        "num_classes": model.num_classes,
        "feature_dim": model.weights.shape[1],
        "hyperparams": asdict(model.hyperparams),
        "dtype": "<f8",
        "weights_b64": base64.b64encode(
            np.ascontiguousarray(model.weights, dtype="<f8").tobytes()
        ).decode("ascii"),
        "bias_b64": base64.b64encode(
            np.ascontiguousarray(model.bias, dtype="<f8").tobytes()
        ).decode("ascii"),
    }
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def load_model(path: str) -> ClassifierModel:
    with open(path, "r", encoding="utf-8") as f:
        payload = json.load(f)
    if payload.get("format") != MODEL_FORMAT:
        raise TrainingError(
            f"unsupported model format {payload.get('format')!r}, expected {MODEL_FORMAT!r}"
        )
    if payload.get("hash_version") != HASH_VERSION:
        raise TrainingError(
            f"model was featurized with {payload.get('hash_version')!r}, "
            f"this build uses {HASH_VERSION!r}"
        )
    c = payload["num_classes"]
    dim = payload["feature_dim"]
    weights = np.frombuffer(
        base64.b64decode(payload["weights_b64"]), dtype="<f8"
    ).reshape(c, dim)
    bias = np.frombuffer(base64.b64decode(payload["bias_b64"]), dtype="<f8")
    return ClassifierModel(
        weights=weights.copy(),
        bias=bias.copy(),
        hyperparams=Hyperparams(**payload["hyperparams"]),
        hash_version=payload["hash_version"],
    )


class TextClassifier(ABC):
    """Interface the engine trains and queries; backends plug in here."""

    @abstractmethod
    def fit(
        self,
        examples: Sequence[tuple[str, TrainTarget]],
        validation: Sequence[tuple[str, int]] | None = None,
    ) -> None: ...

    @abstractmethod
    def predict_dist(self, text: str) -> ProbDist: ...

    def predict_dist_many(self, texts: Sequence[str]) -> list[ProbDist]:
        return [self.predict_dist(t) for t in texts]

    def predict_label(self, text: str) -> int:
        return self.predict_dist(text).argmax()

    def save(self, path: str) -> None:
        raise NotImplementedError(f"{type(self).__name__} does not support saving")


class BaselineTextClassifier(TextClassifier):
    """Hashed bag-of-words softmax regression over raw text records."""

    def __init__(self, num_classes: int, hyperparams: Hyperparams = Hyperparams()):
        self.num_classes = num_classes
        self.hyperparams = hyperparams
        self.model: ClassifierModel | None = None
        self._features: dict[str, dict[int, float]] = {}

    def _featurize(self, text: str) -> dict[int, float]:
        fd = self._features.get(text)
        if fd is None:
            fd = featurize(text, self.hyperparams.feature_dim)
            self._features[text] = fd
        return fd

    def fit(self, examples, validation=None) -> None:
        feats = [(self._featurize(text), target) for text, target in examples]
        val = None
        if validation is not None:
            val = [(self._featurize(text), y) for text, y in validation]
        self.model = train(
            feats, self.hyperparams, num_classes=self.num_classes, validation=val
        )

    def _require_model(self) -> ClassifierModel:
        if self.model is None:
            raise TrainingError("classifier has not been trained")
        return self.model

    def predict_dist(self, text: str) -> ProbDist:
        return predict_dist(self._require_model(), self._featurize(text))

    def predict_dist_many(self, texts: Sequence[str]) -> list[ProbDist]:
        model = self._require_model()
        x_mat = build_feature_matrix(
            [self._featurize(t) for t in texts], self.hyperparams.feature_dim
        )
        probs = predict_dist_matrix(model, x_mat)
        return [ProbDist(tuple(row)) for row in probs]

    def save(self, path: str) -> None:
        save_model(self._require_model(), path)

    @classmethod
    def load(cls, path: str, num_classes: int | None = None) -> "BaselineTextClassifier":
        model = load_model(path)
        clf = cls(
            num_classes=num_classes or model.num_classes, hyperparams=model.hyperparams
        )
        clf.model = model
        return clf
