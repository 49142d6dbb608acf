"""Experiment configuration: one declarative JSON or YAML file per run.

Unknown keys are rejected everywhere so a typo in a strategy name or
hyperparameter can never silently fall back to a default. `load_config`
also checks that referenced files exist. `config_to_dict` materializes
every default; the experiment runner writes that resolved form into each
run directory so runs are reproducible from their artifacts alone.
"""

from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Sequence

import yaml

from .classifier import Hyperparams
from .data import DEFAULT_CLASS_NAMES, SplitSpec
from .engine import TerminationRule
from .errors import ConfigError, DataError
from .strategies import (
    STRATEGY_NAMES,
    ConfThreshold,
    SelectionStrategy,
    strategy_from_config,
)


@dataclass(frozen=True)
class SyntheticSpec:
    n_per_class: int | tuple[int, ...] = 100
    noise: float = 0.1
    seed: int = 0
    vocab_size: int = 50  # auto-generated disjoint vocabularies
    words_min: int = 5
    words_max: int = 15


@dataclass(frozen=True)
class DatasetConfig:
    path: str | None = None
    format: str = "jsonl"
    synthetic: SyntheticSpec | None = None

    def __post_init__(self):
        if (self.path is None) == (self.synthetic is None):
            raise ConfigError("dataset needs exactly one of 'path' or 'synthetic'")
        if self.format not in ("jsonl", "csv"):
            raise ConfigError(f"unknown dataset format {self.format!r}")


@dataclass(frozen=True)
class LlmBlock:
    mode: str = "obj"  # sub | obj | obj-conf | obj-conf-score
    fixtures: str | None = None
    endpoint: str | None = None
    model: str = "default"
    temperature: float = 0.0
    threshold: float | None = None
    n_shot: int = 0
    timeout: float = 30.0
    max_retries: int = 3
    max_in_flight: int = 4
    auth_env: str | None = None
    failure_limit: float = 0.1
    backoff_base: float = 0.25
    max_prompt_chars: int | None = None
    template_path: str | None = None

    def __post_init__(self):
        if self.mode not in ("sub", "obj", "obj-conf", "obj-conf-score"):
            raise ConfigError(f"unknown llm mode {self.mode!r}")
        if self.mode == "obj-conf-score" and self.threshold is None:
            raise ConfigError("llm mode obj-conf-score needs a threshold")


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetConfig
    class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES
    split: SplitSpec = SplitSpec(test_fraction=0.2, seed=7)
    validation_fraction: float = 0.1
    n_shot: int = 20
    seeds: tuple[int, ...] = (1,)
    strategy: SelectionStrategy = field(default_factory=lambda: ConfThreshold(t=0.9))
    termination: TerminationRule = TerminationRule()
    classifier: Hyperparams = Hyperparams()
    llm: LlmBlock | None = None
    output_dir: str = "runs/out"

    def __post_init__(self):
        if not self.seeds:
            raise ConfigError("seeds must be non-empty")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ConfigError(
                f"validation_fraction must be in [0,1), got {self.validation_fraction}"
            )
        if self.n_shot < 1:
            raise ConfigError(f"n_shot must be >= 1, got {self.n_shot}")


_TOP_KEYS = {
    "dataset", "class_names", "split", "validation_fraction", "n_shot", "seeds",
    "strategy", "termination", "classifier", "llm", "output_dir",
}


def _reject_unknown(block: Mapping, allowed: set[str], where: str) -> None:
    unknown = set(block) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) {sorted(unknown)} in {where}")


def _build(cls, block: Mapping, where: str):
    allowed = set(cls.__dataclass_fields__)
    _reject_unknown(block, allowed, where)
    try:
        return cls(**block)
    except (TypeError, DataError) as e:
        raise ConfigError(f"{where}: {e}") from e


def parse_config(raw: Mapping, base_dir: str = ".") -> ExperimentConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be a mapping")
    _reject_unknown(raw, _TOP_KEYS, "config root")

    if "dataset" not in raw:
        raise ConfigError("config lacks the 'dataset' block")
    ds_block = dict(raw["dataset"])
    synth = None
    if "synthetic" in ds_block and ds_block["synthetic"] is not None:
        synth_block = dict(ds_block["synthetic"])
        if "n_per_class" in synth_block and isinstance(synth_block["n_per_class"], list):
            synth_block["n_per_class"] = tuple(synth_block["n_per_class"])
        synth = _build(SyntheticSpec, synth_block, "dataset.synthetic")
        ds_block["synthetic"] = synth
    path = ds_block.get("path")
    if path is not None:
        path = os.path.join(base_dir, path) if not os.path.isabs(path) else path
        if not os.path.exists(path):
            raise ConfigError(f"dataset file does not exist: {path}")
        ds_block["path"] = path
    dataset = _build(DatasetConfig, ds_block, "dataset")

    kwargs: dict = {"dataset": dataset}
    if "class_names" in raw:
        kwargs["class_names"] = tuple(raw["class_names"])
    if "split" in raw:
        kwargs["split"] = _build(SplitSpec, raw["split"], "split")
    for key in ("validation_fraction", "n_shot", "output_dir"):
        if key in raw:
            kwargs[key] = raw[key]
    if "seeds" in raw:
        kwargs["seeds"] = tuple(int(s) for s in raw["seeds"])
    if "strategy" in raw:
        kwargs["strategy"] = strategy_from_config(raw["strategy"])
    if "termination" in raw:
        kwargs["termination"] = _build(TerminationRule, raw["termination"], "termination")
    if "classifier" in raw:
        kwargs["classifier"] = _build(Hyperparams, raw["classifier"], "classifier")
    if raw.get("llm") is not None:
        llm = _build(LlmBlock, raw["llm"], "llm")
        for attr in ("fixtures", "template_path"):
            ref = getattr(llm, attr)
            if ref is not None:
                ref = os.path.join(base_dir, ref) if not os.path.isabs(ref) else ref
                if not os.path.exists(ref):
                    raise ConfigError(f"llm.{attr} file does not exist: {ref}")
                llm = replace(llm, **{attr: ref})
        kwargs["llm"] = llm
    try:
        return ExperimentConfig(**kwargs)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    if path.endswith((".yaml", ".yml")):
        raw = yaml.safe_load(text)
    else:
        try:
            raw = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: invalid JSON ({e.msg} at line {e.lineno})") from e
    return parse_config(raw, base_dir=os.path.dirname(os.path.abspath(path)))


def strategy_to_dict(strategy: SelectionStrategy) -> dict:
    for name, cls in STRATEGY_NAMES.items():
        if isinstance(strategy, cls):
            return {"name": name, **asdict(strategy)}
    raise ConfigError(f"unregistered strategy type {type(strategy).__name__}")


def config_to_dict(config: ExperimentConfig) -> dict:
    """The fully-resolved form: every default materialized."""
    out = {
        "dataset": {
            "path": config.dataset.path,
            "format": config.dataset.format,
            "synthetic": asdict(config.dataset.synthetic)
            if config.dataset.synthetic
            else None,
        },
        "class_names": list(config.class_names),
        "split": asdict(config.split),
        "validation_fraction": config.validation_fraction,
        "n_shot": config.n_shot,
        "seeds": list(config.seeds),
        "strategy": strategy_to_dict(config.strategy),
        "termination": asdict(config.termination),
        "classifier": asdict(config.classifier),
        "llm": asdict(config.llm) if config.llm else None,
        "output_dir": config.output_dir,
    }
    synth = out["dataset"]["synthetic"]
    if synth and isinstance(synth["n_per_class"], tuple):
        synth["n_per_class"] = list(synth["n_per_class"])
    return out
