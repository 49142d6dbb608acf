"""Run orchestration: config + root seed -> prepared data -> trained model
-> metrics and artifacts.

Every run consumes one root seed; sub-seeds (validation carve, n-shot
sampling, classifier init, per-iteration selection, few-shot examples,
retry jitter) are derived from it with `seeds.mix` and logged in the
resolved config, so any run is reproducible from its artifacts.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

from . import llm as llm_mod
from .classifier import TextClassifier
from .config import ExperimentConfig, LlmBlock, config_to_dict
from .data import (
    Dataset,
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
    evaluate,
    run_self_training,
    run_supervised,
    write_history,
)
from .errors import ConfigError
from .metrics import (
    MetricsReport,
    aggregate,
    confusion,
    labeling_accuracy,
    report_from_confusion,
)
from .seeds import mix
from .strategies import SoftLabel


@dataclass
class PreparedData:
    test: Dataset
    validation: Dataset | None
    labeled: Dataset
    pool: Dataset
    derived_seeds: dict


@dataclass
class RunResult:
    report: MetricsReport
    model: TextClassifier | None = None
    history: list[IterationRecord] | None = None
    records: list[llm_mod.LlmLabelRecord] | None = None
    num_added: int = 0
    pseudo_label_accuracy: float | None = None
    resolved: dict = field(default_factory=dict)


def build_dataset(config: ExperimentConfig) -> Dataset:
    ds = config.dataset
    if ds.path is not None:
        return load_dataset(ds.path, ds.format, config.class_names)
    spec = ds.synthetic
    vocab = make_vocab(len(config.class_names), spec.vocab_size)
    return synth_generate(
        n_per_class=spec.n_per_class,
        vocab_per_class=vocab,
        noise=spec.noise,
        seed=spec.seed,
        class_names=config.class_names,
        words_min=spec.words_min,
        words_max=spec.words_max,
    )


def prepare(config: ExperimentConfig, root_seed: int) -> PreparedData:
    derived = {
        "validation": mix(root_seed, "validation"),
        "nshot": mix(root_seed, "nshot"),
        "classifier": mix(root_seed, "classifier"),
        "engine": mix(root_seed, "engine"),
        "fewshot": mix(root_seed, "fewshot"),
        "retry": mix(root_seed, "retry"),
    }
    dataset = build_dataset(config)
    train, test = split_train_test(dataset, config.split)
    validation = None
    if config.validation_fraction > 0.0:
        train, validation = split_train_test(
            train, SplitSpec(config.validation_fraction, derived["validation"])
        )
    labeled, pool = sample_n_shot(train, config.n_shot, derived["nshot"])
    return PreparedData(
        test=test, validation=validation, labeled=labeled, pool=pool, derived_seeds=derived
    )


def _engine_config(config: ExperimentConfig, prepared: PreparedData) -> EngineConfig:
    return EngineConfig(
        hyperparams=replace(
            config.classifier, seed=prepared.derived_seeds["classifier"]
        ),
        seed=prepared.derived_seeds["engine"],
        validation=prepared.validation,
    )


def _resolved(config: ExperimentConfig, root_seed: int, prepared: PreparedData) -> dict:
    out = config_to_dict(config)
    out["root_seed"] = root_seed
    out["derived_seeds"] = prepared.derived_seeds
    return out


def run_train_cell(config: ExperimentConfig, root_seed: int) -> RunResult:
    """Supervised baseline: the n-shot gold seed only."""
    prepared = prepare(config, root_seed)
    model = run_supervised(prepared.labeled, _engine_config(config, prepared))
    return RunResult(
        report=evaluate(model, prepared.test),
        model=model,
        resolved=_resolved(config, root_seed, prepared),
    )


def run_selftrain_cell(config: ExperimentConfig, root_seed: int) -> RunResult:
    prepared = prepare(config, root_seed)
    model, history = run_self_training(
        prepared.labeled,
        prepared.pool,
        config.strategy,
        config.termination,
        _engine_config(config, prepared),
    )
    soft = isinstance(config.strategy, SoftLabel)
    if soft:
        num_added = history[-1].num_selected if history else 0
        pl_acc = history[-1].pseudo_label_accuracy if history else None
    else:
        num_added = sum(r.num_selected for r in history)
        weighted = [
            (r.pseudo_label_accuracy, r.num_selected)
            for r in history
            if r.pseudo_label_accuracy is not None and r.num_selected > 0
        ]
        total = sum(n for _, n in weighted)
        pl_acc = sum(a * n for a, n in weighted) / total if total else None
    return RunResult(
        report=evaluate(model, prepared.test),
        model=model,
        history=history,
        num_added=num_added,
        pseudo_label_accuracy=pl_acc,
        resolved=_resolved(config, root_seed, prepared),
    )


def _make_client(block: LlmBlock, root_seed: int, prepared: PreparedData) -> llm_mod.LlmClient:
    client_config = llm_mod.LlmClientConfig(
        endpoint=block.endpoint,
        model=block.model,
        temperature=block.temperature,
        timeout=block.timeout,
        max_retries=block.max_retries,
        max_in_flight=block.max_in_flight,
        auth_env=block.auth_env,
        backoff_base=block.backoff_base,
        retry_seed=prepared.derived_seeds["retry"],
        max_prompt_chars=block.max_prompt_chars,
        failure_limit=block.failure_limit,
    )
    if block.fixtures is not None:
        return llm_mod.MockLlmClient.from_file(block.fixtures, client_config)
    if block.endpoint is not None:
        return llm_mod.HttpChatClient(client_config)
    raise ConfigError("llm block needs either 'fixtures' or 'endpoint'")


def _sub_report(records, test: Dataset) -> MetricsReport:
    gold_by_id = {inst.id: inst.gold_label for inst in test.instances}
    pairs = [(r.instance_id, r.label) for r in records if r.ok()]
    cm = confusion(
        [gold_by_id[i] for i, _ in pairs], [y for _, y in pairs], test.num_classes
    )
    report = report_from_confusion(cm, test.class_names)
    failed = len(records) - len(pairs)
    if failed:
        report = replace(
            report,
            flags=report.flags + (f"llm: {failed} of {len(records)} responses failed",),
        )
    return report


def run_llm_cell(config: ExperimentConfig, root_seed: int) -> RunResult:
    """Subject-mode evaluation, or an object-mode pseudo-label + SLM run."""
    if config.llm is None:
        raise ConfigError("config has no llm block")
    block = config.llm
    prepared = prepare(config, root_seed)
    client = _make_client(block, root_seed, prepared)
    template = (
        llm_mod.PromptTemplate.from_file(block.template_path)
        if block.template_path
        else llm_mod.PromptTemplate.default()
    )
    examples = ()
    if block.n_shot > 0:
        examples = llm_mod.sample_fewshot_examples(
            prepared.labeled, block.n_shot, prepared.derived_seeds["fewshot"]
        )

    if block.mode == "sub":
        records = llm_mod.llm_pseudo_label(
            client, template, prepared.test, llm_mod.LlmMode.OBJ,
            examples=examples, n_shot=block.n_shot,
        )
        return RunResult(
            report=_sub_report(records, prepared.test),
            records=records,
            resolved=_resolved(config, root_seed, prepared),
        )

    mode = llm_mod.LlmMode(block.mode)
    records = llm_mod.llm_pseudo_label(
        client, template, prepared.pool, mode, examples=examples, n_shot=block.n_shot
    )
    threshold = block.threshold if mode == llm_mod.LlmMode.OBJ_CONF_SCORE else None
    filtered = llm_mod.filter_records(records, mode, threshold)
    model = llm_mod.train_slm_on_pseudo_labels(
        filtered,
        prepared.labeled,
        prepared.pool,
        hyperparams=replace(
            config.classifier, seed=prepared.derived_seeds["classifier"]
        ),
        validation=[
            (inst.text, inst.gold_label) for inst in prepared.validation.instances
        ]
        if prepared.validation is not None
        else None,
    )
    pl_acc = None
    if filtered and all(i in prepared.pool.shadow_gold for i, _ in filtered):
        pl_acc = labeling_accuracy(filtered, prepared.pool.shadow_gold)
    return RunResult(
        report=evaluate(model, prepared.test),
        model=model,
        records=records,
        num_added=len(filtered),
        pseudo_label_accuracy=pl_acc,
        resolved=_resolved(config, root_seed, prepared),
    )


def _dump_json(payload, path: str) -> None:
    with open(path, "w", encoding="utf-8") as f:
        json.dump(payload, f, sort_keys=True, separators=(",", ":"))
        f.write("\n")


def write_run_dir(result: RunResult, run_dir: str) -> None:
    os.makedirs(run_dir, exist_ok=True)
    _dump_json(result.resolved, os.path.join(run_dir, "resolved_config.json"))
    _dump_json(result.report.to_dict(), os.path.join(run_dir, "metrics.json"))
    if result.model is not None:
        try:
            result.model.save(os.path.join(run_dir, "model.json"))
        except NotImplementedError:
            pass
    if result.history is not None:
        write_history(result.history, os.path.join(run_dir, "history.jsonl"))
    if result.records is not None:
        with open(os.path.join(run_dir, "records.jsonl"), "w", encoding="utf-8") as f:
            for rec in result.records:
                f.write(json.dumps(rec.to_json_dict(), sort_keys=True, separators=(",", ":")))
                f.write("\n")


def aggregate_runs(results: dict[int, RunResult]) -> dict:
    """Cross-seed summary: mean and 95% CI of the headline metrics."""
    out: dict = {
        "seeds": sorted(results),
        "per_seed": {
            str(seed): {
                "accuracy": r.report.accuracy,
                "macro_f1": r.report.macro_f1,
                "num_added": r.num_added,
                "pseudo_label_accuracy": r.pseudo_label_accuracy,
            }
            for seed, r in results.items()
        },
    }
    ordered = [results[s] for s in sorted(results)]
    out["macro_f1"] = aggregate([r.report.macro_f1 for r in ordered]).to_dict()
    out["accuracy"] = aggregate([r.report.accuracy for r in ordered]).to_dict()
    pl = [r.pseudo_label_accuracy for r in ordered if r.pseudo_label_accuracy is not None]
    out["pseudo_label_accuracy"] = aggregate(pl).to_dict() if pl else None
    out["num_added"] = aggregate([float(r.num_added) for r in ordered]).to_dict()
    return out
