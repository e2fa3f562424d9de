"""Multi-run experiment orchestration: train, decode, evaluate, summarize.

A run directory is content-addressed by the hash of its canonical config so
that changed settings never silently overwrite earlier results. All
randomness flows from explicit seeds; rerunning a config reproduces every
output byte for byte.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .corpus import (
    Essay,
    SamplingPolicy,
    SourceCorpus,
    TrainingSetting,
    build_training_set,
    load_corpus,
    save_corpus,
    split_train_test,
)
from .embeddings import EmbeddingMatrix, load_embedding_dir, pseudo_embed
from .errors import ConfigError, ValidationError
from .linker.model import ModelConfig
from .linker.train import predict_trees, save_checkpoint, train, write_training_log
from .metrics import EvalReport, RunSeries, evaluate, permutation_test
from .tree import ArgTree

SUMMARY_METRICS = ("accuracy", "f1_macro", "mar_dset", "qact_macro",
                   "avg_depth", "leaf_ratio")


@dataclass(frozen=True)
class EmbeddingSource:
    """Where sentence embeddings come from: hashed pseudo vectors or files."""

    mode: str = "pseudo"  # "pseudo" | "files"
    dim: int = 32
    seed: int = 0
    directory: Optional[str] = None

    def __post_init__(self) -> None:
        if self.mode not in ("pseudo", "files"):
            raise ConfigError(f"unknown embedding mode {self.mode!r}")
        if self.mode == "files" and not self.directory:
            raise ConfigError("embedding mode 'files' needs a directory")

    def load(self, essays: Sequence[Essay]) -> dict[str, EmbeddingMatrix]:
        if self.mode == "files":
            return load_embedding_dir(self.directory)
        return {e.essay_id: pseudo_embed(e, dim=self.dim, seed=self.seed)
                for e in essays}

    def to_dict(self) -> dict:
        return {"mode": self.mode, "dim": self.dim, "seed": self.seed,
                "directory": self.directory}


@dataclass(frozen=True)
class ExperimentConfig:
    in_corpus: str
    model: ModelConfig
    out_corpus: Optional[str] = None
    setting: TrainingSetting = TrainingSetting.IN_ONLY
    policy: SamplingPolicy = SamplingPolicy()
    embeddings: EmbeddingSource = EmbeddingSource()
    split_fraction: float = 0.8
    split_seed: int = 13
    epochs: int = 50
    lr: float = 1e-3
    val_fraction: float = 0.1
    patience: Optional[int] = None
    runs: int = 20
    seeds: tuple[int, ...] = ()
    out_dir: str = "runs"

    def __post_init__(self) -> None:
        seeds = self.seeds or tuple(self.model.seed + k for k in range(self.runs))
        object.__setattr__(self, "seeds", tuple(seeds))
        if len(self.seeds) != self.runs:
            raise ConfigError(
                f"{len(self.seeds)} seeds given for {self.runs} runs"
            )
        if self.setting is not TrainingSetting.IN_ONLY and not self.out_corpus:
            raise ConfigError(f"setting {self.setting.value} needs an out-domain corpus")

    def validate_paths(self) -> None:
        if not Path(self.in_corpus).exists():
            raise ConfigError(f"in-domain corpus not found: {self.in_corpus}")
        if self.out_corpus and not Path(self.out_corpus).exists():
            raise ConfigError(f"out-domain corpus not found: {self.out_corpus}")
        if self.embeddings.mode == "files" and not Path(self.embeddings.directory).is_dir():
            raise ConfigError(f"embedding directory not found: {self.embeddings.directory}")

    def to_dict(self) -> dict:
        return {
            "in_corpus": self.in_corpus,
            "out_corpus": self.out_corpus,
            "setting": self.setting.value,
            "policy": {"max_sentences": self.policy.max_sentences,
                       "max_non_acs": self.policy.max_non_acs},
            "embeddings": self.embeddings.to_dict(),
            "model": self.model.to_dict(),
            "split_fraction": self.split_fraction,
            "split_seed": self.split_seed,
            "epochs": self.epochs,
            "lr": self.lr,
            "val_fraction": self.val_fraction,
            "patience": self.patience,
            "runs": self.runs,
            "seeds": list(self.seeds),
            "out_dir": self.out_dir,
        }

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        data = dict(data)
        model = ModelConfig.from_dict(data.pop("model"))
        policy = SamplingPolicy(**data.pop("policy", {}))
        emb = data.pop("embeddings", {})
        embeddings = EmbeddingSource(
            mode=emb.get("mode", "pseudo"), dim=emb.get("dim", 32),
            seed=emb.get("seed", 0), directory=emb.get("directory"))
        setting = TrainingSetting(data.pop("setting", "I"))
        seeds = tuple(data.pop("seeds", ()) or ())
        try:
            return ExperimentConfig(model=model, policy=policy, embeddings=embeddings,
                                    setting=setting, seeds=seeds, **data)
        except TypeError as exc:
            raise ConfigError(f"bad experiment config: {exc}") from exc

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:12]


def _atomic_write(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def _json_text(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def _summary_row(report: EvalReport) -> dict[str, float]:
    return {
        "accuracy": report.accuracy,
        "f1_macro": report.f1_macro,
        "mar_dset": report.mar_dset,
        "qact_macro": report.qact_macro,
        "avg_depth": report.shape.avg_depth,
        "leaf_ratio": report.shape.leaf_ratio,
    }


def _format_csv(rows: list[dict], columns: list[str]) -> str:
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for col in columns:
            value = row.get(col, "")
            if isinstance(value, float):
                cells.append(f"{value:.6f}")
            else:
                cells.append(str(value))
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


def _predicted_essays(test_essays: Sequence[Essay],
                      trees: Sequence[ArgTree]) -> list[Essay]:
    out = []
    for essay, tree in zip(test_essays, trees):
        out.append(Essay(
            essay_id=essay.essay_id,
            sentences=essay.sentences,
            gold=ArgTree.from_heads(tree.head),
            source_corpus=essay.source_corpus,
        ))
    return out


def prepare_data(config: ExperimentConfig) -> tuple[list[Essay], list[Essay]]:
    """Load corpora, split in-domain, and assemble the training set."""
    in_domain = load_corpus(config.in_corpus, format="essay")
    train_in, test_in = split_train_test(in_domain, config.split_fraction,
                                         config.split_seed)
    out_domain: list[Essay] = []
    if config.out_corpus:
        out_domain = load_corpus(config.out_corpus, format="essay",
                                 default_corpus=SourceCorpus.OUT_DOMAIN)
    training = build_training_set(train_in, out_domain, config.setting,
                                  config.policy)
    return training, test_in


def run_experiment(config: ExperimentConfig,
                   baseline_dir: Optional[str] = None) -> Path:
    """Train/decode/evaluate once per seed; returns the experiment directory."""
    config.validate_paths()
    training, test_in = prepare_data(config)
    if not training or not test_in:
        raise ValidationError(
            f"degenerate split: {len(training)} training essays, "
            f"{len(test_in)} test essays"
        )
    embeddings = config.embeddings.load(training + test_in)

    exp_dir = Path(config.out_dir) / config.config_hash()
    exp_dir.mkdir(parents=True, exist_ok=True)
    _atomic_write(exp_dir / "config.json", _json_text(config.to_dict()))

    rows: list[dict] = []
    reports: list[EvalReport] = []
    for k, seed in enumerate(config.seeds):
        run_dir = exp_dir / f"run_{k:02d}"
        run_dir.mkdir(exist_ok=True)
        model_config = ModelConfig.from_dict({**config.model.to_dict(), "seed": seed})
        try:
            result = train(model_config, training, embeddings,
                           epochs=config.epochs, lr=config.lr,
                           val_fraction=config.val_fraction,
                           patience=config.patience)
            trees = predict_trees(result.params, model_config, test_in, embeddings)
            report = evaluate(trees, [e.gold for e in test_in])
        except Exception as exc:
            raise ValidationError(f"run {k} (seed {seed}) failed: {exc}") from exc
        save_checkpoint(run_dir / "checkpoint.npz", result.params, model_config)
        write_training_log(run_dir / "train_log.csv", result.history,
                           model_config.tasks)
        save_corpus(_predicted_essays(test_in, trees), run_dir / "predictions.jsonl")
        _atomic_write(run_dir / "report.json", _json_text({
            "seed": seed,
            "train_essays": len(training),
            "test_essays": len(test_in),
            "best_epoch": result.best_epoch,
            "metrics": report.to_dict(),
        }))
        reports.append(report)
        rows.append({"run": k, "seed": seed, **_summary_row(report)})

    mean_row: dict = {"run": "mean", "seed": ""}
    for metric in SUMMARY_METRICS:
        mean_row[metric] = sum(r[metric] for r in rows) / len(rows)
    summary = {
        "config_hash": config.config_hash(),
        "setting": config.setting.value,
        "train_essays": len(training),
        "test_essays": len(test_in),
        "runs": rows,
        "mean": {m: mean_row[m] for m in SUMMARY_METRICS},
    }
    if baseline_dir is not None:
        summary["significance_vs_baseline"] = compare_to_baseline(
            rows, Path(baseline_dir))
    _atomic_write(exp_dir / "summary.json", _json_text(summary))
    _atomic_write(exp_dir / "summary.csv", _format_csv(
        rows + [mean_row], ["run", "seed", *SUMMARY_METRICS]))
    return exp_dir


def load_summary(exp_dir: Path) -> dict:
    path = Path(exp_dir) / "summary.json"
    if not path.exists():
        raise ConfigError(f"no summary.json under {exp_dir}")
    return json.loads(path.read_text(encoding="utf-8"))


def compare_to_baseline(rows: list[dict], baseline_dir: Path,
                        alpha: float = 0.05) -> dict:
    """Paired permutation tests of every summary metric against a baseline
    experiment directory with the same number of runs."""
    baseline = load_summary(baseline_dir)
    base_rows = baseline["runs"]
    if len(base_rows) != len(rows):
        raise ValidationError(
            f"baseline has {len(base_rows)} runs, this experiment has {len(rows)}"
        )
    out = {}
    for metric in SUMMARY_METRICS:
        ours = RunSeries(metric, tuple(float(r[metric]) for r in rows))
        theirs = RunSeries(metric, tuple(float(r[metric]) for r in base_rows))
        result = permutation_test(ours, theirs, alpha=alpha)
        out[metric] = {
            "mean": sum(ours.scores) / len(ours.scores),
            "baseline_mean": sum(theirs.scores) / len(theirs.scores),
            "p_value": result.p_value,
            "significant": result.significant,
        }
    return out


def write_report_tables(exp_dirs: Sequence[str], out_dir: str,
                        baseline_dir: Optional[str] = None) -> Path:
    """Aggregate experiment directories into the standard result tables.

    Emits: links.csv (accuracy / F1-macro / MAR-dSet), qact.csv (per-role F1),
    shape.csv (tree shape), distance_f1.csv and depth_f1.csv (per-bucket and
    per-depth series, one row per model). Metrics absent from a run's reports
    leave explicit blank cells.
    """
    if not exp_dirs:
        raise ConfigError("no experiment directories given")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    models = []
    for exp_dir in exp_dirs:
        exp_path = Path(exp_dir)
        summary = load_summary(exp_path)
        run_reports = []
        for k in range(len(summary["runs"])):
            report_path = exp_path / f"run_{k:02d}" / "report.json"
            if report_path.exists():
                payload = json.loads(report_path.read_text(encoding="utf-8"))
                run_reports.append(EvalReport.from_dict(payload["metrics"]))
        models.append((exp_path.name, summary, run_reports))

    baseline_rows = None
    if baseline_dir is not None:
        baseline_rows = load_summary(Path(baseline_dir))["runs"]

    def significance_cell(summary_rows: list[dict], metric: str) -> str:
        if baseline_rows is None or len(baseline_rows) != len(summary_rows):
            return ""
        ours = RunSeries(metric, tuple(float(r[metric]) for r in summary_rows))
        theirs = RunSeries(metric, tuple(float(r[metric]) for r in baseline_rows))
        return f"{permutation_test(ours, theirs).p_value:.6f}"

    link_rows = []
    shape_rows = []
    for name, summary, _ in models:
        mean = summary["mean"]
        link_rows.append({
            "model": name,
            "accuracy": mean.get("accuracy", ""),
            "f1_macro": mean.get("f1_macro", ""),
            "mar_dset": mean.get("mar_dset", ""),
            "p_accuracy": significance_cell(summary["runs"], "accuracy"),
            "p_f1_macro": significance_cell(summary["runs"], "f1_macro"),
            "p_mar_dset": significance_cell(summary["runs"], "mar_dset"),
        })
        shape_rows.append({
            "model": name,
            "avg_depth": mean.get("avg_depth", ""),
            "leaf_ratio": mean.get("leaf_ratio", ""),
        })
    _atomic_write(out / "links.csv", _format_csv(
        link_rows, ["model", "accuracy", "f1_macro", "mar_dset",
                    "p_accuracy", "p_f1_macro", "p_mar_dset"]))
    _atomic_write(out / "shape.csv", _format_csv(
        shape_rows, ["model", "avg_depth", "leaf_ratio"]))

    qact_labels = ["major_claim", "ac_non_leaf", "ac_leaf", "non_ac"]
    qact_rows = []
    for name, summary, run_reports in models:
        row: dict = {"model": name}
        for label in qact_labels:
            values = [r.to_dict()["qact_f1"].get(label) for r in run_reports]
            values = [v for v in values if v is not None]
            row[label] = sum(values) / len(values) if values else ""
        row["qact_macro"] = summary["mean"].get("qact_macro", "")
        qact_rows.append(row)
    _atomic_write(out / "qact.csv", _format_csv(
        qact_rows, ["model", *qact_labels, "qact_macro"]))

    def series_csv(field_name: str, keys: list[str]) -> str:
        rows = []
        for name, _, run_reports in models:
            row = {"model": name}
            for key in keys:
                values = [r.to_dict()[field_name].get(key) for r in run_reports]
                values = [v for v in values if v is not None]
                row[key] = sum(values) / len(values) if values else ""
            rows.append(row)
        return _format_csv(rows, ["model", *keys])

    distance_keys: list[str] = []
    depth_keys: list[str] = []
    for _, _, run_reports in models:
        for report in run_reports:
            for key in report.to_dict()["per_distance_f1"]:
                if key not in distance_keys:
                    distance_keys.append(key)
            for key in report.to_dict()["per_depth_f1"]:
                if key not in depth_keys:
                    depth_keys.append(key)
    _atomic_write(out / "distance_f1.csv", series_csv("per_distance_f1", distance_keys))
    _atomic_write(out / "depth_f1.csv", series_csv("per_depth_f1", depth_keys))
    return out
