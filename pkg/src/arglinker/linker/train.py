"""Per-essay training loop with validation-based model selection."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from ..corpus import Essay
from ..decode import decode
from ..embeddings import EmbeddingMatrix, concat_spos, spos
from ..errors import ValidationError
from ..tree import (
    ArgTree,
    DEPTH_CATEGORIES,
    QactLabel,
    derive_qact,
    node_depths,
)
from .model import ModelConfig, backward, forward, init_params
from .optim import AdamState, adam_step

QACT_INDEX = {
    QactLabel.MAJOR_CLAIM: 0,
    QactLabel.AC_NON_LEAF: 1,
    QactLabel.AC_LEAF: 2,
    QactLabel.NON_AC: 3,
}
ND_INDEX = {category: k for k, category in enumerate(DEPTH_CATEGORIES)}


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    task_losses: dict[str, float]
    sigmas: tuple[float, ...]
    val_accuracy: float


@dataclass
class TrainResult:
    params: dict[str, np.ndarray]
    config: ModelConfig
    history: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1
    best_val_accuracy: float = 0.0


def _model_input(essay: Essay, embedding: EmbeddingMatrix,
                 config: ModelConfig) -> np.ndarray:
    matrix = concat_spos(embedding, spos(essay.n)) if config.use_spos else embedding
    return matrix.rows


def _gold_labels(essay: Essay) -> tuple[list[int], list[int]]:
    qact = [QACT_INDEX[label] for label in derive_qact(essay.gold)]
    depth = [ND_INDEX[category] for category in node_depths(essay.gold)]
    return qact, depth


def check_pairing(essays: Sequence[Essay],
                  embeddings: dict[str, EmbeddingMatrix],
                  config: ModelConfig) -> None:
    """Fail fast when embeddings are missing or shaped wrong."""
    for essay in essays:
        matrix = embeddings.get(essay.essay_id)
        if matrix is None:
            raise ValidationError(f"no embeddings for essay {essay.essay_id!r}")
        if matrix.n != essay.n:
            raise ValidationError(
                f"essay {essay.essay_id!r}: {essay.n} sentences but "
                f"{matrix.n} embedding rows"
            )
        if matrix.dim != config.input_dim:
            raise ValidationError(
                f"essay {essay.essay_id!r}: embedding dim {matrix.dim} != "
                f"configured input dim {config.input_dim}"
            )


def predict_trees(params: dict[str, np.ndarray], config: ModelConfig,
                  essays: Sequence[Essay],
                  embeddings: dict[str, EmbeddingMatrix]) -> list[ArgTree]:
    """Eval-mode forward plus arborescence decoding per essay."""
    check_pairing(essays, embeddings, config)
    trees = []
    for essay in essays:
        output = forward(params, config, _model_input(essay, embeddings[essay.essay_id], config))
        trees.append(decode(output.G))
    return trees


def _link_accuracy_on(params: dict[str, np.ndarray], config: ModelConfig,
                      essays: Sequence[Essay],
                      embeddings: dict[str, EmbeddingMatrix]) -> float:
    total = sum(e.n for e in essays)
    if total == 0:
        return 0.0
    hits = 0
    for essay, tree in zip(essays, predict_trees(params, config, essays, embeddings)):
        hits += sum(1 for i in range(essay.n) if tree.head[i] == essay.gold.head[i])
    return hits / total


def train(config: ModelConfig, train_essays: Sequence[Essay],
          embeddings: dict[str, EmbeddingMatrix], epochs: int,
          lr: float = 1e-3, val_fraction: float = 0.1,
          patience: Optional[int] = None) -> TrainResult:
    """Train on one essay per step; keep the parameters with the best
    validation link accuracy.

    A held-out slice of the training essays (at least one essay) serves as
    the validation set; with ``val_fraction=0`` validation runs on the
    training essays themselves. Fully deterministic given ``config.seed``:
    initialisation, essay shuffling, and dropout masks all flow from it.
    """
    if not train_essays:
        raise ValidationError("no training essays given")
    check_pairing(train_essays, embeddings, config)

    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    split_rng = np.random.default_rng([config.seed, 3])

    essays = list(train_essays)
    if val_fraction > 0.0 and len(essays) > 1:
        n_val = max(1, int(len(essays) * val_fraction))
        val_indices = set(split_rng.permutation(len(essays))[:n_val].tolist())
        fit_essays = [e for k, e in enumerate(essays) if k not in val_indices]
        val_essays = [e for k, e in enumerate(essays) if k in val_indices]
    else:
        fit_essays = essays
        val_essays = essays

    inputs = {e.essay_id: _model_input(e, embeddings[e.essay_id], config)
              for e in essays}
    labels = {e.essay_id: _gold_labels(e) for e in essays}

    params = init_params(config)
    state = AdamState.initial(params)
    best = TrainResult(params={k: v.copy() for k, v in params.items()},
                       config=config)
    history: list[EpochStats] = []

    for epoch in range(epochs):
        order = shuffle_rng.permutation(len(fit_essays))
        sums = {task: 0.0 for task in config.tasks}
        for k in order:
            essay = fit_essays[int(k)]
            output = forward(params, config, inputs[essay.essay_id],
                             train=True, rng=dropout_rng)
            gold_qact, gold_nd = labels[essay.essay_id]
            losses, _, grads = backward(
                output, params, config, essay.gold.head,
                gold_qact=gold_qact, gold_nd=gold_nd)
            params, state = adam_step(params, grads, state, lr=lr)
            for task, value in losses.items():
                sums[task] += value
        val_accuracy = _link_accuracy_on(params, config, val_essays, embeddings)
        history.append(EpochStats(
            epoch=epoch,
            task_losses={t: sums[t] / len(fit_essays) for t in config.tasks},
            sigmas=tuple(np.exp(params["log_sigma"]).tolist()),
            val_accuracy=val_accuracy,
        ))
        if val_accuracy > best.best_val_accuracy or best.best_epoch < 0:
            best.params = {k: v.copy() for k, v in params.items()}
            best.best_epoch = epoch
            best.best_val_accuracy = val_accuracy
        elif patience is not None and epoch - best.best_epoch >= patience:
            break

    best.history = history
    return best


def save_checkpoint(path, params: dict[str, np.ndarray],
                    config: ModelConfig) -> None:
    """Self-describing container: config JSON plus every parameter tensor."""
    payload = {f"param::{k}": v for k, v in params.items()}
    payload["config_json"] = np.array(json.dumps(config.to_dict(), sort_keys=True))
    np.savez(path, **payload)


def load_checkpoint(path) -> tuple[dict[str, np.ndarray], ModelConfig]:
    with np.load(path, allow_pickle=False) as data:
        config = ModelConfig.from_dict(json.loads(str(data["config_json"])))
        params = {
            key[len("param::"):]: data[key].copy()
            for key in data.files if key.startswith("param::")
        }
    return params, config


def write_training_log(path, history: Sequence[EpochStats],
                       tasks: Sequence[str]) -> None:
    """Per-epoch CSV: task losses, sigma values, validation accuracy."""
    lines = [",".join(
        ["epoch"] + [f"loss_{t}" for t in tasks]
        + [f"sigma_{t}" for t in tasks] + ["val_accuracy"]
    )]
    for stats in history:
        row = [str(stats.epoch)]
        row += [f"{stats.task_losses[t]:.10f}" for t in tasks]
        row += [f"{s:.10f}" for s in stats.sigmas]
        row.append(f"{stats.val_accuracy:.10f}")
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
