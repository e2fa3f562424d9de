"""Training objectives: structured hinge, cross-entropy, uncertainty weighting."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import ValidationError


def link_loss(G: np.ndarray, gold_head: Sequence[int], margin: float = 1.0) -> float:
    """Per-source structured hinge, averaged over sentences.

    Row i pays max(0, margin + best competitor - gold score); diagonal cells
    participate because self-loops are legal gold targets. A one-sentence
    essay has no competitors and pays nothing.
    """
    loss, _ = link_loss_grad(G, gold_head, margin)
    return loss


def link_loss_grad(G: np.ndarray, gold_head: Sequence[int],
                   margin: float = 1.0) -> tuple[float, np.ndarray]:
    """Hinge value and its subgradient w.r.t. G.

    The subgradient uses the single violated-max competitor per row, ties
    broken by lowest column index.
    """
    n = G.shape[0]
    if len(gold_head) != n:
        raise ValidationError(f"gold head length {len(gold_head)} != matrix size {n}")
    dG = np.zeros_like(G)
    if n < 2:
        return 0.0, dG
    total = 0.0
    for i in range(n):
        g = gold_head[i]
        row = G[i].copy()
        row[g] = -np.inf
        competitor = int(np.argmax(row))
        violation = margin + G[i, competitor] - G[i, g]
        if violation > 0.0:
            total += violation
            dG[i, competitor] += 1.0 / n
            dG[i, g] -= 1.0 / n
    return total / n, dG


def softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    return exp / exp.sum(axis=1, keepdims=True)


def cross_entropy(logits: np.ndarray, labels: Sequence[int]) -> float:
    """Mean softmax cross-entropy over rows."""
    loss, _ = cross_entropy_grad(logits, labels)
    return loss


def cross_entropy_grad(logits: np.ndarray,
                       labels: Sequence[int]) -> tuple[float, np.ndarray]:
    n = logits.shape[0]
    if len(labels) != n:
        raise ValidationError(f"{len(labels)} labels for {n} logit rows")
    labels = np.asarray(labels, dtype=np.int64)
    shifted = logits - logits.max(axis=1, keepdims=True)
    log_z = np.log(np.exp(shifted).sum(axis=1))
    log_probs = shifted - log_z[:, None]
    loss = float(-log_probs[np.arange(n), labels].mean())
    grad = softmax(logits)
    grad[np.arange(n), labels] -= 1.0
    return loss, grad / n


def aux_losses(qact_logits: np.ndarray, nd_logits: np.ndarray,
               gold_qact: Sequence[int], gold_nd: Sequence[int]) -> tuple[float, float]:
    """Cross-entropy of the two auxiliary heads (4-way roles, 6-way depths)."""
    return cross_entropy(qact_logits, gold_qact), cross_entropy(nd_logits, gold_nd)


def mtl_loss(task_losses: Sequence[float], sigmas: Sequence[float]) -> float:
    """Uncertainty-weighted combination: sum of L_t / (2 sigma_t^2) + ln sigma_t."""
    if len(task_losses) != len(sigmas):
        raise ValidationError(
            f"{len(task_losses)} task losses vs {len(sigmas)} sigmas"
        )
    if any(s <= 0 for s in sigmas):
        raise ValidationError("sigma values must be positive")
    return float(sum(
        loss / (2.0 * sigma**2) + np.log(sigma)
        for loss, sigma in zip(task_losses, sigmas)
    ))


def mtl_sigma_grad(task_losses: Sequence[float],
                   sigmas: Sequence[float]) -> list[float]:
    """d(combined loss)/d(sigma_t) = -L_t / sigma_t^3 + 1 / sigma_t."""
    if any(s <= 0 for s in sigmas):
        raise ValidationError("sigma values must be positive")
    return [
        -loss / sigma**3 + 1.0 / sigma
        for loss, sigma in zip(task_losses, sigmas)
    ]
