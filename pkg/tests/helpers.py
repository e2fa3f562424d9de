"""Shared test helpers: generators, fixtures' builders, gradient oracles."""

import numpy as np

from arglinker.corpus import Essay, SourceCorpus
from arglinker.tree import ArgTree, Sentence

# Reference topology shared across tests: sentence 2 is the major claim,
# sentence 10 links in both directions, sentence 17 only points out.
EXAMPLE_TOPOLOGY_HEADS = [0, 1, 1, 2, 3, 1, 5, 6, 5, 1, 9, 9, 11, 1, 13, 13, 9]


def random_tree(rng: np.random.Generator, n: int, non_ac_prob: float = 0.2) -> ArgTree:
    """Random valid ArgTree: one root, optional non-AC isolates, acyclic links.

    Built over a random topological order so every non-root AC points at an
    earlier node in that order.
    """
    order = list(rng.permutation(n))
    head = [0] * n
    root = order[0]
    head[root] = root
    attachable = [root]
    for node in order[1:]:
        if n > 1 and rng.random() < non_ac_prob:
            head[node] = node  # isolate
            continue
        head[node] = int(attachable[rng.integers(len(attachable))])
        attachable.append(node)
    return ArgTree.from_heads(head)


def essay_from_heads(essay_id: str, head: list[int],
                     corpus: SourceCorpus = SourceCorpus.IN_DOMAIN) -> Essay:
    tree = ArgTree.from_heads(head)
    incoming = [0] * tree.n
    for i, h in enumerate(head):
        if h != i:
            incoming[h] += 1
    sentences = tuple(
        Sentence(index=i, text=f"{essay_id} sentence {i} talks about point {head[i]}",
                 is_ac=not (head[i] == i and incoming[i] == 0))
        for i in range(tree.n)
    )
    return Essay(essay_id=essay_id, sentences=sentences, gold=tree,
                 source_corpus=corpus)


def numeric_gradient(loss_fn, params: dict[str, np.ndarray], key: str,
                     step: float = 1e-4) -> np.ndarray:
    """Central finite differences over one parameter tensor, mutating in place."""
    tensor = params[key]
    grad = np.zeros_like(tensor)
    flat = tensor.reshape(-1)
    grad_flat = grad.reshape(-1)
    for idx in range(flat.size):
        original = flat[idx]
        flat[idx] = original + step
        plus = loss_fn()
        flat[idx] = original - step
        minus = loss_fn()
        flat[idx] = original
        grad_flat[idx] = (plus - minus) / (2.0 * step)
    return grad


def assert_grad_close(analytic: np.ndarray, numeric: np.ndarray, key: str,
                      rel: float = 1e-3, absolute: float = 1e-6) -> None:
    gap = np.abs(analytic - numeric)
    scale = np.maximum(np.abs(analytic), np.abs(numeric))
    ok = (gap <= absolute) | (gap <= rel * scale)
    assert ok.all(), (
        f"{key}: worst gap {gap.max():.3e} at {np.unravel_index(gap.argmax(), gap.shape)} "
        f"(analytic {analytic.reshape(-1)[gap.argmax()]:.6e}, "
        f"numeric {numeric.reshape(-1)[gap.argmax()]:.6e})"
    )
