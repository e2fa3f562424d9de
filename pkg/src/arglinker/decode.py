"""Score matrix to tree decoding via maximum-arborescence search.

The N x N score matrix G holds, in cell (i, j), the score of sentence i
pointing at sentence j. Decoding builds an augmented graph with a virtual
root node: attaching sentence i to the virtual root costs the diagonal score
g_{i,i} and realises a self-loop prediction (head[i] = i), so the major claim
and any non-ACs all come out of the same search. Each sentence picks exactly
one target and the result is always acyclic.

The task convention is per-source ("every sentence chooses one target"), so
arborescence parenthood runs along reversed links: the parent of graph node
i+1 is the target chosen by sentence i.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ConfigError, ValidationError
from .tree import ArgTree, heads_to_distances

_BRUTE_FORCE_LIMIT = 8


@dataclass(frozen=True)
class _Edge:
    parent: int
    child: int
    weight: float
    carrier: Optional["_Edge"]  # edge one contraction level down, None at the input level

    def original(self) -> "_Edge":
        edge = self
        while edge.carrier is not None:
            edge = edge.carrier
        return edge


def _find_cycle(parent_of: dict[int, int]) -> Optional[list[int]]:
    state: dict[int, int] = {}  # 0 visiting, 1 done
    for start in parent_of:
        if state.get(start) == 1:
            continue
        path = []
        node = start
        while node in parent_of and state.get(node) is None:
            state[node] = 0
            path.append(node)
            node = parent_of[node]
        if state.get(node) == 0:
            return path[path.index(node):]
        for visited in path:
            state[visited] = 1
    return None


def _solve(nodes: set[int], edges: list[_Edge], root: int,
           next_id: int) -> Optional[list[_Edge]]:
    """Maximum arborescence by greedy selection plus cycle contraction.

    Returns the chosen edges of this level, or None when some node is
    unreachable under the given edge set.
    """
    best_in: dict[int, _Edge] = {}
    for edge in edges:
        if edge.child == root or edge.parent == edge.child:
            continue
        cur = best_in.get(edge.child)
        if cur is None or edge.weight > cur.weight or (
                edge.weight == cur.weight and edge.parent < cur.parent):
            best_in[edge.child] = edge
    for node in nodes:
        if node != root and node not in best_in:
            return None

    cycle = _find_cycle({c: e.parent for c, e in best_in.items()})
    if cycle is None:
        return list(best_in.values())

    cycle_set = set(cycle)
    contracted = next_id
    new_nodes = (nodes - cycle_set) | {contracted}
    new_edges: list[_Edge] = []
    for edge in edges:
        p_in, c_in = edge.parent in cycle_set, edge.child in cycle_set
        if c_in and not p_in:
            new_edges.append(_Edge(edge.parent, contracted,
                                   edge.weight - best_in[edge.child].weight, edge))
        elif p_in and not c_in:
            new_edges.append(_Edge(contracted, edge.child, edge.weight, edge))
        elif not p_in and not c_in:
            new_edges.append(_Edge(edge.parent, edge.child, edge.weight, edge))

    sub = _solve(new_nodes, new_edges, root, next_id + 1)
    if sub is None:
        return None
    chosen = []
    entered: Optional[int] = None
    for edge in sub:
        below = edge.carrier if edge.carrier is not None else edge
        chosen.append(below)
        if below.child in cycle_set:
            entered = below.child
    for member in cycle:
        if member != entered:
            chosen.append(best_in[member])
    return chosen


def augment_scores(G: np.ndarray) -> np.ndarray:
    """(N+1) x (N+1) matrix adding the virtual root as node 0.

    Cell (i, 0) for i >= 1 carries sentence i's self-loop score g_{i,i};
    attaching to the virtual root is how self-loops are realised, so the
    direct diagonal is disabled. Row 0 is -inf: the virtual root points at
    nothing in this source-to-target orientation.
    """
    n = G.shape[0]
    augmented = np.full((n + 1, n + 1), -np.inf)
    augmented[1:, 1:] = G
    augmented[1:, 0] = np.diagonal(G)
    np.fill_diagonal(augmented[1:, 1:], -np.inf)
    return augmented


def _augmented_edges(G: np.ndarray, fixed: dict[int, int]) -> list[_Edge]:
    """Edges of the virtual-root graph; sentence i maps to graph node i + 1.

    Augmented cell (i+1, j) means "sentence i selects target j", i.e. j is
    node i+1's parent in the reversed-link arborescence. ``fixed`` pins
    sentence i to one target: all its other choices are dropped.
    """
    n = G.shape[0]
    augmented = augment_scores(G)
    edges = []
    for i in range(n):
        targets = range(n) if i not in fixed else (fixed[i],)
        for j in targets:
            parent = 0 if j == i else j + 1
            edges.append(_Edge(parent, i + 1, float(augmented[i + 1, parent]), None))
    return edges


def _cle_heads(G: np.ndarray, fixed: dict[int, int]) -> Optional[list[int]]:
    n = G.shape[0]
    chosen = _solve(set(range(n + 1)), _augmented_edges(G, fixed), root=0,
                    next_id=n + 1)
    if chosen is None:
        return None
    head = [-1] * n
    for edge in chosen:
        original = edge.original()
        sentence = original.child - 1
        head[sentence] = sentence if original.parent == 0 else original.parent - 1
    return head


def attachment_score(G: np.ndarray, head) -> float:
    """Total score of a head assignment: sum of G[i, head[i]]."""
    n = G.shape[0]
    return float(G[np.arange(n), np.asarray(head)].sum()) if n else 0.0


def decode(G: np.ndarray) -> ArgTree:
    """Maximum-total-score tree over the augmented matrix.

    Deterministic; among score-optimal trees the lexicographically smallest
    head vector is returned (established by constraining one source row at a
    time and re-solving).
    """
    G = np.asarray(G, dtype=np.float64)
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValidationError(f"score matrix must be square, got {G.shape}")
    if not np.isfinite(G).all():
        raise ValidationError("score matrix contains non-finite values")
    n = G.shape[0]
    if n == 0:
        return ArgTree.from_heads([])

    head = _cle_heads(G, {})
    assert head is not None  # unconstrained augmented graph is always feasible
    best_score = attachment_score(G, head)
    fixed: dict[int, int] = {}
    for i in range(n):
        for j in range(head[i]):
            trial = dict(fixed)
            trial[i] = j
            candidate = _cle_heads(G, trial)
            if candidate is not None and attachment_score(G, candidate) == best_score:
                head = candidate
                break
        fixed[i] = head[i]
    return ArgTree.from_heads(head)


def brute_force_decode(G: np.ndarray, limit: int = _BRUTE_FORCE_LIMIT) -> ArgTree:
    """Exact maximum by enumerating every valid head assignment.

    Test oracle only; refuses N beyond the enumeration bound. Ties resolve to
    the lexicographically smallest head vector because assignments are
    enumerated in lexicographic order.
    """
    G = np.asarray(G, dtype=np.float64)
    n = G.shape[0]
    if n > limit:
        raise ConfigError(f"brute force enumeration capped at N={limit}, got {n}")
    if n == 0:
        return ArgTree.from_heads([])

    total = n**n
    radix = n ** np.arange(n - 1, -1, -1, dtype=np.int64)
    cols = np.arange(n)
    best_score = -np.inf
    best_head: Optional[np.ndarray] = None
    chunk = 1 << 16
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        heads = (idx[:, None] // radix) % n
        rows = np.arange(len(idx))[:, None]
        terminal = heads
        for _ in range(n):
            terminal = heads[rows, terminal]
        valid = (heads[rows, terminal] == terminal).all(axis=1)
        if not valid.any():
            continue
        scores = G[cols, heads].sum(axis=1)
        scores[~valid] = -np.inf
        k = int(np.argmax(scores))
        if scores[k] > best_score:
            best_score = float(scores[k])
            best_head = heads[k].copy()
    assert best_head is not None  # all-self-loops is always valid
    return ArgTree.from_heads(best_head.tolist())


def tree_to_predictions(tree: ArgTree) -> list[int]:
    """Decoded tree as per-sentence target distances."""
    return heads_to_distances(tree)
