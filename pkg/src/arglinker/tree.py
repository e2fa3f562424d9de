"""Sentence-level argumentative trees and their purely topological derivations.

An essay's structure is a head vector over sentence indices: ``head[i]`` is the
target sentence that ``i`` points to, and ``head[i] == i`` encodes a self-loop.
Self-loops cover both the major claim (the root, which still receives incoming
links) and non-argumentative sentences (no links at all).
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .errors import StructureError, ValidationError


class LinkLabel(Enum):
    """Relation tag carried through I/O; never predicted by this toolkit."""

    SUPPORT = "support"
    ATTACK = "attack"
    DETAIL = "detail"
    RESTATEMENT = "restatement"


class QactLabel(Enum):
    """Sentence role derived from tree topology alone."""

    MAJOR_CLAIM = "major_claim"
    AC_NON_LEAF = "ac_non_leaf"
    AC_LEAF = "ac_leaf"
    NON_AC = "non_ac"


class DepthCategory(Enum):
    """Node depth bucketed at five-plus, root at depth 0."""

    D0 = "d0"
    D1 = "d1"
    D2 = "d2"
    D3 = "d3"
    D4 = "d4"
    D5PLUS = "d5plus"


DEPTH_CATEGORIES = (
    DepthCategory.D0,
    DepthCategory.D1,
    DepthCategory.D2,
    DepthCategory.D3,
    DepthCategory.D4,
    DepthCategory.D5PLUS,
)


@dataclass(frozen=True)
class Sentence:
    index: int
    text: str
    is_ac: bool


@dataclass(frozen=True)
class ArgTree:
    """Head vector plus optional relation tags.

    Construction only checks shapes so that predicted topologies (arbitrary
    head assignments) can be represented; call :meth:`validate` to enforce the
    gold-tree invariants.
    """

    n: int
    head: tuple[int, ...]
    relation: Optional[tuple[Optional[LinkLabel], ...]] = None

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValidationError(f"node count must be >= 0, got {self.n}")
        if len(self.head) != self.n:
            raise ValidationError(
                f"head vector length {len(self.head)} != node count {self.n}"
            )
        if self.relation is not None and len(self.relation) != self.n:
            raise ValidationError(
                f"relation vector length {len(self.relation)} != node count {self.n}"
            )

    @staticmethod
    def from_heads(head: Sequence[int],
                   relation: Optional[Sequence[Optional[LinkLabel]]] = None) -> "ArgTree":
        rel = tuple(relation) if relation is not None else None
        return ArgTree(n=len(head), head=tuple(int(h) for h in head), relation=rel)

    def validate(self) -> None:
        """Enforce gold-tree invariants: in-range heads, acyclicity, a single root.

        Degenerate essays whose sentences are all isolated self-loops are
        accepted (no root exists to single out).
        """
        for i, h in enumerate(self.head):
            if not 0 <= h < self.n:
                raise ValidationError(f"head[{i}]={h} out of range for n={self.n}")
        raw_depths(self)  # raises StructureError on cycles
        incoming = in_counts(self)
        rooted = [i for i in range(self.n) if self.head[i] == i and incoming[i] > 0]
        if len(rooted) > 1:
            raise ValidationError(
                f"multiple rooted self-loops at nodes {rooted}; gold trees have one root"
            )
        if self.relation is not None:
            for i, rel in enumerate(self.relation):
                if self.head[i] == i and rel is not None:
                    raise ValidationError(
                        f"node {i} is a self-loop but carries relation {rel.value!r}"
                    )

    def children(self) -> list[list[int]]:
        """Adjacency by target: all i != j with head[i] == j, per node j."""
        out: list[list[int]] = [[] for _ in range(self.n)]
        for i, h in enumerate(self.head):
            if h != i:
                out[h].append(i)
        return out


def in_counts(tree: ArgTree) -> list[int]:
    """Number of incoming links per node; self-loops do not count."""
    counts = [0] * tree.n
    for i, h in enumerate(tree.head):
        if h != i:
            counts[h] += 1
    return counts


def is_non_ac(tree: ArgTree, node: int) -> bool:
    """A node is non-argumentative iff it is a self-loop with no incoming links."""
    return tree.head[node] == node and all(
        tree.head[i] != node for i in range(tree.n) if i != node
    )


def derive_qact(tree: ArgTree) -> list[QactLabel]:
    """Classify each node by its link pattern.

    Only incoming -> major claim; both -> non-leaf AC; only outgoing -> leaf
    AC; neither -> non-AC. Self-loops count as neither direction, so this is
    total on any head assignment, including predicted topologies.
    """
    incoming = in_counts(tree)
    labels = []
    for i in range(tree.n):
        has_out = tree.head[i] != i
        has_in = incoming[i] > 0
        if has_in and has_out:
            labels.append(QactLabel.AC_NON_LEAF)
        elif has_in:
            labels.append(QactLabel.MAJOR_CLAIM)
        elif has_out:
            labels.append(QactLabel.AC_LEAF)
        else:
            labels.append(QactLabel.NON_AC)
    return labels


def raw_depths(tree: ArgTree) -> list[int]:
    """Integer depth per node: self-loops sit at 0, children one below their parent.

    Raises StructureError if the head vector contains a cycle.
    """
    depths: list[int] = [-1] * tree.n
    for start in range(tree.n):
        if depths[start] >= 0:
            continue
        chain = []
        node = start
        on_chain = set()
        while depths[node] < 0 and tree.head[node] != node:
            if node in on_chain:
                raise StructureError(f"cycle through node {node}")
            on_chain.add(node)
            chain.append(node)
            node = tree.head[node]
        base = depths[node] if depths[node] >= 0 else 0
        if depths[node] < 0:
            depths[node] = 0
        for off, member in enumerate(reversed(chain)):
            depths[member] = base + off + 1
    return depths


def node_depths(tree: ArgTree) -> list[DepthCategory]:
    """Depth categories d0..d4 with d5plus absorbing everything deeper."""
    return [DEPTH_CATEGORIES[min(d, 5)] for d in raw_depths(tree)]


def descendant_set(tree: ArgTree, node: int) -> set[int]:
    """The node itself plus all transitive children."""
    if not 0 <= node < tree.n:
        raise IndexError(f"node {node} out of range for n={tree.n}")
    children = tree.children()
    result = {node}
    frontier = [node]
    while frontier:
        current = frontier.pop()
        for child in children[current]:
            if child not in result:
                result.add(child)
                frontier.append(child)
    return result


def heads_to_distances(tree: ArgTree) -> list[int]:
    """d_i = head[i] - i; self-loops yield 0."""
    return [h - i for i, h in enumerate(tree.head)]


def distances_to_heads(distances: Sequence[int]) -> ArgTree:
    """Inverse of :func:`heads_to_distances`."""
    return ArgTree.from_heads([i + d for i, d in enumerate(distances)])


@dataclass(frozen=True)
class ShapeStats:
    """Corpus-level tree shape: mean and SD of per-essay depth and leaf ratio."""

    avg_depth: float
    std_depth: float
    leaf_ratio: float
    std_leaf_ratio: float


def essay_shape(tree: ArgTree) -> tuple[float, float]:
    """(max depth over AC nodes, leaf-AC share of AC nodes) for one essay.

    Non-ACs are excluded from both quantities; an essay with no ACs reports
    (0, 0).
    """
    labels = derive_qact(tree)
    depths = raw_depths(tree)
    ac_nodes = [i for i in range(tree.n) if labels[i] is not QactLabel.NON_AC]
    if not ac_nodes:
        return 0.0, 0.0
    depth = float(max(depths[i] for i in ac_nodes))
    leaves = sum(1 for i in ac_nodes if labels[i] is QactLabel.AC_LEAF)
    return depth, leaves / len(ac_nodes)


def shape_stats(trees: Sequence[ArgTree]) -> ShapeStats:
    """Mean +- SD (population) of per-essay depth and leaf ratio."""
    if not trees:
        raise ValidationError("shape_stats requires at least one tree")
    shapes = [essay_shape(t) for t in trees]
    depths = [s[0] for s in shapes]
    ratios = [s[1] for s in shapes]

    def _mean(xs: list[float]) -> float:
        return sum(xs) / len(xs)

    def _std(xs: list[float]) -> float:
        m = _mean(xs)
        return (sum((x - m) ** 2 for x in xs) / len(xs)) ** 0.5

    return ShapeStats(
        avg_depth=_mean(depths),
        std_depth=_std(depths),
        leaf_ratio=_mean(ratios),
        std_leaf_ratio=_std(ratios),
    )
