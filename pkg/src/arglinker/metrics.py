"""Link-level and structure-level evaluation.

Everything operates on aligned lists of predicted and gold trees. Zero
division convention throughout: precision or recall with an empty denominator
counts as 0 when the class has any support, and a class with no support on
either side is omitted from per-class maps and macro averages.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, ValidationError
from .tree import (
    ArgTree,
    DepthCategory,
    QactLabel,
    ShapeStats,
    derive_qact,
    descendant_set,
    heads_to_distances,
    in_counts,
    node_depths,
    shape_stats,
)

_UNBOUNDED = 10**9


@dataclass(frozen=True)
class DistanceBucket:
    """Inclusive distance range; with use_abs the bound applies to |d|."""

    name: str
    lo: Optional[int] = None
    hi: Optional[int] = None
    use_abs: bool = False

    def contains(self, d: int) -> bool:
        v = abs(d) if self.use_abs else d
        return (self.lo is None or v >= self.lo) and (self.hi is None or v <= self.hi)

    def intervals(self) -> list[tuple[int, int]]:
        lo = -_UNBOUNDED if self.lo is None else self.lo
        hi = _UNBOUNDED if self.hi is None else self.hi
        if not self.use_abs:
            return [(lo, hi)]
        if lo <= 0:
            return [(-hi, hi)]
        return [(-hi, -lo), (lo, hi)]


# Paper-style distance analysis: self-loops, adjacent links either way,
# short links, long backward and long forward links. A disjoint partition.
DEFAULT_DISTANCE_BUCKETS = (
    DistanceBucket("0", 0, 0),
    DistanceBucket("-1", -1, -1),
    DistanceBucket("+1", 1, 1),
    DistanceBucket("2<=|d|<=4", 2, 4, use_abs=True),
    DistanceBucket("d<=-5", None, -5),
    DistanceBucket("d>=+5", 5, None),
)


@dataclass(frozen=True)
class RunSeries:
    """Per-run scores of one metric for one system."""

    metric: str
    scores: tuple[float, ...]


@dataclass(frozen=True)
class PermutationResult:
    p_value: float
    significant: bool


@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    f1_macro: float
    per_distance_f1: dict[str, float]
    per_depth_f1: dict[DepthCategory, float]
    mar_dset: float
    qact_f1: dict[QactLabel, float]
    qact_macro: float
    shape: ShapeStats

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "f1_macro": self.f1_macro,
            "per_distance_f1": dict(self.per_distance_f1),
            "per_depth_f1": {c.value: v for c, v in self.per_depth_f1.items()},
            "mar_dset": self.mar_dset,
            "qact_f1": {c.value: v for c, v in self.qact_f1.items()},
            "qact_macro": self.qact_macro,
            "shape": {
                "avg_depth": self.shape.avg_depth,
                "std_depth": self.shape.std_depth,
                "leaf_ratio": self.shape.leaf_ratio,
                "std_leaf_ratio": self.shape.std_leaf_ratio,
            },
        }

    @staticmethod
    def from_dict(data: dict) -> "EvalReport":
        return EvalReport(
            accuracy=data["accuracy"],
            f1_macro=data["f1_macro"],
            per_distance_f1=dict(data["per_distance_f1"]),
            per_depth_f1={DepthCategory(k): v for k, v in data["per_depth_f1"].items()},
            mar_dset=data["mar_dset"],
            qact_f1={QactLabel(k): v for k, v in data["qact_f1"].items()},
            qact_macro=data["qact_macro"],
            shape=ShapeStats(**data["shape"]),
        )


def _check_aligned(pred: Sequence[ArgTree], gold: Sequence[ArgTree]) -> None:
    if len(pred) != len(gold):
        raise ValidationError(f"{len(pred)} predictions vs {len(gold)} gold essays")
    for k, (p, g) in enumerate(zip(pred, gold)):
        if p.n != g.n:
            raise ValidationError(f"essay {k}: predicted {p.n} nodes, gold {g.n}")


def _f1(tp: int, fp: int, fn: int) -> float:
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    return 2 * precision * recall / (precision + recall) if precision + recall else 0.0


def _label_f1(pairs: list[tuple], classes: Sequence) -> dict:
    out = {}
    for cls in classes:
        tp = sum(1 for p, g in pairs if p == cls and g == cls)
        fp = sum(1 for p, g in pairs if p == cls and g != cls)
        fn = sum(1 for p, g in pairs if p != cls and g == cls)
        out[cls] = _f1(tp, fp, fn)
    return out


def link_accuracy(pred: Sequence[ArgTree], gold: Sequence[ArgTree]) -> float:
    """Micro accuracy over all sentences: predicted head equals gold head."""
    _check_aligned(pred, gold)
    total = sum(g.n for g in gold)
    if total == 0:
        return 0.0
    hits = sum(
        1 for p, g in zip(pred, gold) for i in range(g.n) if p.head[i] == g.head[i]
    )
    return hits / total


def _distance_pairs(pred: Sequence[ArgTree], gold: Sequence[ArgTree]) -> list[tuple[int, int]]:
    pairs = []
    for p, g in zip(pred, gold):
        pairs.extend(zip(heads_to_distances(p), heads_to_distances(g)))
    return pairs


def distance_class_f1(pred: Sequence[ArgTree], gold: Sequence[ArgTree]) -> dict[int, float]:
    """F1 per exact distance value, over distances present in gold or pred."""
    _check_aligned(pred, gold)
    pairs = _distance_pairs(pred, gold)
    classes = sorted({d for p, g in pairs for d in (p, g)})
    return _label_f1(pairs, classes)


def f1_macro_distance(pred: Sequence[ArgTree], gold: Sequence[ArgTree]) -> float:
    per_class = distance_class_f1(pred, gold)
    return sum(per_class.values()) / len(per_class) if per_class else 0.0


def _check_bucket_overlap(buckets: Sequence[DistanceBucket]) -> None:
    for a in range(len(buckets)):
        for b in range(a + 1, len(buckets)):
            for lo1, hi1 in buckets[a].intervals():
                for lo2, hi2 in buckets[b].intervals():
                    if max(lo1, lo2) <= min(hi1, hi2):
                        raise ConfigError(
                            f"distance buckets {buckets[a].name!r} and "
                            f"{buckets[b].name!r} overlap"
                        )


def per_distance_f1(pred: Sequence[ArgTree], gold: Sequence[ArgTree],
                    buckets: Sequence[DistanceBucket] = DEFAULT_DISTANCE_BUCKETS,
                    ) -> dict[str, float]:
    """F1 per distance bucket; buckets empty on both sides are omitted."""
    _check_aligned(pred, gold)
    _check_bucket_overlap(buckets)

    def bucket_of(d: int) -> Optional[str]:
        for bucket in buckets:
            if bucket.contains(d):
                return bucket.name
        return None

    pairs = [(bucket_of(p), bucket_of(g)) for p, g in _distance_pairs(pred, gold)]
    names = [b.name for b in buckets
             if any(b.name in pair for pair in pairs)]
    return _label_f1(pairs, names)


def per_depth_f1(pred: Sequence[ArgTree], gold: Sequence[ArgTree],
                 ) -> dict[DepthCategory, float]:
    """Depth category treated as a per-node label, pooled over the corpus."""
    _check_aligned(pred, gold)
    pairs = []
    for p, g in zip(pred, gold):
        pairs.extend(zip(node_depths(p), node_depths(g)))
    present = [c for c in DepthCategory
               if any(c in pair for pair in pairs)]
    return _label_f1(pairs, present)


def _is_non_ac_fast(tree: ArgTree, incoming: list[int], node: int) -> bool:
    return tree.head[node] == node and incoming[node] == 0


def mar_match_vector(pred: ArgTree, gold: ArgTree) -> list[int]:
    """Per-node descendant-set agreement between two structures.

    A node scores 1 when both structures assign it the identical descendant
    set; nodes that are non-argumentative must be non-argumentative in both
    structures to match.
    """
    if pred.n != gold.n:
        raise ValidationError(f"node count mismatch: {pred.n} vs {gold.n}")
    in_pred, in_gold = in_counts(pred), in_counts(gold)
    vector = []
    for i in range(pred.n):
        non_ac_pred = _is_non_ac_fast(pred, in_pred, i)
        non_ac_gold = _is_non_ac_fast(gold, in_gold, i)
        if non_ac_pred or non_ac_gold:
            vector.append(1 if (non_ac_pred and non_ac_gold) else 0)
        else:
            vector.append(1 if descendant_set(pred, i) == descendant_set(gold, i) else 0)
    return vector


def mar_dset(pred: ArgTree, gold: ArgTree) -> float:
    """Fraction of nodes whose descendant sets agree exactly."""
    vector = mar_match_vector(pred, gold)
    return sum(vector) / len(vector) if vector else 0.0


def corpus_mar_dset(pred: Sequence[ArgTree], gold: Sequence[ArgTree]) -> float:
    _check_aligned(pred, gold)
    if not gold:
        return 0.0
    return sum(mar_dset(p, g) for p, g in zip(pred, gold)) / len(gold)


def qact_eval(pred: Sequence[ArgTree], gold: Sequence[ArgTree],
              ) -> tuple[dict[QactLabel, float], float]:
    """Role labels derived from both topologies; per-label F1 plus macro."""
    _check_aligned(pred, gold)
    pairs = []
    for p, g in zip(pred, gold):
        pairs.extend(zip(derive_qact(p), derive_qact(g)))
    present = [label for label in QactLabel
               if any(label in pair for pair in pairs)]
    per_label = _label_f1(pairs, present)
    macro = sum(per_label.values()) / len(per_label) if per_label else 0.0
    return per_label, macro


def evaluate(pred: Sequence[ArgTree], gold: Sequence[ArgTree]) -> EvalReport:
    """All metrics for one aligned prediction/gold corpus pair."""
    _check_aligned(pred, gold)
    qact_f1, qact_macro = qact_eval(pred, gold)
    return EvalReport(
        accuracy=link_accuracy(pred, gold),
        f1_macro=f1_macro_distance(pred, gold),
        per_distance_f1=per_distance_f1(pred, gold),
        per_depth_f1=per_depth_f1(pred, gold),
        mar_dset=corpus_mar_dset(pred, gold),
        qact_f1=qact_f1,
        qact_macro=qact_macro,
        shape=shape_stats(list(pred)),
    )


def _signed_sums(diff: np.ndarray, signs: np.ndarray) -> np.ndarray:
    return signs @ diff


def permutation_test(a: RunSeries, b: RunSeries, alpha: float = 0.05,
                     resamples: int = 10_000, seed: int = 0) -> PermutationResult:
    """Paired sign-flip permutation test on per-run score differences.

    Two-sided. Runs exact enumeration whenever 2**n <= resamples, otherwise
    seeded Monte Carlo with add-one smoothing.
    """
    if len(a.scores) != len(b.scores):
        raise ValidationError(
            f"series lengths differ: {len(a.scores)} vs {len(b.scores)}"
        )
    n = len(a.scores)
    if n < 2:
        raise ValidationError("paired test needs at least two runs")
    diff = np.asarray(a.scores, dtype=np.float64) - np.asarray(b.scores, dtype=np.float64)
    observed = abs(_signed_sums(diff, np.ones((1, n)))[0])

    if 2**n <= resamples:
        total = 2**n
        count = 0
        chunk = 1 << 16
        for start in range(0, total, chunk):
            masks = np.arange(start, min(start + chunk, total), dtype=np.int64)
            signs = (((masks[:, None] >> np.arange(n)) & 1) * 2 - 1).astype(np.float64)
            count += int((np.abs(_signed_sums(diff, signs)) >= observed).sum())
        p_value = count / total
    else:
        rng = np.random.default_rng(seed)
        signs = rng.integers(0, 2, size=(resamples, n)).astype(np.float64) * 2 - 1
        count = int((np.abs(_signed_sums(diff, signs)) >= observed).sum())
        p_value = (1 + count) / (resamples + 1)
    return PermutationResult(p_value=p_value, significant=p_value < alpha)
