"""Corpus loading, segment-to-sentence conversion, sampling, and splits.

Two JSONL formats are understood, one essay per line each:

* essay format: ``{"essay_id", "corpus": "in"|"out", "sentences": [str],
  "head": [int], "relation": [str|null]}`` where ``head[i] == i`` encodes a
  self-loop and ``relation[i]`` is null for self-loops.
* segment format: ``{"essay_id", "sentences": [str], "segments": [{"sent",
  "start", "end", "head_segment": int|null}]}`` with character spans relative
  to their sentence.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ConfigError, FormatError, ValidationError
from .tree import ArgTree, LinkLabel, Sentence, in_counts


class SourceCorpus(Enum):
    IN_DOMAIN = "in"
    OUT_DOMAIN = "out"


class TrainingSetting(Enum):
    IN_ONLY = "I"
    POOLED = "P+I"
    SELECTIVE = "SS"


@dataclass(frozen=True)
class Essay:
    essay_id: str
    sentences: tuple[Sentence, ...]
    gold: ArgTree
    source_corpus: SourceCorpus

    def __post_init__(self) -> None:
        if len(self.sentences) != self.gold.n:
            raise ValidationError(
                f"essay {self.essay_id!r}: {len(self.sentences)} sentences "
                f"but tree has {self.gold.n} nodes"
            )
        for i, sentence in enumerate(self.sentences):
            if sentence.index != i:
                raise ValidationError(
                    f"essay {self.essay_id!r}: sentence index {sentence.index} at slot {i}"
                )

    @property
    def n(self) -> int:
        return self.gold.n

    @property
    def non_ac_count(self) -> int:
        return sum(1 for s in self.sentences if not s.is_ac)

    @property
    def texts(self) -> list[str]:
        return [s.text for s in self.sentences]


@dataclass(frozen=True)
class Segment:
    sent: int
    start: int
    end: int
    head_segment: Optional[int]


@dataclass(frozen=True)
class SegmentAnnotatedEssay:
    essay_id: str
    sentences: tuple[str, ...]
    segments: tuple[Segment, ...]


@dataclass(frozen=True)
class SamplingPolicy:
    max_sentences: int = 17
    max_non_acs: int = 2

    def __post_init__(self) -> None:
        if self.max_sentences < 0 or self.max_non_acs < 0:
            raise ConfigError("sampling thresholds must be >= 0")

    def admits(self, essay: Essay) -> bool:
        # "at maximum" reads as inclusive
        return len(essay.sentences) <= self.max_sentences and (
            essay.non_ac_count <= self.max_non_acs
        )


def _essay_from_parts(essay_id: str, texts: Sequence[str], head: Sequence[int],
                      relation: Sequence[Optional[LinkLabel]],
                      corpus: SourceCorpus) -> Essay:
    tree = ArgTree.from_heads(head, relation)
    try:
        tree.validate()
    except ValidationError as exc:
        raise ValidationError(f"essay {essay_id!r}: {exc}") from exc
    incoming = in_counts(tree)
    sentences = tuple(
        Sentence(index=i, text=texts[i],
                 is_ac=not (tree.head[i] == i and incoming[i] == 0))
        for i in range(len(texts))
    )
    return Essay(essay_id=essay_id, sentences=sentences, gold=tree,
                 source_corpus=corpus)


def _parse_essay_record(record: dict, lineno: int, path) -> Essay:
    try:
        essay_id = record["essay_id"]
        corpus = SourceCorpus(record["corpus"])
        texts = record["sentences"]
        head = record["head"]
        relation_raw = record.get("relation")
    except (KeyError, ValueError) as exc:
        raise FormatError(f"{path}:{lineno}: bad essay record ({exc})") from exc
    if relation_raw is None:
        relation_raw = [None] * len(texts)
    if not (len(texts) == len(head) == len(relation_raw)):
        raise ValidationError(
            f"essay {essay_id!r} ({path}:{lineno}): sentences/head/relation lengths differ"
        )
    try:
        relation = [None if r is None else LinkLabel(r) for r in relation_raw]
    except ValueError as exc:
        raise ValidationError(f"essay {essay_id!r} ({path}:{lineno}): {exc}") from exc
    return _essay_from_parts(essay_id, texts, head, relation, corpus)


def _parse_segment_record(record: dict, lineno: int, path) -> SegmentAnnotatedEssay:
    try:
        segments = tuple(
            Segment(sent=int(s["sent"]), start=int(s["start"]), end=int(s["end"]),
                    head_segment=None if s["head_segment"] is None else int(s["head_segment"]))
            for s in record["segments"]
        )
        return SegmentAnnotatedEssay(
            essay_id=record["essay_id"],
            sentences=tuple(record["sentences"]),
            segments=segments,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(f"{path}:{lineno}: bad segment record ({exc})") from exc


def load_corpus(path, format: str = "essay",
                default_corpus: SourceCorpus = SourceCorpus.OUT_DOMAIN) -> list[Essay]:
    """Read a JSONL corpus; segment-format essays are converted on the fly."""
    if format not in ("essay", "segment"):
        raise ConfigError(f"unknown corpus format {format!r}")
    essays: list[Essay] = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise FormatError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from exc
            if format == "essay":
                essays.append(_parse_essay_record(record, lineno, path))
            else:
                seg_essay = _parse_segment_record(record, lineno, path)
                essays.append(segment_to_sentence(seg_essay, corpus=default_corpus))
    return essays


def save_corpus(essays: Sequence[Essay], path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for essay in essays:
            relation = [
                None if r is None else r.value
                for r in (essay.gold.relation or (None,) * essay.n)
            ]
            record = {
                "essay_id": essay.essay_id,
                "corpus": essay.source_corpus.value,
                "sentences": essay.texts,
                "head": list(essay.gold.head),
                "relation": relation,
            }
            handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def _token_spans(text: str) -> list[tuple[int, int]]:
    """Whitespace token character spans."""
    spans = []
    start = None
    for pos, ch in enumerate(text):
        if ch.isspace():
            if start is not None:
                spans.append((start, pos))
                start = None
        elif start is None:
            start = pos
    if start is not None:
        spans.append((start, len(text)))
    return spans


def segment_to_sentence(annotated: SegmentAnnotatedEssay,
                        corpus: SourceCorpus = SourceCorpus.OUT_DOMAIN) -> Essay:
    """Convert segment-level annotation to one argumentative unit per sentence.

    A sentence holding a single segment becomes that segment's whole-sentence
    AC. A sentence holding k >= 2 segments is split into k sentences at token
    granularity: piece m runs from the token after the previous segment's last
    token through its own segment's last token, and the final piece absorbs any
    trailing tokens, so the essay's total token count is preserved. Sentences
    without segments become non-ACs.
    """
    per_sentence: dict[int, list[int]] = {}
    for seg_idx, seg in enumerate(annotated.segments):
        if not 0 <= seg.sent < len(annotated.sentences):
            raise ValidationError(
                f"essay {annotated.essay_id!r}: segment {seg_idx} names sentence {seg.sent}"
            )
        text = annotated.sentences[seg.sent]
        if not (0 <= seg.start < seg.end <= len(text)):
            raise ValidationError(
                f"essay {annotated.essay_id!r}: segment {seg_idx} span "
                f"({seg.start}, {seg.end}) crosses the boundary of sentence {seg.sent}"
            )
        per_sentence.setdefault(seg.sent, []).append(seg_idx)

    new_texts: list[str] = []
    seg_to_new_index: dict[int, int] = {}
    non_ac_new_indices: list[int] = []

    for sent_idx, text in enumerate(annotated.sentences):
        seg_indices = sorted(per_sentence.get(sent_idx, []),
                             key=lambda idx: annotated.segments[idx].start)
        for a, b in zip(seg_indices, seg_indices[1:]):
            if annotated.segments[b].start < annotated.segments[a].end:
                raise ValidationError(
                    f"essay {annotated.essay_id!r}: overlapping AC spans in sentence {sent_idx}"
                )
        if not seg_indices:
            non_ac_new_indices.append(len(new_texts))
            new_texts.append(text)
        elif len(seg_indices) == 1:
            # single AC: the whole sentence is the AC
            seg_to_new_index[seg_indices[0]] = len(new_texts)
            new_texts.append(text)
        else:
            tokens = _token_spans(text)
            end_tokens = []
            for seg_idx in seg_indices:
                seg = annotated.segments[seg_idx]
                covering = [t for t, (ts, te) in enumerate(tokens)
                            if ts < seg.end and te > seg.start]
                if not covering:
                    raise ValidationError(
                        f"essay {annotated.essay_id!r}: segment {seg_idx} covers no token"
                    )
                end_tokens.append(covering[-1])
            if any(b <= a for a, b in zip(end_tokens, end_tokens[1:])):
                raise ValidationError(
                    f"essay {annotated.essay_id!r}: AC spans share a token in sentence {sent_idx}"
                )
            end_tokens[-1] = len(tokens) - 1  # last piece absorbs trailing tokens
            first_token = 0
            for seg_idx, last_token in zip(seg_indices, end_tokens):
                piece = text[tokens[first_token][0]:tokens[last_token][1]]
                seg_to_new_index[seg_idx] = len(new_texts)
                new_texts.append(piece)
                first_token = last_token + 1

    head = [0] * len(new_texts)
    for new_idx in non_ac_new_indices:
        head[new_idx] = new_idx
    for seg_idx, seg in enumerate(annotated.segments):
        source = seg_to_new_index[seg_idx]
        if seg.head_segment is None:
            head[source] = source
        else:
            if seg.head_segment not in seg_to_new_index:
                raise ValidationError(
                    f"essay {annotated.essay_id!r}: segment {seg_idx} links to "
                    f"unknown segment {seg.head_segment}"
                )
            head[source] = seg_to_new_index[seg.head_segment]

    relation = [None] * len(new_texts)
    return _essay_from_parts(annotated.essay_id, new_texts, head, relation, corpus)


def selective_sample(essays: Sequence[Essay],
                     policy: SamplingPolicy = SamplingPolicy()) -> list[Essay]:
    """Keep essays within the length and non-AC thresholds, order preserved."""
    return [essay for essay in essays if policy.admits(essay)]


def build_training_set(in_domain: Sequence[Essay], out_domain: Sequence[Essay],
                       setting: TrainingSetting,
                       policy: SamplingPolicy = SamplingPolicy()) -> list[Essay]:
    if setting is TrainingSetting.IN_ONLY:
        return list(in_domain)
    if setting is TrainingSetting.POOLED:
        return list(in_domain) + list(out_domain)
    return list(in_domain) + selective_sample(out_domain, policy)


def split_train_test(essays: Sequence[Essay], train_fraction: float,
                     seed: int) -> tuple[list[Essay], list[Essay]]:
    """Seeded exact partition; both halves keep the original corpus order."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigError(f"train_fraction must be in (0, 1), got {train_fraction}")
    n = len(essays)
    n_train = int(n * train_fraction + 1e-9)
    picked = np.random.default_rng(seed).permutation(n)[:n_train]
    train_mask = np.zeros(n, dtype=bool)
    train_mask[picked] = True
    train = [essays[i] for i in range(n) if train_mask[i]]
    test = [essays[i] for i in range(n) if not train_mask[i]]
    return train, test
