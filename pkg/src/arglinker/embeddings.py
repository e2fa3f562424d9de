"""Fixed-dimensional sentence embeddings and the sentence-position feature.

Embeddings are either read from text files written by an offline encoder or
generated deterministically from hashes for tests and fixtures. The file
format is one block per essay::

    <essay_id> <N> <dim>
    <dim floats, space separated>   (N rows)

Blocks in a multi-essay file are separated by blank lines. Floats are written
with full round-trip precision.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import FormatError, ValidationError


@dataclass(frozen=True)
class EmbeddingMatrix:
    essay_id: str
    dim: int
    rows: np.ndarray  # (N, dim) float64

    def __post_init__(self) -> None:
        if self.rows.ndim != 2:
            raise ValidationError(f"embedding rows must be 2-D, got {self.rows.ndim}-D")
        if self.rows.shape[1] != self.dim:
            raise ValidationError(
                f"declared dim {self.dim} != row width {self.rows.shape[1]}"
            )
        if not np.isfinite(self.rows).all():
            raise ValidationError(f"non-finite embedding values for {self.essay_id!r}")

    @property
    def n(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class SposFeature:
    """values[i] = (i+1)/N, so the last sentence always maps to 1.0."""

    values: np.ndarray

    @property
    def n(self) -> int:
        return self.values.shape[0]


def spos(n: int) -> SposFeature:
    if n < 1:
        raise ValidationError(f"spos requires n >= 1, got {n}")
    return SposFeature(values=(np.arange(1, n + 1, dtype=np.float64) / n))


def concat_spos(matrix: EmbeddingMatrix, feature: SposFeature) -> EmbeddingMatrix:
    """Append the position feature as one extra column; existing values untouched."""
    if matrix.n != feature.n:
        raise ValidationError(
            f"row count mismatch: {matrix.n} embeddings vs {feature.n} positions"
        )
    rows = np.concatenate([matrix.rows, feature.values[:, None]], axis=1)
    return EmbeddingMatrix(essay_id=matrix.essay_id, dim=matrix.dim + 1, rows=rows)


def pseudo_embed(essay, dim: int, seed: int) -> EmbeddingMatrix:
    """Deterministic stand-in embeddings derived from a cryptographic hash.

    Each row is a pure function of (seed, essay_id, sentence index, sentence
    text), mapped into [-1, 1]. Platform independent by construction: no float
    accumulation, just hashed integers scaled once.
    """
    if dim < 1:
        raise ValidationError(f"pseudo_embed requires dim >= 1, got {dim}")
    rows = np.empty((len(essay.sentences), dim), dtype=np.float64)
    for sentence in essay.sentences:
        key = f"{seed}|{essay.essay_id}|{sentence.index}|{sentence.text}".encode("utf-8")
        digest = hashlib.shake_256(key).digest(8 * dim)
        ints = np.frombuffer(digest, dtype="<u8").astype(np.float64)
        rows[sentence.index] = ints / float(2**63) - 1.0
    return EmbeddingMatrix(essay_id=essay.essay_id, dim=dim, rows=rows)


def _format_block(matrix: EmbeddingMatrix) -> str:
    if any(ch.isspace() for ch in matrix.essay_id):
        raise ValidationError(f"essay_id {matrix.essay_id!r} must not contain whitespace")
    lines = [f"{matrix.essay_id} {matrix.n} {matrix.dim}"]
    for row in matrix.rows:
        lines.append(" ".join(repr(float(v)) for v in row))
    return "\n".join(lines)


def save_embeddings(matrices: Iterable[EmbeddingMatrix] | EmbeddingMatrix, path) -> None:
    """Write one or more embedding blocks; floats keep full precision."""
    if isinstance(matrices, EmbeddingMatrix):
        matrices = [matrices]
    text = "\n\n".join(_format_block(m) for m in matrices)
    Path(path).write_text(text + "\n", encoding="utf-8")


def _parse_block(lines: Sequence[str], start_line: int, path) -> EmbeddingMatrix:
    header = lines[0].split()
    if len(header) != 3:
        raise FormatError(f"{path}:{start_line}: header must be '<essay_id> <N> <dim>'")
    essay_id = header[0]
    try:
        n, dim = int(header[1]), int(header[2])
    except ValueError as exc:
        raise FormatError(f"{path}:{start_line}: non-integer header counts") from exc
    if len(lines) - 1 != n:
        raise FormatError(
            f"{path}:{start_line}: header declares {n} rows, block has {len(lines) - 1}"
        )
    rows = np.empty((n, dim), dtype=np.float64)
    for r, line in enumerate(lines[1:]):
        parts = line.split()
        if len(parts) != dim:
            raise FormatError(
                f"{path}:{start_line + 1 + r}: expected {dim} values, got {len(parts)}"
            )
        try:
            rows[r] = [float(p) for p in parts]
        except ValueError as exc:
            raise FormatError(f"{path}:{start_line + 1 + r}: unparsable float") from exc
    if not np.isfinite(rows).all():
        raise ValidationError(f"{path}:{start_line}: non-finite value in {essay_id!r}")
    return EmbeddingMatrix(essay_id=essay_id, dim=dim, rows=rows)


def load_embedding_file(path) -> list[EmbeddingMatrix]:
    """Parse every blank-line-separated block in a file."""
    raw_lines = Path(path).read_text(encoding="utf-8").split("\n")
    blocks: list[EmbeddingMatrix] = []
    block: list[str] = []
    block_start = 1
    for lineno, line in enumerate(raw_lines, start=1):
        if line.strip():
            if not block:
                block_start = lineno
            block.append(line)
        elif block:
            blocks.append(_parse_block(block, block_start, path))
            block = []
    if block:
        blocks.append(_parse_block(block, block_start, path))
    return blocks


def load_embeddings(path) -> EmbeddingMatrix:
    """Load a single-essay embedding file."""
    blocks = load_embedding_file(path)
    if len(blocks) != 1:
        raise FormatError(f"{path}: expected exactly one essay block, found {len(blocks)}")
    return blocks[0]


def load_embedding_dir(directory) -> dict[str, EmbeddingMatrix]:
    """All embedding blocks under a directory, keyed by essay_id."""
    result: dict[str, EmbeddingMatrix] = {}
    for path in sorted(Path(directory).iterdir()):
        if path.is_dir():
            continue
        for matrix in load_embedding_file(path):
            if matrix.essay_id in result:
                raise ValidationError(f"duplicate embeddings for essay {matrix.essay_id!r}")
            result[matrix.essay_id] = matrix
    return result
