"""Batch encoding of essay sentences into embedding files.

Input is the essay JSONL format (only ``essay_id`` and ``sentences`` are
read). Output is one text file per essay::

    <essay_id> <N> <dim>
    <dim space-separated floats with full round-trip precision>  (N rows)

which is exactly what the toolkit's embedding loader consumes.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

DEFAULT_MODEL = "sentence-transformers/bert-base-nli-mean-tokens"


class SetupError(Exception):
    """Encoder or input data unusable."""


@dataclass(frozen=True)
class BridgeConfig:
    input_path: str
    output_dir: str
    model: str = DEFAULT_MODEL
    batch_size: int = 32


def _read_essays(path: str) -> list[tuple[str, list[str]]]:
    essays = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                essay_id = record["essay_id"]
                sentences = list(record["sentences"])
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise SetupError(f"{path}:{lineno}: bad essay record ({exc})") from exc
            if any(ch.isspace() for ch in essay_id):
                raise SetupError(
                    f"{path}:{lineno}: essay_id {essay_id!r} contains whitespace"
                )
            for k, sentence in enumerate(sentences):
                if not sentence.strip():
                    raise SetupError(
                        f"essay {essay_id!r}: sentence {k} is empty"
                    )
            essays.append((essay_id, sentences))
    return essays


def _load_encoder(model: str):
    try:
        from sentence_transformers import SentenceTransformer
    except ImportError as exc:  # pragma: no cover - environment misconfiguration
        raise SetupError(f"sentence-transformers is not installed: {exc}") from exc
    try:
        encoder = SentenceTransformer(model, device="cpu")
    except Exception as exc:
        raise SetupError(f"cannot load encoder {model!r}: {exc}") from exc
    encoder.eval()
    return encoder


def _write_embedding_file(path: Path, essay_id: str, rows) -> None:
    lines = [f"{essay_id} {len(rows)} {rows.shape[1]}"]
    for row in rows:
        lines.append(" ".join(repr(float(v)) for v in row))
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def export_embeddings(config: BridgeConfig) -> list[Path]:
    """Encode every essay and write one embedding file each.

    Row order follows sentence order; given fixed model weights the output is
    deterministic, so reruns produce byte-identical files.
    """
    import torch

    essays = _read_essays(config.input_path)
    encoder = _load_encoder(config.model)
    out_dir = Path(config.output_dir)
    out_dir.mkdir(parents=True, exist_ok=True)

    written = []
    threads = torch.get_num_threads()
    torch.set_num_threads(1)  # keeps reduction order, hence bytes, stable
    try:
        with torch.no_grad():
            for essay_id, sentences in essays:
                rows = encoder.encode(
                    sentences,
                    batch_size=config.batch_size,
                    convert_to_numpy=True,
                    normalize_embeddings=False,
                    show_progress_bar=False,
                )
                path = out_dir / f"{essay_id}.emb"
                _write_embedding_file(path, essay_id, rows)
                written.append(path)
    finally:
        torch.set_num_threads(threads)
    return written
