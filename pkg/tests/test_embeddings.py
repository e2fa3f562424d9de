from pathlib import Path

import numpy as np
import pytest

from arglinker.corpus import load_corpus
from arglinker.embeddings import (
    EmbeddingMatrix,
    concat_spos,
    load_embedding_dir,
    load_embedding_file,
    load_embeddings,
    pseudo_embed,
    save_embeddings,
    spos,
)
from arglinker.errors import FormatError, ValidationError

DATA = Path(__file__).parent / "data"


@pytest.fixture
def fixture_essays():
    return load_corpus(DATA / "essays_two.jsonl")


# ---------------------------------------------------------------- file I/O

def test_load_three_by_four_fixture(tmp_path):
    path = tmp_path / "small.emb"
    path.write_text(
        "fix-1 3 4\n"
        "0.5 -0.25 1.0 2.0\n"
        "0.125 0.0 -1.5 3.25\n"
        "4.0 5.0 6.0 7.0\n"
    )
    matrix = load_embeddings(path)
    assert matrix.essay_id == "fix-1"
    assert matrix.dim == 4
    assert matrix.n == 3
    assert matrix.rows[1, 2] == -1.5


def test_load_rejects_row_count_mismatch(tmp_path):
    path = tmp_path / "short.emb"
    path.write_text("fix-1 3 4\n0.5 0.5 0.5 0.5\n1.0 1.0 1.0 1.0\n")
    with pytest.raises(FormatError, match="3 rows"):
        load_embeddings(path)


def test_load_rejects_non_finite(tmp_path):
    path = tmp_path / "nan.emb"
    path.write_text("fix-1 1 2\nnan 0.0\n")
    with pytest.raises(ValidationError):
        load_embeddings(path)


def test_save_load_bit_exact_round_trip(tmp_path, fixture_essays):
    matrix = pseudo_embed(fixture_essays[0], dim=7, seed=3)
    path = tmp_path / "rt.emb"
    save_embeddings(matrix, path)
    again = load_embeddings(path)
    assert again.essay_id == matrix.essay_id
    assert np.array_equal(again.rows, matrix.rows)  # bitwise, repr round-trips


def test_multi_essay_file_blocks(tmp_path, fixture_essays):
    matrices = [pseudo_embed(e, dim=5, seed=1) for e in fixture_essays]
    path = tmp_path / "both.emb"
    save_embeddings(matrices, path)
    blocks = load_embedding_file(path)
    assert [b.essay_id for b in blocks] == [e.essay_id for e in fixture_essays]
    with pytest.raises(FormatError):
        load_embeddings(path)  # single-essay loader refuses two blocks


def test_load_embedding_dir(tmp_path, fixture_essays):
    for essay in fixture_essays:
        save_embeddings(pseudo_embed(essay, dim=4, seed=2),
                        tmp_path / f"{essay.essay_id}.emb")
    loaded = load_embedding_dir(tmp_path)
    assert set(loaded) == {e.essay_id for e in fixture_essays}


# ---------------------------------------------------------------- pseudo_embed

def test_pseudo_embed_deterministic(fixture_essays):
    a = pseudo_embed(fixture_essays[0], dim=16, seed=5)
    b = pseudo_embed(fixture_essays[0], dim=16, seed=5)
    assert np.array_equal(a.rows, b.rows)


def test_pseudo_embed_distinct_sentences_distinct_rows(fixture_essays):
    rows = [pseudo_embed(e, dim=8, seed=0).rows for e in fixture_essays]
    stacked = np.concatenate(rows, axis=0)
    # collision scan: no two rows of the fixture corpus coincide
    for i in range(len(stacked)):
        for j in range(i + 1, len(stacked)):
            assert not np.array_equal(stacked[i], stacked[j])


def test_pseudo_embed_range_and_dim_one(fixture_essays):
    matrix = pseudo_embed(fixture_essays[1], dim=1, seed=9)
    assert matrix.rows.shape == (3, 1)
    wide = pseudo_embed(fixture_essays[0], dim=64, seed=9)
    assert np.all(wide.rows >= -1.0) and np.all(wide.rows <= 1.0)


def test_pseudo_embed_seed_changes_rows(fixture_essays):
    a = pseudo_embed(fixture_essays[0], dim=8, seed=1)
    b = pseudo_embed(fixture_essays[0], dim=8, seed=2)
    assert not np.array_equal(a.rows, b.rows)


# ---------------------------------------------------------------- spos

def test_spos_single_sentence():
    assert spos(1).values.tolist() == [1.0]


def test_spos_quarters():
    assert spos(4).values.tolist() == [0.25, 0.5, 0.75, 1.0]


def test_spos_thirteen():
    values = spos(13).values
    assert values[-1] == 1.0
    assert values[0] == pytest.approx(1 / 13)
    assert np.all(np.diff(values) > 0)


def test_spos_mean_identity():
    for n in (1, 2, 5, 17):
        assert spos(n).values.mean() == pytest.approx((n + 1) / (2 * n))


# ---------------------------------------------------------------- concat_spos

def test_concat_extends_dim(fixture_essays):
    matrix = pseudo_embed(fixture_essays[1], dim=3, seed=4)
    combined = concat_spos(matrix, spos(matrix.n))
    assert combined.dim == 4
    assert combined.rows.shape == (3, 4)


def test_concat_zero_matrix_last_column_is_spos():
    zero = EmbeddingMatrix(essay_id="z", dim=3, rows=np.zeros((4, 3)))
    combined = concat_spos(zero, spos(4))
    assert combined.rows[:, -1].tolist() == [0.25, 0.5, 0.75, 1.0]
    assert np.all(combined.rows[:, :3] == 0)


def test_concat_preserves_prefix(fixture_essays):
    matrix = pseudo_embed(fixture_essays[0], dim=6, seed=8)
    combined = concat_spos(matrix, spos(matrix.n))
    assert np.array_equal(combined.rows[:, :6], matrix.rows)


def test_concat_rejects_row_mismatch(fixture_essays):
    matrix = pseudo_embed(fixture_essays[0], dim=3, seed=4)  # 4 sentences
    with pytest.raises(ValidationError):
        concat_spos(matrix, spos(3))
