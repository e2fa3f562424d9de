import json
import os

import pytest

os.environ.setdefault("TRANSFORMERS_OFFLINE", "1")
os.environ.setdefault("HF_HUB_OFFLINE", "1")


@pytest.fixture(scope="session")
def tiny_encoder_dir(tmp_path_factory) -> str:
    """A miniature sentence encoder saved to disk, built fully offline."""
    import torch
    from transformers import BertConfig, BertModel, BertTokenizerFast
    from sentence_transformers import SentenceTransformer

    try:
        from sentence_transformers.sentence_transformer import modules as st_modules
    except ImportError:  # older releases
        from sentence_transformers import models as st_modules

    root = tmp_path_factory.mktemp("tiny-encoder")
    hf_dir = root / "hf"
    hf_dir.mkdir()
    vocab = (["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
             + list("abcdefghijklmnopqrstuvwxyz")
             + ["##" + c for c in "abcdefghijklmnopqrstuvwxyz"]
             + ["the", "a", "and", ".", ","])
    (hf_dir / "vocab.txt").write_text("\n".join(vocab), encoding="utf-8")
    torch.manual_seed(0)
    config = BertConfig(vocab_size=len(vocab), hidden_size=32,
                        num_hidden_layers=1, num_attention_heads=2,
                        intermediate_size=64, max_position_embeddings=128)
    BertModel(config).save_pretrained(hf_dir)
    BertTokenizerFast(vocab_file=str(hf_dir / "vocab.txt"),
                      do_lower_case=True).save_pretrained(hf_dir)

    word = st_modules.Transformer(str(hf_dir))
    if hasattr(word, "get_embedding_dimension"):
        dim = word.get_embedding_dimension()
    else:  # renamed upstream
        dim = word.get_word_embedding_dimension()
    pooling = st_modules.Pooling(dim, pooling_mode="mean")
    encoder = SentenceTransformer(modules=[word, pooling], device="cpu")
    out_dir = root / "st"
    encoder.save(str(out_dir))
    return str(out_dir)


@pytest.fixture
def essay_fixture(tmp_path) -> str:
    records = [
        {"essay_id": "fix-a", "corpus": "in",
         "sentences": ["the cat sat.", "a dog ran and ran."],
         "head": [0, 0], "relation": [None, "support"]},
        {"essay_id": "fix-b", "corpus": "in",
         "sentences": ["a bat and a cat.", "the hat.", "and the mat sat."],
         "head": [0, 0, 1], "relation": [None, "support", "detail"]},
    ]
    path = tmp_path / "essays.jsonl"
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n",
                    encoding="utf-8")
    return str(path)
