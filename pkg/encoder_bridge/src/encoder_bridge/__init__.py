"""Offline sentence-embedding exporter for the linking toolkit.

Encodes essay sentences with a pretrained sentence encoder and writes one
embedding file per essay in the toolkit's text format. Embeddings are always
precomputed, never streamed: the training side stays decoupled from the ML
runtime and exports are cacheable.
"""

from .bridge import BridgeConfig, SetupError, export_embeddings

__all__ = ["BridgeConfig", "SetupError", "export_embeddings"]

__version__ = "0.1.0"
