"""Argumentative link prediction toolkit.

Predicts tree-structured links between the sentences of an essay: a biaffine
attention linker trained with structural auxiliary tasks and multi-corpora
selective sampling, maximum-arborescence decoding, and link- plus
structure-level evaluation.
"""

__version__ = "0.1.0"
