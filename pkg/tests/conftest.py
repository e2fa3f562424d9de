import numpy as np
import pytest

from arglinker.tree import ArgTree

from helpers import EXAMPLE_TOPOLOGY_HEADS


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20210817)


@pytest.fixture
def example_topology_tree() -> ArgTree:
    return ArgTree.from_heads(EXAMPLE_TOPOLOGY_HEADS)
