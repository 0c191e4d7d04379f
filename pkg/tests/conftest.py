import json
from pathlib import Path

import numpy as np
import pytest

from entangle.activation import demo_instance


@pytest.fixture(scope="session")
def frozen():
    return json.loads((Path(__file__).parent / "oracles" / "frozen.json").read_text())


@pytest.fixture(scope="session")
def demo():
    """Shipped activation instance, computed once per session: (outcome, seconds)."""
    return demo_instance()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
