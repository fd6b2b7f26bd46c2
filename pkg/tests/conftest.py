import numpy as np
import pytest

from orthomate import LatinRectangle
from orthomate.baselines import random_latin_rectangle


@pytest.fixture
def z3():
    """Cyclic square of order 3 (Cayley table of Z3)."""
    return LatinRectangle.cyclic(3)


@pytest.fixture
def z2():
    """Cyclic square of order 2; famously has no orthogonal mate."""
    return LatinRectangle.cyclic(2)


def random_rect(n, m, seed):
    return random_latin_rectangle(n, m, np.random.default_rng(seed))
