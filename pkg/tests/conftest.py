import itertools

import numpy as np
import pytest
from hypothesis import settings
from hypothesis import strategies as st

from tracedyn.grassmann import GrassmannNumber

settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def all_words(k):
    return [w for m in range(k + 1) for w in itertools.combinations(range(k), m)]


@st.composite
def grassmann_numbers(draw, k=None, parity=None, max_terms=6):
    """Elements with small Gaussian-integer coefficients, so products are exact."""
    if k is None:
        k = draw(st.integers(1, 6))
    words = all_words(k)
    if parity == "even":
        words = [w for w in words if len(w) % 2 == 0]
    elif parity == "odd":
        words = [w for w in words if len(w) % 2 == 1]
    chosen = draw(st.lists(st.sampled_from(words), max_size=max_terms, unique=True))
    coeff = st.builds(complex, st.integers(-4, 4), st.integers(-4, 4))
    return GrassmannNumber(k, {w: draw(coeff) for w in chosen})


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
