import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import strategies as st

sys.path.insert(0, str(Path(__file__).parent))

from carousel_eval.core import Carousel, CarouselPage  # noqa: E402


def random_page(rng, max_rows=4, max_cols=6, universe=10, ragged=True, placeholders=False):
    """Random page as a list of item lists; rows share items, so duplicates across rows are common."""
    n_rows = int(rng.integers(1, max_rows + 1))
    width = int(rng.integers(1, max_cols + 1))
    rows = []
    for _ in range(n_rows):
        n = int(rng.integers(1, width + 1)) if ragged else width
        row = [int(x) for x in rng.choice(universe, size=min(n, universe), replace=False)]
        if placeholders and rng.random() < 0.2:
            row[int(rng.integers(len(row)))] = -1
        rows.append(row)
    return rows


def random_gt(rng, universe=12, graded=False, allow_empty=False):
    n = int(rng.integers(0 if allow_empty else 1, universe + 1))
    items = rng.choice(universe, size=n, replace=False)
    if graded:
        return {int(i): float(rng.integers(1, 4)) for i in items}
    return {int(i): 1.0 for i in items}


def as_page(rows):
    return CarouselPage(tuple(Carousel(tuple(r), f"row{k}") for k, r in enumerate(rows)))


@st.composite
def pages(draw, max_rows=4, max_cols=6, universe=10):
    n_rows = draw(st.integers(1, max_rows))
    rows = []
    for _ in range(n_rows):
        n = draw(st.integers(1, max_cols))
        rows.append(draw(st.lists(st.integers(0, universe - 1), min_size=min(n, universe), max_size=min(n, universe),
                                  unique=True)))
    return rows


@st.composite
def ground_truths(draw, universe=12, graded=False, min_size=1):
    items = draw(st.sets(st.integers(0, universe - 1), min_size=min_size))
    if graded:
        return {i: float(draw(st.integers(1, 3))) for i in sorted(items)}
    return {i: 1.0 for i in items}


weights = st.tuples(st.sampled_from([1.0, 1.5, 2.0, 3.0]), st.sampled_from([1.0, 1.25, 2.0, 4.0]))


@pytest.fixture
def rng():
    return np.random.Generator(np.random.PCG64(20210621))


@pytest.fixture(scope="session")
def synthetic_dir(tmp_path_factory):
    from carousel_eval.synthetic import generate

    d = tmp_path_factory.mktemp("synthetic")
    generate(d, n_users=300, n_items=120, seed=3, mean_ratings=30)
    return d
