import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from carousel_eval.core import DiscountWeights, build_page
from carousel_eval.metrics import (PageMetrics, average_precision_page, concat_order, dcg2d, evaluate_page_set,
                                   idcg2d, ndcg2d, ndcg_page, page_metrics, precision_page, relevance_grid,
                                   resolve_mask)

from conftest import as_page, ground_truths, pages, weights

A, B, C, D, E, X = range(6)
W11 = DiscountWeights(1, 1)
PAGE = build_page([[A, B, C], [D, A, E]])
GT = {A: 1.0, C: 1.0, E: 1.0}

# Hand computations, cross-checked against tests/oracles.py.
DCG2D_EXAMPLE = 1 / math.log2(2) + 1 / math.log2(4) + 1 / math.log2(5)
IDCG2D_EXAMPLE = 1 / math.log2(2) + 2 / math.log2(3)
NDCG_EXAMPLE = (1 + 1 / math.log2(4) + 1 / math.log2(7)) / (1 + 1 / math.log2(3) + 1 / math.log2(4))


def test_frozen_values_match_oracle():
    assert DCG2D_EXAMPLE == pytest.approx(1.930677, abs=1e-6)
    assert IDCG2D_EXAMPLE == pytest.approx(2.261860, abs=1e-6)
    assert oracles.dcg2d(PAGE.item_lists(), GT, 1, 1) == pytest.approx(DCG2D_EXAMPLE, abs=1e-12)
    assert oracles.idcg2d(GT.values(), [3, 3], 1, 1) == pytest.approx(IDCG2D_EXAMPLE, abs=1e-12)
    assert oracles.ndcg(PAGE.item_lists(), GT, 1, 1) == pytest.approx(NDCG_EXAMPLE, abs=1e-12)


class TestMask:
    def test_duplicate_keeps_best_cell(self):
        mask = resolve_mask(PAGE, W11)
        assert mask.kept == ((True, True, True), (True, False, True))

    def test_vertical_duplicate(self):
        mask = resolve_mask(build_page([[A], [A]]), W11)
        assert mask.kept == ((True,), (False,))

    def test_tie_goes_to_smaller_row(self):
        # A at (1,2) and (2,1), both key 3
        mask = resolve_mask(build_page([[B, A], [A, C]]), W11)
        assert mask.kept == ((True, True), (False, True))

    def test_column_weight_changes_winner(self):
        # beta large: (2,1) key 2+5=7 beats (1,2) key 1+10=11
        mask = resolve_mask(build_page([[B, A], [A, C]]), DiscountWeights(1, 5))
        assert mask.kept == ((True, False), (True, True))

    @given(pages(), weights)
    def test_matches_oracle_and_dominates(self, rows, ab):
        w = DiscountWeights(*ab)
        mask = resolve_mask(as_page(rows), w)
        kept = {(i + 1, j + 1) for i, r in enumerate(mask.kept) for j, k in enumerate(r) if k}
        assert kept == oracles.kept_cells(rows, *ab)
        # one kept instance per distinct item, with minimal key
        for item in {x for r in rows for x in r}:
            cells = [(i, j) for i, r in enumerate(rows, 1) for j, x in enumerate(r, 1) if x == item]
            kept_here = [c for c in cells if c in kept]
            assert len(kept_here) == 1
            key = lambda c: w.alpha * c[0] + w.beta * c[1]
            assert all(key(kept_here[0]) <= key(c) for c in cells)


class TestGrid:
    def test_example(self):
        grid = relevance_grid(PAGE, GT, resolve_mask(PAGE, W11))
        assert np.argwhere(grid > 0).tolist() == [[0, 0], [0, 2], [1, 2]]

    def test_empty_gt(self):
        assert not relevance_grid(PAGE, {}, resolve_mask(PAGE, W11)).any()

    def test_padding(self):
        page = build_page([[A, B], [C]])
        grid = relevance_grid(page, {C: 1.0}, resolve_mask(page, W11))
        assert grid[1, 0] == 1 and grid[1, 1] == 0


class TestDCG2D:
    def test_example(self):
        grid = relevance_grid(PAGE, GT, resolve_mask(PAGE, W11))
        assert dcg2d(grid, W11) == pytest.approx(DCG2D_EXAMPLE, abs=1e-12)

    def test_zero_grid(self):
        assert dcg2d(np.zeros((2, 3)), W11) == 0

    def test_single_origin_cell(self):
        assert dcg2d(np.array([[1.0]]), W11) == 1.0

    @given(pages(max_rows=4, max_cols=4), weights)
    def test_transposition_duality(self, rows, ab):
        # rectangular grid: transpose and swap alpha/beta
        width = min(len(r) for r in rows)
        grid = np.array([[float((x * 7 + i) % 3 == 0) for x in r[:width]] for i, r in enumerate(rows)])
        a, b = ab
        assert dcg2d(grid, DiscountWeights(a, b)) == pytest.approx(dcg2d(grid.T, DiscountWeights(b, a)), abs=1e-12)

    @given(st.integers(1, 4), st.integers(1, 5), weights, st.data())
    def test_moving_relevance_to_smaller_key_never_decreases(self, n_rows, n_cols, ab, data):
        w = DiscountWeights(*ab)
        grid = np.zeros((n_rows, n_cols))
        cells = [(i, j) for i in range(n_rows) for j in range(n_cols)]
        src = data.draw(st.sampled_from(cells))
        grid[src] = 1.0
        key = lambda c: w.alpha * (c[0] + 1) + w.beta * (c[1] + 1)
        smaller = [c for c in cells if key(c) < key(src)]
        if not smaller:
            return
        dst = data.draw(st.sampled_from(smaller))
        moved = grid.copy()
        moved[src], moved[dst] = 0.0, 1.0
        assert dcg2d(moved, w) >= dcg2d(grid, w)


class TestIDCG2D:
    def test_example(self):
        assert idcg2d([1, 1, 1], 2, [3, 3], W11) == pytest.approx(IDCG2D_EXAMPLE, abs=1e-12)

    def test_empty(self):
        assert idcg2d([], 2, [3, 3], W11) == 0

    @pytest.mark.parametrize("lengths", [[1], [4], [2, 5], [3, 1, 2]])
    def test_single_relevance_lands_on_origin(self, lengths):
        assert idcg2d([1.0], len(lengths), lengths, W11) == 1.0

    def test_padding_never_assigned(self):
        # 3 relevances, ragged [1, 1]: only 2 occupied cells
        assert idcg2d([1, 1, 1], 2, [1, 1], W11) == pytest.approx(1 / math.log2(2) + 1 / math.log2(3))

    def test_row_count_mismatch(self):
        with pytest.raises(ValueError):
            idcg2d([1], 2, [3], W11)

    @settings(max_examples=60)
    @given(st.lists(st.integers(1, 3), min_size=1, max_size=3), weights, st.lists(st.sampled_from([0.0, 1.0, 2.0]),
                                                                                   max_size=8))
    def test_optimal_over_all_permutations(self, lengths, ab, rels):
        if sum(lengths) > 8:
            return
        rels = [r for r in rels if r > 0]
        w = DiscountWeights(*ab)
        ideal = idcg2d(rels, len(lengths), lengths, w)
        assert ideal == pytest.approx(oracles.idcg2d_exhaustive(rels, lengths, *ab), abs=1e-10)
        assert all(ideal >= v - 1e-12 for v in oracles.all_assignments_dcg(rels, lengths, *ab))


class TestNDCG2D:
    def test_example(self):
        assert ndcg2d(PAGE, GT, W11) == pytest.approx(0.85358, abs=5e-6)
        assert ndcg2d(PAGE, GT, W11) == pytest.approx(DCG2D_EXAMPLE / IDCG2D_EXAMPLE, abs=1e-12)

    def test_ideal_page(self):
        # relevant items on the cells visited first by ascending key: (1,1), (1,2), (2,1)
        page = build_page([[A, B, X], [C, D]])
        assert ndcg2d(page, {A: 1.0, B: 1.0, C: 1.0}, W11) == pytest.approx(1.0)

    def test_empty_gt_is_zero(self):
        assert ndcg2d(PAGE, {}, W11) == 0

    @given(pages(max_rows=1), ground_truths())
    def test_single_row_reduces_to_ndcg(self, rows, gt):
        page = as_page(rows)
        assert abs(ndcg2d(page, gt, W11) - ndcg_page(page, gt, W11)) <= 1e-12
        assert ndcg_page(page, gt, W11) == pytest.approx(
            oracles.textbook_ndcg([gt.get(x, 0.0) for x in rows[0]], list(gt.values())), abs=1e-12)


def test_concat_order():
    page = build_page([[A, B], [C]])
    assert [(i, p) for i, _, p in concat_order(page, resolve_mask(page, W11))] == [(A, 1), (B, 2), (C, 3)]
    page = build_page([[A], [B, C]])
    assert [(i, p) for i, _, p in concat_order(page, resolve_mask(page, W11))] == [(A, 1), (B, 2), (C, 3)]
    order = concat_order(PAGE, resolve_mask(PAGE, W11))
    assert [p for _, _, p in order] == [1, 2, 3, 4, 5, 6]
    assert [k for _, k, _ in order] == [True, True, True, True, False, True]


class TestOneDimensional:
    def test_precision(self):
        assert precision_page(PAGE, GT, W11) == 0.5
        assert precision_page(PAGE, {}, W11) == 0
        assert precision_page(build_page([[A]]), {A: 1.0}, W11) == 1.0

    def test_average_precision(self):
        assert average_precision_page(PAGE, GT, W11) == pytest.approx((1 + 2 / 3 + 3 / 6) / 3)
        assert average_precision_page(PAGE, GT, W11) == pytest.approx(0.72222, abs=5e-6)
        assert average_precision_page(build_page([[A]]), {A: 1.0, X: 1.0}, W11) == 1.0
        assert average_precision_page(PAGE, {X: 1.0}, W11) == 0

    def test_ndcg(self):
        assert ndcg_page(PAGE, GT, W11) == pytest.approx(NDCG_EXAMPLE, abs=1e-12)
        assert ndcg_page(PAGE, GT, W11) == pytest.approx(0.87108, abs=5e-6)
        assert ndcg_page(build_page([[A, B, C]]), {A: 1.0, B: 1.0}, W11) == pytest.approx(1.0)


@given(pages(), ground_truths(graded=True), weights)
def test_all_metrics_match_oracles(rows, gt, ab):
    page, w = as_page(rows), DiscountWeights(*ab)
    m = page_metrics(page, gt, w)
    assert m.precision == pytest.approx(oracles.precision(rows, gt, *ab), abs=1e-10)
    assert m.average_precision == pytest.approx(oracles.average_precision(rows, gt, *ab), abs=1e-10)
    assert m.ndcg == pytest.approx(oracles.ndcg(rows, gt, *ab), abs=1e-10)
    assert m.ndcg2d == pytest.approx(oracles.ndcg2d(rows, gt, *ab), abs=1e-10)
    for v in (m.precision, m.average_precision, m.ndcg, m.ndcg2d):
        assert 0 <= v <= 1 + 1e-12
    assert m.counted_hits <= min(len(gt), page.n_occupied)


@given(pages(), ground_truths(), weights, st.data())
def test_duplicate_only_row_adds_nothing(rows, gt, ab, data):
    w = DiscountWeights(*ab)
    on_page = sorted({x for r in rows for x in r})
    extra = data.draw(st.lists(st.sampled_from(on_page), min_size=1, max_size=len(on_page), unique=True))
    before, after = as_page(rows), as_page(rows + [extra])
    m0, m1 = page_metrics(before, gt, w), page_metrics(after, gt, w)
    assert m1.counted_hits == m0.counted_hits
    assert m1.average_precision <= m0.average_precision + 1e-12
    if m0.counted_hits:
        assert m1.precision < m0.precision
    d0 = dcg2d(relevance_grid(before, gt, resolve_mask(before, w)), w)
    d1 = dcg2d(relevance_grid(after, gt, resolve_mask(after, w)), w)
    # A new row can beat a far-right cell of an earlier row (key of (n+1, 1) < key of (1, j)),
    # so the kept instance may move left; it never moves to a larger key.
    assert d1 >= d0 - 1e-12
    if all(x == y for x, y in zip(resolve_mask(after, w).kept, resolve_mask(before, w).kept)):
        assert d1 == pytest.approx(d0, abs=1e-12)


def test_appended_duplicate_can_take_over_far_cell():
    page = build_page([[A, B, C]])
    grown = build_page([[A, B, C], [C]])
    assert resolve_mask(grown, W11).kept == ((True, True, False), (True,))
    gt = {C: 1.0}
    assert page_metrics(grown, gt, W11).counted_hits == page_metrics(page, gt, W11).counted_hits == 1
    assert ndcg2d(grown, gt, W11) > ndcg2d(page, gt, W11)


class TestPageSet:
    def test_single_user(self):
        m = evaluate_page_set({7: PAGE}, {7: GT}, W11)
        one = page_metrics(PAGE, GT, W11)
        assert (m.precision, m.average_precision, m.ndcg, m.ndcg2d) == (
            one.precision, one.average_precision, one.ndcg, one.ndcg2d)
        assert m.users == 1

    def test_mean_of_two(self):
        m = evaluate_page_set({0: PAGE, 1: PAGE}, {0: GT, 1: {X: 1.0}}, W11)
        assert m.precision == 0.25

    def test_empty_gt_users_excluded(self):
        m = evaluate_page_set({0: PAGE, 1: PAGE}, {0: GT, 1: {}}, W11)
        assert m.users == 1 and m.precision == 0.5

    def test_no_users(self):
        with pytest.raises(ValueError):
            evaluate_page_set({0: PAGE}, {0: {}}, W11)

    def test_matches_per_user_oracle(self, rng):
        from conftest import random_gt, random_page

        rows = {u: random_page(rng) for u in range(25)}
        gts = {u: random_gt(rng, allow_empty=True) for u in range(25)}
        m = evaluate_page_set({u: as_page(r) for u, r in rows.items()}, gts, W11)
        users = [u for u in gts if gts[u]]
        assert m.users == len(users)
        assert m.average_precision == pytest.approx(
            np.mean([oracles.average_precision(rows[u], gts[u], 1, 1) for u in users]), abs=1e-12)
        assert m.ndcg2d == pytest.approx(np.mean([oracles.ndcg2d(rows[u], gts[u], 1, 1) for u in users]), abs=1e-12)

    def test_order_independent(self, rng):
        from conftest import random_gt, random_page

        pages_ = {u: as_page(random_page(rng)) for u in range(40)}
        gts = {u: random_gt(rng) for u in range(40)}
        a = evaluate_page_set(pages_, gts, W11)
        b = evaluate_page_set(dict(reversed(list(pages_.items()))), dict(reversed(list(gts.items()))), W11)
        assert a == b


def test_page_metrics_is_dataclass_with_bounds():
    m = page_metrics(PAGE, GT, W11)
    assert isinstance(m, PageMetrics)
    assert m.counted_hits == 3
