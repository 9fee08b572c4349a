"""Duplicate-aware accuracy and ranking metrics for carousel pages.

Cell coordinates passed to and returned from this module's discount
functions are 1-based ``(i, j)`` = (row, column), matching the DCG
formulas. Page storage (``page.rows[r].items[c]``) stays 0-based; a stored
cell ``(r, c)`` has 1-based coordinates ``(r + 1, c + 1)``.

An item repeated across carousels counts only once, at its occurrence
with the smallest discount argument ``alpha*i + beta*j``; ties go to the
smaller row, then the smaller column. Every other occurrence still
occupies its cell but is never relevant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Mapping, Sequence

import numpy as np

from .core import PLACEHOLDER, CarouselPage, DiscountWeights, cell_key


@dataclass(frozen=True)
class InstanceMask:
    """``kept[r][c]`` is True for the single counted occurrence of an item."""

    kept: tuple[tuple[bool, ...], ...]

    def is_kept(self, r: int, c: int) -> bool:
        return self.kept[r][c]


@dataclass(frozen=True)
class PageMetrics:
    precision: float
    average_precision: float
    ndcg: float
    ndcg2d: float
    counted_hits: float
    users: int = 1


def _occupied_cells(row_lengths: Sequence[int], w: DiscountWeights) -> list[tuple[float, int, int]]:
    # 1-based coordinates, visiting order: ascending key, then row, then column
    cells = [(cell_key(i + 1, j + 1, w), i + 1, j + 1)
             for i, n in enumerate(row_lengths) for j in range(n)]
    cells.sort()
    return cells


def resolve_mask(page: CarouselPage, w: DiscountWeights) -> InstanceMask:
    kept = [[False] * len(row) for row in page.rows]
    seen: set[int] = set()
    for _, i, j in _occupied_cells(page.row_lengths, w):
        item = page.rows[i - 1].items[j - 1]
        if item == PLACEHOLDER or item in seen:
            continue
        seen.add(item)
        kept[i - 1][j - 1] = True
    return InstanceMask(tuple(tuple(r) for r in kept))


def relevance_grid(page: CarouselPage, gt: Mapping[int, float], mask: InstanceMask) -> np.ndarray:
    """Dense ``n_rows x max_length`` relevance array; padding and masked cells are 0."""
    grid = np.zeros((page.n_rows, page.max_length))
    if not gt:
        return grid
    for r, row in enumerate(page.rows):
        for c, item in enumerate(row.items):
            if mask.kept[r][c]:
                grid[r, c] = gt.get(item, 0.0)
    return grid


def _discount_args(shape: tuple[int, int], w: DiscountWeights) -> np.ndarray:
    i = np.arange(1, shape[0] + 1, dtype=np.float64)[:, None]
    j = np.arange(1, shape[1] + 1, dtype=np.float64)[None, :]
    return w.alpha * i + w.beta * j


def dcg2d(grid: np.ndarray, w: DiscountWeights) -> float:
    grid = np.asarray(grid, dtype=np.float64)
    if grid.size == 0:
        return 0.0
    gains = np.exp2(grid) - 1.0
    return float(np.sum(gains / np.log2(_discount_args(grid.shape, w))))


def idcg2d(relevances, rows: int, row_lengths: Sequence[int], w: DiscountWeights) -> float:
    """DCG2D of the best possible assignment of ``relevances`` to occupied cells."""
    if len(row_lengths) != rows:
        raise ValueError(f"{len(row_lengths)} row lengths given for {rows} rows")
    rels = sorted((float(r) for r in relevances), reverse=True)
    cells = _occupied_cells(row_lengths, w)
    return math.fsum((2.0 ** rel - 1.0) / math.log2(key) for rel, (key, _, _) in zip(rels, cells))


def ndcg2d(page: CarouselPage, gt: Mapping[int, float], w: DiscountWeights) -> float:
    if not gt:
        return 0.0
    mask = resolve_mask(page, w)
    ideal = idcg2d(gt.values(), page.n_rows, page.row_lengths, w)
    if ideal <= 0:
        return 0.0
    return dcg2d(relevance_grid(page, gt, mask), w) / ideal


def concat_order(page: CarouselPage, mask: InstanceMask) -> list[tuple[int, bool, int]]:
    """Row-major ``(item, kept, position)`` over occupied cells, positions from 1."""
    out = []
    pos = 0
    for r, row in enumerate(page.rows):
        for c, item in enumerate(row.items):
            pos += 1
            out.append((item, mask.kept[r][c], pos))
    return out


def _hit_relevances(page: CarouselPage, gt: Mapping[int, float], mask: InstanceMask) -> list[float]:
    # relevance per concatenated position; masked and unknown items give 0
    return [gt.get(item, 0.0) if kept else 0.0 for item, kept, _ in concat_order(page, mask)]


def _precision(rels: list[float]) -> float:
    return sum(1 for r in rels if r > 0) / len(rels)


def _average_precision(rels: list[float], n_relevant: int) -> float:
    hits = 0
    total = 0.0
    for k, r in enumerate(rels, start=1):
        if r > 0:
            hits += 1
            total += hits / k
    return total / min(n_relevant, len(rels))


def _ndcg(rels: list[float], gt: Mapping[int, float]) -> float:
    dcg = math.fsum((2.0 ** r - 1.0) / math.log2(k + 1) for k, r in enumerate(rels, start=1) if r > 0)
    ideal_rels = sorted(gt.values(), reverse=True)[:len(rels)]
    idcg = math.fsum((2.0 ** r - 1.0) / math.log2(k + 1) for k, r in enumerate(ideal_rels, start=1))
    return dcg / idcg if idcg > 0 else 0.0


def precision_page(page: CarouselPage, gt: Mapping[int, float], w: DiscountWeights) -> float:
    if not gt:
        return 0.0
    return _precision(_hit_relevances(page, gt, resolve_mask(page, w)))


def average_precision_page(page: CarouselPage, gt: Mapping[int, float], w: DiscountWeights) -> float:
    """AP over the row-major concatenation, normalised by ``min(|gt|, occupied cells)``."""
    if not gt:
        return 0.0
    return _average_precision(_hit_relevances(page, gt, resolve_mask(page, w)), len(gt))


def ndcg_page(page: CarouselPage, gt: Mapping[int, float], w: DiscountWeights) -> float:
    if not gt:
        return 0.0
    return _ndcg(_hit_relevances(page, gt, resolve_mask(page, w)), gt)


def page_metrics(page: CarouselPage, gt: Mapping[int, float], w: DiscountWeights) -> PageMetrics:
    """All metrics of one page, sharing a single duplicate mask."""
    if not gt:
        return PageMetrics(0.0, 0.0, 0.0, 0.0, 0)
    mask = resolve_mask(page, w)
    rels = _hit_relevances(page, gt, mask)
    ideal = idcg2d(gt.values(), page.n_rows, page.row_lengths, w)
    n2d = dcg2d(relevance_grid(page, gt, mask), w) / ideal if ideal > 0 else 0.0
    return PageMetrics(
        precision=_precision(rels),
        average_precision=_average_precision(rels, len(gt)),
        ndcg=_ndcg(rels, gt),
        ndcg2d=n2d,
        counted_hits=sum(1 for r in rels if r > 0),
    )


def mean_metrics(per_user: Sequence[PageMetrics]) -> PageMetrics:
    """Arithmetic mean; fsum makes the result independent of summation order."""
    if not per_user:
        raise ValueError("no users to average over")
    n = len(per_user)
    values = {f.name: math.fsum(getattr(m, f.name) for m in per_user) / n
              for f in fields(PageMetrics) if f.name != "users"}
    return PageMetrics(**values, users=n)


def evaluate_page_set(pages: Mapping[int, CarouselPage], gt: Mapping[int, Mapping[int, float]],
                      w: DiscountWeights) -> PageMetrics:
    """Mean metrics over users that have both a page and non-empty ground truth."""
    users = sorted(u for u, g in gt.items() if g and u in pages)
    if not users:
        raise ValueError("no user with a page and non-empty ground truth")
    return mean_metrics([page_metrics(pages[u], gt[u], w) for u in users])
