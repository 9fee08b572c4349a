"""Domain types shared across the package.

Indices are dense and 0-based everywhere in storage. Metric formulas use
1-based (row, column) cell coordinates; the conversion happens inside
:mod:`carousel_eval.metrics` and nowhere else.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
import scipy.sparse as sp

# Occupies a page cell without ever being relevant. Used for the empty
# candidate row of the carousel baseline and for degenerate recommendations.
PLACEHOLDER = -1


class MalformedCarouselError(ValueError):
    """A carousel or page violates its structural invariants."""


def _checked_csr(rows, cols, values, shape, what: str, strictly_positive: bool) -> sp.csr_matrix:
    rows = np.asarray(rows, dtype=np.int64)
    cols = np.asarray(cols, dtype=np.int64)
    values = np.asarray(values, dtype=np.float64)
    if not (rows.shape == cols.shape == values.shape):
        raise ValueError(f"{what}: rows, cols and values must have equal length")
    n_rows, n_cols = shape
    if rows.size:
        if rows.min() < 0 or rows.max() >= n_rows:
            raise ValueError(f"{what}: row index out of bounds for {n_rows} rows")
        if cols.min() < 0 or cols.max() >= n_cols:
            raise ValueError(f"{what}: column index out of bounds for {n_cols} columns")
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{what}: values must be finite")
    if strictly_positive and np.any(values <= 0):
        raise ValueError(f"{what}: stored values must be > 0")
    if not strictly_positive and np.any(values < 0):
        raise ValueError(f"{what}: stored values must be >= 0")
    keys = rows * n_cols + cols
    if np.unique(keys).size != keys.size:
        raise ValueError(f"{what}: duplicate (row, column) pairs")
    m = sp.csr_matrix((values, (rows, cols)), shape=(n_rows, n_cols))
    m.eliminate_zeros()
    m.sort_indices()
    return m


@dataclass(frozen=True, eq=False)
class InteractionMatrix:
    """Sparse user x item feedback matrix.

    Zero entries are absent, never stored. Build from triples with
    :meth:`from_triples` to get the duplicate and bounds checks.
    """

    matrix: sp.csr_matrix

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=np.float64)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        if m.nnz and m.data.min() <= 0:
            raise ValueError("InteractionMatrix values must be > 0")
        object.__setattr__(self, "matrix", m)

    @classmethod
    def from_triples(cls, users, items, values, num_users: int, num_items: int) -> "InteractionMatrix":
        return cls(_checked_csr(users, items, values, (num_users, num_items), "InteractionMatrix", True))

    @property
    def num_users(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_items(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz

    def triples(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(users, items, values) in row-major order."""
        coo = self.matrix.tocoo()
        return coo.row.astype(np.int64), coo.col.astype(np.int64), coo.data.copy()

    def binarized(self) -> "InteractionMatrix":
        m = self.matrix.copy()
        m.data[:] = 1.0
        return InteractionMatrix(m)

    def user_items(self, user: int) -> np.ndarray:
        m = self.matrix
        return m.indices[m.indptr[user]:m.indptr[user + 1]]

    def __len__(self) -> int:
        return self.nnz


@dataclass(frozen=True, eq=False)
class FeatureMatrix:
    """Sparse entity x feature weights, e.g. item genres or tags."""

    matrix: sp.csr_matrix
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        m = sp.csr_matrix(self.matrix, dtype=np.float64)
        m.sum_duplicates()
        m.eliminate_zeros()
        m.sort_indices()
        if m.nnz and m.data.min() < 0:
            raise ValueError("FeatureMatrix weights must be >= 0")
        if self.labels and len(self.labels) != m.shape[1]:
            raise ValueError("one label per feature column required")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(self.labels))

    @classmethod
    def from_triples(cls, entities, features, weights, num_entities: int, num_features: int,
                     labels: Sequence[str] = ()) -> "FeatureMatrix":
        m = _checked_csr(entities, features, weights, (num_entities, num_features), "FeatureMatrix", False)
        return cls(m, tuple(labels))

    @property
    def num_entities(self) -> int:
        return self.matrix.shape[0]

    @property
    def num_features(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: InteractionMatrix
    validation: InteractionMatrix
    test: InteractionMatrix
    seed: int

    def __post_init__(self):
        shapes = {self.train.matrix.shape, self.validation.matrix.shape, self.test.matrix.shape}
        if len(shapes) != 1:
            raise ValueError(f"split parts must share one index space, got shapes {sorted(shapes)}")

    @property
    def num_users(self) -> int:
        return self.train.num_users

    @property
    def num_items(self) -> int:
        return self.train.num_items

    def parts(self) -> dict[str, InteractionMatrix]:
        return {"train": self.train, "validation": self.validation, "test": self.test}


@dataclass(frozen=True)
class DiscountWeights:
    """Row and column weights of the two-dimensional position discount."""

    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        # alpha, beta >= 1 keeps every discount argument >= 2, so log2 >= 1.
        if not (self.alpha >= 1 and self.beta >= 1):
            raise ValueError(f"discount weights must be >= 1, got alpha={self.alpha}, beta={self.beta}")


def cell_key(i: int, j: int, w: DiscountWeights) -> float:
    """Discount argument ``alpha*i + beta*j`` of 1-based cell (i, j)."""
    return w.alpha * i + w.beta * j


@dataclass(frozen=True)
class Carousel:
    items: tuple[int, ...]
    provider_name: str = ""
    truncated: bool = field(default=False, compare=False)  # fewer candidates than requested

    def __post_init__(self):
        items = tuple(int(x) for x in self.items)
        if not items:
            raise MalformedCarouselError(f"carousel {self.provider_name!r} is empty")
        real = [x for x in items if x != PLACEHOLDER]
        if len(set(real)) != len(real):
            seen, dup = set(), None
            for x in real:
                if x in seen:
                    dup = x
                    break
                seen.add(x)
            raise MalformedCarouselError(f"carousel {self.provider_name!r} repeats item {dup}")
        object.__setattr__(self, "items", items)

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class CarouselPage:
    """Rows of carousels as shown to one user, row 0 on top.

    Rows may differ in length. Cells beyond a row's end up to
    :attr:`max_length` are padding: never occupied, never relevant.
    """

    rows: tuple[Carousel, ...]
    max_length: int = field(init=False)

    def __post_init__(self):
        rows = tuple(self.rows)
        if not rows:
            raise MalformedCarouselError("a page needs at least one carousel")
        object.__setattr__(self, "rows", rows)
        object.__setattr__(self, "max_length", max(len(r) for r in rows))

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def row_lengths(self) -> tuple[int, ...]:
        return tuple(len(r) for r in self.rows)

    @property
    def n_occupied(self) -> int:
        return sum(self.row_lengths)

    def item_lists(self) -> list[list[int]]:
        return [list(r.items) for r in self.rows]


def build_page(carousels: Iterable[Carousel | Sequence[int]]) -> CarouselPage:
    """Stack carousels into a page, preserving order and cross-row duplicates.

    Plain item sequences are accepted and wrapped into unnamed carousels.
    """
    rows = []
    for c in carousels:
        rows.append(c if isinstance(c, Carousel) else Carousel(tuple(c)))
    return CarouselPage(tuple(rows))


# Per-user relevance judgements: user -> {item: relevance > 0}.
GroundTruth = Mapping[int, Mapping[int, float]]


def ground_truth_from_matrix(matrix: InteractionMatrix, graded: bool = False) -> dict[int, dict[int, float]]:
    """Ground truth of every user with at least one interaction.

    Binary mode assigns relevance 1.0 to each stored entry; graded mode keeps
    the stored value.
    """
    m = matrix.matrix
    gt: dict[int, dict[int, float]] = {}
    for u in range(m.shape[0]):
        lo, hi = m.indptr[u], m.indptr[u + 1]
        if lo == hi:
            continue
        items = m.indices[lo:hi].tolist()
        rels = m.data[lo:hi].tolist() if graded else [1.0] * (hi - lo)
        gt[u] = dict(zip(items, rels))
    return gt
