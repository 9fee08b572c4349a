"""Sparse similarity construction with per-row top-k truncation."""

from __future__ import annotations

from typing import Callable

import numpy as np
import scipy.sparse as sp


TIE_DECIMALS = 12


def topk_rows(dense: np.ndarray, k: int, row_offset: int = 0) -> sp.csr_matrix:
    """Keep the ``k`` largest entries of each row, ties by smaller column.

    Entries that agree to ``TIE_DECIMALS`` decimals are treated as tied.

    The diagonal of the full matrix (column ``row_offset + r`` for local row
    ``r``) is zeroed first. Zeros are never stored.
    """
    dense = np.array(dense, dtype=np.float64)
    n_rows, n_cols = dense.shape
    r = np.arange(n_rows)
    diag = r + row_offset
    inside = diag < n_cols
    dense[r[inside], diag[inside]] = 0.0
    k = min(k, n_cols)
    # values equal up to rounding noise count as ties, so the smaller column wins
    order = np.argsort(-np.round(dense, TIE_DECIMALS), axis=1, kind="stable")[:, :k]
    vals = np.take_along_axis(dense, order, axis=1)
    keep = vals != 0
    rows = np.repeat(r, k).reshape(n_rows, k)[keep]
    out = sp.csr_matrix((vals[keep], (rows, order[keep])), shape=(n_rows, n_cols))
    out.sort_indices()
    return out


def blockwise_topk(left: sp.csr_matrix, right: sp.csr_matrix, k: int,
                   transform: Callable[[np.ndarray, int], np.ndarray] | None = None,
                   block: int = 512) -> sp.csr_matrix:
    """Row-truncated ``left @ right`` built one row block at a time.

    ``transform(dense_block, start)`` may rescale a block before truncation.
    """
    left = sp.csr_matrix(left)
    right = sp.csr_matrix(right)
    parts = []
    for start in range(0, left.shape[0], block):
        prod = (left[start:start + block] @ right).toarray()
        if transform is not None:
            prod = transform(prod, start)
        parts.append(topk_rows(prod, k, row_offset=start))
    if not parts:
        return sp.csr_matrix((0, right.shape[1]))
    return sp.vstack(parts, format="csr")


def cosine_topk(rows, shrink: float, k: int, block: int = 512) -> sp.csr_matrix:
    """Shrunk cosine similarity between the rows of ``rows``.

    ``s(a, b) = v_a . v_b / (|v_a| |v_b| + shrink)``; zero-norm rows get zero
    similarity to everything.
    """
    if shrink < 0:
        raise ValueError("shrink must be >= 0")
    if k < 1:
        raise ValueError("k must be >= 1")
    x = sp.csr_matrix(rows, dtype=np.float64)
    if x.shape[0] == 0:
        raise ValueError("cosine_topk needs at least one row")
    norms = np.sqrt(np.asarray(x.multiply(x).sum(axis=1)).ravel())

    def scale(prod, start):
        denom = np.outer(norms[start:start + prod.shape[0]], norms) + shrink
        return np.divide(prod, denom, out=np.zeros_like(prod), where=denom > 0)

    return blockwise_topk(x, x.T.tocsr(), k, transform=scale, block=block)
