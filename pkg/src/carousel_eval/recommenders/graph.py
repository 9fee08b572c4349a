"""Random-walk item similarities (P3alpha and RP3beta)."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .knn import SimilarityRecommender
from .similarity import blockwise_topk


def _row_normalize(m: sp.csr_matrix) -> sp.csr_matrix:
    m = sp.csr_matrix(m, dtype=np.float64, copy=True)
    sums = np.asarray(m.sum(axis=1)).ravel()
    inv = np.divide(1.0, sums, out=np.zeros_like(sums), where=sums > 0)
    return sp.csr_matrix(sp.diags(inv) @ m)


def transition_matrices(r, alpha: float) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """(item->user, user->item) transition probabilities raised to ``alpha``.

    Only stored probabilities are exponentiated, so empty rows stay zero
    even for ``alpha = 0``.
    """
    r = sp.csr_matrix(r, dtype=np.float64)
    p_ui = _row_normalize(r)
    p_iu = _row_normalize(r.T.tocsr())
    if alpha != 1:
        p_ui.data = np.power(p_ui.data, alpha)
        p_iu.data = np.power(p_iu.data, alpha)
    return p_iu, p_ui


def p3alpha_similarity(r, alpha: float, k: int) -> sp.csr_matrix:
    p_iu, p_ui = transition_matrices(r, alpha)
    return blockwise_topk(p_iu, p_ui, k)


def rp3beta_similarity(r, alpha: float, beta: float, k: int) -> sp.csr_matrix:
    r = sp.csr_matrix(r)
    p_iu, p_ui = transition_matrices(r, alpha)
    pop = np.bincount(r.indices, minlength=r.shape[1]).astype(np.float64)
    col_scale = np.divide(1.0, np.power(pop, beta), out=np.zeros_like(pop), where=pop > 0)
    return blockwise_topk(p_iu, p_ui, k, transform=lambda block, start: block * col_scale)


class P3alpha(SimilarityRecommender):
    tag = "p3alpha"
    label = "P3alpha"

    def __init__(self, k: int = 100, alpha: float = 1.0, **params):
        if alpha < 0:
            raise ValueError("alpha must be >= 0")
        super().__init__(k=k, alpha=float(alpha), **params)

    def _fit(self, train):
        self.similarity = p3alpha_similarity(train.matrix, self.params["alpha"], self.params["k"])


class RP3beta(SimilarityRecommender):
    tag = "rp3beta"
    label = "RP3beta"

    def __init__(self, k: int = 100, alpha: float = 1.0, beta: float = 0.5, **params):
        if alpha < 0 or beta < 0:
            raise ValueError("alpha and beta must be >= 0")
        super().__init__(k=k, alpha=float(alpha), beta=float(beta), **params)

    def _fit(self, train):
        self.similarity = rp3beta_similarity(train.matrix, self.params["alpha"], self.params["beta"],
                                             self.params["k"])
