"""Nearest-neighbour models on collaborative, content or concatenated vectors."""

from __future__ import annotations

import scipy.sparse as sp

from ..core import FeatureMatrix
from .base import Recommender
from .similarity import cosine_topk


class SimilarityRecommender(Recommender):
    """Scores from a row-truncated similarity matrix.

    Item-based: ``score(u) = r_u @ S``. User-based:
    ``score(u) = sum_v S[u, v] * r_v``.
    """

    orientation = "item"

    def __init__(self, k: int = 100, **params):
        if int(k) < 1:
            raise ValueError("k must be >= 1")
        super().__init__(k=int(k), **params)

    def _score(self, users):
        r = self.train.matrix
        if self.orientation == "item":
            return (r[users] @ self.similarity).toarray()
        return (self.similarity[users] @ r).toarray()

    def state(self):
        return {"similarity": self.similarity}

    def load_state(self, state):
        self.similarity = sp.csr_matrix(state["similarity"])


class CosineKNN(SimilarityRecommender):
    """Shrunk cosine similarity over the vectors returned by :meth:`_vectors`."""

    def __init__(self, k: int = 100, shrink: float = 10.0, **params):
        if shrink < 0:
            raise ValueError("shrink must be >= 0")
        super().__init__(k=k, shrink=float(shrink), **params)

    def _vectors(self, train) -> sp.csr_matrix:
        raise NotImplementedError

    def _fit(self, train):
        self.similarity = cosine_topk(self._vectors(train), self.params["shrink"], self.params["k"])


def _features(model: Recommender, features: FeatureMatrix | None, n: int, what: str) -> sp.csr_matrix:
    if features is None:
        raise ValueError(f"{model.label} needs {what} features")
    if features.num_entities != n:
        raise ValueError(f"{model.label}: {what} features cover {features.num_entities} rows, expected {n}")
    return features.matrix


class ItemKNNCF(CosineKNN):
    tag = "itemknn_cf"
    label = "ItemKNN CF"

    def _vectors(self, train):
        return train.matrix.T.tocsr()


class UserKNNCF(CosineKNN):
    tag = "userknn_cf"
    label = "UserKNN CF"
    orientation = "user"

    def _vectors(self, train):
        return train.matrix


class ItemKNNCBF(CosineKNN):
    tag = "itemknn_cbf"
    label = "ItemKNN CBF"

    def __init__(self, item_features: FeatureMatrix | None = None, **params):
        super().__init__(**params)
        self.item_features = item_features

    def _vectors(self, train):
        return _features(self, self.item_features, train.num_items, "item")


class UserKNNCBF(CosineKNN):
    tag = "userknn_cbf"
    label = "UserKNN CBF"
    orientation = "user"

    def __init__(self, user_features: FeatureMatrix | None = None, **params):
        super().__init__(**params)
        self.user_features = user_features

    def _vectors(self, train):
        return _features(self, self.user_features, train.num_users, "user")


class ItemKNNCFCBF(CosineKNN):
    """Item vectors: interaction column next to ``content_weight`` x features."""

    tag = "itemknn_cfcbf"
    label = "ItemKNN CFCBF"

    def __init__(self, item_features: FeatureMatrix | None = None, content_weight: float = 1.0, **params):
        if content_weight < 0:
            raise ValueError("content_weight must be >= 0")
        super().__init__(content_weight=float(content_weight), **params)
        self.item_features = item_features

    def _vectors(self, train):
        f = _features(self, self.item_features, train.num_items, "item")
        return sp.hstack([train.matrix.T, self.params["content_weight"] * f], format="csr")


class UserKNNCFCBF(CosineKNN):
    tag = "userknn_cfcbf"
    label = "UserKNN CFCBF"
    orientation = "user"

    def __init__(self, user_features: FeatureMatrix | None = None, content_weight: float = 1.0, **params):
        if content_weight < 0:
            raise ValueError("content_weight must be >= 0")
        super().__init__(content_weight=float(content_weight), **params)
        self.user_features = user_features

    def _vectors(self, train):
        f = _features(self, self.user_features, train.num_users, "user")
        return sp.hstack([train.matrix, self.params["content_weight"] * f], format="csr")
