"""Baseline recommenders used to fill carousels."""

from __future__ import annotations

from ..core import FeatureMatrix
from .base import Recommender, UnknownUserError, recommend, recommend_batch, top_n
from .graph import P3alpha, RP3beta, p3alpha_similarity, rp3beta_similarity
from .knn import (ItemKNNCBF, ItemKNNCF, ItemKNNCFCBF, SimilarityRecommender, UserKNNCBF, UserKNNCF,
                  UserKNNCFCBF)
from .linear import EASER, NumericalError, PureSVD, ease_weights, randomized_svd
from .persistence import load_model, save_model
from .popularity import TopPop
from .similarity import cosine_topk

ALGORITHMS: dict[str, type[Recommender]] = {
    cls.tag: cls
    for cls in (TopPop, ItemKNNCF, UserKNNCF, ItemKNNCBF, UserKNNCBF, ItemKNNCFCBF, UserKNNCFCBF,
                P3alpha, RP3beta, EASER, PureSVD)
}

_ITEM_FEATURES = {"itemknn_cbf", "itemknn_cfcbf"}
_USER_FEATURES = {"userknn_cbf", "userknn_cfcbf"}


def needs_features(tag: str) -> str | None:
    if tag in _ITEM_FEATURES:
        return "item"
    if tag in _USER_FEATURES:
        return "user"
    return None


def make_model(tag: str, params: dict | None = None, item_features: FeatureMatrix | None = None,
               user_features: FeatureMatrix | None = None) -> Recommender:
    try:
        cls = ALGORITHMS[tag]
    except KeyError:
        raise ValueError(f"unknown algorithm {tag!r}; known: {', '.join(ALGORITHMS)}") from None
    params = dict(params or {})
    unknown = sorted(set(params) - cls.param_names())
    if unknown:
        raise ValueError(f"{tag}: unknown hyperparameter(s) {', '.join(unknown)}")
    kind = needs_features(tag)
    if kind == "item":
        params["item_features"] = item_features
    elif kind == "user":
        params["user_features"] = user_features
    return cls(**params)


__all__ = [
    "ALGORITHMS", "EASER", "ItemKNNCBF", "ItemKNNCF", "ItemKNNCFCBF", "NumericalError", "P3alpha", "PureSVD",
    "RP3beta", "Recommender", "SimilarityRecommender", "TopPop", "UnknownUserError", "UserKNNCBF", "UserKNNCF",
    "UserKNNCFCBF", "cosine_topk", "ease_weights", "load_model", "make_model", "needs_features",
    "p3alpha_similarity", "randomized_svd", "recommend", "recommend_batch", "rp3beta_similarity", "save_model",
    "top_n",
]
