from __future__ import annotations

import inspect
from typing import Any, ClassVar, Iterable

import numpy as np

from ..core import PLACEHOLDER, Carousel, InteractionMatrix


class UnknownUserError(IndexError):
    pass


class Recommender:
    """Common train/score/recommend surface of every model.

    Subclasses implement :meth:`_fit` and :meth:`_score`; scores are dense
    ``len(users) x num_items`` float arrays. ``state`` / ``from_state``
    feed the binary container in :mod:`carousel_eval.recommenders.persistence`.
    """

    tag: ClassVar[str] = ""
    label: ClassVar[str] = ""
    exclude_seen_default: ClassVar[bool] = True

    def __init__(self, **params: Any):
        self.params = dict(params)
        self.train: InteractionMatrix | None = None

    @classmethod
    def param_names(cls) -> set[str]:
        """Hyperparameters accepted by the constructor chain (feature inputs excluded)."""
        names = set()
        for klass in cls.__mro__:
            init = klass.__dict__.get("__init__")
            if init is None:
                continue
            for p in inspect.signature(init).parameters.values():
                if p.kind not in (p.VAR_KEYWORD, p.VAR_POSITIONAL) and p.name != "self":
                    names.add(p.name)
        return names - {"item_features", "user_features"}

    def fit(self, train: InteractionMatrix) -> "Recommender":
        if train.nnz == 0:
            raise ValueError(f"{self.label}: cannot fit on an empty matrix")
        self.train = train
        self._fit(train)
        return self

    def _fit(self, train: InteractionMatrix) -> None:
        raise NotImplementedError

    def _score(self, users: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def score(self, users: Iterable[int]) -> np.ndarray:
        if self.train is None:
            raise RuntimeError(f"{self.label} is not trained")
        users = np.asarray(list(users) if not isinstance(users, np.ndarray) else users, dtype=np.int64)
        if users.size and (users.min() < 0 or users.max() >= self.train.num_users):
            bad = users[(users < 0) | (users >= self.train.num_users)][0]
            raise UnknownUserError(f"unknown user index {bad}")
        return np.asarray(self._score(users), dtype=np.float64)

    def state(self) -> dict[str, np.ndarray]:
        raise NotImplementedError

    def load_state(self, state: dict[str, np.ndarray]) -> None:
        raise NotImplementedError

    def __repr__(self):
        return f"{type(self).__name__}({', '.join(f'{k}={v!r}' for k, v in sorted(self.params.items()))})"


def top_n(scores: np.ndarray, n: int, seen: np.ndarray | None = None) -> tuple[list[int], bool]:
    """Indices of the ``n`` best scores, ties by ascending index.

    Items in ``seen`` are scored -inf and never returned. The flag is True
    when fewer than ``n`` items were eligible.
    """
    scores = np.array(scores, dtype=np.float64)
    if seen is not None and len(seen):
        scores[seen] = -np.inf
    # a stable sort keeps ascending index order among equal scores
    order = np.argsort(-scores, kind="stable")
    order = order[scores[order] > -np.inf]
    picked = order[:n].tolist()
    return picked, len(picked) < n


def recommend(model: Recommender, user: int, n: int, exclude_seen: bool | None = None,
              train: InteractionMatrix | None = None) -> Carousel:
    return recommend_batch(model, [user], n, exclude_seen, train)[user]


def recommend_batch(model: Recommender, users: Iterable[int], n: int, exclude_seen: bool | None = None,
                    train: InteractionMatrix | None = None, block: int = 1024) -> dict[int, Carousel]:
    """Top-n carousel per user.

    A user with fewer than ``n`` eligible items gets a shorter, ``truncated``
    carousel; with none at all, a single placeholder cell.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if exclude_seen is None:
        exclude_seen = model.exclude_seen_default
    train = train if train is not None else model.train
    users = list(users)
    out: dict[int, Carousel] = {}
    for start in range(0, len(users), block):
        chunk = users[start:start + block]
        scores = model.score(chunk)
        for row, u in enumerate(chunk):
            seen = train.user_items(u) if exclude_seen else None
            items, short = top_n(scores[row], n, seen)
            out[u] = Carousel(tuple(items) if items else (PLACEHOLDER,), model.label, truncated=short)
    return out
