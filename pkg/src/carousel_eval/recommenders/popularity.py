from __future__ import annotations

import numpy as np

from .base import Recommender


class TopPop(Recommender):
    """Same list for everyone: items by number of interacting users."""

    tag = "toppop"
    label = "TopPop"
    exclude_seen_default = False

    def _fit(self, train):
        m = train.matrix
        self.popularity = np.bincount(m.indices, minlength=m.shape[1]).astype(np.float64)

    def _score(self, users):
        return np.tile(self.popularity, (len(users), 1))

    def state(self):
        return {"popularity": self.popularity}

    def load_state(self, state):
        self.popularity = np.asarray(state["popularity"], dtype=np.float64)
