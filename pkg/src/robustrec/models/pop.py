from dataclasses import dataclass

import numpy as np

from .base import Recommender


@dataclass(frozen=True)
class PopParams:
    pass


class Pop(Recommender):
    """Item popularity: train interaction count over the largest count."""

    name = "pop"
    Params = PopParams

    def _fit(self, dataset, train_indices):
        counts = np.bincount(dataset.items[train_indices], minlength=dataset.n_items).astype(np.float64)
        self.item_scores_ = counts / counts.max()

    def _score_items(self, users, user_features, item_features):
        return np.tile(self.item_scores_, (len(users), 1))

    def _score_pairs(self, users, items, user_features, item_features):
        return self.item_scores_[items].copy()

    def _state(self):
        return {"item_scores": self.item_scores_}

    def _restore(self, arrays, meta):
        self.item_scores_ = arrays["item_scores"]
