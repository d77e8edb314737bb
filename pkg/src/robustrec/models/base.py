from __future__ import annotations

import dataclasses
import io
import json
from pathlib import Path

import numpy as np

from ..data import Dataset, FeatureTable


def top_k(scores: np.ndarray, candidates: np.ndarray, k: int) -> np.ndarray:
    """The ``k`` best candidates by descending score, ties by ascending code."""
    if k < 1:
        raise ValueError("K must be >= 1")
    candidates = np.asarray(candidates, dtype=np.int64)
    order = np.lexsort((candidates, -np.asarray(scores, dtype=np.float64)))
    return candidates[order[:k]]


class Recommender:
    """Common fit/score/rank surface.

    Entities are addressed by integer codes of the dataset the model was fit
    on. Feature tables are looked up at scoring time, so passing perturbed
    tables to :meth:`score_pairs` or :meth:`score_items` changes the output
    of models that use features and leaves the others untouched.
    """

    name = "base"
    uses_features = False
    Params = None

    def __init__(self, params=None, **overrides):
        if params is None:
            params = self.Params(**overrides)
        elif overrides:
            params = dataclasses.replace(params, **overrides)
        self.params = params
        self.seed = None
        self.n_users = self.n_items = None

    # subclasses implement _fit, _score_pairs, _score_items, _state/_restore

    def fit(self, dataset: Dataset, train_indices, seed: int = 0):
        train_indices = np.asarray(train_indices, dtype=np.int64)
        if train_indices.size == 0:
            raise ValueError(f"{self.name}: empty training set")
        self.seed = int(seed)
        self.n_users, self.n_items = dataset.n_users, dataset.n_items
        self._user_features = dataset.user_features
        self._item_features = dataset.item_features
        self._fit(dataset, train_indices)
        return self

    def _tables(self, user_features, item_features):
        return (self._user_features if user_features is None else user_features,
                self._item_features if item_features is None else item_features)

    def score_pairs(self, users, items, user_features: FeatureTable | None = None,
                    item_features: FeatureTable | None = None) -> np.ndarray:
        users = np.asarray(users, dtype=np.int64)
        items = np.asarray(items, dtype=np.int64)
        return self._score_pairs(users, items, *self._tables(user_features, item_features))

    def score_items(self, users, user_features=None, item_features=None) -> np.ndarray:
        """Score matrix of shape ``(len(users), n_items)``."""
        users = np.asarray(users, dtype=np.int64)
        return self._score_items(users, *self._tables(user_features, item_features))

    def score(self, user: int, item: int, user_features=None, item_features=None) -> float:
        return float(self.score_pairs([user], [item], user_features, item_features)[0])

    def rank(self, user: int, candidates, k: int, user_features=None, item_features=None) -> list[int]:
        candidates = np.asarray(candidates, dtype=np.int64)
        if candidates.size == 0:
            return []
        scores = self.score_items([user], user_features, item_features)[0][candidates]
        return top_k(scores, candidates, k).tolist()

    def _score_pairs(self, users, items, user_features, item_features):
        full = self._score_items(np.unique(users), user_features, item_features)
        rows = np.searchsorted(np.unique(users), users)
        return full[rows, items]

    # ------------------------------------------------------------ checkpoints

    def _state(self) -> dict:
        raise NotImplementedError

    def _restore(self, arrays: dict, meta: dict):
        raise NotImplementedError

    def save(self, path):
        """Write hyperparameters, seed and parameters to an ``.npz`` archive."""
        arrays = self._state()
        meta = {
            "model": self.name,
            "params": dataclasses.asdict(self.params),
            "seed": self.seed,
            "n_users": self.n_users,
            "n_items": self.n_items,
            "extra": arrays.pop("__meta__", {}),
        }
        buf = io.BytesIO()
        np.savez(buf, __meta__=np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8), **arrays)
        Path(path).write_bytes(buf.getvalue())

    def parameters(self) -> dict:
        state = self._state()
        state.pop("__meta__", None)
        return state


def load_model(path, dataset: Dataset | None = None):
    """Restore a model written by :meth:`Recommender.save`.

    Feature-aware models need ``dataset`` for default feature tables at
    scoring time; others ignore it.
    """
    from . import MODELS

    with np.load(path, allow_pickle=False) as npz:
        meta = json.loads(npz["__meta__"].tobytes().decode())
        arrays = {k: npz[k] for k in npz.files if k != "__meta__"}
    cls = MODELS[meta["model"]]
    model = cls(cls.Params(**meta["params"]))
    model.seed = meta["seed"]
    model.n_users, model.n_items = meta["n_users"], meta["n_items"]
    model._user_features = dataset.user_features if dataset is not None else FeatureTable.empty()
    model._item_features = dataset.item_features if dataset is not None else FeatureTable.empty()
    model._restore(arrays, meta["extra"])
    return model
