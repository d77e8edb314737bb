from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .base import Recommender


@dataclass(frozen=True)
class ItemKNNParams:
    k: int = 100
    shrinkage: float = 0.0

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("ItemKNN k must be >= 1")
        if self.shrinkage < 0:
            raise ValueError("ItemKNN shrinkage must be >= 0")


def rating_matrix(dataset, indices) -> sp.csr_matrix:
    idx = np.asarray(indices, dtype=np.int64)
    return sp.csr_matrix(
        (dataset.ratings[idx], (dataset.users[idx], dataset.items[idx])),
        shape=(dataset.n_users, dataset.n_items),
    )


def cosine_similarity(R: sp.csr_matrix, shrinkage: float = 0.0) -> sp.csr_matrix:
    """Shrunk item-item cosine ``r_i.r_j / (|r_i||r_j| + shrinkage)``, zero diagonal."""
    R = sp.csc_matrix(R, dtype=np.float64)
    gram = (R.T @ R).tocoo()
    norms = np.sqrt(np.asarray(R.multiply(R).sum(axis=0)).ravel())
    keep = gram.row != gram.col
    rows, cols, dots = gram.row[keep], gram.col[keep], gram.data[keep]
    denom = norms[rows] * norms[cols] + shrinkage
    with np.errstate(invalid="ignore", divide="ignore"):
        sims = np.where(denom > 0, dots / denom, 0.0)
    S = sp.csr_matrix((sims, (rows, cols)), shape=gram.shape)
    S.sort_indices()
    return S


def keep_top_k(S: sp.csr_matrix, k: int) -> sp.csr_matrix:
    """Per row, keep the ``k`` largest similarities (ties by ascending column)."""
    indptr = [0]
    indices, data = [], []
    for i in range(S.shape[0]):
        lo, hi = S.indptr[i], S.indptr[i + 1]
        cols, vals = S.indices[lo:hi], S.data[lo:hi]
        nz = vals != 0
        cols, vals = cols[nz], vals[nz]
        order = np.lexsort((cols, -vals))[:k]
        chosen = np.sort(order)
        indices.append(cols[chosen])
        data.append(vals[chosen])
        indptr.append(indptr[-1] + chosen.size)
    return sp.csr_matrix(
        (np.concatenate(data) if data else [], np.concatenate(indices) if indices else [], indptr),
        shape=S.shape,
    )


class ItemKNN(Recommender):
    """Item-based collaborative filtering over a top-k cosine neighbourhood.

    ``score(u, i) = sum_{j in history(u), j in nbrs(i)} sim(i, j) * r_uj``.
    """

    name = "itemknn"
    Params = ItemKNNParams

    def _fit(self, dataset, train_indices):
        self.R_ = rating_matrix(dataset, train_indices)
        self.similarity_ = keep_top_k(cosine_similarity(self.R_, self.params.shrinkage), self.params.k)

    def _score_items(self, users, user_features, item_features):
        return np.asarray((self.R_[users] @ self.similarity_.T).todense())

    def _state(self):
        S, R = self.similarity_, self.R_
        return {"sim_data": S.data, "sim_indices": S.indices, "sim_indptr": S.indptr,
                "R_data": R.data, "R_indices": R.indices, "R_indptr": R.indptr}

    def _restore(self, arrays, meta):
        shape_s = (self.n_items, self.n_items)
        self.similarity_ = sp.csr_matrix((arrays["sim_data"], arrays["sim_indices"], arrays["sim_indptr"]), shape=shape_s)
        self.R_ = sp.csr_matrix((arrays["R_data"], arrays["R_indices"], arrays["R_indptr"]),
                                shape=(self.n_users, self.n_items))
