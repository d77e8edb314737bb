import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..rng import Rng, next_bounded
from .base import Recommender

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class BPRParams:
    factors: int = 64
    learning_rate: float = 0.01
    l2: float = 1e-4
    epochs: int = 30
    negatives_per_positive: int = 1
    positive_threshold: float = 4.0

    def __post_init__(self):
        if self.factors < 1 or self.negatives_per_positive < 1:
            raise ValueError("BPR factors and negatives_per_positive must be >= 1")
        if self.epochs < 0:
            raise ValueError("BPR epochs must be >= 0")
        if self.learning_rate <= 0 or self.l2 < 0:
            raise ValueError("BPR needs learning_rate > 0 and l2 >= 0")


@njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def bpr_triple_grad(P, Q, b, u, i, j, l2, g_pu, g_qi, g_qj):
    """Gradient of ``-ln sigmoid(x_uij) + l2/2 * |touched params|^2`` for one triple.

    Fills ``g_pu``, ``g_qi``, ``g_qj`` and returns the item-bias gradients.
    """
    x = b[i] - b[j]
    for f in range(P.shape[1]):
        x += P[u, f] * (Q[i, f] - Q[j, f])
    g = _sigmoid(-x)
    for f in range(P.shape[1]):
        g_pu[f] = -g * (Q[i, f] - Q[j, f]) + l2 * P[u, f]
        g_qi[f] = -g * P[u, f] + l2 * Q[i, f]
        g_qj[f] = g * P[u, f] + l2 * Q[j, f]
    return -g + l2 * b[i], g + l2 * b[j]


@njit(cache=True)
def bpr_batch_grad(P, Q, b, triples, l2):
    gP = np.zeros_like(P)
    gQ = np.zeros_like(Q)
    gb = np.zeros_like(b)
    k = P.shape[1]
    g_pu = np.empty(k)
    g_qi = np.empty(k)
    g_qj = np.empty(k)
    for t in range(triples.shape[0]):
        u, i, j = triples[t, 0], triples[t, 1], triples[t, 2]
        gbi, gbj = bpr_triple_grad(P, Q, b, u, i, j, l2, g_pu, g_qi, g_qj)
        gP[u] += g_pu
        gQ[i] += g_qi
        gQ[j] += g_qj
        gb[i] += gbi
        gb[j] += gbj
    return gP, gQ, gb


def bpr_loss(P, Q, b, triples, l2):
    """Summed per-triple BPR objective, evaluated directly (no gradient code)."""
    u, i, j = triples[:, 0], triples[:, 1], triples[:, 2]
    x = b[i] - b[j] + np.einsum("tf,tf->t", P[u], Q[i] - Q[j])
    reg = (P[u] ** 2).sum(1) + (Q[i] ** 2).sum(1) + (Q[j] ** 2).sum(1) + b[i] ** 2 + b[j] ** 2
    return float(np.sum(np.logaddexp(0.0, -x)) + 0.5 * l2 * reg.sum())


@njit(cache=True)
def _is_positive(pos_items, lo, hi, j):
    end = hi
    while lo < hi:
        mid = (lo + hi) // 2
        if pos_items[mid] < j:
            lo = mid + 1
        else:
            hi = mid
    return lo < end and pos_items[lo] == j


@njit(cache=True)
def _bpr_epoch(P, Q, b, pos_users, pos_items, indptr, lr, l2, n_neg, state):
    n_items = Q.shape[0]
    k = P.shape[1]
    g_pu = np.empty(k)
    g_qi = np.empty(k)
    g_qj = np.empty(k)
    n = pos_users.shape[0]
    for _ in range(n):
        t = next_bounded(state, n)
        u = pos_users[t]
        i = pos_items[t]
        lo, hi = indptr[u], indptr[u + 1]
        if hi - lo >= n_items:
            continue
        for _ in range(n_neg):
            j = next_bounded(state, n_items)
            while _is_positive(pos_items, lo, hi, j):
                j = next_bounded(state, n_items)
            gbi, gbj = bpr_triple_grad(P, Q, b, u, i, j, l2, g_pu, g_qi, g_qj)
            for f in range(k):
                P[u, f] -= lr * g_pu[f]
                Q[i, f] -= lr * g_qi[f]
                Q[j, f] -= lr * g_qj[f]
            b[i] -= lr * gbi
            b[j] -= lr * gbj


@njit(cache=True)
def _mf_scores(P, Q, b, users):
    out = np.empty((users.shape[0], Q.shape[0]))
    for r in range(users.shape[0]):
        u = users[r]
        for i in range(Q.shape[0]):
            s = b[i]
            for f in range(P.shape[1]):
                s += P[u, f] * Q[i, f]
            out[r, i] = s
    return out


@njit(cache=True)
def _mf_pair_scores(P, Q, b, users, items):
    out = np.empty(users.shape[0])
    for r in range(users.shape[0]):
        s = b[items[r]]
        for f in range(P.shape[1]):
            s += P[users[r], f] * Q[items[r], f]
        out[r] = s
    return out


class BPRMF(Recommender):
    """Matrix factorisation trained with the BPR pairwise loss.

    Positives are train interactions rated at or above
    ``positive_threshold``. Each epoch draws as many positive pairs as there
    are positives; each is paired with ``negatives_per_positive`` items
    outside the user's positive set.
    """

    name = "bpr"
    Params = BPRParams

    def _fit(self, dataset, train_indices):
        p = self.params
        rng = Rng(self.seed)
        self.user_factors_ = rng.uniform(-0.01, 0.01, dataset.n_users * p.factors).reshape(dataset.n_users, p.factors)
        self.item_factors_ = rng.uniform(-0.01, 0.01, dataset.n_items * p.factors).reshape(dataset.n_items, p.factors)
        self.item_bias_ = np.zeros(dataset.n_items)

        pos = train_indices[dataset.ratings[train_indices] >= p.positive_threshold]
        pairs = np.unique(np.stack([dataset.users[pos], dataset.items[pos]], axis=1), axis=0)
        pos_users = np.ascontiguousarray(pairs[:, 0])
        pos_items = np.ascontiguousarray(pairs[:, 1])
        indptr = np.searchsorted(pos_users, np.arange(dataset.n_users + 1)).astype(np.int64)
        for epoch in range(p.epochs):
            if pos_users.size == 0:
                break
            _bpr_epoch(self.user_factors_, self.item_factors_, self.item_bias_, pos_users, pos_items,
                       indptr, p.learning_rate, p.l2, p.negatives_per_positive, rng.state)
            log.info("bpr epoch %d/%d", epoch + 1, p.epochs)

    def _score_items(self, users, user_features, item_features):
        return _mf_scores(self.user_factors_, self.item_factors_, self.item_bias_, users)

    def _score_pairs(self, users, items, user_features, item_features):
        return _mf_pair_scores(self.user_factors_, self.item_factors_, self.item_bias_, users, items)

    def _state(self):
        return {"user_factors": self.user_factors_, "item_factors": self.item_factors_, "item_bias": self.item_bias_}

    def _restore(self, arrays, meta):
        self.user_factors_ = arrays["user_factors"]
        self.item_factors_ = arrays["item_factors"]
        self.item_bias_ = arrays["item_bias"]
