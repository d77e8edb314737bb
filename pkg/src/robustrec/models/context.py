"""Context-aware scorers: logistic regression and a second-order factorization machine.

Both consume the same sparse encoding of a (user, item) pair: one active
index per id field and categorical feature (vocabularies are the values seen
in training; unseen values encode as inactive), plus one real-valued input
per numeric feature, min-max scaled by its schema bounds. Labels are
``rating >= positive_threshold``. LR is the factorization machine with zero
latent factors, so both share the kernels below.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from numba import njit

from ..rng import Rng, shuffle_inplace
from .base import Recommender

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LRParams:
    learning_rate: float = 0.05
    l2: float = 1e-5
    epochs: int = 20
    positive_threshold: float = 4.0

    def __post_init__(self):
        if self.learning_rate <= 0 or self.l2 < 0 or self.epochs < 0:
            raise ValueError("LR needs learning_rate > 0, l2 >= 0, epochs >= 0")


@dataclass(frozen=True)
class FMParams:
    factors: int = 16
    learning_rate: float = 0.05
    l2: float = 1e-5
    epochs: int = 20
    positive_threshold: float = 4.0
    init_scale: float = 0.01

    def __post_init__(self):
        if self.factors < 1:
            raise ValueError("FM factors must be >= 1")
        if self.learning_rate <= 0 or self.l2 < 0 or self.epochs < 0:
            raise ValueError("FM needs learning_rate > 0, l2 >= 0, epochs >= 0")


# -------------------------------------------------------------------- kernels

@njit(cache=True)
def _sigmoid(x):
    if x >= 0:
        return 1.0 / (1.0 + np.exp(-x))
    e = np.exp(x)
    return e / (1.0 + e)


@njit(cache=True)
def _softplus(x):
    if x > 0:
        return x + np.log1p(np.exp(-x))
    return np.log1p(np.exp(x))


@njit(cache=True)
def fm_pairwise(V, idx, val, s):
    """``sum_{d<d'} <v_d, v_d'> x_d x_d'`` in O(k * nnz); leaves ``sum_d v_d x_d`` in ``s``."""
    total = 0.0
    for f in range(V.shape[1]):
        acc = 0.0
        sq = 0.0
        for t in range(idx.shape[0]):
            d = idx[t]
            if d < 0 or val[t] == 0.0:
                continue
            term = V[d, f] * val[t]
            acc += term
            sq += term * term
        s[f] = acc
        total += acc * acc - sq
    return 0.5 * total


@njit(cache=True)
def fm_logit(w0, w, V, idx, val, s):
    z = w0
    for t in range(idx.shape[0]):
        if idx[t] >= 0 and val[t] != 0.0:
            z += w[idx[t]] * val[t]
    return z + fm_pairwise(V, idx, val, s)


@njit(cache=True)
def fm_example_grad(w0, w, V, idx, val, y, l2, gw, gV, s):
    """Gradient of ``logloss(sigmoid(z), y) + l2/2 * |active params|^2`` for one example.

    Fills ``gw[t]`` and ``gV[t]`` for each field ``t`` (zero when inactive)
    and returns the bias gradient.
    """
    z = fm_logit(w0, w, V, idx, val, s)
    dz = _sigmoid(z) - y
    for t in range(idx.shape[0]):
        d = idx[t]
        if d < 0 or val[t] == 0.0:
            gw[t] = 0.0
            for f in range(V.shape[1]):
                gV[t, f] = 0.0
            continue
        x = val[t]
        gw[t] = dz * x + l2 * w[d]
        for f in range(V.shape[1]):
            gV[t, f] = dz * x * (s[f] - V[d, f] * x) + l2 * V[d, f]
    return dz


@njit(cache=True)
def fm_batch_grad(w0, w, V, idx, val, y, l2):
    n_fields = idx.shape[1]
    k = V.shape[1]
    g0 = 0.0
    gw_all = np.zeros_like(w)
    gV_all = np.zeros_like(V)
    gw = np.empty(n_fields)
    gV = np.empty((n_fields, k))
    s = np.empty(k)
    for r in range(idx.shape[0]):
        g0 += fm_example_grad(w0, w, V, idx[r], val[r], y[r], l2, gw, gV, s)
        for t in range(n_fields):
            d = idx[r, t]
            if d < 0:
                continue
            gw_all[d] += gw[t]
            for f in range(k):
                gV_all[d, f] += gV[t, f]
    return g0, gw_all, gV_all


@njit(cache=True)
def _fm_sgd_epoch(w0_box, w, V, idx, val, y, lr, l2, state):
    n, n_fields = idx.shape
    k = V.shape[1]
    order = np.arange(n)
    shuffle_inplace(state, order)
    gw = np.empty(n_fields)
    gV = np.empty((n_fields, k))
    s = np.empty(k)
    for r in order:
        g0 = fm_example_grad(w0_box[0], w, V, idx[r], val[r], y[r], l2, gw, gV, s)
        w0_box[0] -= lr * g0
        for t in range(n_fields):
            d = idx[r, t]
            if d < 0 or val[r, t] == 0.0:
                continue
            w[d] -= lr * gw[t]
            for f in range(k):
                V[d, f] -= lr * gV[t, f]


@njit(cache=True)
def _mean_logloss(w0, w, V, idx, val, y):
    s = np.empty(V.shape[1])
    total = 0.0
    for r in range(idx.shape[0]):
        z = fm_logit(w0, w, V, idx[r], val[r], s)
        total += _softplus(z) - y[r] * z
    return total / idx.shape[0]


@njit(cache=True)
def _side_partials(w, V, idx, val):
    n, n_fields = idx.shape
    k = V.shape[1]
    lin = np.zeros(n)
    s = np.zeros((n, k))
    q = np.zeros((n, k))
    for r in range(n):
        for t in range(n_fields):
            d = idx[r, t]
            if d < 0 or val[r, t] == 0.0:
                continue
            x = val[r, t]
            lin[r] += w[d] * x
            for f in range(k):
                term = V[d, f] * x
                s[r, f] += term
                q[r, f] += term * term
    return lin, s, q


@njit(cache=True)
def _combine(w0, ulin, us, uq, ilin, is_, iq):
    z = w0 + ulin + ilin
    inter = 0.0
    for f in range(us.shape[0]):
        a = us[f] + is_[f]
        inter += a * a - uq[f] - iq[f]
    return _sigmoid(z + 0.5 * inter)


@njit(cache=True)
def _pair_scores(w0, U, I, urow, irow):
    ulin, us, uq = U
    ilin, is_, iq = I
    out = np.empty(urow.shape[0])
    for r in range(urow.shape[0]):
        a, b = urow[r], irow[r]
        out[r] = _combine(w0, ulin[a], us[a], uq[a], ilin[b], is_[b], iq[b])
    return out


@njit(cache=True)
def _grid_scores(w0, U, I):
    ulin, us, uq = U
    ilin, is_, iq = I
    out = np.empty((ulin.shape[0], ilin.shape[0]))
    for a in range(ulin.shape[0]):
        for b in range(ilin.shape[0]):
            out[a, b] = _combine(w0, ulin[a], us[a], uq[a], ilin[b], is_[b], iq[b])
    return out


# -------------------------------------------------------------------- encoder

class FeatureEncoder:
    """Maps users and items to (index, value) rows over a shared feature space."""

    def __init__(self, fields=None):
        # each field: dict(side, name, kind in {"id", "categorical", "numeric"}, offset, vocab|bounds)
        self.fields = fields or []

    @classmethod
    def fit(cls, dataset, train_indices):
        fields = []
        offset = 0
        for side in ("user", "item"):
            codes = dataset.users[train_indices] if side == "user" else dataset.items[train_indices]
            seen = np.unique(codes)
            fields.append({"side": side, "name": f"{side}_id", "kind": "id", "offset": offset,
                           "vocab": seen.tolist()})
            offset += seen.size
            table = dataset.features(side)
            for schema in table.schemas:
                if schema.is_categorical:
                    present = set(table.column(schema.name)[seen].tolist())
                    vocab = [v for v in schema.domain if v in present]
                    fields.append({"side": side, "name": schema.name, "kind": "categorical",
                                   "offset": offset, "vocab": vocab})
                    offset += len(vocab)
                else:
                    fields.append({"side": side, "name": schema.name, "kind": "numeric",
                                   "offset": offset, "bounds": [schema.min, schema.max]})
                    offset += 1
        enc = cls(fields)
        enc.n_features = offset
        return enc

    @classmethod
    def from_state(cls, state):
        enc = cls(state["fields"])
        enc.n_features = state["n_features"]
        return enc

    def state(self):
        return {"fields": self.fields, "n_features": self.n_features}

    def encode(self, side, codes, table, n_entities):
        codes = np.asarray(codes, dtype=np.int64)
        fields = [f for f in self.fields if f["side"] == side]
        idx = np.full((codes.size, len(fields)), -1, dtype=np.int64)
        val = np.zeros((codes.size, len(fields)))
        for t, f in enumerate(fields):
            if f["kind"] == "id":
                lookup = np.full(n_entities, -1, dtype=np.int64)
                vocab = np.asarray(f["vocab"], dtype=np.int64)
                lookup[vocab] = f["offset"] + np.arange(vocab.size)
                idx[:, t] = lookup[codes]
                val[:, t] = 1.0
            elif f["kind"] == "categorical":
                pos = {v: f["offset"] + k for k, v in enumerate(f["vocab"])}
                col = table.column(f["name"])
                idx[:, t] = [pos.get(v, -1) for v in col[codes]]
                val[:, t] = 1.0
            else:
                lo, hi = f["bounds"]
                x = table.column(f["name"])[codes]
                idx[:, t] = f["offset"]
                val[:, t] = (x - lo) / (hi - lo) if hi > lo else 0.0
        return idx, val


# --------------------------------------------------------------------- models

class FactorizationMachine(Recommender):
    """Second-order factorization machine scored through a sigmoid."""

    name = "fm"
    uses_features = True
    Params = FMParams

    @property
    def n_factors(self):
        return self.params.factors

    def _fit(self, dataset, train_indices):
        p = self.params
        self.encoder_ = FeatureEncoder.fit(dataset, train_indices)
        idx, val = self._encode_pairs(dataset.users[train_indices], dataset.items[train_indices],
                                      dataset.user_features, dataset.item_features)
        y = (dataset.ratings[train_indices] >= p.positive_threshold).astype(np.float64)

        rng = Rng(self.seed)
        d = self.encoder_.n_features
        k = self.n_factors
        scale = getattr(p, "init_scale", 0.0)
        self.bias_ = np.zeros(1)
        self.weights_ = np.zeros(d)
        self.factors_ = rng.uniform(-scale, scale, d * k).reshape(d, k)
        self.loss_history_ = []
        for epoch in range(p.epochs):
            _fm_sgd_epoch(self.bias_, self.weights_, self.factors_, idx, val, y, p.learning_rate, p.l2, rng.state)
            self.loss_history_.append(float(_mean_logloss(self.bias_[0], self.weights_, self.factors_, idx, val, y)))
            log.info("%s epoch %d/%d logloss %.5f", self.name, epoch + 1, p.epochs, self.loss_history_[-1])

    def _encode_pairs(self, users, items, user_features, item_features):
        uidx, uval = self.encoder_.encode("user", users, user_features, self.n_users)
        iidx, ival = self.encoder_.encode("item", items, item_features, self.n_items)
        return np.ascontiguousarray(np.hstack([uidx, iidx])), np.ascontiguousarray(np.hstack([uval, ival]))

    def _partials(self, side, codes, table):
        idx, val = self.encoder_.encode(side, codes, table, self.n_users if side == "user" else self.n_items)
        return _side_partials(self.weights_, self.factors_, idx, val)

    def _score_pairs(self, users, items, user_features, item_features):
        uu, urow = np.unique(users, return_inverse=True)
        ii, irow = np.unique(items, return_inverse=True)
        U = self._partials("user", uu, user_features)
        I = self._partials("item", ii, item_features)
        return _pair_scores(self.bias_[0], U, I, urow.astype(np.int64), irow.astype(np.int64))

    def _score_items(self, users, user_features, item_features):
        U = self._partials("user", users, user_features)
        I = self._partials("item", np.arange(self.n_items), item_features)
        return _grid_scores(self.bias_[0], U, I)

    def _state(self):
        return {"bias": self.bias_, "weights": self.weights_, "factors": self.factors_,
                "__meta__": {"encoder": self.encoder_.state(), "loss_history": self.loss_history_}}

    def _restore(self, arrays, meta):
        self.bias_ = arrays["bias"]
        self.weights_ = arrays["weights"]
        self.factors_ = arrays["factors"]
        self.encoder_ = FeatureEncoder.from_state(meta["encoder"])
        self.loss_history_ = meta["loss_history"]


class LogisticRegression(FactorizationMachine):
    """Logistic regression on the same encoding (an FM without factors)."""

    name = "lr"
    Params = LRParams

    @property
    def n_factors(self):
        return 0
