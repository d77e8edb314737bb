import itertools
import math

import numpy as np
import pytest

from robustrec.data import FeatureSchema, split_ratio
from robustrec.models import (BPRMF, MODELS, FactorizationMachine, FeatureEncoder, ItemKNN, LogisticRegression,
                              Pop, create, load_model, top_k)
from robustrec.models.bpr import bpr_batch_grad, bpr_loss
from robustrec.models.context import fm_batch_grad, fm_pairwise
from robustrec.models.itemknn import cosine_similarity, keep_top_k, rating_matrix

from conftest import make_dataset, random_dataset

STEP = 1e-5
REL_TOL = 1e-4


def rel_err(a, b):
    return np.abs(a - b) / np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-6)


def central_diff(f, x):
    g = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    for _ in it:
        i = it.multi_index
        old = x[i]
        x[i] = old + STEP
        up = f()
        x[i] = old - STEP
        down = f()
        x[i] = old
        g[i] = (up - down) / (2 * STEP)
    return g


# ------------------------------------------------------------------ gradient checks

def bpr_instance(seed):
    g = np.random.default_rng(seed)
    P = g.normal(0, 0.5, (5, 4))
    Q = g.normal(0, 0.5, (5, 4))
    b = g.normal(0, 0.5, 5)
    triples = np.array([(u, i, j) for u in range(5) for i, j in [tuple(g.choice(5, 2, replace=False))]],
                       dtype=np.int64)
    return P, Q, b, triples


def test_bpr_gradient_matches_finite_differences():
    for seed in range(3):
        P, Q, b, triples = bpr_instance(seed)
        l2 = 0.01
        gP, gQ, gb = bpr_batch_grad(P, Q, b, triples, l2)
        f = lambda: bpr_loss(P, Q, b, triples, l2)  # noqa: E731
        for analytic, param in ((gP, P), (gQ, Q), (gb, b)):
            assert rel_err(analytic, central_diff(f, param)).max() <= REL_TOL


def fm_loss_oracle(w0, w, V, idx, val, y, l2):
    """Mean-free summed log-loss with an explicit O(d^2) pairwise term."""
    total = 0.0
    for r in range(idx.shape[0]):
        active = [(d, x) for d, x in zip(idx[r], val[r]) if d >= 0 and x != 0.0]
        z = w0 + sum(w[d] * x for d, x in active)
        for (d1, x1), (d2, x2) in itertools.combinations(active, 2):
            z += float(V[d1] @ V[d2]) * x1 * x2
        p = 1.0 / (1.0 + math.exp(-z))
        total += -(y[r] * math.log(p) + (1 - y[r]) * math.log(1 - p))
        total += 0.5 * l2 * sum(w[d] ** 2 + float(V[d] @ V[d]) for d, _ in active)
    return total


def fm_instance(seed, k, n=10, d=12, fields=4):
    g = np.random.default_rng(seed)
    idx = np.stack([np.sort(g.choice(d, fields, replace=False)) for _ in range(n)]).astype(np.int64)
    idx[0, 1] = -1  # an inactive field
    val = g.uniform(0.2, 1.0, (n, fields))
    val[1, 2] = 0.0
    y = g.integers(0, 2, n).astype(np.float64)
    return g.normal(0, 0.3), g.normal(0, 0.3, d), g.normal(0, 0.3, (d, k)), idx, val, y


@pytest.mark.parametrize("k", [0, 3], ids=["lr", "fm"])
def test_context_gradient_matches_finite_differences(k):
    for seed in range(3):
        w0, w, V, idx, val, y = fm_instance(seed, k)
        l2 = 0.02
        box = np.array([w0])
        g0, gw, gV = fm_batch_grad(w0, w, V, idx, val, y, l2)
        f = lambda: fm_loss_oracle(box[0], w, V, idx, val, y, l2)  # noqa: E731
        assert rel_err(np.array([g0]), central_diff(f, box)).max() <= REL_TOL
        assert rel_err(gw, central_diff(f, w)).max() <= REL_TOL
        if k:
            assert rel_err(gV, central_diff(f, V)).max() <= REL_TOL


def test_fm_pairwise_matches_double_sum():
    g = np.random.default_rng(0)
    for _ in range(300):
        d = int(g.integers(1, 51))
        k = int(g.integers(1, 9))
        V = g.normal(size=(d, k))
        nnz = int(g.integers(1, d + 1))
        idx = np.sort(g.choice(d, nnz, replace=False)).astype(np.int64)
        val = np.where(g.random(nnz) < 0.2, 0.0, g.normal(size=nnz))
        s = np.empty(k)
        fast = fm_pairwise(V, idx, val, s)
        x = np.zeros(d)
        x[idx] = val
        slow = sum(float(V[a] @ V[b]) * x[a] * x[b] for a in range(d) for b in range(a + 1, d))
        assert abs(fast - slow) <= 1e-9


# ------------------------------------------------------------------ Pop

def test_pop_normalised_counts_and_unseen():
    d = make_dataset([0] * 10 + [1] * 5, [0] * 10 + [1] * 5, np.full(15, 3), 2, 3)
    m = Pop().fit(d, np.arange(15))
    assert m.score_pairs([0, 1, 0], [0, 1, 2]).tolist() == [1.0, 0.5, 0.0]
    assert m.score(1, 0) == 1.0


def test_pop_ml100k_argmax_and_ranking(ml100k):
    split = split_ratio(ml100k, (0.8, 0.1, 0.1), 2023)
    m = Pop().fit(ml100k, split.train)
    counts = {}
    for i in ml100k.items[split.train].tolist():
        counts[i] = counts.get(i, 0) + 1
    best = max(counts, key=lambda i: (counts[i], -i))
    assert int(np.argmax(m.score_items([0])[0])) == best
    oracle = sorted(range(ml100k.n_items), key=lambda i: (-counts.get(i, 0), i))
    assert m.rank(5, np.arange(ml100k.n_items), ml100k.n_items) == oracle


# ------------------------------------------------------------------ ranking

def test_top_k_tie_rule_and_full_ordering():
    assert top_k(np.array([0.9, 0.9, 0.1]), np.array([0, 1, 2]), 2).tolist() == [0, 1]
    assert top_k(np.array([0.1, 0.9, 0.9]), np.array([7, 5, 3]), 5).tolist() == [3, 5, 7]
    with pytest.raises(ValueError):
        top_k(np.array([1.0]), np.array([0]), 0)


def test_rank_respects_candidates():
    d = random_dataset(0)
    m = Pop().fit(d, np.arange(len(d)))
    cand = np.array([3, 1, 4])
    assert sorted(m.rank(0, cand, 10)) == [1, 3, 4]
    assert m.rank(0, np.array([], dtype=np.int64), 3) == []


# ------------------------------------------------------------------ ItemKNN

def test_itemknn_toy_dense_oracle():
    R = np.array([[5, 3, 0], [4, 0, 1], [0, 2, 4]], dtype=float)
    users, items = np.nonzero(R)
    d = make_dataset(users, items, R[users, items])
    S = cosine_similarity(rating_matrix(d, np.arange(len(d)))).toarray()
    for i, j in itertools.product(range(3), repeat=2):
        want = 0.0 if i == j else R[:, i] @ R[:, j] / (np.linalg.norm(R[:, i]) * np.linalg.norm(R[:, j]))
        assert abs(S[i, j] - want) <= 1e-9
    shrunk = cosine_similarity(rating_matrix(d, np.arange(len(d))), shrinkage=2.0).toarray()
    assert abs(shrunk[0, 1] - R[:, 0] @ R[:, 1] / (np.linalg.norm(R[:, 0]) * np.linalg.norm(R[:, 1]) + 2.0)) <= 1e-9


def test_itemknn_parallel_and_orthogonal():
    d = make_dataset([0, 1, 0, 1, 2], [0, 0, 1, 1, 2], [2, 4, 1, 2, 5], 3, 4)
    S = cosine_similarity(rating_matrix(d, np.arange(5))).toarray()
    assert S[0, 1] == pytest.approx(1.0, abs=1e-12)
    assert S[0, 2] == 0.0 and S[1, 2] == 0.0
    assert np.all(S[3] == 0.0) and np.all(S[:, 3] == 0.0)


def test_itemknn_symmetry_and_truncation():
    d = random_dataset(5, n_users=30, n_items=25, n_inter=300)
    S = cosine_similarity(rating_matrix(d, np.arange(len(d))))
    dense = S.toarray()
    assert np.abs(dense - dense.T).max() <= 1e-12
    T = keep_top_k(S, 3).toarray()
    for i in range(dense.shape[0]):
        kept = np.flatnonzero(T[i])
        assert kept.size <= 3
        if kept.size:
            assert T[i, kept].min() >= np.sort(dense[i])[::-1][min(2, kept.size - 1)] - 1e-15


def test_itemknn_score_formula():
    d = random_dataset(7, n_users=10, n_items=8, n_inter=50)
    m = ItemKNN(k=3).fit(d, np.arange(len(d)))
    S = m.similarity_.toarray()
    R = np.zeros((d.n_users, d.n_items))
    for u, i, r in zip(d.users, d.items, d.ratings):
        R[u, i] += r
    want = R @ S.T
    got = m.score_items(np.arange(d.n_users))
    assert np.abs(got - want).max() <= 1e-12


# ------------------------------------------------------------------ BPR-MF

def test_bpr_learns_single_positive():
    # user 0 likes only item 0; item 7 is never rated
    users = [0] + [u for u in range(1, 8) for _ in range(3)]
    items = [0] + [(u + k) % 7 for u in range(1, 8) for k in range(3)]
    ratings = [5] + [5, 4, 2] * 7
    d = make_dataset(users, items, ratings, 8, 8)
    wins = 0
    for seed in range(20):
        m = BPRMF(factors=8, epochs=30).fit(d, np.arange(len(d)), seed=seed)
        wins += m.score(0, 0) > m.score(0, 7)
    assert wins >= 19


def test_bpr_zero_epochs_is_seeded_init():
    d = random_dataset(0)
    a = BPRMF(epochs=0).fit(d, np.arange(len(d)), seed=3)
    b = BPRMF(epochs=0).fit(d, np.arange(len(d)), seed=3)
    c = BPRMF(epochs=0).fit(d, np.arange(len(d)), seed=4)
    assert np.array_equal(a.user_factors_, b.user_factors_)
    assert a.rank(0, np.arange(d.n_items), 5) == b.rank(0, np.arange(d.n_items), 5)
    assert not np.array_equal(a.user_factors_, c.user_factors_)
    assert np.abs(a.user_factors_).max() <= 0.01 and np.all(a.item_bias_ == 0)


def test_bpr_user_without_positives_is_skipped():
    d = make_dataset([0, 1, 1], [0, 1, 2], [1, 5, 5], 2, 4)
    m = BPRMF(factors=4, epochs=5).fit(d, np.arange(3), seed=0)
    init = BPRMF(factors=4, epochs=0).fit(d, np.arange(3), seed=0)
    assert np.array_equal(m.user_factors_[0], init.user_factors_[0])


# ------------------------------------------------------------------ LR / FM

def separable_dataset():
    # user 0 loves everything, user 1 hates everything
    return make_dataset([0, 0, 1, 1], [0, 1, 0, 1], [5, 5, 1, 1], 2, 2)


def test_lr_separable_loss_decreases_monotonically():
    m = LogisticRegression(epochs=30).fit(separable_dataset(), np.arange(4), seed=0)
    h = m.loss_history_
    assert len(h) == 30 and all(b < a for a, b in zip(h, h[1:]))


def test_lr_zero_weights_score_half():
    d = random_dataset(0)
    m = LogisticRegression(epochs=0).fit(d, np.arange(len(d)), seed=0)
    assert np.all(m.score_pairs(d.users, d.items) == 0.5)


def test_fm_with_zero_factors_equals_lr():
    d = random_dataset(1)
    train = np.arange(len(d))
    lr = LogisticRegression(epochs=3).fit(d, train, seed=1)
    fm = FactorizationMachine(epochs=3).fit(d, train, seed=1)
    fm.bias_, fm.weights_ = lr.bias_.copy(), lr.weights_.copy()
    fm.factors_ = np.zeros_like(fm.factors_)
    assert np.array_equal(fm.score_pairs(d.users, d.items), lr.score_pairs(d.users, d.items))


def test_encoder_unseen_category_is_inactive():
    cols = {"occ": (FeatureSchema.categorical("occ", ["a", "b", "c"]), np.array(["a", "b", "a"], dtype=object))}
    d = make_dataset([0, 1, 2], [0, 0, 1], [5, 1, 4], user_cols=cols)
    enc = FeatureEncoder.fit(d, np.array([0, 1]))
    changed = d.user_features.replace("occ", np.array(["c", "b", "a"], dtype=object))
    idx, _ = enc.encode("user", np.array([0, 1, 2]), changed, d.n_users)
    occ_field = [f["name"] for f in enc.fields if f["side"] == "user"].index("occ")
    id_field = 0
    assert idx[0, occ_field] == -1 and idx[1, occ_field] >= 0
    assert idx[2, id_field] == -1  # user 2 has no train interaction


def test_context_models_read_features_at_score_time():
    d = random_dataset(2)
    train = np.arange(len(d))
    altered = d.user_features.replace("age", np.full(d.n_users, 73.0))
    for cls in (LogisticRegression, FactorizationMachine):
        m = cls(epochs=5).fit(d, train, seed=0)
        assert not np.array_equal(m.score_pairs(d.users, d.items), m.score_pairs(d.users, d.items, altered))
    p = Pop().fit(d, train)
    assert np.array_equal(p.score_pairs(d.users, d.items), p.score_pairs(d.users, d.items, altered))


# ------------------------------------------------------------------ common contract

@pytest.mark.parametrize("name", sorted(MODELS))
def test_fit_is_deterministic_and_pure(name):
    d = random_dataset(3)
    train = np.arange(len(d))
    a = create(name).fit(d, train, seed=5)
    b = create(name).fit(d, train, seed=5)
    for key, arr in a.parameters().items():
        assert np.array_equal(arr, b.parameters()[key]), key
    s1 = a.score_items(np.arange(d.n_users))
    assert np.array_equal(s1, a.score_items(np.arange(d.n_users)))


@pytest.mark.parametrize("name", sorted(MODELS))
def test_score_items_agrees_with_score_pairs(name):
    d = random_dataset(4)
    m = create(name).fit(d, np.arange(len(d)), seed=1)
    grid = m.score_items(np.arange(d.n_users))
    u, i = np.meshgrid(np.arange(d.n_users), np.arange(d.n_items), indexing="ij")
    pairs = m.score_pairs(u.ravel(), i.ravel()).reshape(grid.shape)
    assert np.allclose(grid, pairs, rtol=0, atol=1e-12)


@pytest.mark.parametrize("name", sorted(MODELS))
def test_checkpoint_round_trip(name, tmp_path):
    d = random_dataset(5)
    m = create(name).fit(d, np.arange(len(d)), seed=2)
    path = tmp_path / f"{name}.npz"
    m.save(path)
    again = load_model(path, d)
    assert again.params == m.params and again.seed == m.seed
    for key, arr in m.parameters().items():
        assert np.array_equal(arr, again.parameters()[key])
    assert np.array_equal(m.score_items(np.arange(d.n_users)), again.score_items(np.arange(d.n_users)))


def test_hyperparameter_validation():
    for name, bad in [("itemknn", {"k": 0}), ("bpr", {"factors": 0}), ("bpr", {"learning_rate": 0}),
                      ("lr", {"l2": -1}), ("fm", {"epochs": -1})]:
        with pytest.raises(ValueError):
            create(name, **bad)
    assert create("MF-BPR").name == "bpr"
    with pytest.raises(KeyError):
        create("neumf")
