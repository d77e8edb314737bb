import os
from pathlib import Path

import numpy as np
import pytest

from robustrec.data import Dataset, FeatureSchema, FeatureTable, RatingScale, load_movielens

REPO = Path(__file__).resolve().parents[1]


def ml100k_path() -> Path | None:
    candidates = [os.environ.get("ROBUSTREC_ML100K"), REPO / "data" / "ml-100k"]
    for c in candidates:
        if c and (Path(c) / "u.data").is_file():
            return Path(c)
    return None


@pytest.fixture(scope="session")
def ml100k_dir():
    path = ml100k_path()
    if path is None:
        pytest.skip("MovieLens-100k not found; run scripts/prepare_ml100k.py or set ROBUSTREC_ML100K")
    return path


@pytest.fixture(scope="session")
def ml100k(ml100k_dir):
    return load_movielens(ml100k_dir)


def make_dataset(users, items, ratings, n_users=None, n_items=None, user_cols=None, item_cols=None,
                 scale=(1, 5)):
    """Small in-memory dataset; ids are the codes as strings."""
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    n_users = int(users.max()) + 1 if n_users is None else n_users
    n_items = int(items.max()) + 1 if n_items is None else n_items

    def table(cols):
        if not cols:
            return FeatureTable.empty()
        schemas = tuple(s for s, _ in cols.values())
        return FeatureTable(schemas, {s.name: v for s, v in cols.values()})

    lo, hi = scale
    return Dataset(
        user_ids=np.array([str(u) for u in range(n_users)], dtype=object),
        item_ids=np.array([str(i) for i in range(n_items)], dtype=object),
        users=users, items=items, ratings=np.asarray(ratings, dtype=np.float64), timestamps=None,
        user_features=table(user_cols), item_features=table(item_cols),
        rating_scale=RatingScale(lo, hi, tuple(float(v) for v in range(lo, hi + 1))),
    )


def random_dataset(seed, n_users=12, n_items=15, n_inter=120, with_features=True):
    """Random toy dataset with gender/occupation/age user features and one item genre."""
    g = np.random.default_rng(seed)
    users = g.integers(0, n_users, n_inter)
    items = g.integers(0, n_items, n_inter)
    users[:n_users] = np.arange(n_users)
    items[:n_items] = np.arange(n_items)
    ratings = g.integers(1, 6, n_inter)
    ucols = icols = None
    if with_features:
        ucols = {
            "age": (FeatureSchema.numeric("age", 7, 73, integer_valued=True), g.integers(7, 74, n_users).astype(float)),
            "gender": (FeatureSchema.categorical("gender", ["F", "M"]), g.choice(["F", "M"], n_users).astype(object)),
            "occupation": (FeatureSchema.categorical("occupation", ["a", "b", "c", "d"]),
                           g.choice(["a", "b", "c", "d"], n_users).astype(object)),
        }
        icols = {"drama": (FeatureSchema.numeric("drama", 0, 1, integer_valued=True),
                           g.integers(0, 2, n_items).astype(float))}
    return make_dataset(users, items, ratings, n_users, n_items, ucols, icols)


# ------------------------------------------------------------------ acceptance summary

ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def record(criterion: str, ok: bool, detail: str):
    ACCEPTANCE[criterion] = (ok, detail)
    print(f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
