"""Datasets, feature schemas, loaders and seeded ratio splits.

Interactions are stored column-wise: ``users``/``items`` hold integer codes
into ``user_ids``/``item_ids``; codes follow the natural order of the ids
(numeric when every id is an integer, lexicographic otherwise), so "ascending
item id" and "ascending item code" agree everywhere.
"""
from __future__ import annotations

import csv
import hashlib
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import NamedTuple, Sequence

import numpy as np
import yaml

from .errors import DataError, SchemaViolation
from .rng import Rng

CATEGORICAL = "categorical"
NUMERIC = "numeric"

ML100K_GENRES = (
    "unknown", "Action", "Adventure", "Animation", "Children's", "Comedy",
    "Crime", "Documentary", "Drama", "Fantasy", "Film-Noir", "Horror",
    "Musical", "Mystery", "Romance", "Sci-Fi", "Thriller", "War", "Western",
)


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


def natural_order(ids) -> list[str]:
    ids = [str(i) for i in ids]
    if ids and all(i.lstrip("-").isdigit() for i in ids):
        return sorted(ids, key=int)
    return sorted(ids)


@dataclass(frozen=True)
class FeatureSchema:
    name: str
    kind: str
    domain: tuple[str, ...] = ()
    min: float | None = None
    max: float | None = None
    integer_valued: bool = False

    def __post_init__(self):
        if self.kind == CATEGORICAL:
            if not self.domain:
                raise SchemaViolation(f"categorical feature {self.name!r} has an empty domain")
            if len(set(self.domain)) != len(self.domain):
                raise SchemaViolation(f"categorical feature {self.name!r} has duplicate domain values")
        elif self.kind == NUMERIC:
            if self.min is None or self.max is None or self.min > self.max:
                raise SchemaViolation(f"numeric feature {self.name!r} needs min <= max")
        else:
            raise SchemaViolation(f"feature {self.name!r}: unknown kind {self.kind!r}")

    @classmethod
    def categorical(cls, name, domain):
        return cls(name, CATEGORICAL, domain=tuple(str(v) for v in domain))

    @classmethod
    def numeric(cls, name, lo, hi, integer_valued=False):
        return cls(name, NUMERIC, min=float(lo), max=float(hi), integer_valued=bool(integer_valued))

    @property
    def is_categorical(self):
        return self.kind == CATEGORICAL

    def contains(self, value) -> bool:
        if self.is_categorical:
            return value in self.domain
        v = float(value)
        if not self.min <= v <= self.max:
            return False
        return not self.integer_valued or v == round(v)

    def parse(self, raw: str):
        if self.is_categorical:
            return raw
        try:
            return float(raw)
        except ValueError:
            raise SchemaViolation(f"feature {self.name!r}: {raw!r} is not numeric") from None


@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Per-entity feature columns aligned with entity codes."""

    schemas: tuple[FeatureSchema, ...] = ()
    columns: dict = field(default_factory=dict)

    @classmethod
    def empty(cls):
        return cls((), {})

    def __post_init__(self):
        names = [s.name for s in self.schemas]
        if len(set(names)) != len(names):
            raise SchemaViolation("duplicate feature names")
        if set(names) != set(self.columns):
            raise SchemaViolation("feature columns do not match schemas")
        cols = {}
        for s in self.schemas:
            col = np.array(self.columns[s.name], dtype=object if s.is_categorical else np.float64)
            if s.is_categorical:
                ok = np.isin(col, np.array(s.domain, dtype=object))
            else:
                ok = (col >= s.min) & (col <= s.max)
                if s.integer_valued:
                    ok &= col == np.round(col)
            bad = np.flatnonzero(~ok)
            if bad.size:
                raise SchemaViolation(
                    f"feature {s.name!r}: value {col[bad[0]]!r} at entity {int(bad[0])} violates schema"
                )
            cols[s.name] = _frozen(col)
        object.__setattr__(self, "columns", cols)

    def __len__(self):
        return len(self.schemas)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.schemas]

    def schema(self, name) -> FeatureSchema:
        for s in self.schemas:
            if s.name == name:
                return s
        raise DataError(f"unknown feature {name!r}")

    def column(self, name) -> np.ndarray:
        self.schema(name)
        return self.columns[name]

    def replace(self, name, values) -> "FeatureTable":
        cols = dict(self.columns)
        cols[name] = np.array(values, dtype=object if self.schema(name).is_categorical else np.float64)
        return FeatureTable(self.schemas, cols)

    def n_entities(self):
        if not self.schemas:
            return 0
        return len(self.columns[self.schemas[0].name])

    def _update_hash(self, h):
        for s in self.schemas:
            h.update(repr((s.name, s.kind, s.domain, s.min, s.max, s.integer_valued)).encode())
            col = self.columns[s.name]
            if s.is_categorical:
                h.update("\x1f".join(col).encode())
            else:
                h.update(col.astype("<f8").tobytes())

    def digest(self) -> str:
        h = hashlib.sha256()
        self._update_hash(h)
        return h.hexdigest()


@dataclass(frozen=True)
class RatingScale:
    min: float
    max: float
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "min", float(self.min))
        object.__setattr__(self, "max", float(self.max))
        if self.min > self.max:
            raise SchemaViolation("rating scale needs min <= max")
        if self.values is not None:
            vals = tuple(sorted(float(v) for v in self.values))
            if any(not self.min <= v <= self.max for v in vals):
                raise SchemaViolation("rating values outside [min, max]")
            object.__setattr__(self, "values", vals)

    def contains(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=np.float64)
        ok = (r >= self.min) & (r <= self.max)
        if self.values is not None:
            ok &= np.isin(r, np.array(self.values))
        return ok


class Interaction(NamedTuple):
    user_id: str
    item_id: str
    rating: float
    timestamp: int | None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Ratings plus user/item feature tables.

    Arrays are read-only; the ``with_*`` methods return modified copies.
    """

    user_ids: np.ndarray
    item_ids: np.ndarray
    users: np.ndarray
    items: np.ndarray
    ratings: np.ndarray
    timestamps: np.ndarray | None
    user_features: FeatureTable
    item_features: FeatureTable
    rating_scale: RatingScale

    def __post_init__(self):
        object.__setattr__(self, "user_ids", _frozen(np.array(self.user_ids, dtype=object)))
        object.__setattr__(self, "item_ids", _frozen(np.array(self.item_ids, dtype=object)))
        object.__setattr__(self, "users", _frozen(np.array(self.users, dtype=np.int64)))
        object.__setattr__(self, "items", _frozen(np.array(self.items, dtype=np.int64)))
        object.__setattr__(self, "ratings", _frozen(np.array(self.ratings, dtype=np.float64)))
        if self.timestamps is not None:
            object.__setattr__(self, "timestamps", _frozen(np.array(self.timestamps, dtype=np.int64)))
        n = len(self.users)
        if not (len(self.items) == len(self.ratings) == n):
            raise DataError("interaction columns have different lengths")
        if self.timestamps is not None and len(self.timestamps) != n:
            raise DataError("timestamp column has the wrong length")
        if n and (self.users.min() < 0 or self.users.max() >= len(self.user_ids)):
            raise DataError("interaction references an unknown user")
        if n and (self.items.min() < 0 or self.items.max() >= len(self.item_ids)):
            raise DataError("interaction references an unknown item")
        for table, ids, side in ((self.user_features, self.user_ids, "user"),
                                 (self.item_features, self.item_ids, "item")):
            if len(table) and table.n_entities() != len(ids):
                raise DataError(f"{side} feature table does not cover every {side}")
        bad = np.flatnonzero(~self.rating_scale.contains(self.ratings))
        if bad.size:
            raise SchemaViolation(f"rating {self.ratings[bad[0]]} at interaction {int(bad[0])} outside rating scale")

    @property
    def n_users(self):
        return len(self.user_ids)

    @property
    def n_items(self):
        return len(self.item_ids)

    @property
    def n_interactions(self):
        return len(self.users)

    def __len__(self):
        return self.n_interactions

    @cached_property
    def user_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.user_ids)}

    @cached_property
    def item_index(self) -> dict[str, int]:
        return {u: i for i, u in enumerate(self.item_ids)}

    def features(self, side) -> FeatureTable:
        if side == "user":
            return self.user_features
        if side == "item":
            return self.item_features
        raise DataError(f"side must be 'user' or 'item', got {side!r}")

    def interaction(self, i) -> Interaction:
        ts = None if self.timestamps is None else int(self.timestamps[i])
        return Interaction(self.user_ids[self.users[i]], self.item_ids[self.items[i]], float(self.ratings[i]), ts)

    def _replace(self, **changes) -> "Dataset":
        kw = {f: getattr(self, f) for f in self.__dataclass_fields__}
        kw.update(changes)
        return Dataset(**kw)

    def with_ratings(self, ratings) -> "Dataset":
        return self._replace(ratings=ratings)

    def with_features(self, side, table: FeatureTable) -> "Dataset":
        return self._replace(**{f"{side}_features": table})

    def digest(self) -> str:
        """SHA-256 over a canonical, platform-independent serialisation."""
        h = hashlib.sha256()
        h.update("\x1f".join(self.user_ids).encode() + b"\x1e")
        h.update("\x1f".join(self.item_ids).encode() + b"\x1e")
        h.update(self.users.astype("<i8").tobytes())
        h.update(self.items.astype("<i8").tobytes())
        h.update(self.ratings.astype("<f8").tobytes())
        h.update(b"none" if self.timestamps is None else self.timestamps.astype("<i8").tobytes())
        self.user_features._update_hash(h)
        h.update(b"\x1e")
        self.item_features._update_hash(h)
        h.update(repr(self.rating_scale).encode())
        return h.hexdigest()

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.digest() == other.digest()

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Split:
    train: np.ndarray
    valid: np.ndarray
    test: np.ndarray
    seed: int
    ratios: tuple[float, float, float]

    def __post_init__(self):
        for name in ("train", "valid", "test"):
            object.__setattr__(self, name, _frozen(np.array(getattr(self, name), dtype=np.int64)))

    def __eq__(self, other):
        if not isinstance(other, Split):
            return NotImplemented
        return (self.seed == other.seed and self.ratios == other.ratios
                and all(np.array_equal(getattr(self, n), getattr(other, n)) for n in ("train", "valid", "test")))

    __hash__ = None


def _split_sizes(n, ratios):
    # epsilon absorbs representation error such as 0.29 * 100 = 28.999...
    n_train = math.floor(ratios[0] * n + 1e-9)
    n_valid = math.floor(ratios[1] * n + 1e-9)
    return n_train, n_valid


def split_ratio(dataset: Dataset, ratios: Sequence[float], seed: int) -> Split:
    """Randomly partition interaction indices into train/valid/test.

    A seeded permutation of ``0..N-1`` is cut at ``floor(r_train*N)`` and
    ``floor(r_valid*N)``; the test part takes the remainder. Each part is
    returned sorted.
    """
    ratios = tuple(float(r) for r in ratios)
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"split ratios must be three non-negative numbers summing to 1, got {ratios}")
    n = dataset.n_interactions
    n_train, n_valid = _split_sizes(n, ratios)
    perm = Rng(seed).permutation(n)
    return Split(
        train=np.sort(perm[:n_train]),
        valid=np.sort(perm[n_train:n_train + n_valid]),
        test=np.sort(perm[n_train + n_valid:]),
        seed=int(seed),
        ratios=ratios,
    )


def user_activity(dataset: Dataset, indices) -> dict[str, int]:
    """Number of interactions per user id within ``indices``; absent users are omitted."""
    idx = np.asarray(indices, dtype=np.int64)
    counts = np.bincount(dataset.users[idx], minlength=dataset.n_users)
    return {dataset.user_ids[u]: int(counts[u]) for u in np.flatnonzero(counts)}


def activity_counts(dataset: Dataset, indices) -> np.ndarray:
    """Per-user-code interaction counts as a dense array."""
    idx = np.asarray(indices, dtype=np.int64)
    return np.bincount(dataset.users[idx], minlength=dataset.n_users)


# --------------------------------------------------------------------- loaders

def _read_lines(path: Path, encoding="latin-1"):
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with open(path, encoding=encoding) as fh:
        return fh.read().splitlines()


def _table_from_rows(ids, schemas, rows, source):
    """Build a FeatureTable from ``rows`` (dict id -> list of raw strings)."""
    cols = {}
    for k, s in enumerate(schemas):
        values = []
        for eid in ids:
            raw = rows[eid][k]
            try:
                v = s.parse(raw)
            except SchemaViolation as exc:
                raise SchemaViolation(f"{source}, id {eid}: {exc}") from None
            if not s.contains(v):
                raise SchemaViolation(f"{source}, id {eid}: value {raw!r} violates schema of feature {s.name!r}")
            values.append(v)
        cols[s.name] = np.array(values, dtype=object if s.is_categorical else np.float64)
    return FeatureTable(tuple(schemas), cols)


def load_movielens(root_path) -> Dataset:
    """Load the classic MovieLens-100k files (``u.data``, ``u.user``, ``u.item``)."""
    root = Path(root_path)
    data_lines = _read_lines(root / "u.data")
    user_lines = _read_lines(root / "u.user")
    item_lines = _read_lines(root / "u.item")

    user_rows = {}
    for lineno, line in enumerate(user_lines, 1):
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) != 5:
            raise DataError(f"u.user line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            int(parts[1])
        except ValueError:
            raise DataError(f"u.user line {lineno}: age {parts[1]!r} is not an integer") from None
        user_rows[parts[0]] = parts[1:]

    genre_names = list(ML100K_GENRES)
    genre_file = root / "u.genre"
    if genre_file.is_file():
        pairs = [l.split("|") for l in _read_lines(genre_file) if l.strip()]
        genre_names = [name for name, _ in sorted(pairs, key=lambda p: int(p[1]))]
    n_genres = len(genre_names)

    item_rows = {}
    for lineno, line in enumerate(item_lines, 1):
        if not line.strip():
            continue
        parts = line.split("|")
        if len(parts) != 5 + n_genres:
            raise DataError(f"u.item line {lineno}: expected {5 + n_genres} fields, got {len(parts)}")
        flags = parts[5:]
        if any(f not in ("0", "1") for f in flags):
            raise DataError(f"u.item line {lineno}: genre flags must be 0/1")
        item_rows[parts[0]] = flags

    users, items, ratings, stamps = [], [], [], []
    for lineno, line in enumerate(data_lines, 1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 4:
            raise DataError(f"u.data line {lineno}: expected 4 tab-separated fields, got {len(parts)}")
        try:
            r = float(parts[2])
            ts = int(parts[3])
        except ValueError:
            raise DataError(f"u.data line {lineno}: malformed rating or timestamp") from None
        if parts[0] not in user_rows:
            raise DataError(f"u.data line {lineno}: unknown user id {parts[0]!r}")
        if parts[1] not in item_rows:
            raise DataError(f"u.data line {lineno}: unknown item id {parts[1]!r}")
        users.append(parts[0])
        items.append(parts[1])
        ratings.append(r)
        stamps.append(ts)

    user_ids = natural_order(user_rows)
    item_ids = natural_order(item_rows)
    ages = [int(user_rows[u][0]) for u in user_ids]
    user_schema = (
        FeatureSchema.numeric("age", min(ages), max(ages), integer_valued=True),
        FeatureSchema.categorical("gender", sorted({user_rows[u][1] for u in user_ids})),
        FeatureSchema.categorical("occupation", sorted({user_rows[u][2] for u in user_ids})),
        FeatureSchema.categorical("zip", sorted({user_rows[u][3] for u in user_ids})),
    )
    item_schema = tuple(FeatureSchema.numeric(g, 0, 1, integer_valued=True) for g in genre_names)
    scale = RatingScale(1.0, 5.0, (1.0, 2.0, 3.0, 4.0, 5.0))
    bad = [i for i, r in enumerate(ratings) if r not in scale.values]
    if bad:
        raise SchemaViolation(f"u.data line {bad[0] + 1}: rating {ratings[bad[0]]} outside 1..5")

    uidx = {u: i for i, u in enumerate(user_ids)}
    iidx = {u: i for i, u in enumerate(item_ids)}
    return Dataset(
        user_ids=np.array(user_ids, dtype=object),
        item_ids=np.array(item_ids, dtype=object),
        users=np.fromiter((uidx[u] for u in users), dtype=np.int64, count=len(users)),
        items=np.fromiter((iidx[i] for i in items), dtype=np.int64, count=len(items)),
        ratings=np.array(ratings),
        timestamps=np.array(stamps, dtype=np.int64),
        user_features=_table_from_rows(user_ids, user_schema, user_rows, "u.user"),
        item_features=_table_from_rows(item_ids, item_schema, item_rows, "u.item"),
        rating_scale=scale,
    )


def _delimiter(path: Path, delimiter):
    if delimiter is not None:
        return delimiter
    return "\t" if path.suffix in (".tsv", ".tab") else ","


def _read_table(path, delimiter):
    path = Path(path)
    if not path.is_file():
        raise DataError(f"missing file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh, delimiter=_delimiter(path, delimiter)))
    if not rows:
        raise DataError(f"{path}: missing header row")
    return rows[0], rows[1:]


def _parse_schema_section(section, where) -> tuple[FeatureSchema, ...]:
    out = []
    for name, spec in (section or {}).items():
        if not isinstance(spec, dict) or "kind" not in spec:
            raise SchemaViolation(f"{where}.{name}: missing 'kind'")
        kind = spec["kind"]
        if kind == CATEGORICAL:
            if "domain" not in spec:
                raise SchemaViolation(f"{where}.{name}: categorical feature needs 'domain'")
            out.append(FeatureSchema.categorical(name, spec["domain"]))
        elif kind == NUMERIC:
            if "min" not in spec or "max" not in spec:
                raise SchemaViolation(f"{where}.{name}: numeric feature needs 'min' and 'max'")
            out.append(FeatureSchema.numeric(name, spec["min"], spec["max"], spec.get("integer", False)))
        else:
            raise SchemaViolation(f"{where}.{name}: unknown kind {kind!r}")
    return tuple(out)


def _load_feature_file(path, schemas, delimiter, side):
    if path is None:
        if schemas:
            raise DataError(f"{side} schema declared but no {side} feature file given")
        return None, None
    header, rows = _read_table(path, delimiter)
    id_col = f"{side}_id"
    if not header or header[0] != id_col:
        raise DataError(f"{path}: first column must be {id_col!r}")
    names = [s.name for s in schemas]
    if header[1:] != names:
        raise DataError(f"{path}: columns {header[1:]} do not match schema features {names}")
    if not rows and not schemas:
        return None, None
    table = {}
    for lineno, row in enumerate(rows, 2):
        if len(row) != len(header):
            raise DataError(f"{path} line {lineno}: expected {len(header)} fields, got {len(row)}")
        if row[0] in table:
            raise DataError(f"{path} line {lineno}: duplicate {id_col} {row[0]!r}")
        for s, value in zip(schemas, row[1:]):
            if value == "":
                raise SchemaViolation(f"{path} line {lineno}: missing value for feature {s.name!r}")
            try:
                v = s.parse(value)
            except SchemaViolation:
                raise SchemaViolation(f"{path} line {lineno}: feature {s.name!r}: {value!r} is not numeric") from None
            if not s.contains(v):
                raise SchemaViolation(f"{path} line {lineno}: feature {s.name!r}: {value!r} violates schema")
        table[row[0]] = row[1:]
    return table, schemas


def load_generic(interactions_path, user_features_path=None, item_features_path=None,
                 schema_path=None, delimiter=None) -> Dataset:
    """Load delimiter-separated interaction/feature files described by a YAML schema.

    The interaction file needs a header with ``user_id``, ``item_id`` and
    ``rating`` columns and an optional ``timestamp``. Feature files start
    with ``user_id``/``item_id`` followed by one column per declared feature.
    Categorical domains come from the schema, never from the data.
    """
    if schema_path is None:
        raise DataError("a schema file is required")
    schema_path = Path(schema_path)
    if not schema_path.is_file():
        raise DataError(f"missing file: {schema_path}")
    doc = yaml.safe_load(schema_path.read_text()) or {}
    features = doc.get("features") or {}
    rating = doc.get("rating") or {}
    if "min" not in rating or "max" not in rating:
        raise SchemaViolation(f"{schema_path}: rating.min and rating.max are required")
    scale = RatingScale(float(rating["min"]), float(rating["max"]),
                        tuple(rating["values"]) if rating.get("values") is not None else None)
    user_schema = _parse_schema_section(features.get("user"), "features.user")
    item_schema = _parse_schema_section(features.get("item"), "features.item")

    user_rows, user_schema_ = _load_feature_file(user_features_path, user_schema, delimiter, "user")
    item_rows, item_schema_ = _load_feature_file(item_features_path, item_schema, delimiter, "item")

    header, rows = _read_table(interactions_path, delimiter)
    try:
        cu, ci, cr = header.index("user_id"), header.index("item_id"), header.index("rating")
    except ValueError:
        raise DataError(f"{interactions_path}: header needs user_id, item_id and rating columns") from None
    ct = header.index("timestamp") if "timestamp" in header else None

    users, items, ratings, stamps = [], [], [], []
    for lineno, row in enumerate(rows, 2):
        if len(row) != len(header):
            raise DataError(f"{interactions_path} line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            r = float(row[cr])
            ts = int(row[ct]) if ct is not None else None
        except ValueError:
            raise DataError(f"{interactions_path} line {lineno}: malformed rating or timestamp") from None
        if not scale.contains(r):
            raise SchemaViolation(f"{interactions_path} line {lineno}: rating {row[cr]} outside rating scale")
        if user_rows is not None and row[cu] not in user_rows:
            raise DataError(f"{interactions_path} line {lineno}: unknown user id {row[cu]!r}")
        if item_rows is not None and row[ci] not in item_rows:
            raise DataError(f"{interactions_path} line {lineno}: unknown item id {row[ci]!r}")
        users.append(row[cu])
        items.append(row[ci])
        ratings.append(r)
        stamps.append(ts)

    user_ids = natural_order(user_rows if user_rows is not None else set(users))
    item_ids = natural_order(item_rows if item_rows is not None else set(items))
    uidx = {u: i for i, u in enumerate(user_ids)}
    iidx = {u: i for i, u in enumerate(item_ids)}

    def table(ids, rows, schemas):
        if rows is None:
            return FeatureTable.empty()
        cols = {}
        for k, s in enumerate(schemas):
            vals = [s.parse(rows[e][k]) for e in ids]
            cols[s.name] = np.array(vals, dtype=object if s.is_categorical else np.float64)
        return FeatureTable(tuple(schemas), cols)

    return Dataset(
        user_ids=np.array(user_ids, dtype=object),
        item_ids=np.array(item_ids, dtype=object),
        users=np.array([uidx[u] for u in users], dtype=np.int64),
        items=np.array([iidx[i] for i in items], dtype=np.int64),
        ratings=np.array(ratings, dtype=np.float64),
        timestamps=None if ct is None else np.array(stamps, dtype=np.int64),
        user_features=table(user_ids, user_rows, user_schema_),
        item_features=table(item_ids, item_rows, item_schema_),
        rating_scale=scale,
    )


def _fmt_number(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def _schema_doc(schemas):
    out = {}
    for s in schemas:
        if s.is_categorical:
            out[s.name] = {"kind": CATEGORICAL, "domain": list(s.domain)}
        else:
            out[s.name] = {"kind": NUMERIC, "min": s.min, "max": s.max, "integer": s.integer_valued}
    return out


def export_generic(dataset: Dataset, directory) -> dict[str, Path]:
    """Write ``dataset`` in the generic format; :func:`load_generic` reads it back unchanged."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    paths = {
        "interactions_path": d / "interactions.csv",
        "user_features_path": d / "users.csv",
        "item_features_path": d / "items.csv",
        "schema_path": d / "schema.yaml",
    }
    rating = {"min": dataset.rating_scale.min, "max": dataset.rating_scale.max}
    if dataset.rating_scale.values is not None:
        rating["values"] = list(dataset.rating_scale.values)
    doc = {"features": {"user": _schema_doc(dataset.user_features.schemas),
                        "item": _schema_doc(dataset.item_features.schemas)},
           "rating": rating}
    paths["schema_path"].write_text(yaml.safe_dump(doc, sort_keys=False))

    with open(paths["interactions_path"], "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        has_ts = dataset.timestamps is not None
        w.writerow(["user_id", "item_id", "rating"] + (["timestamp"] if has_ts else []))
        for k in range(dataset.n_interactions):
            row = [dataset.user_ids[dataset.users[k]], dataset.item_ids[dataset.items[k]],
                   _fmt_number(dataset.ratings[k])]
            if has_ts:
                row.append(str(int(dataset.timestamps[k])))
            w.writerow(row)

    for side, ids in (("user", dataset.user_ids), ("item", dataset.item_ids)):
        table = dataset.features(side)
        with open(paths[f"{side}_features_path"], "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([f"{side}_id"] + table.names)
            if len(table):
                for e, eid in enumerate(ids):
                    w.writerow([eid] + [
                        table.columns[s.name][e] if s.is_categorical else _fmt_number(table.columns[s.name][e])
                        for s in table.schemas
                    ])
    return paths
