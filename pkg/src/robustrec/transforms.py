"""Seeded perturbations of a split dataset.

Every function maps (dataset, index set, spec, seed) to a fresh object and
never mutates its inputs. Test-side perturbations (slicing, shift, feature
transformation) act on test indices or test-entity features; train-side ones
(attack, sparsity) act on train interactions only.

Counting rules: "round" is round-half-up, and per-user sparsity counts use
floor. Both absorb a 1e-9 slack so that e.g. ``0.29 * 100`` counts as 29.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from .data import Dataset, FeatureTable, activity_counts
from .errors import TransformError
from .rng import Rng

log = logging.getLogger(__name__)

_EPS = 1e-9


def round_half_up(x: float) -> int:
    return math.floor(x + 0.5 + _EPS)


def floor_count(x: float) -> int:
    return math.floor(x + _EPS)


def _check_fraction(name, value):
    if not 0.0 <= value <= 1.0:
        raise TransformError(f"{name} must lie in [0, 1], got {value}")


def _check_side(side):
    if side not in ("user", "item"):
        raise TransformError(f"side must be 'user' or 'item', got {side!r}")


# ---------------------------------------------------------------- predicates

@dataclass(frozen=True)
class FeatureEquals:
    feature: str
    value: Any
    side: str = "user"

    def __post_init__(self):
        _check_side(self.side)

    def entity_mask(self, dataset: Dataset, train_indices=None) -> np.ndarray:
        table = dataset.features(self.side)
        schema = table.schema(self.feature)
        col = table.column(self.feature)
        if schema.is_categorical:
            return col == str(self.value)
        return col == float(self.value)


@dataclass(frozen=True)
class ActivityBand:
    """Users whose train activity quantile lies in ``[lower, upper)``.

    A user's quantile is the fraction of train users with strictly fewer
    train interactions; users absent from train sit at quantile 0. The upper
    bound is inclusive when it equals 1.
    """

    lower: float
    upper: float
    side: str = field(default="user", init=False)

    def __post_init__(self):
        if not 0.0 <= self.lower <= self.upper <= 1.0:
            raise TransformError(f"activity band needs 0 <= lower <= upper <= 1, got {self.lower}, {self.upper}")

    def entity_mask(self, dataset: Dataset, train_indices=None) -> np.ndarray:
        if train_indices is None:
            raise TransformError("activity band needs the train indices")
        counts = activity_counts(dataset, train_indices)
        active = np.sort(counts[counts > 0])
        if active.size == 0:
            return np.zeros(dataset.n_users, dtype=bool)
        q = np.searchsorted(active, counts, side="left") / active.size
        upper_ok = q <= self.upper if self.upper >= 1.0 else q < self.upper
        return (q >= self.lower) & upper_ok


@dataclass(frozen=True)
class MeanRatingBand:
    """Users whose mean train rating lies in ``[lower, upper]``."""

    lower: float
    upper: float
    side: str = field(default="user", init=False)

    def __post_init__(self):
        if self.lower > self.upper:
            raise TransformError("mean rating band needs lower <= upper")

    def entity_mask(self, dataset: Dataset, train_indices=None) -> np.ndarray:
        if train_indices is None:
            raise TransformError("mean rating band needs the train indices")
        idx = np.asarray(train_indices, dtype=np.int64)
        counts = np.bincount(dataset.users[idx], minlength=dataset.n_users)
        sums = np.bincount(dataset.users[idx], weights=dataset.ratings[idx], minlength=dataset.n_users)
        with np.errstate(invalid="ignore", divide="ignore"):
            means = sums / counts
        return (counts > 0) & (means >= self.lower) & (means <= self.upper)


def predicate_from_dict(d: dict):
    kind = d.get("kind")
    if kind == "feature_equals":
        return FeatureEquals(d["feature"], d["value"], d.get("side", "user"))
    if kind == "activity_band":
        return ActivityBand(float(d["lower_quantile"]), float(d["upper_quantile"]))
    if kind == "mean_rating_band":
        return MeanRatingBand(float(d["lower"]), float(d["upper"]))
    raise TransformError(f"unknown predicate kind {kind!r}")


def _entity_codes(dataset, side, indices):
    idx = np.asarray(indices, dtype=np.int64)
    return (dataset.users if side == "user" else dataset.items)[idx]


def slice_subpopulation(dataset: Dataset, test_indices, predicate, train_indices=None) -> np.ndarray:
    """Keep the test interactions whose user (or item) satisfies ``predicate``.

    Activity and mean-rating statistics come from ``train_indices``.
    """
    test_indices = np.asarray(test_indices, dtype=np.int64)
    mask = predicate.entity_mask(dataset, train_indices)
    out = test_indices[mask[_entity_codes(dataset, predicate.side, test_indices)]]
    if out.size == 0:
        log.warning("subpopulation %r matched no test interactions", predicate)
    return out


# ---------------------------------------------------------------------- shift

@dataclass(frozen=True)
class ShiftTarget:
    feature: str
    target_marginals: dict
    side: str = "user"

    def __post_init__(self):
        _check_side(self.side)
        props = [float(p) for p in self.target_marginals.values()]
        if any(p < 0 for p in props) or abs(sum(props) - 1.0) > 1e-9:
            raise TransformError(f"target marginals must be non-negative and sum to 1, got {self.target_marginals}")


def shift_counts(available: dict, target: dict) -> dict:
    """Largest stratum counts whose total ``n`` satisfies ``n * t_v <= available_v``.

    Counts are apportioned by largest remainder, so each count is within one
    of ``n * t_v`` and never exceeds what is available.
    """
    positive = [v for v, t in target.items() if t > 0]
    if not positive:
        return {v: 0 for v in target}
    n = min(math.floor(available[v] / target[v] + _EPS) for v in positive)
    while n > 0:
        quotas = {v: n * target[v] for v in positive}
        counts = {v: math.floor(q + _EPS) for v, q in quotas.items()}
        rest = n - sum(counts.values())
        order = sorted(positive, key=lambda v: -(quotas[v] - counts[v]))
        for v in order[:rest]:
            counts[v] += 1
        if all(counts[v] <= available[v] for v in positive):
            break
        n -= 1
    else:
        counts = {v: 0 for v in positive}
    return {v: counts.get(v, 0) for v in target}


def shift_distribution(dataset: Dataset, test_indices, target: ShiftTarget, seed: int) -> np.ndarray:
    """Stratified downsample of ``test_indices`` matching ``target`` marginals.

    Strata are the values of a categorical feature over test interactions.
    The result has maximal size among subsamples whose per-value counts are
    at most ``n * t_v``; members are drawn without replacement and returned
    in their original order.
    """
    test_indices = np.asarray(test_indices, dtype=np.int64)
    table = dataset.features(target.side)
    schema = table.schema(target.feature)
    if not schema.is_categorical:
        raise TransformError(f"distribution shift needs a categorical feature, {target.feature!r} is numeric")
    unknown = set(map(str, target.target_marginals)) - set(schema.domain)
    if unknown:
        raise TransformError(f"target values {sorted(unknown)} not in the domain of {target.feature!r}")
    props = {str(v): float(p) for v, p in target.target_marginals.items()}
    values = table.column(target.feature)[_entity_codes(dataset, target.side, test_indices)]

    strata = {v: np.flatnonzero(values == v) for v in schema.domain if v in props}
    for v, p in props.items():
        if p > 0 and strata[v].size == 0:
            raise TransformError(f"no test interactions with {target.feature}={v!r} to sample from")
    counts = shift_counts({v: s.size for v, s in strata.items()}, props)

    rng = Rng(seed)
    keep = []
    for v in schema.domain:
        if v not in strata or counts[v] == 0:
            continue
        pos = strata[v]
        keep.append(pos[rng.sample(pos.size, counts[v])])
    if not keep:
        return test_indices[:0]
    return test_indices[np.sort(np.concatenate(keep))]


# ------------------------------------------------------------- transformation

@dataclass(frozen=True)
class TransformSpec:
    feature: str
    mode: str = "random"
    delta: float | None = None
    affected_fraction: float = 1.0
    side: str = "user"

    def __post_init__(self):
        _check_side(self.side)
        if self.mode not in ("random", "structured"):
            raise TransformError(f"mode must be 'random' or 'structured', got {self.mode!r}")
        if self.mode == "structured" and (self.delta is None or self.delta <= 0):
            raise TransformError("structured transformation needs delta > 0")
        _check_fraction("affected_fraction", self.affected_fraction)


class PerturbedFeatures(NamedTuple):
    table: FeatureTable
    affected: np.ndarray  # entity codes that were re-drawn, ascending


def _pick_affected(dataset, spec, test_indices, rng):
    eligible = np.unique(_entity_codes(dataset, spec.side, test_indices))
    k = round_half_up(spec.affected_fraction * eligible.size)
    return np.sort(eligible[rng.sample(eligible.size, k)])


def transform_feature_structured(dataset: Dataset, test_indices, spec: TransformSpec, seed: int) -> PerturbedFeatures:
    """Move a numeric feature of test entities within ``±delta`` of its value.

    Each affected entity gets ``v * (1 + delta * (2u - 1))`` with ``u``
    uniform on ``[0, 1)``, clipped to the schema bounds and rounded for
    integer-valued features. The draw may land back on ``v`` after rounding.
    """
    if spec.mode != "structured":
        raise TransformError("expected a structured TransformSpec")
    table = dataset.features(spec.side)
    schema = table.schema(spec.feature)
    if schema.is_categorical:
        raise TransformError(f"structured transformation needs a numeric feature, {spec.feature!r} is categorical")
    rng = Rng(seed)
    affected = _pick_affected(dataset, spec, test_indices, rng)
    col = table.column(spec.feature).copy()
    u = rng.random(affected.size)
    new = col[affected] * (1.0 + spec.delta * (2.0 * u - 1.0))
    new = np.clip(new, schema.min, schema.max)
    if schema.integer_valued:
        new = np.floor(new + 0.5)
    col[affected] = new
    return PerturbedFeatures(table.replace(spec.feature, col), affected)


def transform_feature_random(dataset: Dataset, test_indices, spec: TransformSpec, seed: int) -> PerturbedFeatures:
    """Replace a feature of test entities by a uniform draw from its schema.

    Categorical and integer-valued features draw from the domain with the
    original value excluded, so every affected entity changes; real-valued
    features draw uniformly on ``[min, max]``.
    """
    if spec.mode != "random":
        raise TransformError("expected a random TransformSpec")
    table = dataset.features(spec.side)
    schema = table.schema(spec.feature)
    col = table.column(spec.feature).copy()

    if schema.is_categorical:
        domain = np.array(schema.domain, dtype=object)
    elif schema.integer_valued:
        domain = np.arange(math.ceil(schema.min), math.floor(schema.max) + 1, dtype=np.float64)
    else:
        domain = None
    if domain is not None and domain.size < 2:
        raise TransformError(f"feature {spec.feature!r} has a single admissible value; nothing to corrupt to")
    if domain is None and schema.min == schema.max:
        raise TransformError(f"feature {spec.feature!r} has a degenerate range")

    rng = Rng(seed)
    affected = _pick_affected(dataset, spec, test_indices, rng)
    if domain is None:
        col[affected] = rng.uniform(schema.min, schema.max, affected.size)
    else:
        lookup = {v: i for i, v in enumerate(domain.tolist())}
        draws = rng.integers(domain.size - 1, affected.size)
        for e, k in zip(affected, draws):
            orig = lookup[col[e]]
            col[e] = domain[k if k < orig else k + 1]
    return PerturbedFeatures(table.replace(spec.feature, col), affected)


def transform_feature(dataset: Dataset, test_indices, spec: TransformSpec, seed: int) -> PerturbedFeatures:
    if spec.mode == "structured":
        return transform_feature_structured(dataset, test_indices, spec, seed)
    return transform_feature_random(dataset, test_indices, spec, seed)


# --------------------------------------------------------------------- attack

@dataclass(frozen=True)
class AttackSpec:
    fraction: float

    def __post_init__(self):
        _check_fraction("attack fraction", self.fraction)


def attack_ratings(dataset: Dataset, train_indices, spec: AttackSpec, seed: int) -> Dataset:
    """Overwrite a random fraction of train ratings with different valid ratings.

    Exactly ``round(fraction * |train|)`` interactions are corrupted; each
    new rating is uniform over the scale's values minus the original one.
    """
    train_indices = np.asarray(train_indices, dtype=np.int64)
    k = round_half_up(spec.fraction * train_indices.size)
    if k == 0:
        return dataset
    values = dataset.rating_scale.values
    if values is None:
        raise TransformError("rating attack needs a discrete rating scale")
    if len(values) < 2:
        raise TransformError("rating attack needs at least two valid rating values")
    rng = Rng(seed)
    victims = np.sort(train_indices[rng.sample(train_indices.size, k)])
    draws = rng.integers(len(values) - 1, k)
    lookup = {v: i for i, v in enumerate(values)}
    ratings = dataset.ratings.copy()
    for idx, d in zip(victims, draws):
        orig = lookup[float(ratings[idx])]
        ratings[idx] = values[d if d < orig else d + 1]
    return dataset.with_ratings(ratings)


# ------------------------------------------------------------------- sparsity

@dataclass(frozen=True)
class SparsitySpec:
    fraction: float
    user_filter: Any = None

    def __post_init__(self):
        _check_fraction("sparsity fraction", self.fraction)
        if self.user_filter is not None and getattr(self.user_filter, "side", "user") != "user":
            raise TransformError("sparsity user_filter must select users")


def sparsify(dataset: Dataset, train_indices, spec: SparsitySpec, seed: int) -> np.ndarray:
    """Drop ``floor(fraction * n_u)`` random train interactions of each eligible user.

    Returns the surviving train indices in their original order.
    """
    train_indices = np.asarray(train_indices, dtype=np.int64)
    if spec.user_filter is None:
        eligible = np.ones(dataset.n_users, dtype=bool)
    else:
        eligible = spec.user_filter.entity_mask(dataset, train_indices)
    owners = dataset.users[train_indices]
    order = np.argsort(owners, kind="stable")
    bounds = np.searchsorted(owners[order], np.arange(dataset.n_users + 1))

    rng = Rng(seed)
    drop = np.zeros(train_indices.size, dtype=bool)
    for u in range(dataset.n_users):
        lo, hi = bounds[u], bounds[u + 1]
        if hi == lo or not eligible[u]:
            continue
        k = floor_count(spec.fraction * (hi - lo))
        if k:
            drop[order[lo:hi][rng.sample(hi - lo, k)]] = True
    return train_indices[~drop]
