"""Config-driven baseline-vs-perturbed experiments.

One run = one split, one set of fitted models, and at most one robustness
dimension. Test-side dimensions (subpopulation, shift, transformation)
re-evaluate the already fitted models; train-side dimensions (attack,
sparsity) refit every model on the perturbed training data and evaluate on
the untouched test set.
"""
from __future__ import annotations

import copy
import dataclasses
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import models as model_zoo
from . import transforms as tf
from .data import Dataset, activity_counts, load_generic, load_movielens, split_ratio
from .errors import ConfigError, TransformError, UndefinedMetricError
from .metrics import ALL_METRICS, RANKING_FUNCTIONS, RANKING_METRICS, MetricValue, auc, mean_over_users, percent_change
from .rng import derive_seed

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
ROBUSTNESS_SECTIONS = ("subpopulation", "shift", "transformation", "attack", "sparsity")
TEST_SIDE = ("subpopulation", "shift", "transformation")
MARGINAL_MAX_VALUES = 30
RANK_BATCH = 256


# --------------------------------------------------------------------- config

@dataclass
class ModelSpec:
    name: str
    label: str
    params: dict = field(default_factory=dict)
    metrics: list | None = None


@dataclass
class RobustnessConfig:
    dataset: dict
    models: list[ModelSpec]
    metrics: list[str] = field(default_factory=lambda: ["ndcg", "auc"])
    k: int = 10
    positive_threshold: float = 4.0
    ratios: tuple = (0.8, 0.1, 0.1)
    split_seed: int | None = None
    seed: int = 0
    robustness: str | None = None
    section: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    n_jobs: int = 1
    base_dir: Path = field(default_factory=Path.cwd, compare=False)

    @classmethod
    def from_dict(cls, raw: dict, base_dir=None) -> "RobustnessConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a mapping")
        known = {"dataset", "split", "models", "metrics", "seed", "output", "n_jobs", *ROBUSTNESS_SECTIONS}
        unknown = set(raw) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")

        dataset = raw.get("dataset")
        if not isinstance(dataset, dict) or dataset.get("kind") not in ("movielens", "generic"):
            raise ConfigError("dataset.kind must be 'movielens' or 'generic'")
        if dataset["kind"] == "movielens" and "path" not in dataset:
            raise ConfigError("dataset.path is required for movielens")
        if dataset["kind"] == "generic" and not {"interactions", "schema"} <= set(dataset):
            raise ConfigError("generic dataset needs dataset.interactions and dataset.schema")

        split = raw.get("split") or {}
        ratios = tuple(float(r) for r in split.get("ratios", (0.8, 0.1, 0.1)))
        if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1) > 1e-9:
            raise ConfigError(f"split.ratios must be three non-negative numbers summing to 1, got {list(ratios)}")

        met = raw.get("metrics") or {}
        names = [n.lower() for n in met.get("names", ["ndcg", "auc"])]
        for n in names:
            if n not in ALL_METRICS:
                raise ConfigError(f"metrics.names: unknown metric {n!r}")
        k = int(met.get("k", 10))
        if k < 1:
            raise ConfigError("metrics.k must be >= 1")

        specs = []
        raw_models = raw.get("models")
        if not raw_models:
            raise ConfigError("models: at least one model is required")
        for i, entry in enumerate(raw_models):
            if isinstance(entry, str):
                entry = {"name": entry}
            try:
                name = model_zoo.canonical_name(entry.get("name", ""))
            except KeyError:
                raise ConfigError(f"models[{i}].name: unknown model {entry.get('name')!r}") from None
            own = entry.get("metrics")
            if own is not None:
                own = [n.lower() for n in own]
                for n in own:
                    if n not in ALL_METRICS:
                        raise ConfigError(f"models[{i}].metrics: unknown metric {n!r}")
            params = dict(entry.get("params") or {})
            try:
                model_zoo.MODELS[name].Params(**params)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"models[{i}].params: {exc}") from None
            specs.append(ModelSpec(name, entry.get("label", name), params, own))
        labels = [s.label for s in specs]
        if len(set(labels)) != len(labels):
            raise ConfigError("models: labels must be unique (set 'label' to run a model twice)")

        present = [s for s in ROBUSTNESS_SECTIONS if raw.get(s) is not None]
        if len(present) > 1:
            raise ConfigError(f"at most one robustness section per run, got {present}")
        robustness = present[0] if present else None
        section = dict(raw[robustness]) if robustness else {}
        cfg = cls(
            dataset=dict(dataset), models=specs, metrics=names, k=k,
            positive_threshold=float(met.get("positive_threshold", 4.0)),
            ratios=ratios, split_seed=split.get("seed"), seed=int(raw.get("seed", 0)),
            robustness=robustness, section=section, output=dict(raw.get("output") or {}),
            n_jobs=int(raw.get("n_jobs", 1)),
            base_dir=Path(base_dir) if base_dir is not None else Path.cwd(),
        )
        cfg.build_perturbation()
        return cfg

    def to_dict(self) -> dict:
        out = {
            "dataset": copy.deepcopy(self.dataset),
            "split": {"ratios": list(self.ratios)},
            "models": [{"name": m.name, "label": m.label, "params": dict(m.params),
                        **({"metrics": list(m.metrics)} if m.metrics is not None else {})} for m in self.models],
            "metrics": {"names": list(self.metrics), "k": self.k, "positive_threshold": self.positive_threshold},
            "seed": self.seed,
        }
        if self.split_seed is not None:
            out["split"]["seed"] = self.split_seed
        if self.robustness:
            out[self.robustness] = copy.deepcopy(self.section)
        if self.output:
            out["output"] = copy.deepcopy(self.output)
        return out

    def with_seed(self, seed: int) -> "RobustnessConfig":
        return dataclasses.replace(self, seed=int(seed))

    def build_perturbation(self):
        """Turn the robustness section into its transform spec, validating it."""
        s = self.section
        try:
            if self.robustness == "subpopulation":
                return tf.predicate_from_dict(s)
            if self.robustness == "shift":
                return tf.ShiftTarget(s["feature"], dict(s["target"]), s.get("side", "user"))
            if self.robustness == "transformation":
                return tf.TransformSpec(s["feature"], s.get("mode", "random"), s.get("delta"),
                                        float(s.get("affected_fraction", 1.0)), s.get("side", "user"))
            if self.robustness == "attack":
                return tf.AttackSpec(float(s["fraction"]))
            if self.robustness == "sparsity":
                filt = s.get("user_filter")
                return tf.SparsitySpec(float(s["fraction"]), tf.predicate_from_dict(filt) if filt else None)
        except KeyError as exc:
            raise ConfigError(f"{self.robustness}: missing key {exc.args[0]!r}") from None
        except (TransformError, TypeError, ValueError) as exc:
            raise ConfigError(f"{self.robustness}: {exc}") from None
        return None

    def split_seed_value(self) -> int:
        return int(self.split_seed) if self.split_seed is not None else derive_seed(self.seed, "split")

    def resolve(self, p) -> Path:
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p


def load_config(path) -> RobustnessConfig:
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from None
    return RobustnessConfig.from_dict(raw, base_dir=path.resolve().parent)


def load_dataset(config: RobustnessConfig) -> Dataset:
    d = config.dataset
    if d["kind"] == "movielens":
        return load_movielens(config.resolve(d["path"]))
    opt = lambda key: config.resolve(d[key]) if d.get(key) else None  # noqa: E731
    return load_generic(config.resolve(d["interactions"]), opt("user_features"), opt("item_features"),
                        config.resolve(d["schema"]), d.get("delimiter"))


# --------------------------------------------------------------------- report

@dataclass
class ReportEntry:
    model: str
    metric: str
    baseline: MetricValue | None
    perturbed: MetricValue | None = None
    percent_change: float | None = None
    reason: str | None = None

    def to_dict(self):
        return {
            "model": self.model, "metric": self.metric,
            "baseline": self.baseline.as_dict() if self.baseline else None,
            "perturbed": self.perturbed.as_dict() if self.perturbed else None,
            "percent_change": self.percent_change, "reason": self.reason,
        }

    @classmethod
    def from_dict(cls, d):
        mv = lambda x: MetricValue(**x) if x else None  # noqa: E731
        return cls(d["model"], d["metric"], mv(d["baseline"]), mv(d["perturbed"]), d["percent_change"], d["reason"])


@dataclass
class EvalReport:
    config: dict
    seed: int
    dataset_stats: dict
    entries: list[ReportEntry]
    perturbation: dict | None = None
    wall_clock_seconds: float = 0.0
    schema_version: int = SCHEMA_VERSION

    def to_dict(self, timing=True) -> dict:
        out = {
            "schema_version": self.schema_version,
            "seed": self.seed,
            "config": self.config,
            "dataset_stats": self.dataset_stats,
            "perturbation": self.perturbation,
            "entries": [e.to_dict() for e in self.entries],
        }
        if timing:
            out["wall_clock_seconds"] = self.wall_clock_seconds
        return out

    @classmethod
    def from_dict(cls, d) -> "EvalReport":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ValueError(f"unsupported report schema_version {d.get('schema_version')!r}")
        return cls(d["config"], d["seed"], d["dataset_stats"], [ReportEntry.from_dict(e) for e in d["entries"]],
                   d.get("perturbation"), d.get("wall_clock_seconds", 0.0), d["schema_version"])

    def reproducible_view(self) -> dict:
        """Everything except wall-clock time; equal across re-runs of one config."""
        return self.to_dict(timing=False)

    @property
    def changes(self) -> list[ReportEntry]:
        return [e for e in self.entries if e.percent_change is not None]


# ----------------------------------------------------------------- evaluation

def _metric_label(name, k):
    return f"{name}@{k}" if name in RANKING_METRICS else name


def evaluate(model, dataset: Dataset, train_indices, eval_indices, metric_names, k, threshold,
             user_features=None, item_features=None) -> dict:
    """Compute each metric for ``model`` on ``eval_indices``.

    Returns ``{label: MetricValue | str}``, a string being the reason the
    metric is undefined. Ranking candidates are all items minus the user's
    items in ``train_indices``.
    """
    eval_indices = np.asarray(eval_indices, dtype=np.int64)
    out = {}
    ranking = [m for m in metric_names if m in RANKING_METRICS]
    if ranking:
        out.update(_ranking_metrics(model, dataset, train_indices, eval_indices, ranking, k, threshold,
                                    user_features, item_features))
    for name in metric_names:
        if name == "auc":
            if eval_indices.size == 0:
                out["auc"] = "empty evaluation set"
                continue
            scores = model.score_pairs(dataset.users[eval_indices], dataset.items[eval_indices],
                                       user_features, item_features)
            labels = dataset.ratings[eval_indices] >= threshold
            try:
                out["auc"] = MetricValue("auc", auc(scores, labels), int(eval_indices.size))
            except UndefinedMetricError as exc:
                out["auc"] = str(exc)
        elif name == "rmse":
            out["rmse"] = f"{model.name} scores are not rating predictions"
    return out


def _ranking_metrics(model, dataset, train_indices, eval_indices, names, k, threshold, user_features, item_features):
    labels = [_metric_label(n, k) for n in names]
    pos = eval_indices[dataset.ratings[eval_indices] >= threshold]
    if pos.size == 0:
        return {lab: "no relevant test items" for lab in labels}
    relevant = {}
    for u, i in zip(dataset.users[pos].tolist(), dataset.items[pos].tolist()):
        relevant.setdefault(u, set()).add(i)
    users = np.array(sorted(relevant), dtype=np.int64)

    train_indices = np.asarray(train_indices, dtype=np.int64)
    hist_users, hist_items = dataset.users[train_indices], dataset.items[train_indices]
    order = np.argsort(hist_users, kind="stable")
    hist_users, hist_items = hist_users[order], hist_items[order]

    per_metric = {n: [] for n in names}
    for start in range(0, users.size, RANK_BATCH):
        batch = users[start:start + RANK_BATCH]
        scores = model.score_items(batch, user_features, item_features)
        for row, u in enumerate(batch.tolist()):
            lo, hi = np.searchsorted(hist_users, [u, u + 1])
            mask = np.ones(dataset.n_items, dtype=bool)
            mask[hist_items[lo:hi]] = False
            cand = np.flatnonzero(mask)
            ranked = model_zoo.top_k(scores[row, cand], cand, k).tolist() if cand.size else []
            for n in names:
                per_metric[n].append((u, RANKING_FUNCTIONS[n](ranked, relevant[u], k)))
    out = {}
    for n, lab in zip(names, labels):
        try:
            value, count = mean_over_users(per_metric[n])
            out[lab] = MetricValue(n, float(value), count, k)
        except UndefinedMetricError as exc:
            out[lab] = str(exc)
    return out


# --------------------------------------------------------------------- runner

def _model_params(spec: ModelSpec, config: RobustnessConfig):
    cls = model_zoo.MODELS[spec.name]
    params = dict(spec.params)
    if "positive_threshold" in {f.name for f in dataclasses.fields(cls.Params)}:
        params.setdefault("positive_threshold", config.positive_threshold)
    return cls(**params)


def _fit_all(config, dataset, train, pool):
    def fit(spec):
        model = _model_params(spec, config)
        log.info("fitting %s on %d interactions", spec.label, len(train))
        return model.fit(dataset, train, seed=derive_seed(config.seed, f"model:{spec.label}"))
    return list(pool.map(fit, config.models))


def _evaluate_all(config, fitted, dataset, train, eval_indices, pool, user_features=None, item_features=None):
    def run(pair):
        spec, model = pair
        names = spec.metrics if spec.metrics is not None else config.metrics
        return evaluate(model, dataset, train, eval_indices, names, config.k, config.positive_threshold,
                        user_features, item_features)
    return list(pool.map(run, zip(config.models, fitted)))


def dataset_stats(dataset: Dataset, split) -> dict:
    train = split.train
    stats = {
        "n_users": dataset.n_users, "n_items": dataset.n_items, "n_interactions": dataset.n_interactions,
        "split_sizes": {"train": int(split.train.size), "valid": int(split.valid.size), "test": int(split.test.size)},
        "split_seed": split.seed,
        "train_marginals": {},
    }
    for side in ("user", "item"):
        table = dataset.features(side)
        codes = (dataset.users if side == "user" else dataset.items)[train]
        for schema in table.schemas:
            if not schema.is_categorical or len(schema.domain) > MARGINAL_MAX_VALUES:
                continue
            vals = table.column(schema.name)[codes]
            stats["train_marginals"][f"{side}.{schema.name}"] = {
                v: float(np.mean(vals == v)) if vals.size else 0.0 for v in schema.domain
            }
    counts = activity_counts(dataset, train)
    counts = counts[counts > 0]
    if counts.size:
        stats["train_activity_quantiles"] = {
            str(q): float(np.quantile(counts, q)) for q in (0.0, 0.25, 0.5, 0.75, 1.0)
        }
    return stats


def run_experiment(config: RobustnessConfig, n_jobs: int | None = None, dataset: Dataset | None = None) -> EvalReport:
    """Split, fit, evaluate baseline and (optionally) one perturbation."""
    started = time.perf_counter()
    n_jobs = config.n_jobs if n_jobs is None else n_jobs
    if dataset is None:
        dataset = load_dataset(config)
    split = split_ratio(dataset, config.ratios, config.split_seed_value())
    spec = config.build_perturbation()
    pseed = derive_seed(config.seed, "transform")

    with ThreadPoolExecutor(max_workers=max(1, n_jobs)) as pool:
        fitted = _fit_all(config, dataset, split.train, pool)
        baseline = _evaluate_all(config, fitted, dataset, split.train, split.test, pool)

        perturbation = None
        perturbed = None
        kind = config.robustness
        if kind in ("subpopulation", "shift"):
            if kind == "subpopulation":
                subset = tf.slice_subpopulation(dataset, split.test, spec, split.train)
            else:
                subset = tf.shift_distribution(dataset, split.test, spec, pseed)
            perturbation = {"dimension": kind, "test_size": int(split.test.size), "eval_size": int(subset.size)}
            if kind == "shift":
                vals = dataset.features(spec.side).column(spec.feature)[
                    (dataset.users if spec.side == "user" else dataset.items)[subset]]
                perturbation["achieved_marginals"] = {
                    str(v): (float(np.mean(vals == str(v))) if vals.size else 0.0) for v in spec.target_marginals}
            perturbed = _evaluate_all(config, fitted, dataset, split.train, subset, pool)
        elif kind == "transformation":
            table, affected = tf.transform_feature(dataset, split.test, spec, pseed)
            changed = int(np.sum(table.column(spec.feature) != dataset.features(spec.side).column(spec.feature)))
            perturbation = {"dimension": kind, "n_affected": int(affected.size), "n_changed": changed}
            feats = {"user_features": table} if spec.side == "user" else {"item_features": table}
            perturbed = _evaluate_all(config, fitted, dataset, split.train, split.test, pool, **feats)
        elif kind in ("attack", "sparsity"):
            if kind == "attack":
                train_data, train_idx = tf.attack_ratings(dataset, split.train, spec, pseed), split.train
                n_changed = int(np.sum(train_data.ratings != dataset.ratings))
                perturbation = {"dimension": kind, "n_train": int(split.train.size), "n_changed": n_changed}
            else:
                train_data, train_idx = dataset, tf.sparsify(dataset, split.train, spec, pseed)
                perturbation = {"dimension": kind, "n_train": int(split.train.size),
                                "n_removed": int(split.train.size - train_idx.size)}
            refit = _fit_all(config, train_data, train_idx, pool)
            # relevance and test features come from the clean dataset
            perturbed = _evaluate_all(config, refit, dataset, train_idx, split.test, pool)

    entries = []
    for i, mspec in enumerate(config.models):
        for label, base in baseline[i].items():
            entry = ReportEntry(mspec.label, label, base if isinstance(base, MetricValue) else None)
            if not isinstance(base, MetricValue):
                entry.reason = f"baseline undefined: {base}"
            if perturbed is not None:
                pert = perturbed[i][label]
                if isinstance(pert, MetricValue):
                    entry.perturbed = pert
                elif entry.reason is None:
                    entry.reason = f"perturbed undefined: {pert}"
                if entry.baseline is not None and entry.perturbed is not None:
                    try:
                        entry.percent_change = percent_change(entry.baseline.value, entry.perturbed.value)
                    except UndefinedMetricError as exc:
                        entry.reason = str(exc)
            entries.append(entry)

    return EvalReport(
        config=config.to_dict(),
        seed=config.seed,
        dataset_stats=dataset_stats(dataset, split),
        entries=entries,
        perturbation=perturbation,
        wall_clock_seconds=time.perf_counter() - started,
    )
