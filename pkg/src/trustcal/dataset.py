"""Tabular income-prediction data: schema, loading, splits, encoding, neighbors.

The task schema is fixed to five features (three numeric, two categorical).
Encoded vectors z-score numerics with statistics from the training split only
and expand categoricals to one-hot blocks scaled by 1/sqrt(2), so that any
single category mismatch contributes exactly 1.0 to squared Euclidean
distance — commensurate with a one-standard-deviation numeric shift.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Protocol, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

logger = logging.getLogger(__name__)

LABEL_POS = ">50K"
LABEL_NEG = "<=50K"
MISSING_MARKER = "?"

OCCUPATIONS = (
    "Adm-clerical", "Craft-repair", "Exec-managerial", "Farming-fishing",
    "Handlers-cleaners", "Machine-op-inspct", "Other-service",
    "Priv-house-serv", "Prof-specialty", "Protective-serv", "Sales",
    "Tech-support", "Transport-moving",
)
MARITAL_STATUSES = (
    "Divorced", "Married-AF-spouse", "Married-civ-spouse",
    "Married-spouse-absent", "Never-married", "Separated", "Widowed",
)


class DatasetError(Exception):
    pass


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str                       # "numeric" | "categorical"
    domain: tuple                   # (lo, hi) for numeric, category tuple otherwise

    def __post_init__(self):
        if self.kind not in ("numeric", "categorical"):
            raise DatasetError(f"unknown feature kind {self.kind!r}")
        if self.kind == "categorical":
            if not self.domain:
                raise DatasetError(f"{self.name}: empty category list")
            if len(set(self.domain)) != len(self.domain):
                raise DatasetError(f"{self.name}: duplicate categories")

    @property
    def is_numeric(self) -> bool:
        return self.kind == "numeric"


@dataclass(frozen=True)
class FeatureSchema:
    features: tuple[Feature, ...]

    def __post_init__(self):
        if len(set(f.name for f in self.features)) != len(self.features):
            raise DatasetError("duplicate feature names")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(f.name for f in self.features)

    def feature(self, name: str) -> Feature:
        for f in self.features:
            if f.name == name:
                return f
        raise DatasetError(f"unknown feature {name!r}")

    def encoded_length(self) -> int:
        return sum(1 if f.is_numeric else len(f.domain) for f in self.features)

    def validate_value(self, feature: Feature, raw: str):
        """Parse a raw string; returns the value or None when out of domain."""
        if raw == MISSING_MARKER or raw == "":
            return None
        if feature.is_numeric:
            try:
                value = float(raw)
            except ValueError:
                return None
            lo, hi = feature.domain
            if not (lo <= value <= hi):
                return None
            return value
        return raw if raw in feature.domain else None

    def fingerprint(self) -> str:
        import hashlib
        text = "|".join(
            f"{f.name}:{f.kind}:{','.join(map(str, f.domain))}" for f in self.features
        )
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def canonical_schema() -> FeatureSchema:
    """The five task-visible features of the income-prediction setup."""
    return FeatureSchema(features=(
        Feature("age", "numeric", (17, 90)),
        Feature("education-years", "numeric", (1, 16)),
        Feature("occupation", "categorical", OCCUPATIONS),
        Feature("marital-status", "categorical", MARITAL_STATUSES),
        Feature("hours-per-week", "numeric", (1, 99)),
    ))


@dataclass(frozen=True)
class TaskInstance:
    id: str
    values: dict
    label: str

    def value(self, name: str):
        return self.values[name]

    def to_dict(self) -> dict:
        return {"id": self.id, "values": dict(self.values), "label": self.label}

    @staticmethod
    def from_dict(data: dict) -> "TaskInstance":
        return TaskInstance(id=data["id"], values=dict(data["values"]), label=data["label"])


@dataclass(frozen=True)
class LoadReport:
    total_rows: int
    loaded: int
    dropped: int
    drop_reasons: dict


def _parse_label(raw: str) -> str | None:
    raw = raw.strip()
    if raw in (LABEL_POS, LABEL_NEG):
        return raw
    # raw integer income, binarized at the 50K threshold
    try:
        income = float(raw)
    except ValueError:
        return None
    return LABEL_POS if income > 50000 else LABEL_NEG


def load_dataset_report(path: str | Path, schema: FeatureSchema) -> tuple[list[TaskInstance], LoadReport]:
    """CSV loader that also reports how many rows were dropped and why."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    with path.open(newline="") as handle:
        reader = csv.reader(handle)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"empty dataset file: {path}")
        missing = [n for n in schema.names if n not in header]
        if missing:
            raise DatasetError(f"header missing columns: {missing}")
        if "income" not in header:
            raise DatasetError("header missing the income column")
        col = {name: header.index(name) for name in (*schema.names, "income")}

        instances: list[TaskInstance] = []
        drop_reasons: dict[str, int] = {}
        total = 0
        for row_idx, row in enumerate(reader):
            if not row or all(not cell.strip() for cell in row):
                continue
            total += 1
            values = {}
            problem = None
            for feat in schema.features:
                raw = row[col[feat.name]].strip()
                value = schema.validate_value(feat, raw)
                if value is None:
                    problem = f"bad value for {feat.name}"
                    break
                values[feat.name] = value
            if problem is None:
                label = _parse_label(row[col["income"]])
                if label is None:
                    problem = "bad income value"
            if problem is not None:
                drop_reasons[problem] = drop_reasons.get(problem, 0) + 1
                continue
            instances.append(TaskInstance(id=f"i{row_idx:06d}", values=values, label=label))

    dropped = total - len(instances)
    if dropped:
        logger.warning("dropped %d/%d rows from %s: %s", dropped, total, path, drop_reasons)
    if not instances:
        raise DatasetError(f"no valid rows in {path}")
    return instances, LoadReport(total_rows=total, loaded=len(instances),
                                 dropped=dropped, drop_reasons=drop_reasons)


def load_dataset(path: str | Path, schema: FeatureSchema) -> list[TaskInstance]:
    instances, _ = load_dataset_report(path, schema)
    return instances


EncodingStats = dict[str, tuple[float, float]]


@dataclass(frozen=True)
class DatasetSplit:
    schema: FeatureSchema
    train: tuple[TaskInstance, ...]
    test: tuple[TaskInstance, ...]
    encoding_stats: EncodingStats
    seed: int
    train_fraction: float

    @cached_property
    def _train_by_id(self) -> tuple[TaskInstance, ...]:
        return tuple(sorted(self.train, key=lambda inst: inst.id))

    @cached_property
    def _train_matrix(self) -> np.ndarray:
        return encode_matrix(self._train_by_id, self)

    @cached_property
    def _train_matrix_raw(self) -> np.ndarray:
        return encode_matrix(self._train_by_id, self, normalize=False)

    def stats_dict(self) -> dict:
        return {name: list(pair) for name, pair in self.encoding_stats.items()}


def compute_encoding_stats(instances: Sequence[TaskInstance], schema: FeatureSchema) -> EncodingStats:
    stats: EncodingStats = {}
    for feat in schema.features:
        if not feat.is_numeric:
            continue
        column = np.array([inst.value(feat.name) for inst in instances], dtype=float)
        stats[feat.name] = (float(column.mean()), float(column.std()))
    return stats


def split(instances: Sequence[TaskInstance], train_fraction: float, seed: int,
          schema: FeatureSchema | None = None) -> DatasetSplit:
    """Seeded random partition; |train| = round(train_fraction * n), halves up."""
    if not 0 < train_fraction < 1:
        raise DatasetError("train_fraction must be in (0, 1)")
    n = len(instances)
    if n < 2:
        raise DatasetError("need at least 2 instances to split")
    if schema is None:
        schema = canonical_schema()
    n_train = int(np.floor(train_fraction * n + 0.5))
    n_train = min(max(n_train, 1), n - 1)
    order = np.random.default_rng(seed).permutation(n)
    train = tuple(instances[i] for i in order[:n_train])
    test = tuple(instances[i] for i in order[n_train:])
    return DatasetSplit(schema=schema, train=train, test=test,
                        encoding_stats=compute_encoding_stats(train, schema),
                        seed=seed, train_fraction=train_fraction)


CATEGORY_SCALE = 1.0 / np.sqrt(2.0)


class TabularEncoder(BaseEstimator, TransformerMixin):
    """Schema-aware encoder with train-split statistics (fit) and the fixed
    z-score / scaled-one-hot layout (transform).

    ``normalize=False`` leaves numeric columns raw (a config escape hatch for
    experimenting with unnormalized distances); one-hot scaling is unchanged.
    """

    def __init__(self, schema: FeatureSchema | None = None, normalize: bool = True):
        self.schema = schema
        self.normalize = normalize

    def fit(self, X: Sequence[TaskInstance], y=None):
        schema = self.schema or canonical_schema()
        self.schema_ = schema
        self.stats_ = compute_encoding_stats(X, schema)
        return self

    def transform(self, X: Sequence[TaskInstance]) -> np.ndarray:
        if not hasattr(self, "stats_"):
            raise DatasetError("encoder is not fitted")
        return _encode_rows(X, self.schema_, self.stats_, self.normalize)

    @classmethod
    def from_split(cls, split: DatasetSplit, normalize: bool = True) -> "TabularEncoder":
        enc = cls(schema=split.schema, normalize=normalize)
        enc.schema_ = split.schema
        enc.stats_ = dict(split.encoding_stats)
        return enc


def _encode_rows(instances: Sequence[TaskInstance], schema: FeatureSchema,
                 stats: EncodingStats, normalize: bool) -> np.ndarray:
    out = np.zeros((len(instances), schema.encoded_length()), dtype=float)
    offset = 0
    for feat in schema.features:
        if feat.is_numeric:
            column = np.array([inst.value(feat.name) for inst in instances], dtype=float)
            if normalize:
                mean, std = stats[feat.name]
                column = (column - mean) / std if std > 0 else np.zeros_like(column)
            out[:, offset] = column
            offset += 1
        else:
            index = {cat: i for i, cat in enumerate(feat.domain)}
            for row, inst in enumerate(instances):
                out[row, offset + index[inst.value(feat.name)]] = CATEGORY_SCALE
            offset += len(feat.domain)
    return out


def encode(instance: TaskInstance, split: DatasetSplit, normalize: bool = True) -> np.ndarray:
    return _encode_rows([instance], split.schema, split.encoding_stats, normalize)[0]


def encode_matrix(instances: Sequence[TaskInstance], split: DatasetSplit,
                  normalize: bool = True) -> np.ndarray:
    return _encode_rows(instances, split.schema, split.encoding_stats, normalize)


def nearest_neighbors(query: TaskInstance, split: DatasetSplit, n: int,
                      exclude_ids: Iterable[str] = (),
                      normalize: bool = True) -> list[tuple[TaskInstance, float]]:
    """The n closest training instances, ascending by Euclidean distance over
    encoded vectors; ties broken by ascending instance id."""
    train = split._train_by_id
    if not train:
        raise DatasetError("empty train split")
    exclude = set(exclude_ids) | {query.id}
    candidates = [i for i, inst in enumerate(train) if inst.id not in exclude]
    if n > len(candidates):
        raise DatasetError(f"n={n} exceeds available train instances ({len(candidates)})")
    full = split._train_matrix if normalize else split._train_matrix_raw
    matrix = full[candidates]
    q = encode(query, split, normalize=normalize)
    dists = np.sqrt(((matrix - q) ** 2).sum(axis=1))
    # rows are pre-sorted by id, so a stable sort keeps id order inside ties
    order = np.argsort(dists, kind="stable")[:n]
    return [(train[candidates[i]], float(dists[i])) for i in order]


def median_pairwise_distance(split: DatasetSplit, sample_pairs: int = 20000,
                             seed: int = 0, exact_max: int = 200,
                             normalize: bool = True) -> float:
    """Median Euclidean distance between training instances; exact for small
    training sets, otherwise over seeded uniformly sampled unordered pairs."""
    train = split._train_by_id
    if len(train) < 2:
        raise DatasetError("need at least 2 train instances")
    matrix = split._train_matrix if normalize else split._train_matrix_raw
    n = len(train)
    if n <= exact_max:
        diffs = matrix[:, None, :] - matrix[None, :, :]
        dists = np.sqrt((diffs ** 2).sum(axis=2))
        upper = dists[np.triu_indices(n, k=1)]
        return float(np.median(upper))
    rng = np.random.default_rng(seed)
    first = rng.integers(0, n, size=sample_pairs)
    second = rng.integers(0, n - 1, size=sample_pairs)
    second = np.where(second >= first, second + 1, second)
    dists = np.sqrt(((matrix[first] - matrix[second]) ** 2).sum(axis=1))
    return float(np.median(dists))


class ClassifierHandle(Protocol):
    def predict_labels(self, instances: Sequence[TaskInstance]) -> list[str]: ...


def permutation_importance(model: ClassifierHandle, split: DatasetSplit, feature: str,
                           repeats: int = 5, seed: int = 0) -> float:
    """Baseline test accuracy minus mean accuracy after shuffling one feature
    column; can be negative."""
    split.schema.feature(feature)  # raises on unknown name
    test = list(split.test)
    truth = [inst.label for inst in test]

    def accuracy(instances: Sequence[TaskInstance]) -> float:
        predicted = model.predict_labels(instances)
        return float(np.mean([p == t for p, t in zip(predicted, truth)]))

    baseline = accuracy(test)
    rng = np.random.default_rng(seed)
    drops = []
    for _ in range(repeats):
        order = rng.permutation(len(test))
        shuffled = [
            TaskInstance(
                id=inst.id,
                values={**inst.values, feature: test[order[i]].value(feature)},
                label=inst.label,
            )
            for i, inst in enumerate(test)
        ]
        drops.append(accuracy(shuffled))
    return float(baseline - np.mean(drops))
