"""The assisting classifier: training, calibrated confidence, explanations,
and selection of the 40 experimental task cases.

Confidence is the max-class probability of a logistic model trained by
full-batch gradient descent on log loss; because log loss is a proper
scoring rule the confidence doubles as the AI's correctness likelihood.
Explanations are exact per-feature log-odds contributions (the model is
linear, so no sampling-based approximation is needed).
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .config import AiModelConfig, CaseSelectionConfig
from .dataset import (
    LABEL_NEG,
    LABEL_POS,
    DatasetSplit,
    EncodingStats,
    FeatureSchema,
    TaskInstance,
    encode_matrix,
    _encode_rows,
)

MODEL_FORMAT_VERSION = 1


class AiModelError(Exception):
    pass


class InfeasibleCaseSet(AiModelError):
    """Raised when no case assignment satisfies the selection constraints."""

    def __init__(self, unmet: str):
        super().__init__(f"case selection infeasible: {unmet}")
        self.unmet = unmet


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=float)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _log_loss(p: np.ndarray, y: np.ndarray) -> float:
    eps = 1e-12
    p = np.clip(p, eps, 1 - eps)
    return float(-(y * np.log(p) + (1 - y) * np.log(1 - p)).mean())


class LogisticModel(BaseEstimator, ClassifierMixin):
    """Binary logistic regression fitted by full-batch gradient descent.

    Deterministic (zero init, fixed step budget), with an L2 penalty on the
    weights and periodic train-loss checkpoints for the monotonicity check.
    """

    def __init__(self, learning_rate: float = 0.1, iterations: int = 2000,
                 l2: float = 1e-4, seed: int = 0, checkpoint_every: int = 100):
        self.learning_rate = learning_rate
        self.iterations = iterations
        self.l2 = l2
        self.seed = seed
        self.checkpoint_every = checkpoint_every

    def fit(self, X: np.ndarray, y: np.ndarray):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        classes = np.unique(y)
        if len(classes) < 2:
            raise AiModelError("training data contains a single class")
        n, d = X.shape
        w = np.zeros(d)
        b = 0.0
        checkpoints = []
        for step in range(self.iterations):
            p = _sigmoid(X @ w + b)
            if step % self.checkpoint_every == 0:
                checkpoints.append(_log_loss(p, y))
            err = p - y
            grad_w = X.T @ err / n + self.l2 * w
            grad_b = err.mean()
            w -= self.learning_rate * grad_w
            b -= self.learning_rate * grad_b
        self.weights_ = w
        self.bias_ = float(b)
        self.loss_checkpoints_ = checkpoints + [_log_loss(_sigmoid(X @ w + b), y)]
        self.n_iter_ = self.iterations
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights_ + self.bias_

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        p = _sigmoid(self.decision_function(X))
        return np.column_stack([1 - p, p])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return (self.decision_function(X) >= 0).astype(int)


@dataclass(frozen=True)
class AiPrediction:
    label: str
    confidence: float
    probability_positive: float

    def to_dict(self) -> dict:
        return {"label": self.label, "confidence": self.confidence,
                "probability_positive": self.probability_positive}

    @staticmethod
    def from_dict(data: dict) -> "AiPrediction":
        return AiPrediction(label=data["label"], confidence=data["confidence"],
                            probability_positive=data["probability_positive"])


@dataclass(frozen=True)
class Explanation:
    base: float
    contributions: tuple[tuple[str, float], ...]   # (feature, signed log-odds)

    @property
    def logit(self) -> float:
        return self.base + sum(c for _, c in self.contributions)

    def to_dict(self, include_base: bool = True) -> dict:
        items = [
            {"feature": name, "contribution": value,
             "toward": LABEL_POS if value >= 0 else LABEL_NEG,
             "magnitude": abs(value)}
            for name, value in self.contributions
        ]
        out = {"contributions": items}
        if include_base:
            out["base"] = self.base
        return out


@dataclass
class AiModel:
    """A trained classifier bound to its encoding statistics."""
    core: LogisticModel
    schema: FeatureSchema
    stats: EncodingStats

    def _encode(self, instances: Sequence[TaskInstance]) -> np.ndarray:
        return _encode_rows(instances, self.schema, self.stats, normalize=True)

    def predict(self, instance: TaskInstance) -> AiPrediction:
        p = float(self.core.predict_proba(self._encode([instance]))[0, 1])
        label = LABEL_POS if p >= 0.5 else LABEL_NEG
        return AiPrediction(label=label, confidence=max(p, 1 - p), probability_positive=p)

    def predict_many(self, instances: Sequence[TaskInstance]) -> list[AiPrediction]:
        probs = self.core.predict_proba(self._encode(instances))[:, 1]
        return [
            AiPrediction(label=LABEL_POS if p >= 0.5 else LABEL_NEG,
                         confidence=float(max(p, 1 - p)), probability_positive=float(p))
            for p in probs
        ]

    def predict_labels(self, instances: Sequence[TaskInstance]) -> list[str]:
        probs = self.core.predict_proba(self._encode(instances))[:, 1]
        return [LABEL_POS if p >= 0.5 else LABEL_NEG for p in probs]

    def explain(self, instance: TaskInstance) -> Explanation:
        x = self._encode([instance])[0]
        w = self.core.weights_
        contributions = []
        offset = 0
        for feat in self.schema.features:
            width = 1 if feat.is_numeric else len(feat.domain)
            block = float(w[offset:offset + width] @ x[offset:offset + width])
            contributions.append((feat.name, block))
            offset += width
        return Explanation(base=self.core.bias_, contributions=tuple(contributions))

    def to_json(self) -> dict:
        return {
            "format_version": MODEL_FORMAT_VERSION,
            "schema_hash": self.schema.fingerprint(),
            "weights": self.core.weights_.tolist(),
            "bias": self.core.bias_,
            "encoding_stats": {k: list(v) for k, v in self.stats.items()},
            "training": {
                "iterations": self.core.n_iter_,
                "final_loss": self.core.loss_checkpoints_[-1],
                "loss_checkpoints": self.core.loss_checkpoints_,
                "params": self.core.get_params(),
            },
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, sort_keys=True))

    @staticmethod
    def from_json(data: dict, schema: FeatureSchema) -> "AiModel":
        if data.get("schema_hash") != schema.fingerprint():
            raise AiModelError("model was trained against a different schema")
        params = data.get("training", {}).get("params", {})
        core = LogisticModel(**params)
        core.weights_ = np.array(data["weights"], dtype=float)
        core.bias_ = float(data["bias"])
        core.loss_checkpoints_ = list(data.get("training", {}).get("loss_checkpoints", []))
        core.n_iter_ = int(data.get("training", {}).get("iterations", 0))
        stats = {k: (float(v[0]), float(v[1])) for k, v in data["encoding_stats"].items()}
        return AiModel(core=core, schema=schema, stats=stats)

    @staticmethod
    def load(path: str | Path, schema: FeatureSchema) -> "AiModel":
        return AiModel.from_json(json.loads(Path(path).read_text()), schema)


def train(split: DatasetSplit, config: AiModelConfig = AiModelConfig()) -> AiModel:
    if not split.train:
        raise AiModelError("empty train split")
    X = encode_matrix(split.train, split)
    y = np.array([1.0 if inst.label == LABEL_POS else 0.0 for inst in split.train])
    core = LogisticModel(
        learning_rate=config.learning_rate, iterations=config.iterations,
        l2=config.l2, seed=config.seed, checkpoint_every=config.checkpoint_every,
    ).fit(X, y)
    return AiModel(core=core, schema=split.schema, stats=dict(split.encoding_stats))


@dataclass(frozen=True)
class CalibrationBin:
    lower: float
    upper: float
    count: int
    mean_confidence: float | None
    accuracy: float | None


@dataclass(frozen=True)
class CalibrationReport:
    bins: tuple[CalibrationBin, ...]
    expected_calibration_error: float
    total: int

    def to_dict(self) -> dict:
        return {
            "bins": [vars(b) for b in self.bins],
            "expected_calibration_error": self.expected_calibration_error,
            "total": self.total,
        }


def calibration_report(model: AiModel, instances: Sequence[TaskInstance],
                       bin_width: float = 0.05) -> CalibrationReport:
    """Bin top-label confidence over [0.5, 1.0] and compare with accuracy."""
    if not instances:
        raise AiModelError("no instances to evaluate")
    if not 0 < bin_width <= 0.5:
        raise AiModelError("bin_width must be in (0, 0.5]")
    predictions = model.predict_many(instances)
    conf = np.array([p.confidence for p in predictions])
    correct = np.array([p.label == inst.label for p, inst in zip(predictions, instances)], dtype=float)

    edges = np.arange(0.5, 1.0, bin_width)
    bins = []
    ece = 0.0
    total = len(instances)
    for lower in edges:
        upper = min(lower + bin_width, 1.0)
        last = upper >= 1.0 - 1e-12
        in_bin = (conf >= lower) & ((conf <= upper) if last else (conf < upper))
        count = int(in_bin.sum())
        if count:
            mean_conf = float(conf[in_bin].mean())
            acc = float(correct[in_bin].mean())
            ece += (count / total) * abs(mean_conf - acc)
        else:
            mean_conf = None
            acc = None
        bins.append(CalibrationBin(float(lower), float(upper), count, mean_conf, acc))
    return CalibrationReport(bins=tuple(bins), expected_calibration_error=float(ece), total=total)


@dataclass(frozen=True)
class TaskCase:
    instance: TaskInstance
    prediction: AiPrediction

    @property
    def ai_correct(self) -> bool:
        return self.prediction.label == self.instance.label

    def to_dict(self) -> dict:
        return {"instance": self.instance.to_dict(),
                "prediction": self.prediction.to_dict(),
                "ai_correct": self.ai_correct}


@dataclass(frozen=True)
class FeatureCoverage:
    feature: str
    common_values: tuple
    covered: tuple
    fraction: float


@dataclass(frozen=True)
class TaskCaseSet:
    batch1: tuple[TaskCase, ...]
    batch2: tuple[TaskCase, ...]
    coverage: tuple[FeatureCoverage, ...] = field(default=())

    @property
    def all_cases(self) -> tuple[TaskCase, ...]:
        return self.batch1 + self.batch2

    def to_json(self) -> dict:
        return {
            "batch1": [c.to_dict() for c in self.batch1],
            "batch2": [c.to_dict() for c in self.batch2],
            "coverage": [vars(c) | {"common_values": list(c.common_values),
                                    "covered": list(c.covered)}
                         for c in self.coverage],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2))

    @staticmethod
    def from_json(data: dict) -> "TaskCaseSet":
        def batch(items):
            return tuple(
                TaskCase(instance=TaskInstance.from_dict(item["instance"]),
                         prediction=AiPrediction.from_dict(item["prediction"]))
                for item in items
            )
        coverage = tuple(
            FeatureCoverage(feature=c["feature"],
                            common_values=tuple(c["common_values"]),
                            covered=tuple(c["covered"]),
                            fraction=c["fraction"])
            for c in data.get("coverage", [])
        )
        return TaskCaseSet(batch1=batch(data["batch1"]), batch2=batch(data["batch2"]),
                           coverage=coverage)


def verify_case_set(case_set: TaskCaseSet, config: CaseSelectionConfig = CaseSelectionConfig()) -> list[str]:
    """Every selection constraint as a checkable fact; returns violations."""
    violations = []
    threshold = config.confidence_threshold
    half = config.batch_size // 2
    for name, batch in (("batch1", case_set.batch1), ("batch2", case_set.batch2)):
        if len(batch) != config.batch_size:
            violations.append(f"{name}: expected {config.batch_size} cases")
            continue
        low = [c for c in batch if c.prediction.confidence < threshold]
        high = [c for c in batch if c.prediction.confidence >= threshold]
        if len(low) != half:
            violations.append(f"{name}: {len(low)} low-confidence cases, expected {half}")
        if len(high) != half:
            violations.append(f"{name}: {len(high)} high-confidence cases, expected {half}")
        if sum(c.ai_correct for c in low) != config.low_correct:
            violations.append(f"{name}: low bucket has {sum(c.ai_correct for c in low)} correct, "
                              f"expected {config.low_correct}")
        if sum(c.ai_correct for c in high) != config.high_correct:
            violations.append(f"{name}: high bucket has {sum(c.ai_correct for c in high)} correct, "
                              f"expected {config.high_correct}")
        for bucket, cases, target in (("low", low, config.low_mean), ("high", high, config.high_mean)):
            if cases:
                mean = float(np.mean([c.prediction.confidence for c in cases]))
                if abs(mean - target) > config.mean_tolerance + 1e-12:
                    violations.append(f"{name}: {bucket} bucket mean confidence {mean:.4f} "
                                      f"outside {target}±{config.mean_tolerance}")
    cases = case_set.all_cases
    n = len(cases)
    positives = sum(c.instance.label == LABEL_POS for c in cases)
    if positives * 2 != n:
        violations.append(f"label balance {positives}/{n - positives}, expected {n // 2}/{n // 2}")
    fp = sum(c.prediction.label == LABEL_POS and c.instance.label == LABEL_NEG for c in cases)
    fn = sum(c.prediction.label == LABEL_NEG and c.instance.label == LABEL_POS for c in cases)
    if fp != fn:
        violations.append(f"false positives ({fp}) != false negatives ({fn})")
    correct = sum(c.ai_correct for c in cases)
    expected_correct = 2 * (config.low_correct + config.high_correct)
    if correct != expected_correct:
        violations.append(f"overall AI accuracy {correct}/{n}, expected {expected_correct}/{n}")
    return violations


def _coverage_report(selected: Sequence[TaskInstance], split: DatasetSplit,
                     top_k: int = 5) -> tuple[FeatureCoverage, ...]:
    out = []
    for feat in split.schema.features:
        if feat.is_numeric:
            column = np.array([inst.value(feat.name) for inst in split.train], dtype=float)
            edges = np.quantile(column, np.linspace(0, 1, top_k + 1))
            common = tuple(
                (float(edges[i]), float(edges[i + 1])) for i in range(top_k)
            )
            chosen = np.array([inst.value(feat.name) for inst in selected], dtype=float)
            covered = tuple(
                (lo, hi) for lo, hi in common
                if np.any((chosen >= lo) & (chosen <= hi))
            )
        else:
            counts: dict[str, int] = {}
            for inst in split.train:
                counts[inst.value(feat.name)] = counts.get(inst.value(feat.name), 0) + 1
            common = tuple(sorted(counts, key=lambda c: (-counts[c], c))[:top_k])
            present = {inst.value(feat.name) for inst in selected}
            covered = tuple(c for c in common if c in present)
        out.append(FeatureCoverage(feature=feat.name, common_values=common,
                                   covered=covered,
                                   fraction=len(covered) / len(common) if common else 1.0))
    return tuple(out)


def _repair_mean(chosen: list[int], pool_by_stratum: dict, conf: np.ndarray,
                 strata: list, target: float, tolerance: float, selected: set,
                 rng: np.random.Generator, steps: int) -> bool:
    """Greedy same-stratum swaps steering the bucket's mean confidence into
    the target window. Mutates chosen/selected; True on success."""
    size = len(chosen)
    for _ in range(steps):
        mean = conf[chosen].mean()
        if abs(mean - target) <= tolerance - 1e-9:
            return True
        best = None
        for pos, idx in enumerate(chosen):
            candidates = pool_by_stratum[strata[pos]]
            # sample a few candidates instead of scanning the whole stratum
            for cand in rng.choice(candidates, size=min(len(candidates), 12), replace=False):
                if cand in selected:
                    continue
                new_mean = mean + (conf[cand] - conf[idx]) / size
                gain = abs(mean - target) - abs(new_mean - target)
                if gain > 1e-12 and (best is None or gain > best[0]):
                    best = (gain, pos, int(cand))
        if best is None:
            return False
        _, pos, cand = best
        selected.remove(chosen[pos])
        selected.add(cand)
        chosen[pos] = cand
    return abs(conf[chosen].mean() - target) <= tolerance - 1e-9


def select_task_cases(model: AiModel, split: DatasetSplit, seed: int = 0,
                      config: CaseSelectionConfig = CaseSelectionConfig()) -> TaskCaseSet:
    """Seeded randomized search for 40 cases meeting the composition
    constraints (bucket sizes, correctness counts, bucket means, label
    balance, FP=FN)."""
    test = list(split.test)
    predictions = model.predict_many(test)
    conf = np.array([p.confidence for p in predictions])
    correct = np.array([p.label == inst.label for p, inst in zip(predictions, test)])
    is_pos = np.array([inst.label == LABEL_POS for inst in test])
    threshold = config.confidence_threshold
    low = conf < threshold

    # stratum key: (low?, correct?, truth positive?)
    pool_by_stratum: dict[tuple, np.ndarray] = {}
    for lo in (True, False):
        for co in (True, False):
            for po in (True, False):
                mask = (low == lo) & (correct == co) & (is_pos == po)
                pool_by_stratum[(lo, co, po)] = np.flatnonzero(mask)

    half = config.batch_size // 2
    low_wrong = half - config.low_correct
    high_wrong = half - config.high_correct
    n_correct = 2 * (config.low_correct + config.high_correct)
    n_cases = 2 * config.batch_size
    n_wrong = n_cases - n_correct
    fp_target = n_wrong // 2
    if n_wrong % 2:
        raise InfeasibleCaseSet("odd wrong count cannot satisfy FP=FN")
    tp_target = n_cases // 2 - fp_target     # truth positives among correct

    # enumerate feasible per-(batch, bucket) label compositions
    def compositions(cell_sizes: list[int], total_pos: int) -> list[tuple[int, ...]]:
        out = []
        def rec(i: int, remaining: int, acc: tuple[int, ...]):
            if i == len(cell_sizes):
                if remaining == 0:
                    out.append(acc)
                return
            lo_bound = max(0, remaining - sum(cell_sizes[i + 1:]))
            for k in range(lo_bound, min(cell_sizes[i], remaining) + 1):
                rec(i + 1, remaining - k, acc + (k,))
        rec(0, total_pos, ())
        return out

    correct_cells = [config.low_correct, config.high_correct] * 2   # b1 low, b1 high, b2 low, b2 high
    wrong_cells = [low_wrong, high_wrong] * 2
    correct_splits = compositions(correct_cells, tp_target)
    wrong_splits = compositions(wrong_cells, fp_target)   # FPs are truth-negative; count negatives
    if not correct_splits or not wrong_splits:
        raise InfeasibleCaseSet("no label composition fits the correctness counts")

    rng = np.random.default_rng(seed)
    last_unmet = "exhausted restarts"
    for _ in range(config.max_restarts):
        tp_split = correct_splits[rng.integers(len(correct_splits))]
        fp_split = wrong_splits[rng.integers(len(wrong_splits))]
        plan: dict[tuple, list[tuple]] = {}   # (batch, low?) -> list of (stratum, count)
        feasible = True
        demand: dict[tuple, int] = {}
        for cell in range(4):
            batch, lo = cell // 2 + 1, cell % 2 == 0
            cell_correct = correct_cells[cell]
            cell_wrong = wrong_cells[cell]
            tp = tp_split[cell]
            fpos = fp_split[cell]
            quads = [
                ((lo, True, True), tp),                      # correct, truth positive
                ((lo, True, False), cell_correct - tp),      # correct, truth negative
                ((lo, False, False), fpos),                  # wrong FP (truth negative)
                ((lo, False, True), cell_wrong - fpos),      # wrong FN (truth positive)
            ]
            plan[(batch, lo)] = quads
            for stratum, count in quads:
                demand[stratum] = demand.get(stratum, 0) + count
        for stratum, count in demand.items():
            if count > len(pool_by_stratum[stratum]):
                feasible = False
                last_unmet = (f"stratum (low={stratum[0]}, correct={stratum[1]}, "
                              f"positive={stratum[2]}) has {len(pool_by_stratum[stratum])} "
                              f"cases, {count} required")
                break
        if not feasible:
            continue

        selected: set[int] = set()
        buckets: dict[tuple, tuple[list[int], list]] = {}
        ok = True
        for key, quads in plan.items():
            chosen: list[int] = []
            strata: list[tuple] = []
            for stratum, count in quads:
                available = [i for i in pool_by_stratum[stratum] if i not in selected]
                if len(available) < count:
                    ok = False
                    last_unmet = f"stratum {stratum} exhausted while filling batch{key[0]}"
                    break
                picks = rng.choice(available, size=count, replace=False)
                for idx in picks:
                    chosen.append(int(idx))
                    strata.append(stratum)
                    selected.add(int(idx))
            if not ok:
                break
            buckets[key] = (chosen, strata)
        if not ok:
            continue

        for (batch, lo), (chosen, strata) in buckets.items():
            target = config.low_mean if lo else config.high_mean
            if not _repair_mean(chosen, pool_by_stratum, conf, strata, target,
                                config.mean_tolerance, selected, rng, config.repair_steps):
                ok = False
                last_unmet = (f"batch{batch} {'low' if lo else 'high'} bucket mean "
                              f"not reachable within {target}±{config.mean_tolerance}")
                break
        if not ok:
            continue

        def build_batch(batch: int) -> tuple[TaskCase, ...]:
            indexes = buckets[(batch, True)][0] + buckets[(batch, False)][0]
            return tuple(TaskCase(instance=test[i], prediction=predictions[i]) for i in indexes)

        candidate = TaskCaseSet(batch1=build_batch(1), batch2=build_batch(2))
        violations = verify_case_set(candidate, config)
        if violations:
            last_unmet = violations[0]
            continue
        coverage = _coverage_report([c.instance for c in candidate.all_cases], split)
        return TaskCaseSet(batch1=candidate.batch1, batch2=candidate.batch2, coverage=coverage)

    raise InfeasibleCaseSet(last_unmet)
