import json
import math

import numpy as np
import pytest

from trustcal.ai_model import (
    AiModel,
    AiModelError,
    InfeasibleCaseSet,
    LogisticModel,
    calibration_report,
    select_task_cases,
    train,
    verify_case_set,
)
from trustcal.config import CaseSelectionConfig
from trustcal.dataset import LABEL_NEG, LABEL_POS, canonical_schema, split

from conftest import make_instance


class TestLogisticCore:
    def test_linearly_separable_toy_reaches_full_accuracy(self):
        X = np.array([[-2.0], [-1.0], [1.0], [2.0]])
        y = np.array([0, 0, 1, 1])
        model = LogisticModel(iterations=800).fit(X, y)
        assert (model.predict(X) == y).all()

    def test_identical_features_balanced_labels_predict_half(self):
        X = np.zeros((8, 2))
        y = np.array([0, 1] * 4)
        model = LogisticModel().fit(X, y)
        p = model.predict_proba(np.array([[5.0, -3.0]]))[0, 1]
        assert p == pytest.approx(0.5, abs=1e-6)

    def test_xor_cannot_be_fit(self):
        X = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
        y = np.array([0, 1, 1, 0])
        model = LogisticModel().fit(X, y)
        accuracy = (model.predict(X) == y).mean()
        assert accuracy <= 0.75

    def test_single_class_rejected(self):
        X = np.ones((4, 2))
        with pytest.raises(AiModelError):
            LogisticModel().fit(X, np.zeros(4))

    def test_loss_checkpoints_monotone_decreasing(self, small_split):
        model = train(small_split)
        checkpoints = model.core.loss_checkpoints_
        assert all(b <= a + 1e-12 for a, b in zip(checkpoints, checkpoints[1:]))

    def test_deterministic_retrain(self, small_split):
        a = train(small_split)
        b = train(small_split)
        assert np.array_equal(a.core.weights_, b.core.weights_)
        assert a.core.bias_ == b.core.bias_


class TestPrediction:
    def _manual_model(self, small_split, weights, bias):
        core = LogisticModel()
        core.weights_ = np.array(weights, dtype=float)
        core.bias_ = float(bias)
        core.loss_checkpoints_ = [0.0]
        core.n_iter_ = 0
        return AiModel(core=core, schema=small_split.schema,
                       stats=dict(small_split.encoding_stats))

    def test_zero_model_gives_half_confidence(self, small_split):
        model = self._manual_model(small_split,
                                   np.zeros(small_split.schema.encoded_length()), 0.0)
        pred = model.predict(make_instance(1))
        assert pred.probability_positive == pytest.approx(0.5)
        assert pred.confidence == pytest.approx(0.5)

    def test_bias_ln3_gives_three_quarters(self, small_split):
        model = self._manual_model(small_split,
                                   np.zeros(small_split.schema.encoded_length()),
                                   math.log(3))
        pred = model.predict(make_instance(1))
        assert pred.probability_positive == pytest.approx(0.75)
        assert pred.confidence == pytest.approx(0.75)
        assert pred.label == LABEL_POS

    def test_negating_model_flips_label_keeps_confidence(self, small_split, small_model):
        flipped = self._manual_model(small_split, -small_model.core.weights_,
                                     -small_model.core.bias_)
        inst = small_split.test[0]
        a = small_model.predict(inst)
        b = flipped.predict(inst)
        assert a.confidence == pytest.approx(b.confidence)
        assert a.label != b.label or a.confidence == pytest.approx(0.5)

    def test_confidence_is_max_class_probability(self, small_model, small_split):
        for inst in small_split.test[:50]:
            pred = small_model.predict(inst)
            assert pred.confidence == pytest.approx(
                max(pred.probability_positive, 1 - pred.probability_positive))
            assert 0.5 <= pred.confidence < 1.0

    def test_scaling_invariance_of_probabilities(self, small_split, small_model):
        # scaling inputs by c and weights by 1/c leaves probabilities unchanged
        from trustcal.dataset import encode
        core = small_model.core
        inst = small_split.test[3]
        x = encode(inst, small_split)
        c = 3.7
        logit_scaled = (x * c) @ (core.weights_ / c) + core.bias_
        logit = x @ core.weights_ + core.bias_
        assert logit_scaled == pytest.approx(logit, abs=1e-9)


class TestExplanation:
    def test_zero_weight_model_all_contributions_zero(self, small_split):
        core = LogisticModel()
        core.weights_ = np.zeros(small_split.schema.encoded_length())
        core.bias_ = 0.3
        core.loss_checkpoints_ = [0.0]
        core.n_iter_ = 0
        model = AiModel(core=core, schema=small_split.schema,
                        stats=dict(small_split.encoding_stats))
        explanation = model.explain(make_instance(5))
        assert all(v == 0.0 for _, v in explanation.contributions)

    def test_completeness_base_plus_sum_is_logit(self, small_model, small_split):
        for inst in small_split.test[:100]:
            explanation = small_model.explain(inst)
            pred = small_model.predict(inst)
            logit = math.log(pred.probability_positive / (1 - pred.probability_positive))
            assert explanation.logit == pytest.approx(logit, abs=1e-9)

    def test_one_feature_contribution_is_weight_times_value(self, small_split):
        core = LogisticModel()
        w = np.zeros(small_split.schema.encoded_length())
        w[0] = 2.0                        # the age component
        core.weights_ = w
        core.bias_ = 0.0
        core.loss_checkpoints_ = [0.0]
        core.n_iter_ = 0
        model = AiModel(core=core, schema=small_split.schema,
                        stats=dict(small_split.encoding_stats))
        mean, std = small_split.encoding_stats["age"]
        inst = make_instance(7, age=mean + std)
        contributions = dict(model.explain(inst).contributions)
        assert contributions["age"] == pytest.approx(2.0)

    def test_hidden_payload_has_no_base(self, small_model, small_split):
        explanation = small_model.explain(small_split.test[0])
        payload = explanation.to_dict(include_base=False)
        assert "base" not in payload
        assert all(set(item) == {"feature", "contribution", "toward", "magnitude"}
                   for item in payload["contributions"])


class TestCalibration:
    def test_single_bin_is_overall_gap(self, small_model, small_split):
        report = calibration_report(small_model, list(small_split.test), bin_width=0.5)
        assert len(report.bins) == 1
        predictions = small_model.predict_many(list(small_split.test))
        conf = np.mean([p.confidence for p in predictions])
        acc = np.mean([p.label == inst.label
                       for p, inst in zip(predictions, small_split.test)])
        assert report.expected_calibration_error == pytest.approx(abs(conf - acc))

    def test_bin_counts_sum_to_total(self, small_model, small_split):
        report = calibration_report(small_model, list(small_split.test), 0.05)
        assert sum(b.count for b in report.bins) == len(small_split.test)

    def test_coin_flip_model_accuracy_near_half(self):
        # constant 0.5-confidence predictions on balanced labels
        rng = np.random.default_rng(3)
        instances = [make_instance(i, label=LABEL_POS if rng.random() < 0.5 else LABEL_NEG)
                     for i in range(10000)]
        s = split(instances, 0.5, seed=0)
        core = LogisticModel()
        core.weights_ = np.zeros(s.schema.encoded_length())
        core.bias_ = 0.0
        core.loss_checkpoints_ = [0.0]
        core.n_iter_ = 0
        model = AiModel(core=core, schema=s.schema, stats=dict(s.encoding_stats))
        report = calibration_report(model, list(s.test), 0.05)
        first = report.bins[0]
        assert first.count == len(s.test)
        assert first.accuracy == pytest.approx(0.5, abs=0.02)

    def test_empty_instances_rejected(self, small_model):
        with pytest.raises(AiModelError):
            calibration_report(small_model, [], 0.1)


class TestPersistence:
    def test_round_trip_preserves_predictions(self, small_model, small_split, tmp_path):
        path = tmp_path / "model.json"
        small_model.save(path)
        loaded = AiModel.load(path, small_split.schema)
        for inst in small_split.test[:20]:
            assert loaded.predict(inst).probability_positive == pytest.approx(
                small_model.predict(inst).probability_positive, abs=1e-12)

    def test_saved_json_is_versioned_and_complete(self, small_model, tmp_path):
        path = tmp_path / "model.json"
        small_model.save(path)
        data = json.loads(path.read_text())
        assert data["format_version"] == 1
        assert set(data) >= {"schema_hash", "weights", "bias", "encoding_stats"}

    def test_schema_mismatch_rejected(self, small_model, tmp_path):
        path = tmp_path / "model.json"
        small_model.save(path)
        data = json.loads(path.read_text())
        data["schema_hash"] = "not-the-schema"
        path.write_text(json.dumps(data))
        with pytest.raises(AiModelError):
            AiModel.load(path, canonical_schema())


def _engineered_pool():
    """A pool with exactly the per-cell counts the selector needs, so the
    valid 40-case selection is unique as a set."""
    core = LogisticModel()
    schema = canonical_schema()
    instances = []
    # cells: (confidence, ai_correct, truth) -> count so that all constraints
    # are forced: per batch 6 low-correct, 4 low-wrong, 8 high-correct,
    # 2 high-wrong; TP=14, TN=14, FP=6, FN=6 overall
    cells = [
        (0.6, True, LABEL_POS, 6), (0.6, True, LABEL_NEG, 6),      # low correct
        (0.6, False, LABEL_POS, 4), (0.6, False, LABEL_NEG, 4),    # low wrong (FN/FP)
        (0.8, True, LABEL_POS, 8), (0.8, True, LABEL_NEG, 8),      # high correct
        (0.8, False, LABEL_POS, 2), (0.8, False, LABEL_NEG, 2),    # high wrong
    ]
    rows = []
    for conf, correct, truth, count in cells:
        for _ in range(count):
            rows.append((conf, correct, truth))
    # fabricate predictions directly rather than through encoding
    predictions = []
    for i, (conf, correct, truth) in enumerate(rows):
        label = truth if correct else (LABEL_NEG if truth == LABEL_POS else LABEL_POS)
        p = conf if label == LABEL_POS else 1 - conf
        instances.append(make_instance(i, label=truth))
        predictions.append((label, conf, p))
    return instances, predictions


class TestCaseSelection:
    def test_real_pool_satisfies_all_constraints(self, small_model, small_split):
        case_set = select_task_cases(small_model, small_split, seed=1)
        assert verify_case_set(case_set) == []

    def test_selection_composition_counts(self, small_model, small_split):
        case_set = select_task_cases(small_model, small_split, seed=2)
        cases = case_set.all_cases
        assert len(cases) == 40
        assert sum(c.ai_correct for c in cases) == 28            # 70% accuracy
        assert sum(c.instance.label == LABEL_POS for c in cases) == 20
        for batch in (case_set.batch1, case_set.batch2):
            low = [c for c in batch if c.prediction.confidence < 0.7]
            high = [c for c in batch if c.prediction.confidence >= 0.7]
            assert len(low) == len(high) == 10
            assert sum(c.ai_correct for c in low) == 6
            assert sum(c.ai_correct for c in high) == 8
            assert abs(np.mean([c.prediction.confidence for c in low]) - 0.6) <= 0.03
            assert abs(np.mean([c.prediction.confidence for c in high]) - 0.8) <= 0.03

    def test_deterministic_given_seed(self, small_model, small_split):
        a = select_task_cases(small_model, small_split, seed=5)
        b = select_task_cases(small_model, small_split, seed=5)
        assert [c.instance.id for c in a.all_cases] == [c.instance.id for c in b.all_cases]

    def test_engineered_unique_pool_found(self, monkeypatch, small_split):
        instances, predictions = _engineered_pool()

        class _Fixed:
            schema = small_split.schema

            def predict_many(self, items):
                from trustcal.ai_model import AiPrediction
                by_id = {inst.id: pred for inst, pred in zip(instances, predictions)}
                return [AiPrediction(label=by_id[i.id][0], confidence=by_id[i.id][1],
                                     probability_positive=by_id[i.id][2])
                        for i in items]

        pool_split = split(instances + [make_instance(999)], 1 / 41, seed=0)
        # force the test side to be exactly our engineered pool
        object.__setattr__(pool_split, "test", tuple(instances))
        object.__setattr__(pool_split, "train", (make_instance(999),))
        case_set = select_task_cases(_Fixed(), pool_split, seed=3)
        assert verify_case_set(case_set) == []
        assert {c.instance.id for c in case_set.all_cases} == {i.id for i in instances}

    def test_infeasible_pool_reports_constraint(self, small_split):
        instances, predictions = _engineered_pool()
        # remove every high-confidence wrong case: infeasible
        keep = [(inst, pred) for inst, pred in zip(instances, predictions)
                if not (pred[1] >= 0.7 and pred[0] != inst.label)]

        class _Fixed:
            schema = small_split.schema

            def predict_many(self, items):
                from trustcal.ai_model import AiPrediction
                by_id = {inst.id: pred for inst, pred in keep}
                return [AiPrediction(label=by_id[i.id][0], confidence=by_id[i.id][1],
                                     probability_positive=by_id[i.id][2])
                        for i in items]

        pool = [inst for inst, _ in keep]
        pool_split = split(pool + [make_instance(999)], 1 / len(pool), seed=0)
        object.__setattr__(pool_split, "test", tuple(pool))
        object.__setattr__(pool_split, "train", (make_instance(999),))
        config = CaseSelectionConfig(max_restarts=50)
        with pytest.raises(InfeasibleCaseSet) as err:
            select_task_cases(_Fixed(), pool_split, seed=3, config=config)
        assert "stratum" in str(err.value) or "bucket" in str(err.value)

    def test_coverage_reported(self, small_model, small_split):
        case_set = select_task_cases(small_model, small_split, seed=4)
        assert len(case_set.coverage) == 5
        assert all(0 <= c.fraction <= 1 for c in case_set.coverage)
