import json

import pytest
from click.testing import CliRunner

from trustcal import data_gen
from trustcal.cli import main
from trustcal.dataset import LABEL_NEG, LABEL_POS


@pytest.fixture(scope="module")
def corpus_csv(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "corpus.csv"
    data_gen.write_corpus(path, n=6000, seed=3)
    return str(path)


@pytest.fixture()
def runner():
    return CliRunner()


class TestMakeData:
    def test_writes_csv(self, runner, tmp_path):
        out = tmp_path / "corpus.csv"
        result = runner.invoke(main, ["make-data", "--out", str(out), "--rows", "100"])
        assert result.exit_code == 0, result.output
        assert out.exists()
        assert len(out.read_text().splitlines()) == 101


class TestTrain:
    def test_writes_model_and_calibration(self, runner, corpus_csv, tmp_path):
        out = tmp_path / "model.json"
        result = runner.invoke(main, ["train", "--data", corpus_csv, "--out", str(out)])
        assert result.exit_code == 0, result.output
        model = json.loads(out.read_text())
        assert "weights" in model and "schema_hash" in model
        report = json.loads(out.with_suffix(".calibration.json").read_text())
        assert "expected_calibration_error" in report

    def test_deterministic_model_files(self, runner, corpus_csv, tmp_path):
        a = tmp_path / "a.json"
        b = tmp_path / "b.json"
        for out in (a, b):
            result = runner.invoke(main, ["train", "--data", corpus_csv,
                                          "--out", str(out), "--seed", "5"])
            assert result.exit_code == 0, result.output
        assert a.read_bytes() == b.read_bytes()

    def test_missing_data_fails_with_machine_parsable_error(self, runner, tmp_path):
        result = runner.invoke(main, ["train", "--data", str(tmp_path / "no.csv"),
                                      "--out", str(tmp_path / "m.json")])
        assert result.exit_code != 0


class TestSelectCases:
    def test_writes_case_set(self, runner, corpus_csv, tmp_path):
        model_path = tmp_path / "model.json"
        runner.invoke(main, ["train", "--data", corpus_csv, "--out", str(model_path)])
        out = tmp_path / "cases.json"
        result = runner.invoke(main, ["select-cases", "--data", corpus_csv,
                                      "--model", str(model_path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        cases = json.loads(out.read_text())
        assert len(cases["batch1"]) == 20 and len(cases["batch2"]) == 20
        assert "coverage" in result.output

    def test_infeasible_pool_exit_nonzero_names_constraint(self, runner, tmp_path):
        # a tiny corpus cannot satisfy the composition constraints
        small = tmp_path / "small.csv"
        data_gen.write_corpus(small, n=60, seed=1)
        model_path = tmp_path / "model.json"
        result = runner.invoke(main, ["train", "--data", str(small),
                                      "--out", str(model_path)])
        assert result.exit_code == 0, result.output
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"cases": {"max_restarts": 20}}))
        result = runner.invoke(main, ["select-cases", "--data", str(small),
                                      "--model", str(model_path),
                                      "--config", str(config),
                                      "--out", str(tmp_path / "cases.json")])
        assert result.exit_code == 1
        assert result.output.startswith("error:") or "error:" in result.output


class TestMetrics:
    def test_region_fixture_matches_hand_counts(self, runner, tmp_path):
        logs = []
        for i in range(10):
            correct = i < 6
            logs.append({"case_id": f"low{i}", "condition": "AiConfidence",
                         "ground_truth": LABEL_POS,
                         "ai_label": LABEL_POS if correct else LABEL_NEG,
                         "ai_confidence": 0.6, "ai_correct": correct,
                         "final_decision": LABEL_POS})
        for i in range(10):
            correct = i < 8
            logs.append({"case_id": f"high{i}", "condition": "AiConfidence",
                         "ground_truth": LABEL_POS,
                         "ai_label": LABEL_POS if correct else LABEL_NEG,
                         "ai_confidence": 0.8, "ai_correct": correct,
                         "final_decision": LABEL_POS})
        logs_path = tmp_path / "logs.json"
        logs_path.write_text(json.dumps(logs))
        out = tmp_path / "report.json"
        result = runner.invoke(main, ["metrics", "--logs", str(logs_path),
                                      "--out", str(out)])
        assert result.exit_code == 0, result.output
        report = json.loads(out.read_text())
        sizes = {c["region"]: c["count"] for c in report["region_table"]["cells"]}
        assert sizes == {"Low&Correct": 6, "High&Wrong": 2,
                         "Low&Wrong": 4, "High&Correct": 8}
        assert report["team_performance"] == pytest.approx(20 / 20)
        assert report["agreement"] == pytest.approx(14 / 20)


class TestSimulate:
    def test_small_simulation_runs(self, runner, corpus_csv, tmp_path):
        config = tmp_path / "cfg.json"
        config.write_text(json.dumps({"sim": {"agents": 4, "replications": 2}}))
        out = tmp_path / "result.json"
        result = runner.invoke(main, ["simulate", "--data", corpus_csv,
                                      "--config", str(config), "--out", str(out)])
        assert result.exit_code == 0, result.output
        data = json.loads(out.read_text())
        assert len(data["replications"]) == 2
        assert "CL router wins" in result.output


class TestReplay:
    def test_replay_validates_export(self, runner, corpus_csv, tmp_path):
        import itertools
        from trustcal.ai_model import select_task_cases, train as train_model
        from trustcal.config import Config
        from trustcal.dataset import canonical_schema, load_dataset, split
        from trustcal.service import ServiceContext, SessionService

        cfg = Config()
        instances = load_dataset(corpus_csv, canonical_schema())
        prepared = split(instances, cfg.train_fraction, cfg.split_seed)
        model = train_model(prepared, cfg.ai)
        case_set = select_task_cases(model, prepared, seed=1, config=cfg.cases)
        context = ServiceContext.build(prepared, model, case_set, cfg)
        clock = itertools.count(0.0, 1.0)
        service = SessionService(context, tmp_path / "data",
                                 clock=lambda: next(clock))
        created = service.create_session("p1", "HumanOnly", seed=1)
        service.next_step(created["session_id"])
        export_path = tmp_path / "export.json"
        export_path.write_text(json.dumps(service.export()))
        result = runner.invoke(main, ["replay", "--export", str(export_path)])
        assert result.exit_code == 0, result.output
        assert "replay ok" in result.output

    def test_tampered_export_fails(self, runner, corpus_csv, tmp_path):
        import itertools
        from trustcal.ai_model import select_task_cases, train as train_model
        from trustcal.config import Config
        from trustcal.dataset import canonical_schema, load_dataset, split
        from trustcal.service import ServiceContext, SessionService

        cfg = Config()
        instances = load_dataset(corpus_csv, canonical_schema())
        prepared = split(instances, cfg.train_fraction, cfg.split_seed)
        model = train_model(prepared, cfg.ai)
        case_set = select_task_cases(model, prepared, seed=1, config=cfg.cases)
        context = ServiceContext.build(prepared, model, case_set, cfg)
        clock = itertools.count(0.0, 1.0)
        service = SessionService(context, tmp_path / "data",
                                 clock=lambda: next(clock))
        service.create_session("p1", "HumanOnly", seed=1)
        export = service.export()
        export["sessions"][0]["state_hash"] = "0" * 64
        export_path = tmp_path / "export.json"
        export_path.write_text(json.dumps(export))
        result = runner.invoke(main, ["replay", "--export", str(export_path)])
        assert result.exit_code == 1
        assert "error: replay_mismatch" in result.output
