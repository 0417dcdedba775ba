import itertools
import json

import pytest

from trustcal import data_gen
from trustcal.ai_model import select_task_cases, train
from trustcal.config import Config
from trustcal.dataset import LABEL_NEG, LABEL_POS, split
from trustcal.service import (
    ServiceContext,
    ServiceError,
    SessionService,
    create_app,
    read_stream,
    replay,
    verify_replay,
)
from trustcal.strategy import StrategyKind


@pytest.fixture(scope="module")
def context():
    cfg = Config()
    instances = data_gen.corpus_instances(n=8000, seed=3)
    prepared = split(instances, cfg.train_fraction, cfg.split_seed)
    model = train(prepared, cfg.ai)
    case_set = select_task_cases(model, prepared, seed=1, config=cfg.cases)
    return ServiceContext.build(prepared, model, case_set, cfg)


@pytest.fixture()
def service(context, tmp_path):
    clock = itertools.count(1000.0, 1.0)
    return SessionService(context, tmp_path, clock=lambda: next(clock))


def run_batch1(service, session_id, decision=LABEL_NEG):
    step = service.next_step(session_id)          # intro -> batch1
    assert step["stage"] == "intro"
    decisions = {}
    while True:
        step = service.next_step(session_id)
        if step.get("batch_complete"):
            return decisions
        case_id = step["case"]["id"]
        service.submit_decision(session_id, case_id, decision, phase="final")
        decisions[case_id] = decision


def run_batch2(service, session_id, decision=LABEL_NEG):
    while True:
        step = service.next_step(session_id)
        if step.get("batch_complete"):
            return
        case_id = step["case"]["id"]
        if step["presentation"]["require_pre_decision"]:
            ack = service.submit_decision(session_id, case_id, decision, phase="pre")
            assert "reveal" in ack
        service.submit_decision(session_id, case_id, decision, phase="final")


def run_full_session(service, participant="p1", condition="AdaptiveWorkflow", seed=5):
    created = service.create_session(participant, condition, seed)
    session_id = created["session_id"]
    run_batch1(service, session_id)
    service.get_rules(session_id)
    service.finalize_rules(session_id)
    run_batch2(service, session_id)
    step = service.next_step(session_id)
    assert step["stage"] == "survey"
    service.submit_survey(session_id, {"trust_in_ai": 5})
    return session_id


class TestSessionLifecycle:
    def test_created_at_intro(self, service):
        created = service.create_session("p1", "DirectDisplay", seed=1)
        assert created["stage"] == "intro"

    def test_same_seed_same_case_order(self, service):
        a = service.create_session("p1", "DirectDisplay", seed=9)
        b = service.create_session("p2", "DirectDisplay", seed=9)
        sa = service._sessions[a["session_id"]]
        sb = service._sessions[b["session_id"]]
        assert sa.batch1_order == sb.batch1_order
        assert sa.batch2_order == sb.batch2_order

    def test_invalid_condition_rejected(self, service):
        with pytest.raises(Exception):
            service.create_session("p1", "MindControl", seed=1)

    def test_duplicate_participant_condition_rejected(self, service):
        service.create_session("p1", "HumanOnly", seed=1)
        with pytest.raises(ServiceError) as err:
            service.create_session("p1", "HumanOnly", seed=2)
        assert err.value.status == 409

    def test_stage_progression_full_run(self, service):
        session_id = run_full_session(service)
        assert service._sessions[session_id].stage == "done"
        assert service.next_step(session_id)["stage"] == "done"

    def test_batch1_has_no_ai_flags(self, service):
        created = service.create_session("p1", "AiConfidence", seed=2)
        service.next_step(created["session_id"])
        step = service.next_step(created["session_id"])
        p = step["presentation"]
        assert not p["show_ai_recommendation"] and not p["show_ai_confidence"]
        assert "ai" not in step

    def test_batch_exhaustion_emits_stage_transition(self, service):
        created = service.create_session("p1", "HumanOnly", seed=3)
        session_id = created["session_id"]
        run_batch1(service, session_id)
        state = service._sessions[session_id]
        assert state.stage == "rule_editing"
        events = read_stream(service._stream_path(session_id))
        stages = [e.payload["stage"] for e in events if e.kind == "stage_enter"]
        assert stages == ["intro", "batch1", "rule_editing"]


class TestDecisionProtocol:
    def test_out_of_order_case_rejected(self, service):
        created = service.create_session("p1", "HumanOnly", seed=4)
        session_id = created["session_id"]
        service.next_step(session_id)
        step = service.next_step(session_id)
        wrong = next(cid for cid in service._sessions[session_id].batch1_order
                     if cid != step["case"]["id"])
        with pytest.raises(ServiceError) as err:
            service.submit_decision(session_id, wrong, LABEL_NEG)
        assert err.value.code == "out_of_order"

    def test_duplicate_final_rejected_state_unchanged(self, service):
        created = service.create_session("p1", "AiConfidence", seed=5)
        session_id = created["session_id"]
        run_batch1(service, session_id)
        service.finalize_rules(session_id)
        step = service.next_step(session_id)
        case_id = step["case"]["id"]
        service.submit_decision(session_id, case_id, LABEL_NEG, phase="final")
        before = service._sessions[session_id].state_hash()
        with pytest.raises(ServiceError) as err:
            service.submit_decision(session_id, case_id, LABEL_POS, phase="final")
        assert err.value.code in ("duplicate_submission", "out_of_order")
        assert service._sessions[session_id].state_hash() == before

    def test_pre_where_not_required_rejected(self, service):
        created = service.create_session("p1", "AiConfidence", seed=6)
        session_id = created["session_id"]
        run_batch1(service, session_id)
        service.finalize_rules(session_id)
        step = service.next_step(session_id)
        assert not step["presentation"]["require_pre_decision"]
        with pytest.raises(ServiceError) as err:
            service.submit_decision(session_id, step["case"]["id"], LABEL_NEG, phase="pre")
        assert err.value.code == "phase_violation"
        assert "AiConfidence" in str(err.value)

    def test_final_before_required_pre_rejected(self, service):
        created = service.create_session("p1", "AdaptiveWorkflow", seed=7)
        session_id = created["session_id"]
        run_batch1(service, session_id)
        service.finalize_rules(session_id)
        while True:
            step = service.next_step(session_id)
            if step.get("batch_complete"):
                pytest.skip("no human-favored case in this session")
            case_id = step["case"]["id"]
            if step["presentation"]["require_pre_decision"]:
                with pytest.raises(ServiceError) as err:
                    service.submit_decision(session_id, case_id, LABEL_NEG, phase="final")
                assert err.value.code == "pre_decision_required"
                return
            service.submit_decision(session_id, case_id, LABEL_NEG, phase="final")

    def test_next_while_pending_decision_rejected(self, service):
        created = service.create_session("p1", "DirectDisplay", seed=8)
        session_id = created["session_id"]
        run_batch1(service, session_id)
        service.finalize_rules(session_id)
        service.next_step(session_id)
        with pytest.raises(ServiceError) as err:
            service.next_step(session_id)
        assert err.value.code == "decision_pending"


class TestInformationHiding:
    def _serve_first_batch2(self, service, condition, seed):
        created = service.create_session("p1", condition, seed=seed)
        session_id = created["session_id"]
        run_batch1(service, session_id)
        service.finalize_rules(session_id)
        return session_id, service.next_step(session_id)

    def test_adaptive_workflow_gates_ai_until_pre(self, service):
        session_id, step = self._serve_first_batch2(service, "AdaptiveWorkflow", 9)
        guard = 0
        while not step.get("batch_complete"):
            if step["presentation"]["require_pre_decision"]:
                assert "ai" not in step
                assert "cl" not in step
                ack = service.submit_decision(session_id, step["case"]["id"],
                                              LABEL_NEG, phase="pre")
                assert ack["reveal"]["label"] in (LABEL_POS, LABEL_NEG)
            else:
                assert step["ai"]["label"] in (LABEL_POS, LABEL_NEG)
                assert "confidence" not in step["ai"]
            service.submit_decision(session_id, step["case"]["id"], LABEL_NEG,
                                    phase="final")
            step = service.next_step(session_id)
            guard += 1
            assert guard < 30

    def test_adaptive_recommendation_hides_label_structurally(self, service):
        session_id, step = self._serve_first_batch2(service, "AdaptiveRecommendation", 10)
        saw_hidden = False
        while not step.get("batch_complete"):
            p = step["presentation"]
            assert "cl" not in step                     # CL never shown here
            if not p["show_ai_recommendation"]:
                saw_hidden = True
                assert "label" not in step["ai"]
                assert "confidence" not in step["ai"]
                assert "base" not in step["ai"]["explanation"]
                assert "probability" not in json.dumps(step)
                assert step["case"]["label"] is None      # truth withheld too
                assert "explanation" in step["ai"]
            service.submit_decision(session_id, step["case"]["id"], LABEL_NEG)
            step = service.next_step(session_id)
        assert saw_hidden

    def test_direct_display_serves_cl_with_trace(self, service):
        session_id, step = self._serve_first_batch2(service, "DirectDisplay", 11)
        assert "cl" in step
        assert step["cl"]["neighbor_trace"]
        assert step["presentation"]["summary_text"]

    def test_ai_confidence_serves_confidence_no_cl(self, service):
        session_id, step = self._serve_first_batch2(service, "AiConfidence", 12)
        assert "cl" not in step
        assert step["ai"]["confidence"] > 0.5

    def test_human_only_serves_no_ai_block(self, service):
        session_id, step = self._serve_first_batch2(service, "HumanOnly", 13)
        assert "ai" not in step and "cl" not in step

    def test_hidden_fields_absent_for_flags(self, service):
        # structural scan: any flag that is false implies its datum is absent
        session_id, step = self._serve_first_batch2(service, "AdaptiveRecommendation", 14)
        p = step["presentation"]
        if not p["show_ai_confidence"]:
            assert "confidence" not in step.get("ai", {})
        if not p["show_human_cl"]:
            assert "cl" not in step


class TestRules:
    def _editing_session(self, service, seed=20):
        created = service.create_session("p1", "DirectDisplay", seed=seed)
        session_id = created["session_id"]
        run_batch1(service, session_id)
        return session_id

    def test_rules_initialized_from_batch1(self, service):
        session_id = self._editing_session(service)
        rules = service.get_rules(session_id)
        assert rules["rules"]["rules"]
        assert len(rules["history"]) == 20

    def test_edit_outside_stage_rejected(self, service):
        created = service.create_session("p1", "DirectDisplay", seed=21)
        with pytest.raises(ServiceError) as err:
            service.put_edit(created["session_id"], {"action": "delete", "rule_id": "r1"})
        assert err.value.code == "stage_violation"

    def test_edit_history_grows_with_edits(self, service):
        session_id = self._editing_session(service, seed=22)
        rules = service.get_rules(session_id)["rules"]["rules"]
        target = rules[0]["id"]
        after = service.put_edit(session_id, {"action": "delete", "rule_id": target})
        assert len(after["rules"]["edit_history"]) == 1
        ids = [r["id"] for r in after["rules"]["rules"]]
        assert target not in ids

    def test_check_mirrors_check_rule(self, service):
        session_id = self._editing_session(service, seed=23)
        service.get_rules(session_id)
        rule = {"id": "probe", "priority": 99, "prediction": LABEL_POS,
                "conditions": [{"feature": "age", "op": ">=", "value": 17}]}
        result = service.check(session_id, rule)
        state = service._sessions[session_id]
        from trustcal.human_model import Rule, check_rule
        expected = check_rule(Rule.from_dict(rule), service._decision_records(state),
                              state.ruleset, service.context.split.schema)
        assert tuple(result["history_conflicts"]) == expected.history_conflicts
        assert tuple(result["rule_conflicts"]) == expected.rule_conflicts
        assert len(result["history_rows"]) == len(expected.history_conflicts)

    def test_bad_edit_surfaces_explanation(self, service):
        session_id = self._editing_session(service, seed=24)
        service.get_rules(session_id)
        bad = {"action": "add", "rule": {
            "id": "zz", "priority": 1, "prediction": LABEL_POS,
            "conditions": [{"feature": "occupation", "op": "<", "value": 5}]}}
        with pytest.raises(ServiceError) as err:
            service.put_edit(session_id, bad)
        assert "not valid for categorical" in str(err.value)

    def test_edited_rules_drive_batch2_cl(self, service):
        session_id = self._editing_session(service, seed=25)
        rules = service.get_rules(session_id)["rules"]["rules"]
        # delete every rule but one, then add a constant rule on top
        for rule in rules[1:]:
            service.put_edit(session_id, {"action": "delete", "rule_id": rule["id"]})
        service.put_edit(session_id, {"action": "add", "position": 0, "rule": {
            "id": "const", "priority": 0, "prediction": LABEL_POS,
            "conditions": [{"feature": "age", "op": ">=", "value": 17}]}})
        service.finalize_rules(session_id)
        step = service.next_step(session_id)
        trace = step["cl"]["neighbor_trace"]
        assert all(t["model_prediction"] == LABEL_POS for t in trace)


class TestEventSourcing:
    def test_fresh_session_stream_is_single_stage_enter(self, service):
        created = service.create_session("p9", "HumanOnly", seed=30)
        events = read_stream(service._stream_path(created["session_id"]))
        assert len(events) == 1
        assert events[0].kind == "stage_enter"
        assert events[0].payload["stage"] == "intro"

    def test_sequences_gap_free(self, service):
        session_id = run_full_session(service, participant="p10")
        events = read_stream(service._stream_path(session_id))
        assert [e.sequence for e in events] == list(range(len(events)))

    def test_replay_reconstructs_state_hash(self, service):
        session_id = run_full_session(service, participant="p11", condition="DirectDisplay")
        live = service._sessions[session_id]
        events = read_stream(service._stream_path(session_id))
        rebuilt = replay(events)
        assert rebuilt.state_hash() == live.state_hash()

    def test_export_replay_verifies(self, service):
        run_full_session(service, participant="p12", condition="AdaptiveRecommendation")
        export = service.export()
        assert verify_replay(export) == []

    def test_export_all_is_concatenation(self, service):
        a = run_full_session(service, participant="p13", condition="HumanOnly")
        b = run_full_session(service, participant="p14", condition="AiConfidence")
        full = service.export()
        ids = [s["session"]["session_id"] for s in full["sessions"]]
        assert set(ids) >= {a, b}
        single = service.export(a)
        assert len(single["sessions"]) == 1
        assert single["sessions"][0]["session"]["session_id"] == a

    def test_restart_resumes_exact_cursor(self, context, tmp_path):
        clock = itertools.count(2000.0, 1.0)
        service = SessionService(context, tmp_path, clock=lambda: next(clock))
        created = service.create_session("p1", "AiConfidence", seed=31)
        session_id = created["session_id"]
        run_batch1(service, session_id)
        service.finalize_rules(session_id)
        step = service.next_step(session_id)
        service.submit_decision(session_id, step["case"]["id"], LABEL_NEG)
        before = service._sessions[session_id].state_hash()

        resumed = SessionService(context, tmp_path, clock=lambda: next(clock))
        assert resumed._sessions[session_id].state_hash() == before
        # and the session continues from the second batch-2 case
        step = resumed.next_step(session_id)
        assert step["stage"] == "batch2"
        assert step["index"] == 1

    def test_trial_logs_complete_after_session(self, service):
        session_id = run_full_session(service, participant="p15",
                                      condition="DirectDisplay")
        logs = service.trial_logs(session_id)
        assert len(logs) == 20
        for log in logs:
            assert log["final_decision"] in (LABEL_POS, LABEL_NEG)
            assert log["ai_label"] is not None
            assert log["cl_estimate"] is not None


class TestHttpApi:
    @pytest.fixture()
    def client(self, service):
        from fastapi.testclient import TestClient
        return TestClient(create_app(service))

    def test_full_flow_over_http(self, client):
        created = client.post("/sessions", json={
            "participant_id": "h1", "condition": "AdaptiveWorkflow", "seed": 40})
        assert created.status_code == 201
        session_id = created.json()["session_id"]

        assert client.get(f"/sessions/{session_id}/next").json()["stage"] == "intro"
        while True:
            step = client.get(f"/sessions/{session_id}/next").json()
            if step.get("batch_complete"):
                break
            response = client.post(f"/sessions/{session_id}/decisions", json={
                "case_id": step["case"]["id"], "decision": LABEL_NEG})
            assert response.status_code == 200

        rules = client.get(f"/sessions/{session_id}/rules")
        assert rules.status_code == 200
        check = client.post(f"/sessions/{session_id}/rules/check", json={"rule": {
            "id": "probe", "priority": 50, "prediction": LABEL_POS,
            "conditions": [{"feature": "age", "op": ">", "value": 80}]}})
        assert check.status_code == 200
        assert "history_conflicts" in check.json()

        assert client.post(f"/sessions/{session_id}/rules/finalize").status_code == 200
        while True:
            step = client.get(f"/sessions/{session_id}/next").json()
            if step.get("batch_complete"):
                break
            if step["presentation"]["require_pre_decision"]:
                reveal = client.post(f"/sessions/{session_id}/decisions", json={
                    "case_id": step["case"]["id"], "decision": LABEL_NEG,
                    "phase": "pre"})
                assert reveal.json()["reveal"]["label"]
            client.post(f"/sessions/{session_id}/decisions", json={
                "case_id": step["case"]["id"], "decision": LABEL_NEG})

        assert client.get(f"/sessions/{session_id}/next").json()["stage"] == "survey"
        done = client.post(f"/sessions/{session_id}/survey",
                           json={"answers": {"trust_in_ai": 6}})
        assert done.json()["stage"] == "done"

        export = client.get("/export", params={"session_id": session_id})
        assert export.status_code == 200
        assert verify_replay(export.json()) == []

    def test_error_shape(self, client):
        response = client.get("/sessions/nope/next")
        assert response.status_code == 404
        assert response.json()["error"]["code"] == "unknown_session"
