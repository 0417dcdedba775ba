#!/usr/bin/env python3
"""Capture real service wire payloads as JSON fixtures for the frontend's
contract tests. Deterministic: same corpus seed, same session seeds.

Usage: python3 scripts/gen_frontend_fixtures.py [out_dir]
"""
import itertools
import json
import sys
import tempfile
from pathlib import Path

from trustcal import data_gen
from trustcal.ai_model import select_task_cases, train
from trustcal.config import Config
from trustcal.dataset import LABEL_NEG, LABEL_POS, split
from trustcal.service import ServiceContext, SessionService, SURVEY_QUESTIONS

OUT_DIR = Path(sys.argv[1]) if len(sys.argv) > 1 else \
    Path(__file__).resolve().parent.parent / "frontend" / "fixtures"

CONDITIONS = ["HumanOnly", "AiConfidence", "DirectDisplay",
              "AdaptiveWorkflow", "AdaptiveRecommendation"]


def build_service(data_dir):
    cfg = Config()
    instances = data_gen.corpus_instances(n=8000, seed=3)
    prepared = split(instances, cfg.train_fraction, cfg.split_seed)
    model = train(prepared, cfg.ai)
    case_set = select_task_cases(model, prepared, seed=1, config=cfg.cases)
    context = ServiceContext.build(prepared, model, case_set, cfg)
    clock = itertools.count(0.0, 1.0)
    return SessionService(context, data_dir, clock=lambda: next(clock))


def drive_to_batch2(service, condition, participant):
    created = service.create_session(participant, condition, seed=5)
    session_id = created["session_id"]
    service.next_step(session_id)                      # intro -> batch1
    decision = itertools.cycle([LABEL_NEG, LABEL_NEG, LABEL_POS])
    while True:
        step = service.next_step(session_id)
        if step.get("batch_complete"):
            break
        service.submit_decision(session_id, step["case"]["id"], next(decision))
    rules_payload = service.get_rules(session_id)
    service.finalize_rules(session_id)
    return session_id, rules_payload


def capture_condition(service, condition):
    session_id, rules_payload = drive_to_batch2(service, condition, f"fx-{condition}")
    captured = {"condition": condition, "steps": [], "reveals": []}
    while True:
        step = service.next_step(session_id)
        if step.get("batch_complete"):
            break
        captured["steps"].append(step)
        case_id = step["case"]["id"]
        if step["presentation"]["require_pre_decision"]:
            ack = service.submit_decision(session_id, case_id, LABEL_NEG, phase="pre")
            captured["reveals"].append({"case_id": case_id, "ack": ack})
        service.submit_decision(session_id, case_id, LABEL_NEG, phase="final")
    return captured, rules_payload, session_id


def main():
    OUT_DIR.mkdir(parents=True, exist_ok=True)
    with tempfile.TemporaryDirectory() as data_dir:
        service = build_service(data_dir)

        conditions = {}
        rules_payload = None
        for condition in CONDITIONS:
            captured, rules, session_id = capture_condition(service, condition)
            conditions[condition] = captured
            if condition == "DirectDisplay":
                rules_payload = rules

        # a state machine walkthrough for the session-runner test
        created = service.create_session("fx-flow", "AiConfidence", seed=6)
        flow = {"created": created, "steps": []}
        session_id = created["session_id"]
        flow["steps"].append(service.next_step(session_id))          # intro
        step = service.next_step(session_id)                         # first case
        flow["steps"].append(step)

        # rule-editor fixtures from a fresh editing-stage session
        created = service.create_session("fx-rules", "DirectDisplay", seed=7)
        rules_session = created["session_id"]
        service.next_step(rules_session)
        while True:
            step = service.next_step(rules_session)
            if step.get("batch_complete"):
                break
            service.submit_decision(rules_session, step["case"]["id"], LABEL_NEG)
        editor_rules = service.get_rules(rules_session)
        probe_rule = {"id": "probe", "priority": 99, "prediction": LABEL_POS,
                      "conditions": [{"feature": "age", "op": ">=", "value": 17}]}
        check_response = service.check(rules_session, probe_rule)
        clean_rule = {"id": "clean", "priority": 98, "prediction": LABEL_NEG,
                      "conditions": [{"feature": "age", "op": ">", "value": 89}]}
        clean_response = service.check(rules_session, clean_rule)

        fixtures = {
            "conditions.json": conditions,
            "rules.json": {
                "editing_payload": editor_rules,
                "probe_rule": probe_rule,
                "check_response": check_response,
                "clean_rule": clean_rule,
                "clean_response": clean_response,
            },
            "flow.json": flow,
            "survey.json": {"questionnaire": SURVEY_QUESTIONS},
        }
        for name, data in fixtures.items():
            (OUT_DIR / name).write_text(json.dumps(data, indent=2, sort_keys=True))
            print(f"wrote {OUT_DIR / name}")

        # sanity: the AdaptiveWorkflow capture must include both a gated and
        # a direct step, and AdaptiveRecommendation both hidden and shown
        aw = conditions["AdaptiveWorkflow"]["steps"]
        gated = [s for s in aw if s["presentation"]["require_pre_decision"]]
        direct = [s for s in aw if not s["presentation"]["require_pre_decision"]]
        ar = conditions["AdaptiveRecommendation"]["steps"]
        hidden = [s for s in ar if not s["presentation"]["show_ai_recommendation"]]
        shown = [s for s in ar if s["presentation"]["show_ai_recommendation"]]
        assert gated and direct, "workflow fixture missing one branch"
        assert hidden and shown, "recommendation fixture missing one branch"
        assert check_response["history_conflicts"], "probe rule found no conflicts"
        assert not clean_response["history_conflicts"]
        print("fixture sanity checks passed")


if __name__ == "__main__":
    main()
