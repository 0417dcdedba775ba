"""Live five-stage sessions over HTTP, with event-sourced persistence.

Session state is a pure fold over an append-only event stream (one JSONL
file per session). Handlers validate a command, append the resulting event
durably (fsync before acknowledging), then apply it to the in-memory state;
restarting the service replays every stream and resumes each session at its
exact cursor. The replay test in the suite holds this contract.

Payload assembly respects the Presentation flags: a field the condition
hides is never serialized to the client, and in AdaptiveWorkflow the AI
block is withheld until the required pre-decision is committed.
"""
from __future__ import annotations

import hashlib
import json
import os
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .ai_model import AiModel, AiPrediction, TaskCaseSet
from .cl_engine import CLEstimate, estimate_human_cl, resolve_alpha, with_ai_cl
from .config import Config, TreeConfig
from .dataset import DatasetSplit, TaskInstance
from .human_model import (
    DecisionRecord,
    HumanModel,
    HumanModelError,
    Rule,
    RuleSet,
    apply_edit,
    check_rule,
    edit_from_dict,
    fit_tree,
    tree_to_rules,
)
from .strategy import Presentation, StrategyKind, plan_step

STAGES = ("intro", "batch1", "rule_editing", "batch2", "survey", "done")

EVENT_KINDS = ("stage_enter", "decision_submitted", "rule_edit", "rule_check",
               "presentation_served", "survey_answer")


class ServiceError(Exception):
    def __init__(self, message: str, status: int = 400, code: str = "protocol_error"):
        super().__init__(message)
        self.status = status
        self.code = code


@dataclass(frozen=True)
class EventRecord:
    session_id: str
    sequence: int
    timestamp: float
    kind: str
    payload: dict

    def to_dict(self) -> dict:
        return {"session_id": self.session_id, "sequence": self.sequence,
                "timestamp": self.timestamp, "kind": self.kind, "payload": self.payload}

    @staticmethod
    def from_dict(data: dict) -> "EventRecord":
        return EventRecord(session_id=data["session_id"], sequence=data["sequence"],
                           timestamp=data["timestamp"], kind=data["kind"],
                           payload=data["payload"])


@dataclass
class TrialState:
    case_id: str
    presentation: dict
    cl: dict | None = None
    ai: dict | None = None
    pre_decision: str | None = None
    final_decision: str | None = None
    timing: dict = field(default_factory=dict)


@dataclass
class SessionState:
    """Pure fold target; every mutation happens in apply()."""
    session_id: str = ""
    participant_id: str = ""
    condition: StrategyKind = StrategyKind.HUMAN_ONLY
    seed: int = 0
    stage: str = "intro"
    batch1_order: list[str] = field(default_factory=list)
    batch2_order: list[str] = field(default_factory=list)
    cursor: int = 0                       # case index within the active batch
    batch1_decisions: dict[str, str] = field(default_factory=dict)
    ruleset: RuleSet | None = None
    model_frozen: bool = False
    trials: dict[str, TrialState] = field(default_factory=dict)
    trial_order: list[str] = field(default_factory=list)
    survey: dict | None = None
    last_sequence: int = -1

    def apply(self, event: EventRecord) -> None:
        if event.sequence != self.last_sequence + 1:
            raise ServiceError(
                f"event sequence gap: expected {self.last_sequence + 1}, got {event.sequence}",
                status=500, code="corrupt_stream")
        self.last_sequence = event.sequence
        payload = event.payload
        if event.kind == "stage_enter":
            self.stage = payload["stage"]
            self.cursor = 0
            if payload["stage"] == "intro":
                self.session_id = event.session_id
                self.participant_id = payload["participant_id"]
                self.condition = StrategyKind.parse(payload["condition"])
                self.seed = payload["seed"]
                self.batch1_order = list(payload["batch1_order"])
                self.batch2_order = list(payload["batch2_order"])
            if payload["stage"] == "batch2":
                self.model_frozen = True
        elif event.kind == "presentation_served":
            trial = TrialState(case_id=payload["case_id"],
                               presentation=payload["presentation"],
                               cl=payload.get("cl"), ai=payload.get("ai"))
            trial.timing["presentation_served"] = event.timestamp
            presentation = payload["presentation"]
            if presentation.get("show_ai_recommendation") \
                    and not presentation.get("require_pre_decision"):
                trial.timing["ai_reveal"] = event.timestamp
            self.trials[payload["case_id"]] = trial
            self.trial_order.append(payload["case_id"])
        elif event.kind == "decision_submitted":
            case_id = payload["case_id"]
            phase = payload["phase"]
            if payload["stage"] == "batch1":
                self.batch1_decisions[case_id] = payload["decision"]
                self.cursor += 1
            else:
                trial = self.trials[case_id]
                if phase == "pre":
                    trial.pre_decision = payload["decision"]
                    trial.timing["pre_decision"] = event.timestamp
                    if trial.presentation.get("show_ai_recommendation"):
                        trial.timing["ai_reveal"] = event.timestamp
                else:
                    trial.final_decision = payload["decision"]
                    trial.timing["final_decision"] = event.timestamp
                    self.cursor += 1
        elif event.kind == "rule_edit":
            self.ruleset = RuleSet.from_json(payload["ruleset"])
        elif event.kind == "rule_check":
            pass                           # audit only; no state transition
        elif event.kind == "survey_answer":
            self.survey = payload["answers"]
        else:
            raise ServiceError(f"unknown event kind {event.kind!r}",
                               status=500, code="corrupt_stream")

    def batch_order(self) -> list[str]:
        return self.batch1_order if self.stage == "batch1" else self.batch2_order

    def current_case_id(self) -> str | None:
        order = self.batch_order()
        return order[self.cursor] if self.cursor < len(order) else None

    def snapshot(self) -> dict:
        return {
            "session_id": self.session_id,
            "participant_id": self.participant_id,
            "condition": self.condition.value,
            "seed": self.seed,
            "stage": self.stage,
            "cursor": self.cursor,
            "batch1_order": list(self.batch1_order),
            "batch2_order": list(self.batch2_order),
            "batch1_decisions": dict(sorted(self.batch1_decisions.items())),
            "ruleset": self.ruleset.to_json() if self.ruleset else None,
            "model_frozen": self.model_frozen,
            "trials": {cid: vars(t) for cid, t in sorted(self.trials.items())},
            "trial_order": list(self.trial_order),
            "survey": self.survey,
            "last_sequence": self.last_sequence,
        }

    def state_hash(self) -> str:
        canonical = json.dumps(self.snapshot(), sort_keys=True)
        return hashlib.sha256(canonical.encode()).hexdigest()


def replay(events: list[EventRecord]) -> SessionState:
    state = SessionState()
    for event in events:
        state.apply(event)
    return state


@dataclass
class ServiceContext:
    """Everything a session needs that outlives sessions: the data split,
    the trained AI model, the task cases and the engine configuration."""
    split: DatasetSplit
    ai: AiModel
    case_set: TaskCaseSet
    config: Config
    alpha: float

    @staticmethod
    def build(split: DatasetSplit, ai: AiModel, case_set: TaskCaseSet,
              config: Config) -> "ServiceContext":
        alpha = resolve_alpha(config.cl, split, seed=config.split_seed,
                              normalize_distance=config.distance.normalize)
        return ServiceContext(split=split, ai=ai, case_set=case_set,
                              config=config, alpha=alpha)

    def case(self, case_id: str) -> TaskInstance:
        for case in self.case_set.all_cases:
            if case.instance.id == case_id:
                return case.instance
        raise ServiceError(f"unknown case {case_id!r}", status=404, code="unknown_case")

    def prediction(self, case_id: str) -> AiPrediction:
        for case in self.case_set.all_cases:
            if case.instance.id == case_id:
                return case.prediction
        raise ServiceError(f"unknown case {case_id!r}", status=404, code="unknown_case")


SURVEY_QUESTIONS = [
    {"id": "trust_in_ai", "text": "I trusted the AI's recommendations.", "scale": 7},
    {"id": "confidence", "text": "I was confident in my decision process.", "scale": 7},
    {"id": "complexity", "text": "The system felt complex to use.", "scale": 7},
    {"id": "mental_demand", "text": "The task was mentally demanding.", "scale": 7},
    {"id": "autonomy", "text": "I felt in control of the final decisions.", "scale": 7},
    {"id": "satisfaction", "text": "I am satisfied with the overall experience.", "scale": 7},
    {"id": "future_use", "text": "I would use this system again.", "scale": 7},
]


class SessionService:
    """Command side: validates requests, appends events, applies them."""

    def __init__(self, context: ServiceContext, data_dir: str | Path,
                 clock: Callable[[], float] = time.time):
        self.context = context
        self.data_dir = Path(data_dir)
        (self.data_dir / "sessions").mkdir(parents=True, exist_ok=True)
        self.clock = clock
        self._lock = threading.Lock()
        self._locks: dict[str, threading.Lock] = {}
        self._sessions: dict[str, SessionState] = {}
        self._models: dict[str, HumanModel] = {}
        self._estimates: dict[tuple[str, str], CLEstimate] = {}
        self._load_existing()

    # -- persistence ---------------------------------------------------

    def _stream_path(self, session_id: str) -> Path:
        return self.data_dir / "sessions" / f"{session_id}.jsonl"

    def _load_existing(self) -> None:
        for path in sorted((self.data_dir / "sessions").glob("*.jsonl")):
            events = read_stream(path)
            if events:
                state = replay(events)
                self._sessions[state.session_id] = state

    def _append(self, session_id: str, kind: str, payload: dict) -> EventRecord:
        state = self._sessions[session_id]
        event = EventRecord(session_id=session_id, sequence=state.last_sequence + 1,
                            timestamp=self.clock(), kind=kind, payload=payload)
        path = self._stream_path(session_id)
        with path.open("a") as handle:
            handle.write(json.dumps(event.to_dict(), sort_keys=True) + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        state.apply(event)
        return event

    def _session_lock(self, session_id: str) -> threading.Lock:
        with self._lock:
            return self._locks.setdefault(session_id, threading.Lock())

    def _get(self, session_id: str) -> SessionState:
        state = self._sessions.get(session_id)
        if state is None:
            raise ServiceError(f"unknown session {session_id!r}", status=404,
                               code="unknown_session")
        return state

    # -- commands ------------------------------------------------------

    def create_session(self, participant_id: str, condition: str, seed: int) -> dict:
        kind = StrategyKind.parse(condition)
        with self._lock:
            if self.context.config.service.reject_duplicate_participant:
                for state in self._sessions.values():
                    if state.participant_id == participant_id \
                            and state.condition == kind:
                        raise ServiceError(
                            f"participant {participant_id!r} already has a "
                            f"{condition} session", status=409, code="duplicate_participant")
            session_id = uuid.uuid4().hex[:12]
            rng = np.random.default_rng([seed, 71])
            batch1 = [c.instance.id for c in self.context.case_set.batch1]
            batch2 = [c.instance.id for c in self.context.case_set.batch2]
            state = SessionState()
            self._sessions[session_id] = state
        self._append(session_id, "stage_enter", {
            "stage": "intro",
            "participant_id": participant_id,
            "condition": kind.value,
            "seed": seed,
            "batch1_order": [batch1[i] for i in rng.permutation(len(batch1))],
            "batch2_order": [batch2[i] for i in rng.permutation(len(batch2))],
        })
        return {"session_id": session_id, "condition": kind.value, "stage": "intro"}

    def next_step(self, session_id: str) -> dict:
        with self._session_lock(session_id):
            state = self._get(session_id)
            if state.stage == "intro":
                self._append(session_id, "stage_enter", {"stage": "batch1"})
                return {"stage": "intro", "tutorial": self._tutorial(),
                        "next_stage": "batch1"}
            if state.stage == "batch1":
                return self._serve_batch1(state)
            if state.stage == "rule_editing":
                return {"stage": "rule_editing",
                        "rules": state.ruleset.to_json() if state.ruleset else None,
                        "history": self._history_rows(state)}
            if state.stage == "batch2":
                return self._serve_batch2(state)
            if state.stage == "survey":
                return {"stage": "survey", "questionnaire": SURVEY_QUESTIONS}
            return {"stage": "done", "summary": {"trials": len(state.trials)}}

    def _tutorial(self) -> dict:
        return {
            "task": "Predict whether the person's annual income exceeds 50K.",
            "features": [f.name for f in self.context.split.schema.features],
        }

    def _serve_batch1(self, state: SessionState) -> dict:
        case_id = state.current_case_id()
        if case_id is None:
            self._append(state.session_id, "stage_enter", {"stage": "rule_editing"})
            return {"stage": "batch1", "batch_complete": True,
                    "next_stage": "rule_editing"}
        case = self.context.case(case_id)
        presentation = plan_step(StrategyKind.HUMAN_ONLY, None, None)
        return {"stage": "batch1", "index": state.cursor,
                "total": len(state.batch1_order),
                "case": case.to_dict() | {"label": None},
                "presentation": presentation.to_dict()}

    def _human_model(self, state: SessionState) -> HumanModel:
        model = self._models.get(state.session_id)
        if model is None:
            records = self._decision_records(state)
            cfg = self.context.config
            tree = fit_tree(records, TreeConfig(
                max_depth=cfg.service.editing_tree_max_depth,
                min_leaf=cfg.service.editing_tree_min_leaf),
                schema=self.context.split.schema)
            ruleset = state.ruleset if state.ruleset is not None else tree_to_rules(tree)
            model = HumanModel(ruleset=ruleset, fallback=tree)
            self._models[state.session_id] = model
        return model

    def _decision_records(self, state: SessionState) -> list[DecisionRecord]:
        return [
            DecisionRecord(instance=self.context.case(case_id), human_decision=decision)
            for case_id, decision in state.batch1_decisions.items()
        ]

    def _estimate(self, state: SessionState, case_id: str) -> CLEstimate:
        key = (state.session_id, case_id)
        if key not in self._estimates:
            model = self._human_model(state)
            case = self.context.case(case_id)
            estimate = estimate_human_cl(
                model, case, self.context.split, self.context.config.cl,
                alpha=self.context.alpha,
                normalize_distance=self.context.config.distance.normalize)
            estimate = with_ai_cl(estimate, self.context.prediction(case_id).confidence,
                                  self.context.config.cl.tie_policy)
            self._estimates[key] = estimate
        return self._estimates[key]

    def _ai_payload(self, presentation: Presentation, case_id: str,
                    reveal: bool) -> dict | None:
        """The AI block the client may see right now; None while hidden."""
        if not (presentation.show_ai_recommendation and reveal) \
                and not presentation.show_explanation:
            return None
        prediction = self.context.prediction(case_id)
        payload: dict = {}
        if presentation.show_ai_recommendation and reveal:
            payload["label"] = prediction.label
            if presentation.show_ai_confidence:
                payload["confidence"] = prediction.confidence
        if presentation.show_explanation:
            explanation = self.context.ai.explain(self.context.case(case_id))
            include_base = presentation.show_ai_recommendation and reveal
            payload["explanation"] = explanation.to_dict(include_base=include_base)
        return payload or None

    def _serve_batch2(self, state: SessionState) -> dict:
        case_id = state.current_case_id()
        if case_id is None:
            self._append(state.session_id, "stage_enter", {"stage": "survey"})
            return {"stage": "batch2", "batch_complete": True, "next_stage": "survey"}
        trial = state.trials.get(case_id)
        if trial is not None and trial.final_decision is None:
            raise ServiceError("a decision for the current case is still pending",
                               status=409, code="decision_pending")
        needs_cl = state.condition not in (StrategyKind.HUMAN_ONLY,
                                           StrategyKind.AI_CONFIDENCE)
        estimate = self._estimate(state, case_id) if needs_cl else None
        ai = None if state.condition == StrategyKind.HUMAN_ONLY \
            else self.context.prediction(case_id)
        presentation = plan_step(state.condition, estimate, ai)
        served_payload = {
            "case_id": case_id,
            "presentation": presentation.to_dict(),
        }
        if estimate is not None:
            served_payload["cl"] = estimate.to_dict()      # audit trail, full trace
        if ai is not None:
            served_payload["ai"] = {"label": ai.label, "confidence": ai.confidence,
                                    "correct": ai.label == self.context.case(case_id).label}
        self._append(state.session_id, "presentation_served", served_payload)

        response = {
            "stage": "batch2", "index": state.cursor,
            "total": len(state.batch2_order),
            "case": self.context.case(case_id).to_dict() | {"label": None},
            "presentation": presentation.to_dict(),
        }
        reveal_now = not presentation.require_pre_decision
        ai_block = self._ai_payload(presentation, case_id, reveal=reveal_now)
        if ai_block:
            response["ai"] = ai_block
        if presentation.show_human_cl and presentation.show_ai_cl and estimate:
            response["cl"] = estimate.to_dict()
        return response

    def submit_decision(self, session_id: str, case_id: str, decision: str,
                        phase: str = "final") -> dict:
        if phase not in ("pre", "final"):
            raise ServiceError(f"unknown phase {phase!r}")
        with self._session_lock(session_id):
            state = self._get(session_id)
            if state.stage == "batch1":
                return self._submit_batch1(state, case_id, decision, phase)
            if state.stage == "batch2":
                return self._submit_batch2(state, case_id, decision, phase)
            raise ServiceError(f"decisions are not accepted in stage {state.stage!r}",
                               status=409, code="stage_violation")

    def _submit_batch1(self, state: SessionState, case_id: str, decision: str,
                       phase: str) -> dict:
        if phase != "final":
            raise ServiceError("batch 1 is unassisted: only final decisions exist",
                               code="phase_violation")
        if state.current_case_id() != case_id:
            raise ServiceError(
                f"case {case_id!r} is not the current case", status=409,
                code="out_of_order")
        self._append(state.session_id, "decision_submitted", {
            "stage": "batch1", "case_id": case_id, "decision": decision,
            "phase": "final"})
        return {"ok": True, "advanced": True}

    def _submit_batch2(self, state: SessionState, case_id: str, decision: str,
                       phase: str) -> dict:
        if state.current_case_id() != case_id:
            raise ServiceError(f"case {case_id!r} is not the current case",
                               status=409, code="out_of_order")
        trial = state.trials.get(case_id)
        if trial is None:
            raise ServiceError("case was never served", status=409,
                               code="not_served")
        presentation = Presentation.from_dict(trial.presentation)
        if phase == "pre":
            if not presentation.require_pre_decision:
                raise ServiceError(
                    f"{state.condition.value} does not ask for a pre-decision here",
                    status=409, code="phase_violation")
            if trial.pre_decision is not None:
                raise ServiceError("pre-decision already submitted", status=409,
                                   code="duplicate_submission")
            self._append(state.session_id, "decision_submitted", {
                "stage": "batch2", "case_id": case_id, "decision": decision,
                "phase": "pre"})
            reveal = self._ai_payload(presentation, case_id, reveal=True)
            return {"ok": True, "advanced": False, "reveal": reveal}
        if presentation.require_pre_decision and trial.pre_decision is None:
            raise ServiceError("a pre-decision is required before the final decision",
                               status=409, code="pre_decision_required")
        if trial.final_decision is not None:
            raise ServiceError("final decision already submitted", status=409,
                               code="duplicate_submission")
        self._append(state.session_id, "decision_submitted", {
            "stage": "batch2", "case_id": case_id, "decision": decision,
            "phase": "final"})
        return {"ok": True, "advanced": True}

    # -- rules ---------------------------------------------------------

    def _require_editing(self, state: SessionState) -> None:
        if state.stage != "rule_editing":
            raise ServiceError(
                f"rule operations are only allowed in the rule_editing stage "
                f"(now {state.stage!r})", status=409, code="stage_violation")

    def get_rules(self, session_id: str) -> dict:
        with self._session_lock(session_id):
            state = self._get(session_id)
            self._require_editing(state)
            if state.ruleset is None:
                ruleset = self._initial_rules(state)
            else:
                ruleset = state.ruleset
            return {"rules": ruleset.to_json(), "history": self._history_rows(state)}

    def _initial_rules(self, state: SessionState) -> RuleSet:
        model = self._human_model(state)
        if state.ruleset is None:
            self._append(state.session_id, "rule_edit",
                         {"edit": None, "ruleset": model.ruleset.to_json()})
        return self._sessions[state.session_id].ruleset

    def _history_rows(self, state: SessionState) -> list[dict]:
        rows = []
        for case_id, decision in state.batch1_decisions.items():
            case = self.context.case(case_id)
            rows.append({"case_id": case_id, "values": dict(case.values),
                         "decision": decision})
        return rows

    def put_edit(self, session_id: str, edit_data: dict) -> dict:
        with self._session_lock(session_id):
            state = self._get(session_id)
            self._require_editing(state)
            if state.ruleset is None:
                self._initial_rules(state)
                state = self._get(session_id)
            try:
                edit = edit_from_dict(edit_data)
                updated = apply_edit(state.ruleset, edit, self.context.split.schema)
            except HumanModelError as exc:
                raise ServiceError(str(exc), status=400, code="bad_edit")
            self._append(session_id, "rule_edit",
                         {"edit": edit_data, "ruleset": updated.to_json()})
            self._models.pop(session_id, None)      # model rebuilt on next use
            return {"rules": updated.to_json()}

    def check(self, session_id: str, rule_data: dict) -> dict:
        with self._session_lock(session_id):
            state = self._get(session_id)
            self._require_editing(state)
            if state.ruleset is None:
                self._initial_rules(state)
                state = self._get(session_id)
            try:
                rule = Rule.from_dict(rule_data)
                report = check_rule(rule, self._decision_records(state),
                                    state.ruleset, self.context.split.schema)
            except HumanModelError as exc:
                raise ServiceError(str(exc), status=400, code="bad_rule")
            self._append(session_id, "rule_check",
                         {"rule": rule_data, "report": report.to_dict()})
            conflicting_rows = [
                row for row in self._history_rows(state)
                if row["case_id"] in report.history_conflicts
            ]
            return report.to_dict() | {"history_rows": conflicting_rows}

    def finalize_rules(self, session_id: str) -> dict:
        with self._session_lock(session_id):
            state = self._get(session_id)
            self._require_editing(state)
            if state.ruleset is None:
                self._initial_rules(state)
                state = self._get(session_id)
            self._models.pop(session_id, None)
            self._append(session_id, "stage_enter", {"stage": "batch2"})
            return {"ok": True, "stage": "batch2"}

    def submit_survey(self, session_id: str, answers: dict) -> dict:
        with self._session_lock(session_id):
            state = self._get(session_id)
            if state.stage != "survey":
                raise ServiceError(f"survey not open in stage {state.stage!r}",
                                   status=409, code="stage_violation")
            self._append(session_id, "survey_answer", {"answers": answers})
            self._append(session_id, "stage_enter", {"stage": "done"})
            return {"ok": True, "stage": "done"}

    # -- export --------------------------------------------------------

    def trial_logs(self, session_id: str) -> list[dict]:
        state = self._get(session_id)
        logs = []
        for case_id in state.trial_order:
            trial = state.trials[case_id]
            if trial.final_decision is None:
                continue
            case = self.context.case(case_id)
            log = {
                "case_id": case_id,
                "condition": state.condition.value,
                "ground_truth": case.label,
                "final_decision": trial.final_decision,
                "human_pre_decision": trial.pre_decision,
                "cl_estimate": trial.cl,
                "perceived_higher": None,
                "timing": trial.timing,
            }
            if state.condition != StrategyKind.HUMAN_ONLY:
                ai = trial.ai or {}
                log |= {"ai_label": ai.get("label"),
                        "ai_confidence": ai.get("confidence"),
                        "ai_correct": ai.get("correct")}
            else:
                log |= {"ai_label": None, "ai_confidence": None, "ai_correct": None}
            logs.append(log)
        return logs

    def export(self, session_id: str | None = None) -> dict:
        ids = [session_id] if session_id else sorted(self._sessions)
        sessions = []
        for sid in ids:
            state = self._get(sid)
            events = read_stream(self._stream_path(sid))
            sessions.append({
                "session": state.snapshot(),
                "state_hash": state.state_hash(),
                "trial_logs": self.trial_logs(sid),
                "events": [e.to_dict() for e in events],
            })
        return {"sessions": sessions}


def read_stream(path: str | Path) -> list[EventRecord]:
    path = Path(path)
    if not path.exists():
        return []
    events = []
    with path.open() as handle:
        for line in handle:
            line = line.strip()
            if line:
                events.append(EventRecord.from_dict(json.loads(line)))
    return events


def verify_replay(export_data: dict) -> list[str]:
    """Replay every exported event stream; returns hash mismatches."""
    problems = []
    for entry in export_data["sessions"]:
        events = [EventRecord.from_dict(e) for e in entry["events"]]
        rebuilt = replay(events)
        if rebuilt.state_hash() != entry["state_hash"]:
            problems.append(f"session {rebuilt.session_id}: replayed state differs")
    return problems


# ---------------------------------------------------------------------------
# HTTP layer
# ---------------------------------------------------------------------------

def create_app(service: SessionService):
    from fastapi import FastAPI, Request
    from fastapi.responses import JSONResponse

    app = FastAPI(title="trustcal service")
    app.state.service = service

    @app.exception_handler(ServiceError)
    async def handle_service_error(request: Request, exc: ServiceError):
        return JSONResponse(status_code=exc.status,
                            content={"error": {"code": exc.code, "message": str(exc)}})

    @app.post("/sessions", status_code=201)
    async def post_sessions(body: dict):
        return service.create_session(
            participant_id=body.get("participant_id", ""),
            condition=body.get("condition", ""),
            seed=int(body.get("seed", 0)))

    @app.get("/sessions/{session_id}/next")
    async def get_next(session_id: str):
        return service.next_step(session_id)

    @app.post("/sessions/{session_id}/decisions")
    async def post_decision(session_id: str, body: dict):
        return service.submit_decision(session_id, case_id=body.get("case_id", ""),
                                       decision=body.get("decision", ""),
                                       phase=body.get("phase", "final"))

    @app.get("/sessions/{session_id}/rules")
    async def get_rules(session_id: str):
        return service.get_rules(session_id)

    @app.put("/sessions/{session_id}/rules")
    async def put_rules(session_id: str, body: dict):
        return service.put_edit(session_id, body.get("edit", {}))

    @app.post("/sessions/{session_id}/rules/check")
    async def post_check(session_id: str, body: dict):
        return service.check(session_id, body.get("rule", {}))

    @app.post("/sessions/{session_id}/rules/finalize")
    async def post_finalize(session_id: str):
        return service.finalize_rules(session_id)

    @app.post("/sessions/{session_id}/survey")
    async def post_survey(session_id: str, body: dict):
        return service.submit_survey(session_id, body.get("answers", {}))

    @app.get("/export")
    async def get_export(session_id: str | None = None):
        return service.export(session_id)

    return app
