"""Per-step presentation contracts for the five experimental conditions.

plan_step turns (condition, CL comparison, AI output) into a Presentation:
which widgets the interface shows and whether the person must commit an
initial decision before the AI's output is revealed. The flags are the
wire-level contract with the client, and the transcript validator replays
logged sessions against them.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

from .ai_model import AiPrediction
from .cl_engine import AI, HUMAN, CLEstimate


class StrategyError(Exception):
    pass


class StrategyKind(str, Enum):
    HUMAN_ONLY = "HumanOnly"
    AI_CONFIDENCE = "AiConfidence"
    DIRECT_DISPLAY = "DirectDisplay"
    ADAPTIVE_WORKFLOW = "AdaptiveWorkflow"
    ADAPTIVE_RECOMMENDATION = "AdaptiveRecommendation"

    @staticmethod
    def parse(name: str) -> "StrategyKind":
        for kind in StrategyKind:
            if kind.value == name:
                return kind
        raise StrategyError(f"unknown condition {name!r}")


ADAPTIVE_KINDS = (StrategyKind.DIRECT_DISPLAY, StrategyKind.ADAPTIVE_WORKFLOW,
                  StrategyKind.ADAPTIVE_RECOMMENDATION)


@dataclass(frozen=True)
class Presentation:
    show_ai_recommendation: bool
    show_ai_confidence: bool
    show_human_cl: bool
    show_ai_cl: bool
    show_explanation: bool
    require_pre_decision: bool
    summary_text: str = ""

    def to_dict(self) -> dict:
        return {
            "show_ai_recommendation": self.show_ai_recommendation,
            "show_ai_confidence": self.show_ai_confidence,
            "show_human_cl": self.show_human_cl,
            "show_ai_cl": self.show_ai_cl,
            "show_explanation": self.show_explanation,
            "require_pre_decision": self.require_pre_decision,
            "summary_text": self.summary_text,
        }

    @staticmethod
    def from_dict(data: dict) -> "Presentation":
        return Presentation(**data)


_SUMMARY = ("According to the system's estimation, in this task case, "
            "{winner} might have a higher probability of making a correct "
            "decision than {loser}.")


def comparison_summary(routed: str) -> str:
    if routed == AI:
        return _SUMMARY.format(winner="the AI", loser="you")
    return _SUMMARY.format(winner="you", loser="the AI")


def plan_step(kind: StrategyKind, cl: CLEstimate | None,
              ai: AiPrediction | None) -> Presentation:
    """The Presentation for one decision step. CL comparison is required for
    the three CL-exploiting conditions; HumanOnly ignores both inputs."""
    if kind == StrategyKind.HUMAN_ONLY:
        return Presentation(show_ai_recommendation=False, show_ai_confidence=False,
                            show_human_cl=False, show_ai_cl=False,
                            show_explanation=False, require_pre_decision=False)
    if ai is None:
        raise StrategyError(f"{kind.value} needs an AI prediction")
    if kind == StrategyKind.AI_CONFIDENCE:
        return Presentation(show_ai_recommendation=True, show_ai_confidence=True,
                            show_human_cl=False, show_ai_cl=False,
                            show_explanation=False, require_pre_decision=False)
    if cl is None or cl.routed is None:
        raise StrategyError(f"{kind.value} needs a human/AI CL comparison")
    human_favored = cl.routed == HUMAN
    if kind == StrategyKind.DIRECT_DISPLAY:
        return Presentation(show_ai_recommendation=True, show_ai_confidence=False,
                            show_human_cl=True, show_ai_cl=True,
                            show_explanation=False, require_pre_decision=False,
                            summary_text=comparison_summary(cl.routed))
    if kind == StrategyKind.ADAPTIVE_WORKFLOW:
        # the order changes, the CL values themselves stay hidden
        return Presentation(show_ai_recommendation=True, show_ai_confidence=False,
                            show_human_cl=False, show_ai_cl=False,
                            show_explanation=False,
                            require_pre_decision=human_favored)
    if kind == StrategyKind.ADAPTIVE_RECOMMENDATION:
        return Presentation(show_ai_recommendation=not human_favored,
                            show_ai_confidence=False,
                            show_human_cl=False, show_ai_cl=False,
                            show_explanation=True, require_pre_decision=False)
    raise StrategyError(f"unknown condition {kind!r}")


# ---------------------------------------------------------------------------
# transcript validation
# ---------------------------------------------------------------------------

PRE_DECISION = "pre_decision"
FINAL_DECISION = "final_decision"
AI_REVEAL = "ai_reveal"
HUMAN_CL_DISPLAY = "human_cl_display"
AI_CL_DISPLAY = "ai_cl_display"


@dataclass(frozen=True)
class StepEvent:
    kind: str
    timestamp: float


def _flag_violations(kind: StrategyKind, step: int, p: Presentation) -> list[str]:
    out = []
    if kind == StrategyKind.HUMAN_ONLY:
        if p.show_ai_recommendation or p.show_ai_confidence or p.show_ai_cl \
                or p.show_human_cl or p.show_explanation:
            out.append(f"step {step}: HumanOnly must hide all AI-related widgets")
    elif kind == StrategyKind.AI_CONFIDENCE:
        if not (p.show_ai_recommendation and p.show_ai_confidence):
            out.append(f"step {step}: AiConfidence must show recommendation and confidence")
        if p.show_human_cl or p.show_ai_cl:
            out.append(f"step {step}: AiConfidence must not show CL values")
    elif kind == StrategyKind.DIRECT_DISPLAY:
        if not (p.show_human_cl and p.show_ai_cl and p.show_ai_recommendation):
            out.append(f"step {step}: DirectDisplay must show both CLs and the recommendation")
        if not p.summary_text:
            out.append(f"step {step}: DirectDisplay needs a comparison summary")
    elif kind == StrategyKind.ADAPTIVE_RECOMMENDATION:
        if not p.show_explanation:
            out.append(f"step {step}: AdaptiveRecommendation always shows the explanation")
    return out


def validate_transcript(kind: StrategyKind,
                        steps: Sequence[tuple[Presentation, Sequence[StepEvent]]]) -> list[str]:
    """Protocol violations in a logged session; empty means compliant."""
    violations: list[str] = []
    for index, (presentation, events) in enumerate(steps, start=1):
        violations.extend(_flag_violations(kind, index, presentation))
        events = sorted(events, key=lambda e: e.timestamp)
        reveal = next((e.timestamp for e in events if e.kind == AI_REVEAL), None)
        pre = next((e.timestamp for e in events if e.kind == PRE_DECISION), None)
        if presentation.require_pre_decision:
            if pre is None:
                violations.append(f"step {index}: required pre-decision never committed")
            elif reveal is not None and reveal < pre:
                violations.append(f"step {index}: AI revealed before the required pre-decision")
        elif pre is not None:
            violations.append(f"step {index}: pre-decision submitted where not required")
        if not presentation.show_human_cl and any(e.kind == HUMAN_CL_DISPLAY for e in events):
            violations.append(f"step {index}: human CL displayed while hidden by the condition")
        if not presentation.show_ai_cl and any(e.kind == AI_CL_DISPLAY for e in events):
            violations.append(f"step {index}: AI CL displayed while hidden by the condition")
        if not presentation.show_ai_recommendation and reveal is not None:
            violations.append(f"step {index}: AI recommendation revealed while hidden")
    return violations
