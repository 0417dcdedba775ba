"""Objective measures over trial logs: agreement, team performance, trust
appropriateness, confidence-region breakdowns, complementary recall, and the
CL/accuracy correlation.

Empty strata yield None (an explicit undefined marker) rather than zero so
aggregation can never mistake "no data" for "0% performance".
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .cl_engine import (
    AI,
    BOTH,
    HUMAN,
    TIE,
    CLEstimate,
    ComplementaryLabel,
    complementary_recall,
)
from .strategy import StrategyKind


class MetricsError(Exception):
    pass


@dataclass(frozen=True)
class TrialLog:
    case_id: str
    condition: StrategyKind
    ground_truth: str
    final_decision: str
    ai_label: str | None = None
    ai_confidence: float | None = None
    ai_correct: bool | None = None
    human_pre_decision: str | None = None
    cl_estimate: CLEstimate | None = None
    perceived_higher: str | None = None           # "human" | "ai" | "both"
    timing: dict = field(default_factory=dict)    # event name -> timestamp

    @property
    def ai_assisted(self) -> bool:
        return self.condition != StrategyKind.HUMAN_ONLY

    @property
    def team_correct(self) -> bool:
        return self.final_decision == self.ground_truth

    def to_dict(self) -> dict:
        return {
            "case_id": self.case_id,
            "condition": self.condition.value,
            "ground_truth": self.ground_truth,
            "final_decision": self.final_decision,
            "ai_label": self.ai_label,
            "ai_confidence": self.ai_confidence,
            "ai_correct": self.ai_correct,
            "human_pre_decision": self.human_pre_decision,
            "cl_estimate": self.cl_estimate.to_dict() if self.cl_estimate else None,
            "perceived_higher": self.perceived_higher,
            "timing": dict(self.timing),
        }

    @staticmethod
    def from_dict(data: dict) -> "TrialLog":
        cl = data.get("cl_estimate")
        estimate = None
        if cl is not None:
            from .cl_engine import NeighborTrace
            estimate = CLEstimate(
                human_cl=cl["human_cl"], ai_cl=cl.get("ai_cl"),
                higher=cl.get("higher"), routed=cl.get("routed"),
                neighbor_trace=tuple(
                    NeighborTrace(neighbor_id=t["neighbor_id"], distance=t["distance"],
                                  weight=t["weight"], model_prediction=t["model_prediction"],
                                  ground_truth=t["ground_truth"])
                    for t in cl.get("neighbor_trace", ())
                ),
            )
        return TrialLog(
            case_id=data["case_id"],
            condition=StrategyKind.parse(data["condition"]),
            ground_truth=data["ground_truth"],
            final_decision=data["final_decision"],
            ai_label=data.get("ai_label"),
            ai_confidence=data.get("ai_confidence"),
            ai_correct=data.get("ai_correct"),
            human_pre_decision=data.get("human_pre_decision"),
            cl_estimate=estimate,
            perceived_higher=data.get("perceived_higher"),
            timing=data.get("timing", {}),
        )


def _require_assisted(logs: Sequence[TrialLog]) -> None:
    if not logs:
        raise MetricsError("no trial logs")
    for log in logs:
        if not log.ai_assisted or log.ai_label is None:
            raise MetricsError(f"case {log.case_id}: not an AI-assisted trial")


def agreement(logs: Sequence[TrialLog]) -> float:
    """Fraction of trials whose final decision matches the AI's label."""
    _require_assisted(logs)
    return sum(l.final_decision == l.ai_label for l in logs) / len(logs)


def team_performance(logs: Sequence[TrialLog]) -> float:
    """Final-decision accuracy."""
    if not logs:
        raise MetricsError("no trial logs")
    return sum(l.team_correct for l in logs) / len(logs)


def trust_appropriateness(logs: Sequence[TrialLog]) -> tuple[float | None, float | None]:
    """Agreement split by AI correctness: (when AI right, when AI wrong).
    High first / low second is the appropriate-trust ideal."""
    _require_assisted(logs)
    right = [l for l in logs if l.ai_correct]
    wrong = [l for l in logs if not l.ai_correct]
    return (agreement(right) if right else None,
            agreement(wrong) if wrong else None)


LOW_CORRECT = "Low&Correct"
HIGH_WRONG = "High&Wrong"
LOW_WRONG = "Low&Wrong"
HIGH_CORRECT = "High&Correct"
REGIONS = (LOW_CORRECT, HIGH_WRONG, LOW_WRONG, HIGH_CORRECT)
CONFLICT_REGIONS = (LOW_CORRECT, HIGH_WRONG)


@dataclass(frozen=True)
class RegionCell:
    region: str
    count: int
    performance: float | None

    @property
    def in_conflict_region(self) -> bool:
        return self.region in CONFLICT_REGIONS


@dataclass(frozen=True)
class RegionTable:
    cells: tuple[RegionCell, ...]
    conflict_performance: float | None
    consistent_performance: float | None

    def cell(self, region: str) -> RegionCell:
        for cell in self.cells:
            if cell.region == region:
                return cell
        raise MetricsError(f"unknown region {region!r}")

    def to_dict(self) -> dict:
        return {
            "cells": [vars(c) for c in self.cells],
            "conflict_performance": self.conflict_performance,
            "consistent_performance": self.consistent_performance,
        }


def classify_region(confidence: float, ai_correct: bool, threshold: float) -> str:
    high = confidence >= threshold
    if high:
        return HIGH_CORRECT if ai_correct else HIGH_WRONG
    return LOW_CORRECT if ai_correct else LOW_WRONG


def region_breakdown(logs: Sequence[TrialLog], threshold: float = 0.7) -> RegionTable:
    """Assign each AI-assisted trial to exactly one of the four confidence/
    correctness cells and report per-cell team performance."""
    _require_assisted(logs)
    grouped: dict[str, list[TrialLog]] = {region: [] for region in REGIONS}
    for log in logs:
        grouped[classify_region(log.ai_confidence, log.ai_correct, threshold)].append(log)
    cells = tuple(
        RegionCell(region=region, count=len(members),
                   performance=team_performance(members) if members else None)
        for region, members in grouped.items()
    )
    conflict = [l for r in CONFLICT_REGIONS for l in grouped[r]]
    consistent = [l for r in REGIONS if r not in CONFLICT_REGIONS for l in grouped[r]]
    return RegionTable(
        cells=cells,
        conflict_performance=team_performance(conflict) if conflict else None,
        consistent_performance=team_performance(consistent) if consistent else None,
    )


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float | None:
    """Sample Pearson coefficient; None when either side has zero variance."""
    if len(xs) != len(ys):
        raise MetricsError("input lengths differ")
    if len(xs) < 3:
        raise MetricsError("need at least 3 points")
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    sx = x.std()
    sy = y.std()
    if sx == 0 or sy == 0:
        return None
    return float(((x - x.mean()) * (y - y.mean())).mean() / (sx * sy))


@dataclass(frozen=True)
class PerceivedClResult:
    fraction: float | None
    matched: int
    considered: int
    excluded: int


def perceived_cl_consistency(logs: Sequence[TrialLog]) -> PerceivedClResult:
    """How often the participant's stated higher-CL side matched the
    system's; trials missing either field are excluded but counted."""
    matched = considered = excluded = 0
    for log in logs:
        if log.perceived_higher is None or log.cl_estimate is None \
                or log.cl_estimate.higher is None:
            excluded += 1
            continue
        considered += 1
        system = log.cl_estimate.higher
        stated = log.perceived_higher
        if (stated == BOTH and system == TIE) or stated == system:
            matched += 1
    return PerceivedClResult(
        fraction=matched / considered if considered else None,
        matched=matched, considered=considered, excluded=excluded,
    )


@dataclass(frozen=True)
class MetricsReport:
    n_trials: int
    agreement: float | None
    team_performance: float
    agreement_ai_correct: float | None
    agreement_ai_wrong: float | None
    performance_human_higher: float | None
    performance_ai_higher: float | None
    region_table: RegionTable | None
    complementary_recall: float | None
    pearson_r: float | None
    perceived_cl: PerceivedClResult | None

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "agreement": self.agreement,
            "team_performance": self.team_performance,
            "agreement_ai_correct": self.agreement_ai_correct,
            "agreement_ai_wrong": self.agreement_ai_wrong,
            "performance_human_higher": self.performance_human_higher,
            "performance_ai_higher": self.performance_ai_higher,
            "region_table": self.region_table.to_dict() if self.region_table else None,
            "complementary_recall": self.complementary_recall,
            "pearson_r": self.pearson_r,
            "perceived_cl": vars(self.perceived_cl) if self.perceived_cl else None,
        }

    def to_text(self) -> str:
        def fmt(value) -> str:
            return "undefined" if value is None else f"{value:.4f}"
        lines = [
            f"trials:                    {self.n_trials}",
            f"team performance:          {fmt(self.team_performance)}",
            f"human-AI agreement:        {fmt(self.agreement)}",
            f"agreement | AI correct:    {fmt(self.agreement_ai_correct)}",
            f"agreement | AI wrong:      {fmt(self.agreement_ai_wrong)}",
            f"performance | human higher:{fmt(self.performance_human_higher)}",
            f"performance | AI higher:   {fmt(self.performance_ai_higher)}",
        ]
        if self.region_table:
            lines.append("region breakdown (confidence vs. AI correctness):")
            for cell in self.region_table.cells:
                lines.append(f"  {cell.region:<13} n={cell.count:<4} "
                             f"performance={fmt(cell.performance)}")
            lines.append(f"  Conflict      performance={fmt(self.region_table.conflict_performance)}")
            lines.append(f"  Consistent    performance={fmt(self.region_table.consistent_performance)}")
        lines.append(f"complementary recall:      {fmt(self.complementary_recall)}")
        lines.append(f"pearson r (CL vs acc):     {fmt(self.pearson_r)}")
        return "\n".join(lines)


def build_report(logs: Sequence[TrialLog], threshold: float = 0.7,
                 labels: Sequence[ComplementaryLabel] = (),
                 cl_accuracy_pairs: Sequence[tuple[float, float]] = ()) -> MetricsReport:
    """Assemble the full report; AI-dependent sections are None for
    HumanOnly-only logs."""
    if not logs:
        raise MetricsError("no trial logs")
    assisted = [l for l in logs if l.ai_assisted and l.ai_label is not None]
    by_side: dict[str, list[TrialLog]] = {HUMAN: [], AI: []}
    for log in assisted:
        if log.cl_estimate is not None and log.cl_estimate.routed in by_side:
            by_side[log.cl_estimate.routed].append(log)
    trust = trust_appropriateness(assisted) if assisted else (None, None)
    pairs = list(cl_accuracy_pairs)
    return MetricsReport(
        n_trials=len(logs),
        agreement=agreement(assisted) if assisted else None,
        team_performance=team_performance(logs),
        agreement_ai_correct=trust[0],
        agreement_ai_wrong=trust[1],
        performance_human_higher=team_performance(by_side[HUMAN]) if by_side[HUMAN] else None,
        performance_ai_higher=team_performance(by_side[AI]) if by_side[AI] else None,
        region_table=region_breakdown(assisted, threshold) if assisted else None,
        complementary_recall=complementary_recall(labels) if labels else None,
        pearson_r=pearson([p[0] for p in pairs], [p[1] for p in pairs]) if len(pairs) >= 3 else None,
        perceived_cl=perceived_cl_consistency(logs),
    )
