"""Per-instance correctness-likelihood estimation and routing.

A person's CL on a query is their approximated model's accuracy over the
query's nearest training neighbors, shrunk toward the random-guess rate 0.5
as neighbors get farther away:

    CL = (1/N) * sum_i [ w_i * correct_i + (1 - w_i) * 0.5 ],
    w_i = alpha / (alpha + distance_i)

A neighbor at distance 0 contributes its full correctness; an infinitely far
neighbor contributes exactly 0.5 (a coin flip). The AI side's CL is its
calibrated confidence. The router compares the two sides per case.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .config import ClEngineConfig
from .dataset import DatasetSplit, TaskInstance, median_pairwise_distance, nearest_neighbors
from .human_model import HumanModel

HUMAN = "human"
AI = "ai"
TIE = "tie"

UNDEFINED = None   # marker for empty denominators; deliberately not 0.0


class ClEngineError(Exception):
    pass


@dataclass(frozen=True)
class NeighborTrace:
    neighbor_id: str
    distance: float
    weight: float
    model_prediction: str
    ground_truth: str

    @property
    def correct(self) -> bool:
        return self.model_prediction == self.ground_truth

    def to_dict(self) -> dict:
        return {"neighbor_id": self.neighbor_id, "distance": self.distance,
                "weight": self.weight, "model_prediction": self.model_prediction,
                "ground_truth": self.ground_truth, "correct": self.correct}


@dataclass(frozen=True)
class CLEstimate:
    human_cl: float
    ai_cl: float | None
    higher: str | None                      # "human" | "ai" | "tie"
    routed: str | None                      # tie resolved per policy
    neighbor_trace: tuple[NeighborTrace, ...]

    def to_dict(self) -> dict:
        return {"human_cl": self.human_cl, "ai_cl": self.ai_cl,
                "higher": self.higher, "routed": self.routed,
                "neighbor_trace": [t.to_dict() for t in self.neighbor_trace]}


def resolve_alpha(config: ClEngineConfig, split: DatasetSplit,
                  sample_pairs: int = 20000, seed: int = 0,
                  normalize_distance: bool = True) -> float:
    if config.alpha == "auto":
        return median_pairwise_distance(split, sample_pairs=sample_pairs, seed=seed,
                                        normalize=normalize_distance)
    alpha = float(config.alpha)
    if alpha <= 0:
        raise ClEngineError("alpha must be positive")
    return alpha


def weight(alpha: float, distance: float) -> float:
    return alpha / (alpha + distance)


def estimate_human_cl(model: HumanModel, query: TaskInstance, split: DatasetSplit,
                      config: ClEngineConfig = ClEngineConfig(),
                      neighbors: Sequence[tuple[TaskInstance, float]] | None = None,
                      alpha: float | None = None,
                      normalize_distance: bool = True) -> CLEstimate:
    """Human-side estimate with the full neighbor trace; ai_cl left unset.

    ``neighbors`` short-circuits retrieval when the caller already has the
    query's neighbor list (the simulator reuses one per case across agents).
    """
    if config.n_neighbors < 1:
        raise ClEngineError("need at least one neighbor")
    if alpha is None:
        alpha = resolve_alpha(config, split)
    if neighbors is None:
        neighbors = nearest_neighbors(query, split, config.n_neighbors,
                                      normalize=normalize_distance)
    elif len(neighbors) != config.n_neighbors:
        raise ClEngineError(f"got {len(neighbors)} precomputed neighbors, "
                            f"expected {config.n_neighbors}")
    trace = []
    total = 0.0
    for neighbor, distance in neighbors:
        w = weight(alpha, distance)
        predicted = model.predict_label(neighbor)
        correct = 1.0 if predicted == neighbor.label else 0.0
        total += w * correct + (1.0 - w) * 0.5
        trace.append(NeighborTrace(neighbor_id=neighbor.id, distance=distance,
                                   weight=w, model_prediction=predicted,
                                   ground_truth=neighbor.label))
    return CLEstimate(human_cl=total / len(trace), ai_cl=None, higher=None,
                      routed=None, neighbor_trace=tuple(trace))


def compare(human_cl: float, ai_cl: float, tie_policy: str = HUMAN) -> str:
    """Which side to favor; exact ties go to the policy's side."""
    if tie_policy not in (HUMAN, AI):
        raise ClEngineError(f"unknown tie policy {tie_policy!r}")
    if human_cl > ai_cl:
        return HUMAN
    if ai_cl > human_cl:
        return AI
    return tie_policy


def with_ai_cl(estimate: CLEstimate, ai_cl: float,
               tie_policy: str = HUMAN) -> CLEstimate:
    higher = HUMAN if estimate.human_cl > ai_cl else AI if ai_cl > estimate.human_cl else TIE
    return CLEstimate(human_cl=estimate.human_cl, ai_cl=ai_cl, higher=higher,
                      routed=compare(estimate.human_cl, ai_cl, tie_policy),
                      neighbor_trace=estimate.neighbor_trace)


def confidence_router(ai_confidence: float, threshold: float = 0.7) -> str:
    """The baseline: 'ai' exactly when confidence reaches the threshold."""
    if not 0.5 < threshold < 1:
        raise ClEngineError("threshold must be in (0.5, 1)")
    return AI if ai_confidence >= threshold else HUMAN


HUMAN_ONLY_CORRECT = "human-only-correct"
AI_ONLY_CORRECT = "ai-only-correct"
BOTH = "both"
NEITHER = "neither"


def actual_outcome(human_correct: bool, ai_correct: bool) -> str:
    if human_correct and ai_correct:
        return BOTH
    if human_correct:
        return HUMAN_ONLY_CORRECT
    if ai_correct:
        return AI_ONLY_CORRECT
    return NEITHER


@dataclass(frozen=True)
class ComplementaryLabel:
    case_id: str
    predicted_better: str          # "human" | "ai"
    actual: str                    # outcome string above

    @property
    def is_complementary(self) -> bool:
        return self.actual in (HUMAN_ONLY_CORRECT, AI_ONLY_CORRECT)

    @property
    def correctly_routed(self) -> bool:
        return (self.actual == HUMAN_ONLY_CORRECT and self.predicted_better == HUMAN) or \
               (self.actual == AI_ONLY_CORRECT and self.predicted_better == AI)


def complementary_recall(labels: Sequence[ComplementaryLabel]) -> float | None:
    """Fraction of complementary cases routed to the uniquely-correct side;
    UNDEFINED when the complementary region is empty."""
    complementary = [l for l in labels if l.is_complementary]
    if not complementary:
        return UNDEFINED
    return sum(l.correctly_routed for l in complementary) / len(complementary)
