"""Central configuration shared by the CLI, the service and the simulator.

Every tunable constant lives here with its default, so that a single config
file (JSON, nested sections) can override any of them and the whole pipeline
stays reproducible from (inputs, config, seed).
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any


@dataclass(frozen=True)
class DistanceConfig:
    # z-score numerics before computing Euclidean distance (categoricals are
    # always one-hot scaled by 1/sqrt(2) so a mismatch contributes 1.0)
    normalize: bool = True
    # exact median pairwise distance below this train size, sampled above
    exact_median_max_train: int = 200
    median_sample_pairs: int = 20000


@dataclass(frozen=True)
class ClEngineConfig:
    n_neighbors: int = 10
    alpha: float | str = 2.0          # positive float, or "auto" for median distance
    tie_policy: str = "human"         # who wins an exact CL tie: "human" | "ai"


@dataclass(frozen=True)
class AiModelConfig:
    learning_rate: float = 0.1
    iterations: int = 2000
    l2: float = 1e-4
    seed: int = 0
    checkpoint_every: int = 100


@dataclass(frozen=True)
class CaseSelectionConfig:
    confidence_threshold: float = 0.7     # >= threshold counts as high confidence
    batch_size: int = 20
    low_correct: int = 6                  # of 10 low-confidence cases per batch
    high_correct: int = 8                 # of 10 high-confidence cases per batch
    low_mean: float = 0.6
    high_mean: float = 0.8
    mean_tolerance: float = 0.03
    max_restarts: int = 10000
    repair_steps: int = 400


@dataclass(frozen=True)
class TreeConfig:
    max_depth: int | None = None
    min_leaf: int = 1
    seed: int = 0


@dataclass(frozen=True)
class SimConfig:
    agents: int = 30
    replications: int = 20
    noise_low: float = 0.1
    noise_high: float = 0.4
    fidelity_low: float = 0.5
    fidelity_high: float = 1.0
    # spread of agents' policy quality, from careless to sharp
    alignment_low: float = 0.25
    alignment_high: float = 1.0
    agent_tree_depth: int = 3
    # simulated reliance constants (artifact parameters, not study claims)
    adopt_shown_conflict: float = 0.8
    switch_when_favored: float = 0.6
    case_source: str = "selector"     # "selector" | "random"
    seed: int = 11


@dataclass(frozen=True)
class ServiceConfig:
    # readable rule sets for 20-record fits
    editing_tree_max_depth: int = 3
    editing_tree_min_leaf: int = 2
    reject_duplicate_participant: bool = True


@dataclass(frozen=True)
class Config:
    distance: DistanceConfig = field(default_factory=DistanceConfig)
    cl: ClEngineConfig = field(default_factory=ClEngineConfig)
    ai: AiModelConfig = field(default_factory=AiModelConfig)
    cases: CaseSelectionConfig = field(default_factory=CaseSelectionConfig)
    tree: TreeConfig = field(default_factory=TreeConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)
    train_fraction: float = 0.7
    split_seed: int = 42

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def _merge_section(default: Any, overrides: dict[str, Any]) -> Any:
    known = {f.name for f in fields(default)}
    unknown = set(overrides) - known
    if unknown:
        raise ValueError(f"unknown config keys: {sorted(unknown)}")
    patch = {}
    for key, value in overrides.items():
        current = getattr(default, key)
        if hasattr(current, "__dataclass_fields__"):
            if not isinstance(value, dict):
                raise ValueError(f"config section {key!r} must be an object")
            patch[key] = _merge_section(current, value)
        else:
            patch[key] = value
    return replace(default, **patch)


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> Config:
    """Build a Config from defaults, an optional JSON file, then overrides."""
    cfg = Config()
    if path is not None:
        data = json.loads(Path(path).read_text())
        cfg = _merge_section(cfg, data)
    if overrides:
        cfg = _merge_section(cfg, overrides)
    return cfg
