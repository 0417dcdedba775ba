"""Synthetic-participant harness.

Agents own a ground-truth rule policy (a random shallow tree converted to
rules), follow it with per-trial decision noise, and "revise" an induced
model toward their true policy with a configurable fidelity. The experiment
runner replays the whole five-stage protocol headlessly: induce models from
batch-1 decisions, estimate per-case CL with the engine, route every batch-2
case with both the CL comparison and the confidence threshold, simulate
reliance under each presentation condition, and aggregate the metrics.

Everything is a pure function of the config seeds.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .ai_model import AiModel, AiPrediction, TaskCaseSet, select_task_cases, train
from .cl_engine import (
    AI,
    HUMAN,
    CLEstimate,
    ComplementaryLabel,
    actual_outcome,
    complementary_recall,
    compare,
    confidence_router,
    estimate_human_cl,
    resolve_alpha,
    with_ai_cl,
)
from .config import ClEngineConfig, Config, SimConfig, TreeConfig
from .dataset import (
    LABEL_NEG,
    LABEL_POS,
    DatasetSplit,
    FeatureSchema,
    TaskInstance,
    nearest_neighbors,
)
from .human_model import (
    Condition,
    DecisionRecord,
    DecisionTreeModel,
    HumanModel,
    Rule,
    RuleSet,
    TreeNode,
    conjunction_satisfiable,
    fit_tree,
    tree_to_rules,
)
from .metrics import MetricsReport, TrialLog, build_report, pearson
from .strategy import (
    AI_REVEAL,
    FINAL_DECISION,
    PRE_DECISION,
    Presentation,
    StepEvent,
    StrategyKind,
    plan_step,
)


class SimError(Exception):
    pass


@dataclass(frozen=True)
class AgentParams:
    noise_rate: float
    revision_fidelity: float
    tree_depth: int = 3
    # probability a leaf of the true policy takes its region's majority class
    # under a label-balanced reference sample; heterogeneous alignment spreads
    # agents around the ~70% lay-person accuracy
    leaf_alignment: float = 0.85
    # candidate splits screened per node; 1 is a blind random tree, larger
    # values give the agent genuinely informative decision boundaries
    split_candidates: int = 4

    def validate(self) -> None:
        for name in ("noise_rate", "revision_fidelity", "leaf_alignment"):
            v = getattr(self, name)
            if not 0 <= v <= 1:
                raise SimError(f"{name} must be in [0, 1], got {v}")
        if self.split_candidates < 1:
            raise SimError("split_candidates must be at least 1")


@dataclass(frozen=True)
class SyntheticAgent:
    true_ruleset: RuleSet
    noise_rate: float
    revision_fidelity: float
    seed: int


def _split_purity(left: list[TaskInstance], right: list[TaskInstance]) -> float:
    def gini(members: list[TaskInstance]) -> float:
        if not members:
            return 0.5
        p = sum(1 for m in members if m.label == LABEL_POS) / len(members)
        return 2 * p * (1 - p)

    n = len(left) + len(right)
    if n == 0:
        return 0.0
    return 0.5 - (len(left) * gini(left) + len(right) * gini(right)) / n


def _random_tree(schema: FeatureSchema, rng: np.random.Generator, max_depth: int,
                 reference: Sequence[TaskInstance], leaf_alignment: float,
                 split_candidates: int = 4) -> DecisionTreeModel:
    def sample_split(members: list[TaskInstance]):
        feat = schema.features[rng.integers(len(schema.features))]
        if feat.is_numeric:
            lo, hi = feat.domain
            threshold = float(np.round(lo + (hi - lo) * (0.2 + 0.6 * rng.random()), 1))
            left = [m for m in members if m.value(feat.name) <= threshold]
            right = [m for m in members if m.value(feat.name) > threshold]
            return feat.name, {"threshold": threshold}, left, right
        category = str(rng.choice(feat.domain))
        left = [m for m in members if m.value(feat.name) == category]
        right = [m for m in members if m.value(feat.name) != category]
        return feat.name, {"category": category}, left, right

    def grow(depth: int, members: list[TaskInstance]) -> TreeNode:
        if depth >= max_depth or (depth > 0 and rng.random() < 0.25):
            return _leaf(members)
        candidates = [sample_split(members) for _ in range(split_candidates)]
        name, node_args, left, right = max(
            candidates, key=lambda c: _split_purity(c[2], c[3]))
        return TreeNode(feature=name, **node_args,
                        left=grow(depth + 1, left), right=grow(depth + 1, right))

    def _leaf(members: list[TaskInstance]) -> TreeNode:
        if members:
            pos = sum(1 for m in members if m.label == LABEL_POS)
            majority = LABEL_POS if pos * 2 > len(members) else LABEL_NEG
        else:
            majority = LABEL_POS if rng.random() < 0.5 else LABEL_NEG
        label = majority if rng.random() < leaf_alignment else \
            (LABEL_NEG if majority == LABEL_POS else LABEL_POS)
        return TreeNode(label=label, samples=len(members))

    return DecisionTreeModel(root=grow(0, list(reference)), schema=schema)


def balanced_reference(instances: Sequence[TaskInstance], per_class: int = 1000) -> list[TaskInstance]:
    """Equal-sized class subsets, so leaf majorities discriminate relative to
    the base rate instead of defaulting to the corpus majority class."""
    pos = [i for i in instances if i.label == LABEL_POS][:per_class]
    neg = [i for i in instances if i.label == LABEL_NEG][:per_class]
    return pos + neg


def make_agent(params: AgentParams, seed: int,
               reference: Sequence[TaskInstance] = (),
               schema: FeatureSchema | None = None) -> SyntheticAgent:
    """Deterministic agent whose policy is a random shallow tree converted to
    rules; leaf classes lean toward the reference sample's majority."""
    params.validate()
    if schema is None:
        from .dataset import canonical_schema
        schema = canonical_schema()
    rng = np.random.default_rng([seed, 101])
    tree = _random_tree(schema, rng, params.tree_depth, reference,
                        params.leaf_alignment, params.split_candidates)
    return SyntheticAgent(true_ruleset=tree_to_rules(tree), noise_rate=params.noise_rate,
                          revision_fidelity=params.revision_fidelity, seed=seed)


def _flip(label: str) -> str:
    return LABEL_NEG if label == LABEL_POS else LABEL_POS


def agent_policy_decision(agent: SyntheticAgent, case: TaskInstance) -> str:
    hit = agent.true_ruleset.predict(case)
    if hit is None:
        raise SimError(f"agent policy does not cover case {case.id}")
    return hit[0]


def simulate_decisions(agent: SyntheticAgent, cases: Sequence[TaskInstance],
                       stream: int = 0) -> list[DecisionRecord]:
    """The agent's unassisted decisions: its policy's prediction, flipped
    independently with noise_rate. Reproducible per (agent seed, stream)."""
    if not cases:
        raise SimError("no cases to decide")
    rng = np.random.default_rng([agent.seed, 977, stream])
    records = []
    for i, case in enumerate(cases):
        decision = agent_policy_decision(agent, case)
        if rng.random() < agent.noise_rate:
            decision = _flip(decision)
        records.append(DecisionRecord(instance=case, human_decision=decision,
                                      timestamp=float(i)))
    return records


def _rule_affinity(true_rule: Rule, induced_rule: Rule, schema: FeatureSchema) -> int:
    score = 0
    if true_rule.prediction == induced_rule.prediction:
        score += 2
    if conjunction_satisfiable((*true_rule.conditions, *induced_rule.conditions), schema):
        score += 1
    return score


def simulate_editing(agent: SyntheticAgent, induced: RuleSet,
                     schema: FeatureSchema | None = None) -> RuleSet:
    """Stand-in for the interactive revision stage: each true rule is adopted
    independently with probability revision_fidelity; adopted rules take the
    top priorities (displacing their closest induced counterpart), the rest
    of the induced set survives below them."""
    if schema is None:
        from .dataset import canonical_schema
        schema = canonical_schema()
    rng = np.random.default_rng([agent.seed, 1409])
    true_rules = agent.true_ruleset.ordered()
    adopted = [rule for rule in true_rules if rng.random() < agent.revision_fidelity]
    if not adopted:
        return induced
    remaining = induced.ordered()
    for rule in adopted:
        if not remaining:
            break
        best = max(remaining, key=lambda r: _rule_affinity(rule, r, schema))
        if _rule_affinity(rule, best, schema) > 0:
            remaining.remove(best)
    merged = [
        Rule(id=f"a{i + 1}", conditions=rule.conditions,
             prediction=rule.prediction, priority=i + 1)
        for i, rule in enumerate(adopted)
    ] + [
        Rule(id=rule.id, conditions=rule.conditions,
             prediction=rule.prediction, priority=len(adopted) + j + 1)
        for j, rule in enumerate(remaining)
    ]
    history = induced.edit_history + (
        {"action": "simulated_revision", "adopted": [r.id for r in merged[:len(adopted)]]},
    )
    return RuleSet(rules=tuple(merged), origin="edited", edit_history=history)


# ---------------------------------------------------------------------------
# the experiment
# ---------------------------------------------------------------------------

@dataclass
class ExperimentEnv:
    """Shared, replication-independent state: data, AI model, task cases."""
    split: DatasetSplit
    ai: AiModel
    batch1: list[TaskInstance]
    batch2: list[TaskInstance]
    predictions: dict[str, AiPrediction]
    cl_config: ClEngineConfig
    threshold: float
    tree_config: TreeConfig
    alpha: float
    neighbors: dict[str, list] = field(default_factory=dict)

    def prediction(self, case: TaskInstance) -> AiPrediction:
        return self.predictions[case.id]


def prepare_environment(cfg: Config, instances: Sequence[TaskInstance]) -> ExperimentEnv:
    from .dataset import split as make_split

    data_split = make_split(instances, cfg.train_fraction, cfg.split_seed)
    ai = train(data_split, cfg.ai)
    if cfg.sim.case_source == "selector":
        case_set = select_task_cases(ai, data_split, seed=cfg.sim.seed, config=cfg.cases)
        batch1 = [c.instance for c in case_set.batch1]
        batch2 = [c.instance for c in case_set.batch2]
    elif cfg.sim.case_source == "random":
        rng = np.random.default_rng([cfg.sim.seed, 5])
        picks = rng.choice(len(data_split.test), size=2 * cfg.cases.batch_size, replace=False)
        cases = [data_split.test[i] for i in picks]
        batch1 = cases[:cfg.cases.batch_size]
        batch2 = cases[cfg.cases.batch_size:]
    else:
        raise SimError(f"unknown case source {cfg.sim.case_source!r}")
    predictions = {c.id: p for c, p in
                   zip(batch1 + batch2, ai.predict_many(batch1 + batch2))}
    alpha = resolve_alpha(cfg.cl, data_split, seed=cfg.sim.seed,
                          normalize_distance=cfg.distance.normalize)
    # induction mirrors the study's default tree fit (unbounded, min leaf 1):
    # overgrown 20-record trees absorb the agent's decision noise, which is
    # exactly what the neighbor evaluation should see
    env = ExperimentEnv(split=data_split, ai=ai, batch1=batch1, batch2=batch2,
                        predictions=predictions, cl_config=cfg.cl,
                        threshold=cfg.cases.confidence_threshold,
                        tree_config=cfg.tree, alpha=alpha)
    for case in env.batch2:
        env.neighbors[case.id] = nearest_neighbors(
            case, data_split, cfg.cl.n_neighbors,
            normalize=cfg.distance.normalize)
    return env


@dataclass(frozen=True)
class SimulatedStep:
    condition: StrategyKind
    presentation: Presentation
    events: tuple[StepEvent, ...]
    log: TrialLog


def _simulated_reliance(own: str, presentation: Presentation, ai_label: str,
                        routed: str | None, rng: np.random.Generator,
                        cfg: SimConfig) -> tuple[str, str | None, tuple[StepEvent, ...]]:
    """Final decision under the condition's presentation, plus the pre
    decision (when forced) and the step's event trail. Never reads anything
    the presentation hides."""
    t = 0.0
    events = []
    pre = None
    if presentation.require_pre_decision:
        pre = own
        events.append(StepEvent(PRE_DECISION, t))
        t += 1.0
    if presentation.show_ai_recommendation:
        events.append(StepEvent(AI_REVEAL, t))
        t += 1.0
    final = own
    if presentation.show_ai_recommendation and not presentation.require_pre_decision:
        if ai_label != own and rng.random() < cfg.adopt_shown_conflict:
            final = ai_label
    else:
        gauges_favor_ai = (presentation.show_human_cl and presentation.show_ai_cl
                           and routed == AI)
        if gauges_favor_ai and presentation.show_ai_recommendation \
                and rng.random() < cfg.switch_when_favored:
            final = ai_label
    events.append(StepEvent(FINAL_DECISION, t))
    return final, pre, tuple(events)


@dataclass(frozen=True)
class AgentRunResult:
    agent_seed: int
    cl_labels: tuple[ComplementaryLabel, ...]
    conf_labels: tuple[ComplementaryLabel, ...]
    mean_estimated_cl: float
    realized_accuracy: float
    steps: tuple[SimulatedStep, ...]


def run_agent(agent: SyntheticAgent, env: ExperimentEnv, cfg: SimConfig,
              conditions: Sequence[StrategyKind] = tuple(StrategyKind)) -> AgentRunResult:
    records = simulate_decisions(agent, env.batch1, stream=1)
    induced_tree = fit_tree(records, config=env.tree_config, schema=env.split.schema)
    edited = simulate_editing(agent, tree_to_rules(induced_tree), schema=env.split.schema)
    model = HumanModel(ruleset=edited, fallback=induced_tree)

    own_records = simulate_decisions(agent, env.batch2, stream=2)
    own = {r.instance.id: r.human_decision for r in own_records}

    estimates: dict[str, CLEstimate] = {}
    cl_labels = []
    conf_labels = []
    for case in env.batch2:
        ai_pred = env.prediction(case)
        estimate = estimate_human_cl(model, case, env.split, env.cl_config,
                                     neighbors=env.neighbors.get(case.id),
                                     alpha=env.alpha)
        estimate = with_ai_cl(estimate, ai_pred.confidence, env.cl_config.tie_policy)
        estimates[case.id] = estimate
        outcome = actual_outcome(own[case.id] == case.label,
                                 ai_pred.label == case.label)
        cl_labels.append(ComplementaryLabel(case_id=case.id, actual=outcome,
                                            predicted_better=estimate.routed))
        conf_labels.append(ComplementaryLabel(
            case_id=case.id, actual=outcome,
            predicted_better=confidence_router(ai_pred.confidence, env.threshold)))

    steps = []
    for condition in conditions:
        rng = np.random.default_rng([agent.seed, 3301, _condition_stream(condition)])
        for case in env.batch2:
            ai_pred = env.prediction(case)
            estimate = estimates[case.id]
            needs_cl = condition not in (StrategyKind.HUMAN_ONLY, StrategyKind.AI_CONFIDENCE)
            presentation = plan_step(condition, estimate if needs_cl else None,
                                     None if condition == StrategyKind.HUMAN_ONLY else ai_pred)
            final, pre, events = _simulated_reliance(
                own[case.id], presentation, ai_pred.label,
                estimate.routed if needs_cl else None, rng, cfg)
            log = TrialLog(
                case_id=case.id, condition=condition, ground_truth=case.label,
                final_decision=final,
                ai_label=None if condition == StrategyKind.HUMAN_ONLY else ai_pred.label,
                ai_confidence=None if condition == StrategyKind.HUMAN_ONLY else ai_pred.confidence,
                ai_correct=None if condition == StrategyKind.HUMAN_ONLY
                else ai_pred.label == case.label,
                human_pre_decision=pre,
                cl_estimate=estimate if needs_cl else None,
            )
            steps.append(SimulatedStep(condition=condition, presentation=presentation,
                                       events=events, log=log))

    return AgentRunResult(
        agent_seed=agent.seed,
        cl_labels=tuple(cl_labels),
        conf_labels=tuple(conf_labels),
        mean_estimated_cl=float(np.mean([estimates[c.id].human_cl for c in env.batch2])),
        realized_accuracy=float(np.mean([own[c.id] == c.label for c in env.batch2])),
        steps=tuple(steps),
    )


def _condition_stream(condition: StrategyKind) -> int:
    return list(StrategyKind).index(condition)


@dataclass(frozen=True)
class ReplicationResult:
    seed: int
    cl_router_recall: float | None
    confidence_router_recall: float | None
    pearson_r: float | None
    condition_reports: dict[str, MetricsReport]

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "cl_router_recall": self.cl_router_recall,
            "confidence_router_recall": self.confidence_router_recall,
            "pearson_r": self.pearson_r,
            "conditions": {name: report.to_dict()
                           for name, report in self.condition_reports.items()},
        }


@dataclass(frozen=True)
class ExperimentResult:
    replications: tuple[ReplicationResult, ...]
    mean_cl_recall: float | None
    mean_confidence_recall: float | None
    mean_pearson: float | None
    cl_wins: int            # replications where the CL router strictly beat the baseline

    def to_dict(self) -> dict:
        return {
            "replications": [r.to_dict() for r in self.replications],
            "mean_cl_recall": self.mean_cl_recall,
            "mean_confidence_recall": self.mean_confidence_recall,
            "mean_pearson": self.mean_pearson,
            "cl_wins": self.cl_wins,
        }

    def summary_text(self) -> str:
        def fmt(v):
            return "undefined" if v is None else f"{v:.4f}"
        n = len(self.replications)
        return "\n".join([
            f"replications:                {n}",
            f"mean CL-router recall:       {fmt(self.mean_cl_recall)}",
            f"mean confidence recall:      {fmt(self.mean_confidence_recall)}",
            f"CL router wins:              {self.cl_wins}/{n}",
            f"mean pearson r (CL vs acc):  {fmt(self.mean_pearson)}",
        ])


def _mean_or_none(values: list[float | None]) -> float | None:
    present = [v for v in values if v is not None]
    return float(np.mean(present)) if present else None


def run_replication(env: ExperimentEnv, cfg: SimConfig, seed: int) -> ReplicationResult:
    rng = np.random.default_rng([seed, 11])
    reference = balanced_reference(env.split.train)
    agent_results = []
    for _ in range(cfg.agents):
        # a single latent skill drives pocket discovery, leaf quality and
        # policy granularity, so the cohort spans clueless to sharp
        skill = float(rng.random())
        params = AgentParams(
            noise_rate=float(rng.uniform(cfg.noise_low, cfg.noise_high)),
            revision_fidelity=float(rng.uniform(cfg.fidelity_low, cfg.fidelity_high)),
            tree_depth=1 + round((cfg.agent_tree_depth - 1) * skill),
            leaf_alignment=cfg.alignment_low + (cfg.alignment_high - cfg.alignment_low) * skill,
            split_candidates=1 + round(7 * skill),
        )
        agent = make_agent(params, seed=int(rng.integers(2 ** 31)),
                           reference=reference, schema=env.split.schema)
        agent_results.append(run_agent(agent, env, cfg))

    cl_recalls = [complementary_recall(r.cl_labels) for r in agent_results]
    conf_recalls = [complementary_recall(r.conf_labels) for r in agent_results]
    r_value = pearson([r.mean_estimated_cl for r in agent_results],
                      [r.realized_accuracy for r in agent_results]) \
        if len(agent_results) >= 3 else None

    reports = {}
    for condition in StrategyKind:
        logs = [step.log for result in agent_results for step in result.steps
                if step.condition == condition]
        labels = [l for result in agent_results
                  for l in (result.cl_labels if condition in
                            (StrategyKind.DIRECT_DISPLAY, StrategyKind.ADAPTIVE_WORKFLOW,
                             StrategyKind.ADAPTIVE_RECOMMENDATION) else ())]
        reports[condition.value] = build_report(logs, threshold=env.threshold, labels=labels)

    return ReplicationResult(
        seed=seed,
        cl_router_recall=_mean_or_none(cl_recalls),
        confidence_router_recall=_mean_or_none(conf_recalls),
        pearson_r=r_value,
        condition_reports=reports,
    )


def run_experiment(cfg: SimConfig, env: ExperimentEnv) -> ExperimentResult:
    if cfg.replications < 1:
        raise SimError("need at least one replication")
    results = [run_replication(env, cfg, seed=cfg.seed + i)
               for i in range(cfg.replications)]
    wins = sum(
        1 for r in results
        if r.cl_router_recall is not None and r.confidence_router_recall is not None
        and r.cl_router_recall > r.confidence_router_recall
    )
    return ExperimentResult(
        replications=tuple(results),
        mean_cl_recall=_mean_or_none([r.cl_router_recall for r in results]),
        mean_confidence_recall=_mean_or_none([r.confidence_router_recall for r in results]),
        mean_pearson=_mean_or_none([r.pearson_r for r in results]),
        cl_wins=wins,
    )
