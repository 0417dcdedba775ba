"""Approximation of an individual's decision-making model.

A small decision tree is fitted to the person's recorded decisions, converted
into an editable priority-ordered if-then rule set, and kept alongside the
tree: rules are evaluated first-match, and instances no rule covers fall back
to the initialized tree so the model stays total over the feature domain.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .config import TreeConfig
from .dataset import LABEL_NEG, LABEL_POS, Feature, FeatureSchema, TaskInstance

RULESET_FORMAT_VERSION = 1


class HumanModelError(Exception):
    pass


@dataclass(frozen=True)
class DecisionRecord:
    instance: TaskInstance
    human_decision: str
    timestamp: float = 0.0

    def to_dict(self) -> dict:
        return {"instance": self.instance.to_dict(),
                "human_decision": self.human_decision,
                "timestamp": self.timestamp}

    @staticmethod
    def from_dict(data: dict) -> "DecisionRecord":
        return DecisionRecord(instance=TaskInstance.from_dict(data["instance"]),
                              human_decision=data["human_decision"],
                              timestamp=data.get("timestamp", 0.0))


# ---------------------------------------------------------------------------
# decision tree
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class TreeNode:
    """Internal node (feature + test, two children) or leaf (label + counts).

    Numeric test: left iff value <= threshold. Categorical test is
    one-vs-rest: left iff value == category.
    """
    feature: Optional[str] = None
    threshold: Optional[float] = None
    category: Optional[str] = None
    left: Optional["TreeNode"] = None
    right: Optional["TreeNode"] = None
    label: Optional[str] = None
    samples: int = 0

    @property
    def is_leaf(self) -> bool:
        return self.label is not None

    def goes_left(self, instance: TaskInstance) -> bool:
        value = instance.value(self.feature)
        if self.threshold is not None:
            return value <= self.threshold
        return value == self.category


@dataclass(frozen=True)
class DecisionTreeModel:
    root: TreeNode
    schema: FeatureSchema

    def predict(self, instance: TaskInstance) -> str:
        node = self.root
        while not node.is_leaf:
            node = node.left if node.goes_left(instance) else node.right
        return node.label

    def leaves(self) -> list[TreeNode]:
        out = []
        stack = [self.root]
        while stack:
            node = stack.pop()
            if node.is_leaf:
                out.append(node)
            else:
                stack.extend([node.right, node.left])
        return out

    def depth(self) -> int:
        def rec(node: TreeNode) -> int:
            if node.is_leaf:
                return 0
            return 1 + max(rec(node.left), rec(node.right))
        return rec(self.root)


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - (p ** 2).sum())


def _majority(labels: list[str]) -> str:
    pos = sum(1 for l in labels if l == LABEL_POS)
    neg = len(labels) - pos
    # exact tie resolved toward the negative class, for determinism
    return LABEL_POS if pos > neg else LABEL_NEG


class DecisionTreeEstimator(BaseEstimator, ClassifierMixin):
    """CART-style greedy Gini tree over TaskInstances.

    Numeric thresholds are midpoints between consecutive distinct values;
    categorical splits are one-vs-rest on a single category. Ties in Gini
    gain break by schema feature order, then by smaller threshold /
    earlier category, so refits are bit-identical.
    """

    def __init__(self, max_depth: int | None = None, min_leaf: int = 1, seed: int = 0):
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.seed = seed

    def fit(self, X: Sequence[TaskInstance], y: Sequence[str], schema: FeatureSchema | None = None):
        if len(X) == 0:
            raise HumanModelError("no records to fit")
        if schema is None:
            from .dataset import canonical_schema
            schema = canonical_schema()
        self.schema_ = schema
        self.tree_ = DecisionTreeModel(root=self._grow(list(X), list(y), 0), schema=schema)
        return self

    def predict(self, X: Sequence[TaskInstance]) -> list[str]:
        return [self.tree_.predict(inst) for inst in X]

    def _best_split(self, X: list[TaskInstance], y: list[str]):
        n = len(X)
        counts = np.array([sum(1 for l in y if l == LABEL_NEG),
                           sum(1 for l in y if l == LABEL_POS)], dtype=float)
        parent = _gini(counts)
        best = None   # (gain, feature_index, threshold, category)
        for f_idx, feat in enumerate(self.schema_.features):
            column = [inst.value(feat.name) for inst in X]
            if feat.is_numeric:
                distinct = sorted(set(column))
                for lo, hi in zip(distinct, distinct[1:]):
                    threshold = (lo + hi) / 2.0
                    mask = [v <= threshold for v in column]
                    gain = self._gain(parent, y, mask, n)
                    if gain is not None and (best is None or gain > best[0] + 1e-12):
                        best = (gain, f_idx, threshold, None)
            else:
                present = set(column)
                for category in feat.domain:
                    if category not in present:
                        continue
                    mask = [v == category for v in column]
                    gain = self._gain(parent, y, mask, n)
                    if gain is not None and (best is None or gain > best[0] + 1e-12):
                        best = (gain, f_idx, None, category)
        return best

    def _gain(self, parent: float, y: list[str], mask: list[bool], n: int) -> float | None:
        nl = sum(mask)
        nr = n - nl
        if nl < self.min_leaf or nr < self.min_leaf:
            return None
        left = np.array([sum(1 for m, l in zip(mask, y) if m and l == LABEL_NEG),
                         sum(1 for m, l in zip(mask, y) if m and l == LABEL_POS)], dtype=float)
        right = np.array([sum(1 for m, l in zip(mask, y) if not m and l == LABEL_NEG),
                          sum(1 for m, l in zip(mask, y) if not m and l == LABEL_POS)], dtype=float)
        gain = parent - (nl / n) * _gini(left) - (nr / n) * _gini(right)
        return gain if gain > 1e-12 else None

    def _grow(self, X: list[TaskInstance], y: list[str], depth: int) -> TreeNode:
        if len(set(y)) == 1 or (self.max_depth is not None and depth >= self.max_depth) \
                or len(X) < 2 * self.min_leaf:
            return TreeNode(label=_majority(y), samples=len(X))
        best = self._best_split(X, y)
        if best is None:
            return TreeNode(label=_majority(y), samples=len(X))
        _, f_idx, threshold, category = best
        feat = self.schema_.features[f_idx]
        if threshold is not None:
            mask = [inst.value(feat.name) <= threshold for inst in X]
        else:
            mask = [inst.value(feat.name) == category for inst in X]
        left_X = [inst for inst, m in zip(X, mask) if m]
        left_y = [l for l, m in zip(y, mask) if m]
        right_X = [inst for inst, m in zip(X, mask) if not m]
        right_y = [l for l, m in zip(y, mask) if not m]
        return TreeNode(feature=feat.name, threshold=threshold, category=category,
                        left=self._grow(left_X, left_y, depth + 1),
                        right=self._grow(right_X, right_y, depth + 1),
                        samples=len(X))


def fit_tree(records: Sequence[DecisionRecord], config: TreeConfig = TreeConfig(),
             schema: FeatureSchema | None = None) -> DecisionTreeModel:
    if len(records) < 2:
        raise HumanModelError("need at least 2 decision records")
    estimator = DecisionTreeEstimator(max_depth=config.max_depth,
                                      min_leaf=config.min_leaf, seed=config.seed)
    estimator.fit([r.instance for r in records],
                  [r.human_decision for r in records], schema=schema)
    return estimator.tree_


# ---------------------------------------------------------------------------
# rules
# ---------------------------------------------------------------------------

NUMERIC_OPS = ("<", "<=", ">", ">=")
CATEGORICAL_OPS = ("=", "in")


@dataclass(frozen=True)
class Condition:
    feature: str
    op: str
    value: object     # number, category, or tuple of categories

    def matches(self, instance: TaskInstance) -> bool:
        v = instance.value(self.feature)
        if self.op == "<":
            return v < self.value
        if self.op == "<=":
            return v <= self.value
        if self.op == ">":
            return v > self.value
        if self.op == ">=":
            return v >= self.value
        if self.op == "=":
            return v == self.value
        if self.op == "in":
            return v in self.value
        raise HumanModelError(f"unknown operator {self.op!r}")

    def to_dict(self) -> dict:
        value = list(self.value) if isinstance(self.value, tuple) else self.value
        return {"feature": self.feature, "op": self.op, "value": value}

    @staticmethod
    def from_dict(data: dict) -> "Condition":
        value = data["value"]
        if isinstance(value, list):
            value = tuple(value)
        return Condition(feature=data["feature"], op=data["op"], value=value)


@dataclass(frozen=True)
class Rule:
    id: str
    conditions: tuple[Condition, ...]
    prediction: str
    priority: int

    def matches(self, instance: TaskInstance) -> bool:
        return all(c.matches(instance) for c in self.conditions)

    def to_dict(self) -> dict:
        return {"id": self.id, "priority": self.priority,
                "conditions": [c.to_dict() for c in self.conditions],
                "prediction": self.prediction}

    @staticmethod
    def from_dict(data: dict) -> "Rule":
        return Rule(id=data["id"], priority=data["priority"],
                    conditions=tuple(Condition.from_dict(c) for c in data["conditions"]),
                    prediction=data["prediction"])


def validate_condition(condition: Condition, schema: FeatureSchema) -> None:
    feat = schema.feature(condition.feature)
    if feat.is_numeric:
        if condition.op not in NUMERIC_OPS:
            raise HumanModelError(
                f"operator {condition.op!r} is not valid for numeric feature {feat.name!r}")
        if not isinstance(condition.value, (int, float)) or isinstance(condition.value, bool):
            raise HumanModelError(f"numeric condition on {feat.name!r} needs a number")
    else:
        if condition.op not in CATEGORICAL_OPS:
            raise HumanModelError(
                f"operator {condition.op!r} is not valid for categorical feature {feat.name!r}")
        values = condition.value if condition.op == "in" else (condition.value,)
        if condition.op == "in" and not isinstance(condition.value, tuple):
            raise HumanModelError(f"'in' condition on {feat.name!r} needs a category set")
        for v in values:
            if v not in feat.domain:
                raise HumanModelError(f"{v!r} is not a known {feat.name!r} category")


def _interval(conditions: Sequence[Condition], feat: Feature) -> tuple[float, float, bool, bool]:
    """Intersection of the numeric conditions with the feature domain, as
    (lo, hi, lo_open, hi_open)."""
    lo, hi = float(feat.domain[0]), float(feat.domain[1])
    lo_open = hi_open = False
    for c in conditions:
        v = float(c.value)
        if c.op in ("<", "<="):
            strict = c.op == "<"
            if v < hi or (v == hi and strict and not hi_open):
                hi, hi_open = v, strict
        else:
            strict = c.op == ">"
            if v > lo or (v == lo and strict and not lo_open):
                lo, lo_open = v, strict
    return lo, hi, lo_open, hi_open


def _category_set(conditions: Sequence[Condition], feat: Feature) -> set:
    allowed = set(feat.domain)
    for c in conditions:
        allowed &= {c.value} if c.op == "=" else set(c.value)
    return allowed


def conjunction_satisfiable(conditions: Sequence[Condition], schema: FeatureSchema) -> bool:
    """Whether some in-domain instance satisfies all conditions (interval
    intersection per numeric feature, set intersection per categorical)."""
    by_feature: dict[str, list[Condition]] = {}
    for c in conditions:
        by_feature.setdefault(c.feature, []).append(c)
    for name, conds in by_feature.items():
        feat = schema.feature(name)
        if feat.is_numeric:
            lo, hi, lo_open, hi_open = _interval(conds, feat)
            if lo > hi or (lo == hi and (lo_open or hi_open)):
                return False
        else:
            if not _category_set(conds, feat):
                return False
    return True


@dataclass(frozen=True)
class RuleSet:
    rules: tuple[Rule, ...]
    origin: str = "initialized"            # "initialized" | "edited"
    edit_history: tuple[dict, ...] = field(default=())

    def __post_init__(self):
        priorities = [r.priority for r in self.rules]
        if len(set(priorities)) != len(priorities):
            raise HumanModelError("rule priorities must be unique")

    def ordered(self) -> list[Rule]:
        return sorted(self.rules, key=lambda r: r.priority)

    def rule(self, rule_id: str) -> Rule:
        for r in self.rules:
            if r.id == rule_id:
                return r
        raise HumanModelError(f"unknown rule id {rule_id!r}")

    def predict(self, instance: TaskInstance) -> tuple[str, str] | None:
        """First matching rule by priority; None when nothing matches."""
        for rule in self.ordered():
            if rule.matches(instance):
                return rule.prediction, rule.id
        return None

    def to_json(self) -> dict:
        return {
            "format_version": RULESET_FORMAT_VERSION,
            "origin": self.origin,
            "rules": [r.to_dict() for r in self.ordered()],
            "edit_history": list(self.edit_history),
        }

    @staticmethod
    def from_json(data: dict) -> "RuleSet":
        return RuleSet(rules=tuple(Rule.from_dict(r) for r in data["rules"]),
                       origin=data.get("origin", "initialized"),
                       edit_history=tuple(data.get("edit_history", ())))


def tree_to_rules(tree: DecisionTreeModel) -> RuleSet:
    """One rule per leaf: the root-to-leaf path as a conjunction, with
    redundant bounds on the same feature merged."""
    schema = tree.schema
    rules: list[Rule] = []

    def render(path: list[tuple[str, bool, TreeNode]]) -> tuple[Condition, ...]:
        by_feature: dict[str, list] = {}
        order: list[str] = []
        for name, went_left, node in path:
            if name not in by_feature:
                by_feature[name] = []
                order.append(name)
            by_feature[name].append((went_left, node))
        conditions: list[Condition] = []
        for name in order:
            feat = schema.feature(name)
            steps = by_feature[name]
            if feat.is_numeric:
                lo = hi = None
                for went_left, node in steps:
                    if went_left:     # value <= threshold
                        hi = node.threshold if hi is None else min(hi, node.threshold)
                    else:             # value > threshold
                        lo = node.threshold if lo is None else max(lo, node.threshold)
                if lo is not None:
                    conditions.append(Condition(name, ">", lo))
                if hi is not None:
                    conditions.append(Condition(name, "<=", hi))
            else:
                allowed = set(feat.domain)
                for went_left, node in steps:
                    allowed = allowed & {node.category} if went_left else allowed - {node.category}
                ordered = tuple(c for c in feat.domain if c in allowed)
                if len(ordered) == 1:
                    conditions.append(Condition(name, "=", ordered[0]))
                else:
                    conditions.append(Condition(name, "in", ordered))
        return tuple(conditions)

    def walk(node: TreeNode, path: list):
        if node.is_leaf:
            conditions = render(path)
            if not conditions:
                # single-leaf tree: a vacuous full-domain bound keeps the rule shape
                first = schema.features[0]
                if first.is_numeric:
                    conditions = (Condition(first.name, ">=", float(first.domain[0])),)
                else:
                    conditions = (Condition(first.name, "in", tuple(first.domain)),)
            rules.append(Rule(id=f"r{len(rules) + 1}", conditions=conditions,
                              prediction=node.label, priority=len(rules) + 1))
            return
        walk(node.left, path + [(node.feature, True, node)])
        walk(node.right, path + [(node.feature, False, node)])

    walk(tree.root, [])
    return RuleSet(rules=tuple(rules), origin="initialized")


# ---------------------------------------------------------------------------
# edits
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AddRule:
    rule: Rule
    position: int | None = None       # index in priority order; None appends


@dataclass(frozen=True)
class DeleteRule:
    rule_id: str


@dataclass(frozen=True)
class ModifyRule:
    rule_id: str
    conditions: tuple[Condition, ...] | None = None
    prediction: str | None = None


@dataclass(frozen=True)
class ReorderRules:
    order: tuple[str, ...]            # rule ids, highest priority first


Edit = AddRule | DeleteRule | ModifyRule | ReorderRules


def _validate_rule(rule: Rule, schema: FeatureSchema) -> None:
    if not rule.conditions:
        raise HumanModelError("a rule needs at least one condition")
    if rule.prediction not in (LABEL_POS, LABEL_NEG):
        raise HumanModelError(f"unknown prediction {rule.prediction!r}")
    for condition in rule.conditions:
        validate_condition(condition, schema)
    if not conjunction_satisfiable(rule.conditions, schema):
        raise HumanModelError(
            f"rule {rule.id!r} can never match: its conditions contradict each other")


def _renumber(rules: list[Rule]) -> tuple[Rule, ...]:
    return tuple(replace(r, priority=i + 1) for i, r in enumerate(rules))


def edit_to_dict(edit: Edit) -> dict:
    if isinstance(edit, AddRule):
        return {"action": "add", "rule": edit.rule.to_dict(), "position": edit.position}
    if isinstance(edit, DeleteRule):
        return {"action": "delete", "rule_id": edit.rule_id}
    if isinstance(edit, ModifyRule):
        return {"action": "modify", "rule_id": edit.rule_id,
                "conditions": [c.to_dict() for c in edit.conditions] if edit.conditions else None,
                "prediction": edit.prediction}
    return {"action": "reorder", "order": list(edit.order)}


def edit_from_dict(data: dict) -> Edit:
    action = data.get("action")
    if action == "add":
        return AddRule(rule=Rule.from_dict(data["rule"]), position=data.get("position"))
    if action == "delete":
        return DeleteRule(rule_id=data["rule_id"])
    if action == "modify":
        conditions = data.get("conditions")
        return ModifyRule(rule_id=data["rule_id"],
                          conditions=tuple(Condition.from_dict(c) for c in conditions)
                          if conditions else None,
                          prediction=data.get("prediction"))
    if action == "reorder":
        return ReorderRules(order=tuple(data["order"]))
    raise HumanModelError(f"unknown edit action {action!r}")


def apply_edit(ruleset: RuleSet, edit: Edit, schema: FeatureSchema) -> RuleSet:
    """Returns a new RuleSet with the edit applied and recorded; the input is
    never mutated."""
    rules = ruleset.ordered()
    if isinstance(edit, AddRule):
        if any(r.id == edit.rule.id for r in rules):
            raise HumanModelError(f"rule id {edit.rule.id!r} already exists")
        _validate_rule(edit.rule, schema)
        position = len(rules) if edit.position is None else max(0, min(edit.position, len(rules)))
        rules.insert(position, edit.rule)
    elif isinstance(edit, DeleteRule):
        target = ruleset.rule(edit.rule_id)
        rules.remove(target)
    elif isinstance(edit, ModifyRule):
        target = ruleset.rule(edit.rule_id)
        updated = replace(
            target,
            conditions=edit.conditions if edit.conditions is not None else target.conditions,
            prediction=edit.prediction if edit.prediction is not None else target.prediction,
        )
        _validate_rule(updated, schema)
        rules[rules.index(target)] = updated
    elif isinstance(edit, ReorderRules):
        if sorted(edit.order) != sorted(r.id for r in rules):
            raise HumanModelError("reorder must list every rule id exactly once")
        by_id = {r.id: r for r in rules}
        rules = [by_id[rid] for rid in edit.order]
    else:
        raise HumanModelError(f"unknown edit {edit!r}")
    return RuleSet(rules=_renumber(rules), origin="edited",
                   edit_history=ruleset.edit_history + (edit_to_dict(edit),))


@dataclass(frozen=True)
class ConflictReport:
    history_conflicts: tuple[str, ...]     # instance ids of contradicted decisions
    rule_conflicts: tuple[str, ...]        # ids of overlapping rules with a different prediction

    @property
    def clean(self) -> bool:
        return not self.history_conflicts and not self.rule_conflicts

    def to_dict(self) -> dict:
        return {"history_conflicts": list(self.history_conflicts),
                "rule_conflicts": list(self.rule_conflicts)}


def check_rule(rule: Rule, records: Sequence[DecisionRecord], ruleset: RuleSet,
               schema: FeatureSchema) -> ConflictReport:
    for condition in rule.conditions:
        validate_condition(condition, schema)
    history = tuple(
        r.instance.id for r in records
        if rule.matches(r.instance) and r.human_decision != rule.prediction
    )
    overlapping = tuple(
        other.id for other in ruleset.ordered()
        if other.id != rule.id and other.prediction != rule.prediction
        and conjunction_satisfiable((*rule.conditions, *other.conditions), schema)
    )
    return ConflictReport(history_conflicts=history, rule_conflicts=overlapping)


# ---------------------------------------------------------------------------
# the combined model
# ---------------------------------------------------------------------------

FALLBACK = "fallback"


@dataclass(frozen=True)
class HumanModel:
    ruleset: RuleSet
    fallback: DecisionTreeModel

    def predict(self, instance: TaskInstance) -> tuple[str, str]:
        """Predicted class plus provenance (matching rule id or 'fallback')."""
        hit = self.ruleset.predict(instance)
        if hit is not None:
            return hit
        return self.fallback.predict(instance), FALLBACK

    def predict_label(self, instance: TaskInstance) -> str:
        return self.predict(instance)[0]


def predict_human(model: HumanModel, instance: TaskInstance) -> tuple[str, str]:
    return model.predict(instance)


def induce_model(records: Sequence[DecisionRecord], config: TreeConfig = TreeConfig(),
                 schema: FeatureSchema | None = None) -> HumanModel:
    """Fit the tree, convert it to rules, keep the tree as fallback."""
    tree = fit_tree(records, config=config, schema=schema)
    return HumanModel(ruleset=tree_to_rules(tree), fallback=tree)


def ruleset_to_json_text(ruleset: RuleSet) -> str:
    return json.dumps(ruleset.to_json(), indent=2)
