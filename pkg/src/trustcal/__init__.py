"""Instance-level human/AI correctness-likelihood estimation and adaptive
trust-calibration workflows for AI-assisted decision-making."""

from .config import Config, load_config
from .dataset import (
    DatasetSplit,
    FeatureSchema,
    TaskInstance,
    canonical_schema,
    encode,
    load_dataset,
    median_pairwise_distance,
    nearest_neighbors,
    permutation_importance,
    split,
)
from .ai_model import (
    AiModel,
    AiPrediction,
    CalibrationReport,
    Explanation,
    TaskCaseSet,
    calibration_report,
    select_task_cases,
    train,
)
from .human_model import (
    Condition,
    ConflictReport,
    DecisionRecord,
    DecisionTreeModel,
    HumanModel,
    Rule,
    RuleSet,
    apply_edit,
    check_rule,
    fit_tree,
    induce_model,
    predict_human,
    tree_to_rules,
)
from .cl_engine import (
    CLEstimate,
    ComplementaryLabel,
    compare,
    complementary_recall,
    confidence_router,
    estimate_human_cl,
    with_ai_cl,
)
from .strategy import Presentation, StrategyKind, plan_step, validate_transcript
from .metrics import MetricsReport, TrialLog, build_report
from .sim import ExperimentResult, SyntheticAgent, make_agent, run_experiment

__version__ = "0.1.0"
