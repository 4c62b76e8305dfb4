"""minebench: benchmark toolkit for ABAC policy mining."""

from .engine import Semantics, decide, reconstruct_acm
from .generator import GenerationParams, density, generate_scenario
from .metrics import ConfusionCounts, MetricsReport, confusion, grade, score
from .miners import (
    ExactMinimalMiner,
    GeneralizeValidateMiner,
    PolicyClassifier,
    exact_minimal_policy,
    mine_generalize_validate,
)
from .model import (
    AccessMatrix,
    AttributeRef,
    AttributeValue,
    Decision,
    Kind,
    PolicySet,
    Rule,
    Scenario,
    normalize_rule,
    rule_matches,
)
from .serialization import emit_rule_line, parse_rule_lines

__version__ = "0.1.0"

__all__ = [
    "AccessMatrix",
    "AttributeRef",
    "AttributeValue",
    "ConfusionCounts",
    "Decision",
    "ExactMinimalMiner",
    "GeneralizeValidateMiner",
    "GenerationParams",
    "Kind",
    "MetricsReport",
    "PolicyClassifier",
    "PolicySet",
    "Rule",
    "Scenario",
    "Semantics",
    "confusion",
    "decide",
    "density",
    "emit_rule_line",
    "exact_minimal_policy",
    "generate_scenario",
    "grade",
    "mine_generalize_validate",
    "normalize_rule",
    "parse_rule_lines",
    "reconstruct_acm",
    "rule_matches",
    "score",
]
