"""Input validation for the estimator API.

Estimators consume *cell vectors*: one row per ACM cell holding the subject's
attribute values followed by the object's, with ``y`` the 0/1 decision.
"""

from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array, column_or_1d

from .model import AttributeRef, AttributeValue, Kind, Rule, Scenario

__all__ = ["cells_from_scenario", "check_cells", "check_decisions", "rule_from_key", "rule_to_key"]


def cells_from_scenario(scenario: Scenario):
    """Row-major ``(X, y)`` for every subject-object pair of ``scenario``."""
    S = np.asarray(scenario.subjects, dtype=np.int64).reshape(len(scenario.subjects), -1)
    O = np.asarray(scenario.objects, dtype=np.int64).reshape(len(scenario.objects), -1)
    n, m = S.shape[0], O.shape[0]
    X = np.hstack([np.repeat(S, m, axis=0), np.tile(O, (n, 1))])
    y = scenario.acm.cells.reshape(-1).astype(np.int64)
    return X, y


def check_cells(X, n_subject_attrs):
    X = check_array(X, dtype=np.int64, ensure_min_samples=1)
    if n_subject_attrs is None:
        raise ValueError("n_subject_attrs must be set to split cell vectors into subject and object parts")
    if not 0 <= n_subject_attrs <= X.shape[1]:
        raise ValueError(f"n_subject_attrs={n_subject_attrs} does not fit {X.shape[1]} columns")
    if (X < 1).any():
        raise ValueError("attribute values are 1-based; found values < 1")
    return X


def check_decisions(y, n_samples):
    y = column_or_1d(y, warn=True).astype(np.int64)
    if y.shape[0] != n_samples:
        raise ValueError(f"X has {n_samples} rows but y has {y.shape[0]}")
    if not np.isin(y, (0, 1)).all():
        raise ValueError("decisions must be 0 or 1")
    return y


def position_ref(pos: int, n_subject_attrs: int) -> AttributeRef:
    if pos < n_subject_attrs:
        return AttributeRef(Kind.SUBJECT, pos + 1)
    return AttributeRef(Kind.OBJECT, pos - n_subject_attrs + 1)


def rule_from_key(key, n_subject_attrs: int, decision="permit") -> Rule:
    """Build a ``Rule`` from ``((position, value), ...)`` over cell-vector columns."""
    return Rule([AttributeValue(position_ref(p, n_subject_attrs), v) for p, v in key], decision)


def rule_to_key(rule: Rule, n_subject_attrs: int):
    key = []
    for c in rule.conditions:
        off = 0 if c.attr.kind is Kind.SUBJECT else n_subject_attrs
        key.append((off + c.attr.index - 1, c.value))
    return tuple(sorted(key))
