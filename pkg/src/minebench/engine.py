"""Policy decision point: per-request decisions and whole-matrix reconstruction."""

from __future__ import annotations

from enum import Enum
from typing import Sequence

import numpy as np

from .errors import AttributeOutOfRange, DenyRuleUnderPermitOnly
from .model import AccessMatrix, Decision, Kind, PolicySet, Rule, rule_matches

__all__ = ["Semantics", "decide", "reconstruct_acm"]


class Semantics(str, Enum):
    PERMIT_ONLY = "permit-only"
    DENY_OVERRIDES = "deny-overrides"


def _check_semantics(policy: PolicySet, sem: Semantics):
    sem = Semantics(sem)
    if sem is Semantics.PERMIT_ONLY:
        for i, r in enumerate(policy):
            if not r.is_permit:
                raise DenyRuleUnderPermitOnly(f"rule {i} is a deny rule under permit-only semantics")
    return sem


def decide(policy: PolicySet, s: Sequence[int], o: Sequence[int], sem=Semantics.PERMIT_ONLY) -> Decision:
    sem = _check_semantics(policy, sem)
    permitted = False
    for rule in policy:
        if rule_matches(rule, s, o):
            if not rule.is_permit:
                return Decision.DENY
            permitted = True
    return Decision.PERMIT if permitted else Decision.DENY


def _side_mask(rule: Rule, table: np.ndarray, kind: Kind) -> np.ndarray:
    mask = np.ones(table.shape[0], dtype=bool)
    for c in rule.conditions:
        if c.attr.kind is not kind:
            continue
        if c.attr.index > table.shape[1]:
            raise AttributeOutOfRange(
                f"{c.attr.name} referenced but profiles have {table.shape[1]} attributes"
            )
        mask &= table[:, c.attr.index - 1] == c.value
    return mask


def _table(profiles) -> np.ndarray:
    arr = np.asarray(profiles, dtype=np.int64)
    if arr.ndim == 1:
        arr = arr.reshape(len(profiles), -1)
    return arr


def match_matrix(rule: Rule, subjects, objects) -> np.ndarray:
    """Boolean |subjects| x |objects| matrix of cells matched by ``rule``.

    A conjunctive rule factors into a subject-side and an object-side test,
    so the cell mask is their outer product.
    """
    S, O = _table(subjects), _table(objects)
    return np.outer(_side_mask(rule, S, Kind.SUBJECT), _side_mask(rule, O, Kind.OBJECT))


def reconstruct_acm(policy: PolicySet, subjects, objects, sem=Semantics.PERMIT_ONLY) -> AccessMatrix:
    """Cell (i, j) is 1 iff ``decide(policy, subjects[i], objects[j], sem)`` is Permit."""
    sem = _check_semantics(policy, sem)
    S, O = _table(subjects), _table(objects)
    permit = np.zeros((S.shape[0], O.shape[0]), dtype=bool)
    deny = np.zeros_like(permit)
    for rule in policy:
        m = match_matrix(rule, S, O)
        if rule.is_permit:
            permit |= m
        else:
            deny |= m
    return AccessMatrix((permit & ~deny).astype(np.uint8))
