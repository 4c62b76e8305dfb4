"""Deterministic policy miners with a scikit-learn estimator interface.

``GeneralizeValidateMiner``
    Per permit cell, start from the fully specific rule and greedily drop
    conditions while the rule still matches no deny cell; then pick among
    the generalized candidates with greedy set cover.
``ExactMinimalMiner``
    Exhaustive minimum-size policy search for tiny instances, used as an
    oracle for the greedy miner and for the ground-truth upper bound.
``PolicyClassifier``
    Wraps a given policy (e.g. parsed LLM output) so it can be scored like
    any other classifier.

All three take cell vectors (see :mod:`minebench.validation`) and expose the
mined policy as ``rules_``.
"""

from __future__ import annotations

from itertools import combinations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .engine import Semantics, _check_semantics
from .errors import AttributeOutOfRange, BudgetExceeded, InconsistentMatrix, NoPermits, ScaleExceeded
from .model import Kind, PolicySet, normalize_rule
from .serialization import emit_rule_line
from .validation import cells_from_scenario, check_cells, check_decisions, rule_from_key, rule_to_key

__all__ = [
    "GeneralizeValidateMiner",
    "ExactMinimalMiner",
    "PolicyClassifier",
    "mine_generalize_validate",
    "exact_minimal_policy",
    "ORACLE_MAX_ATTRS",
    "ORACLE_MAX_CELLS",
    "ORACLE_MAX_BUDGET",
]

ORACLE_MAX_ATTRS = 6
ORACLE_MAX_CELLS = 64
ORACLE_MAX_BUDGET = 4


class _CellPolicyMixin:
    """Shared prediction over cell vectors from a fitted ``rules_``."""

    _semantics = Semantics.PERMIT_ONLY

    def _validate_fit(self, X, y):
        X = check_cells(X, self.n_subject_attrs)
        y = check_decisions(y, X.shape[0])
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        return X, y

    def fit_scenario(self, scenario):
        """Fit on every cell of ``scenario``; sets ``n_subject_attrs`` from it."""
        self.set_params(n_subject_attrs=scenario.n_subject_attrs)
        X, y = cells_from_scenario(scenario)
        return self.fit(X, y)

    def _match(self, rule, X):
        n_sa = self.n_subject_attrs
        n_oa = X.shape[1] - n_sa
        mask = np.ones(X.shape[0], dtype=bool)
        for c in rule.conditions:
            limit = n_sa if c.attr.kind is Kind.SUBJECT else n_oa
            if c.attr.index > limit:
                raise AttributeOutOfRange(f"{c.attr.name} referenced but only {limit} such attributes exist")
        for pos, value in rule_to_key(rule, n_sa):
            mask &= X[:, pos] == value
        return mask

    def decision_function(self, X):
        """1.0 where the policy permits, 0.0 where it denies."""
        check_is_fitted(self, "rules_")
        X = check_cells(X, self.n_subject_attrs)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        sem = _check_semantics(self.rules_, self._semantics)
        permit = np.zeros(X.shape[0], dtype=bool)
        deny = np.zeros(X.shape[0], dtype=bool)
        for rule in self.rules_:
            if rule.is_permit:
                permit |= self._match(rule, X)
            elif sem is Semantics.DENY_OVERRIDES:
                deny |= self._match(rule, X)
        return (permit & ~deny).astype(float)

    def predict(self, X):
        return self.decision_function(X).astype(np.int64)


def _matches_any(rows: np.ndarray, vec: np.ndarray, positions) -> bool:
    if rows.shape[0] == 0:
        return False
    if not positions:
        return True
    pos = list(positions)
    return bool(np.all(rows[:, pos] == vec[pos], axis=1).any())


def _emission_key(key, n_sa):
    return emit_rule_line(rule_from_key(key, n_sa))


class GeneralizeValidateMiner(_CellPolicyMixin, ClassifierMixin, BaseEstimator):
    """Greedy generalize-and-validate permit-rule miner.

    Parameters
    ----------
    n_subject_attrs : int
        Number of leading columns of ``X`` that hold subject attributes.
    allow_empty : bool, default=False
        Return an empty policy for an all-deny input instead of raising
        :class:`~minebench.errors.NoPermits`.

    Attributes
    ----------
    rules_ : PolicySet
        Selected rules in the order the set cover picked them.
    candidates_ : list of PolicySet rules
        All distinct generalized rules before set cover.
    """

    def __init__(self, n_subject_attrs=None, allow_empty=False):
        self.n_subject_attrs = n_subject_attrs
        self.allow_empty = allow_empty

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        n_sa = self.n_subject_attrs
        permits, deny = X[y == 1], X[y == 0]
        if permits.shape[0] == 0:
            if not self.allow_empty:
                raise NoPermits("the matrix has no permit cells")
            self.candidates_ = []
            self.rules_ = PolicySet()
            return self

        uniq, weights = np.unique(permits, axis=0, return_counts=True)
        # OA descending, then SA descending == columns right to left
        drop_order = list(range(X.shape[1] - 1, -1, -1))

        cand_keys = []
        seen = set()
        for vec in uniq:
            kept = set(range(X.shape[1]))
            if _matches_any(deny, vec, sorted(kept)):
                raise InconsistentMatrix(
                    "a permit cell and a deny cell have identical attribute vectors"
                )
            for pos in drop_order:
                trial = kept - {pos}
                if not _matches_any(deny, vec, sorted(trial)):
                    kept = trial
            key = tuple((p, int(vec[p])) for p in sorted(kept))
            if key not in seen:
                seen.add(key)
                cand_keys.append(key)

        cover = []
        for key in cand_keys:
            m = np.ones(uniq.shape[0], dtype=bool)
            for p, v in key:
                m &= uniq[:, p] == v
            cover.append(m)
        ranks = {k: (len(k), _emission_key(k, n_sa)) for k in cand_keys}

        uncovered = np.ones(uniq.shape[0], dtype=bool)
        chosen = []
        while uncovered.any():
            best = min(
                range(len(cand_keys)),
                key=lambda i: (-int(weights[cover[i] & uncovered].sum()), ranks[cand_keys[i]]),
            )
            chosen.append(cand_keys[best])
            uncovered &= ~cover[best]

        self.candidates_ = [rule_from_key(k, n_sa) for k in cand_keys]
        self.rules_ = PolicySet(normalize_rule(rule_from_key(k, n_sa)) for k in chosen)
        return self


class ExactMinimalMiner(_CellPolicyMixin, ClassifierMixin, BaseEstimator):
    """Minimum-size sound and complete permit policy by exhaustive search.

    Candidate rules are all condition subsets of permit cells that match no
    deny cell. Policy sizes 1..``size_budget`` are tried in order; among the
    minimum-size covers the one whose sorted emitted rule lines compare
    smallest is returned. Only feasible at tiny scale, so the input size is
    capped unless ``enforce_scale=False``.
    """

    def __init__(self, n_subject_attrs=None, size_budget=ORACLE_MAX_BUDGET, enforce_scale=True):
        self.n_subject_attrs = n_subject_attrs
        self.size_budget = size_budget
        self.enforce_scale = enforce_scale

    def _check_scale(self, X):
        if not self.enforce_scale:
            return
        problems = []
        if X.shape[1] > ORACLE_MAX_ATTRS:
            problems.append(f"{X.shape[1]} attributes > {ORACLE_MAX_ATTRS}")
        if X.shape[0] > ORACLE_MAX_CELLS:
            problems.append(f"{X.shape[0]} cells > {ORACLE_MAX_CELLS}")
        if self.size_budget > ORACLE_MAX_BUDGET:
            problems.append(f"size_budget {self.size_budget} > {ORACLE_MAX_BUDGET}")
        if problems:
            raise ScaleExceeded("exact search out of scale: " + "; ".join(problems))

    def fit(self, X, y):
        X, y = self._validate_fit(X, y)
        self._check_scale(X)
        if self.size_budget < 0:
            raise ValueError("size_budget must be >= 0")
        n_sa = self.n_subject_attrs
        permits, deny = np.unique(X[y == 1], axis=0), X[y == 0]
        n_perm = permits.shape[0]
        if n_perm == 0:
            self.candidates_ = []
            self.rules_ = PolicySet()
            return self

        # group sound candidates by the permit rows they cover; keep the
        # smallest emission per group, which is enough for the lex-min policy
        best_by_mask = {}
        n_cols = X.shape[1]
        for vec in permits:
            for r in range(n_cols + 1):
                for positions in combinations(range(n_cols), r):
                    if _matches_any(deny, vec, positions):
                        continue
                    key = tuple((p, int(vec[p])) for p in positions)
                    pos = list(positions)
                    hit = np.all(permits[:, pos] == vec[pos], axis=1) if pos else np.ones(n_perm, bool)
                    mask = 0
                    for i in np.flatnonzero(hit):
                        mask |= 1 << int(i)
                    line = _emission_key(key, n_sa)
                    if mask not in best_by_mask or line < best_by_mask[mask][0]:
                        best_by_mask[mask] = (line, key)

        masks = list(best_by_mask)
        self.candidates_ = [rule_from_key(best_by_mask[m][1], n_sa) for m in masks]
        full = (1 << n_perm) - 1
        by_cell = [[m for m in masks if m >> i & 1] for i in range(n_perm)]
        max_cover = max(bin(m).count("1") for m in masks)

        for k in range(1, self.size_budget + 1):
            solutions = set()
            self._search(0, k, (), full, by_cell, max_cover, solutions)
            if solutions:
                best = min(tuple(sorted(best_by_mask[m][0] for m in sol)) for sol in solutions)
                line_to_key = {best_by_mask[m][0]: best_by_mask[m][1] for m in masks}
                self.rules_ = PolicySet(normalize_rule(rule_from_key(line_to_key[l], n_sa)) for l in best)
                return self
        raise BudgetExceeded(f"no consistent policy with at most {self.size_budget} rules")

    def _search(self, covered, slots, picked, full, by_cell, max_cover, out):
        if covered == full:
            out.add(frozenset(picked))
            return
        if slots == 0:
            return
        missing = bin(full & ~covered).count("1")
        if missing > slots * max_cover:
            return
        first = ((full & ~covered) & -(full & ~covered)).bit_length() - 1
        for m in by_cell[first]:
            self._search(covered | m, slots - 1, picked + (m,), full, by_cell, max_cover, out)


class PolicyClassifier(_CellPolicyMixin, ClassifierMixin, BaseEstimator):
    """Classifier backed by a fixed, externally supplied policy.

    ``fit`` only validates the data shape and the policy against
    ``semantics``; nothing is learned.
    """

    def __init__(self, policy=None, n_subject_attrs=None, semantics="permit-only"):
        self.policy = policy
        self.n_subject_attrs = n_subject_attrs
        self.semantics = semantics

    def fit(self, X, y=None):
        X = check_cells(X, self.n_subject_attrs)
        if y is not None:
            check_decisions(y, X.shape[0])
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([0, 1])
        self._semantics = Semantics(self.semantics)
        policy = self.policy if self.policy is not None else PolicySet()
        _check_semantics(policy, self._semantics)
        self.rules_ = policy
        return self


def mine_generalize_validate(scenario, allow_empty=False) -> PolicySet:
    return GeneralizeValidateMiner(allow_empty=allow_empty).fit_scenario(scenario).rules_


def exact_minimal_policy(scenario, size_budget=ORACLE_MAX_BUDGET) -> PolicySet:
    return ExactMinimalMiner(size_budget=size_budget).fit_scenario(scenario).rules_
