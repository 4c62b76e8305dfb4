"""Domain types: attributes, rules, policies, the access matrix, scenarios."""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    AttributeOutOfRange,
    ConflictingConditions,
    InconsistentScenario,
    InvalidMatrix,
)

__all__ = [
    "Kind",
    "Decision",
    "AttributeRef",
    "AttributeValue",
    "Profile",
    "Rule",
    "PolicySet",
    "AccessMatrix",
    "Scenario",
    "rule_matches",
    "normalize_rule",
]

Profile = tuple  # tuple[int, ...] of 1-based value indices, position k -> attribute k+1

_ATTR_RE = re.compile(r"^(SA|OA)_(\d+)$")
_TOKEN_RE = re.compile(r"^(S|O)_(\d+)_(\d+)$")


class Kind(str, Enum):
    SUBJECT = "S"
    OBJECT = "O"


class Decision(str, Enum):
    PERMIT = "permit"
    DENY = "deny"


@dataclass(frozen=True, order=True)
class AttributeRef:
    kind: Kind
    index: int

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if not isinstance(self.index, (int, np.integer)) or self.index < 1:
            raise ValueError(f"attribute index must be a positive integer, got {self.index!r}")
        object.__setattr__(self, "index", int(self.index))

    @property
    def name(self) -> str:
        return f"{self.kind.value}A_{self.index}"

    @classmethod
    def parse(cls, name: str) -> "AttributeRef":
        m = _ATTR_RE.match(name.strip())
        if not m:
            raise ValueError(f"not an attribute name: {name!r}")
        return cls(Kind(m.group(1)[0]), int(m.group(2)))

    def __str__(self):
        return self.name


@dataclass(frozen=True)
class AttributeValue:
    attr: AttributeRef
    value: int

    def __post_init__(self):
        if not isinstance(self.value, (int, np.integer)) or self.value < 1:
            raise ValueError(f"value index must be a positive integer, got {self.value!r}")
        object.__setattr__(self, "value", int(self.value))

    @property
    def token(self) -> str:
        return f"{self.attr.kind.value}_{self.attr.index}_{self.value}"

    @classmethod
    def parse_token(cls, token: str) -> "AttributeValue":
        m = _TOKEN_RE.match(token.strip())
        if not m:
            raise ValueError(f"not a value token: {token!r}")
        return cls(AttributeRef(Kind(m.group(1)), int(m.group(2))), int(m.group(3)))

    def sort_key(self):
        # object attributes first, then subject attributes, ascending index
        return (0 if self.attr.kind is Kind.OBJECT else 1, self.attr.index, self.value)

    def __str__(self):
        return f"{self.attr.name}={self.token}"


def _coerce_condition(c) -> AttributeValue:
    if isinstance(c, AttributeValue):
        return c
    attr, value = c
    if isinstance(attr, str):
        attr = AttributeRef.parse(attr)
    if isinstance(value, str):
        av = AttributeValue.parse_token(value)
        return AttributeValue(attr, av.value)
    return AttributeValue(attr, value)


@dataclass(frozen=True)
class Rule:
    """Conjunction of equality conditions with a permit/deny decision.

    Conditions may be given as ``AttributeValue`` objects or as
    ``(attr, value)`` pairs where ``attr`` is an ``AttributeRef`` or a name
    like ``"SA_2"`` and ``value`` is a 1-based index or a token like
    ``"S_2_3"``. An empty condition tuple is a wildcard.
    """

    conditions: tuple = ()
    decision: Decision = Decision.PERMIT

    def __post_init__(self):
        conds = tuple(_coerce_condition(c) for c in self.conditions)
        seen = {}
        for c in conds:
            prev = seen.setdefault(c.attr, c.value)
            if prev != c.value:
                raise ConflictingConditions(
                    f"{c.attr.name} bound to both {prev} and {c.value}"
                )
        object.__setattr__(self, "conditions", conds)
        object.__setattr__(self, "decision", Decision(self.decision))

    @property
    def is_permit(self) -> bool:
        return self.decision is Decision.PERMIT

    def matches(self, s: Sequence[int], o: Sequence[int]) -> bool:
        return rule_matches(self, s, o)

    def __len__(self):
        return len(self.conditions)


def rule_matches(rule: Rule, s: Sequence[int], o: Sequence[int]) -> bool:
    """True iff every condition of ``rule`` holds for subject ``s`` and object ``o``."""
    for c in rule.conditions:
        profile = s if c.attr.kind is Kind.SUBJECT else o
        if c.attr.index > len(profile):
            raise AttributeOutOfRange(
                f"{c.attr.name} referenced but profile has {len(profile)} attributes"
            )
        if profile[c.attr.index - 1] != c.value:
            return False
    return True


def normalize_rule(rule: Rule) -> Rule:
    """Deduplicate conditions and order them OA-first, then SA, by ascending index."""
    unique = {c.attr: c for c in rule.conditions}
    return Rule(tuple(sorted(unique.values(), key=AttributeValue.sort_key)), rule.decision)


@dataclass(frozen=True)
class PolicySet:
    rules: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "rules", tuple(self.rules))

    def __len__(self):
        return len(self.rules)

    def __iter__(self) -> Iterator[Rule]:
        return iter(self.rules)

    def __getitem__(self, i):
        return self.rules[i]

    @property
    def has_deny(self) -> bool:
        return any(not r.is_permit for r in self.rules)

    def normalized(self) -> "PolicySet":
        return PolicySet(normalize_rule(r) for r in self.rules)


class AccessMatrix:
    """Immutable binary subject x object matrix (1 = permit)."""

    __slots__ = ("_cells",)

    def __init__(self, cells):
        arr = np.array(cells, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InvalidMatrix(f"expected a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.isin(arr, (0, 1)).all():
            raise InvalidMatrix("matrix cells must be 0 or 1")
        arr = arr.astype(np.uint8)
        arr.flags.writeable = False
        self._cells = arr

    @classmethod
    def zeros(cls, n_subjects: int, n_objects: int) -> "AccessMatrix":
        return cls(np.zeros((n_subjects, n_objects), dtype=np.uint8))

    @property
    def cells(self) -> np.ndarray:
        return self._cells

    @property
    def shape(self):
        return self._cells.shape

    @property
    def n_subjects(self) -> int:
        return self._cells.shape[0]

    @property
    def n_objects(self) -> int:
        return self._cells.shape[1]

    @property
    def ones(self) -> int:
        return int(self._cells.sum())

    @property
    def size(self) -> int:
        return int(self._cells.size)

    def __getitem__(self, idx):
        return self._cells[idx]

    def __eq__(self, other):
        if not isinstance(other, AccessMatrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._cells, other._cells))

    __hash__ = None

    def tolist(self):
        return self._cells.tolist()

    def __repr__(self):
        return f"AccessMatrix({self.n_subjects}x{self.n_objects}, ones={self.ones})"


def _as_profiles(rows: Iterable[Sequence[int]]) -> tuple:
    return tuple(tuple(int(v) for v in row) for row in rows)


@dataclass(frozen=True)
class Scenario:
    """Subjects, objects, the ground-truth policy and the ACM it induces.

    Construction checks that ``acm`` is exactly the permit-only
    reconstruction of ``ground_truth``.
    """

    subjects: tuple
    objects: tuple
    ground_truth: PolicySet
    acm: AccessMatrix
    params: Any = None
    seed: int = 0
    attempts: int = 1
    scenario_id: str = field(default="", compare=False)

    def __post_init__(self):
        object.__setattr__(self, "subjects", _as_profiles(self.subjects))
        object.__setattr__(self, "objects", _as_profiles(self.objects))
        if not isinstance(self.acm, AccessMatrix):
            object.__setattr__(self, "acm", AccessMatrix(self.acm))
        if not isinstance(self.ground_truth, PolicySet):
            object.__setattr__(self, "ground_truth", PolicySet(self.ground_truth))
        for name, rows in (("subject", self.subjects), ("object", self.objects)):
            if len({len(r) for r in rows}) > 1:
                raise InconsistentScenario(f"{name} profiles have differing lengths")
        if self.acm.shape != (len(self.subjects), len(self.objects)):
            raise InconsistentScenario(
                f"ACM shape {self.acm.shape} does not match "
                f"{len(self.subjects)} subjects x {len(self.objects)} objects"
            )
        from .engine import Semantics, reconstruct_acm

        induced = reconstruct_acm(self.ground_truth, self.subjects, self.objects, Semantics.PERMIT_ONLY)
        if induced != self.acm:
            raise InconsistentScenario("ACM differs from the matrix induced by the ground truth")

    @property
    def n_subject_attrs(self) -> int:
        return len(self.subjects[0]) if self.subjects else 0

    @property
    def n_object_attrs(self) -> int:
        return len(self.objects[0]) if self.objects else 0

    @property
    def n_cells(self) -> int:
        return self.acm.size
