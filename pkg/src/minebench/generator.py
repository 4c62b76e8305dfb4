"""Synthetic scenario generation.

Profiles are drawn uniformly, a random ground-truth policy is drawn, and
the ACM is filled by evaluating every subject-object pair against it. The
density target is met by rejection: the rules are redrawn for the first
half of the attempt budget, then profiles and rules together.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .engine import Semantics, reconstruct_acm
from .errors import DensityUnreachable, EmptyMatrix, GenerationExhausted, InvalidParams
from .model import AccessMatrix, AttributeRef, AttributeValue, Kind, PolicySet, Rule, Scenario, normalize_rule

__all__ = [
    "GenerationParams",
    "generate_profiles",
    "generate_ground_truth",
    "generate_scenario",
    "density",
    "RULE_REDRAW_LIMIT",
]

RULE_REDRAW_LIMIT = 1000
ATTEMPT_BUDGET = 1000


@dataclass(frozen=True)
class GenerationParams:
    n_subjects: int = 15
    n_objects: int = 15
    n_subject_attrs: int = 3
    n_object_attrs: int = 3
    domain_cardinality: Union[int, Sequence[int]] = 4
    n_rules: int = 10
    target_density: float = 0.3
    density_tolerance: float = 0.02
    max_conditions_per_rule: int = 3
    seed: int = 0
    # exact ones-count target; replaces the density window when set
    target_ones: Optional[int] = None

    def __post_init__(self):
        for name in ("n_subjects", "n_objects", "n_subject_attrs", "n_object_attrs", "n_rules", "max_conditions_per_rule"):
            v = getattr(self, name)
            if not isinstance(v, (int, np.integer)) or v < 1:
                raise InvalidParams(f"{name} must be a positive integer, got {v!r}")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidParams("seed must be a 64-bit unsigned integer")
        card = self.domain_cardinality
        if isinstance(card, (int, np.integer)):
            cards = (int(card),) * self.n_attrs
        else:
            cards = tuple(int(c) for c in card)
            if len(cards) != self.n_attrs:
                raise InvalidParams(
                    f"domain_cardinality needs {self.n_attrs} entries (subject attributes first), got {len(cards)}"
                )
        if any(c < 1 for c in cards):
            raise InvalidParams("every attribute domain needs at least one value")
        object.__setattr__(self, "domain_cardinality", cards if not isinstance(card, (int, np.integer)) else int(card))
        if not 0 < self.target_density < 1:
            raise InvalidParams("target_density must lie in (0, 1)")
        if self.density_tolerance < 0:
            raise InvalidParams("density_tolerance must be >= 0")
        if self.target_ones is None and not (
            self.target_density - self.density_tolerance > 0 and self.target_density + self.density_tolerance < 1
        ):
            raise InvalidParams("target_density +/- density_tolerance must stay inside (0, 1)")
        if self.target_ones is not None and not 0 <= self.target_ones <= self.n_cells:
            raise InvalidParams(f"target_ones must lie in [0, {self.n_cells}]")
        if self.max_conditions_per_rule > self.n_attrs:
            raise InvalidParams("max_conditions_per_rule exceeds the number of attributes")

    @property
    def n_attrs(self) -> int:
        return self.n_subject_attrs + self.n_object_attrs

    @property
    def n_cells(self) -> int:
        return self.n_subjects * self.n_objects

    @property
    def cardinalities(self) -> tuple:
        """Per-attribute domain sizes, subject attributes first."""
        c = self.domain_cardinality
        return (c,) * self.n_attrs if isinstance(c, int) else tuple(c)

    def attribute_refs(self) -> list:
        return [AttributeRef(Kind.SUBJECT, i) for i in range(1, self.n_subject_attrs + 1)] + [
            AttributeRef(Kind.OBJECT, i) for i in range(1, self.n_object_attrs + 1)
        ]

    def replace(self, **changes) -> "GenerationParams":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        if isinstance(d["domain_cardinality"], tuple):
            d["domain_cardinality"] = list(d["domain_cardinality"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationParams":
        d = dict(d)
        if isinstance(d.get("domain_cardinality"), list):
            d["domain_cardinality"] = tuple(d["domain_cardinality"])
        return cls(**d)


def _rng(params_or_rng):
    if isinstance(params_or_rng, np.random.Generator):
        return params_or_rng
    return np.random.default_rng(params_or_rng)


def generate_profiles(params: GenerationParams, rng=None):
    """Draw every profile value independently and uniformly from its domain."""
    rng = _rng(params.seed if rng is None else rng)
    cards = np.array(params.cardinalities, dtype=np.int64)
    s_cards, o_cards = cards[: params.n_subject_attrs], cards[params.n_subject_attrs :]
    subjects = rng.integers(1, s_cards + 1, size=(params.n_subjects, params.n_subject_attrs))
    objects = rng.integers(1, o_cards + 1, size=(params.n_objects, params.n_object_attrs))
    return (
        [tuple(int(v) for v in row) for row in subjects],
        [tuple(int(v) for v in row) for row in objects],
    )


# While rejection sampling runs, a rule set is a dense (n_rules, n_attrs)
# array holding the required value per attribute, 0 where unconstrained;
# Rule objects are only built for the accepted draw.


def _draw_rows(params: GenerationParams, rng, n: int) -> np.ndarray:
    """``n`` rules: k uniform in [1, max], k distinct attributes, uniform values."""
    cards = np.array(params.cardinalities, dtype=np.int64)
    ks = rng.integers(1, params.max_conditions_per_rule + 1, size=n)
    rank = rng.random((n, params.n_attrs)).argsort(axis=1).argsort(axis=1)
    values = rng.integers(1, cards + 1, size=(n, params.n_attrs))
    return np.where(rank < ks[:, None], values, 0)


def _draw_truth_rows(params: GenerationParams, rng) -> np.ndarray:
    rows, seen, redraws = [], set(), 0
    pending = list(_draw_rows(params, rng, params.n_rules))
    while len(rows) < params.n_rules:
        row = pending.pop(0) if pending else _draw_rows(params, rng, 1)[0]
        key = row.tobytes()
        if key in seen:
            redraws += 1
            if redraws >= RULE_REDRAW_LIMIT:
                raise GenerationExhausted(
                    f"could not draw {params.n_rules} distinct rules in {RULE_REDRAW_LIMIT} redraws"
                )
            continue
        seen.add(key)
        rows.append(row)
    return np.array(rows)


def _policy_from_rows(params: GenerationParams, rows) -> PolicySet:
    refs = params.attribute_refs()
    return PolicySet(
        normalize_rule(Rule([AttributeValue(refs[i], int(v)) for i, v in enumerate(row) if v]))
        for row in rows
    )


def _side_matches(rows: np.ndarray, table: np.ndarray) -> np.ndarray:
    # (n_rules, n_entities): entity satisfies every condition the rule puts on this side
    return ((rows[:, None, :] == table[None, :, :]) | (rows[:, None, :] == 0)).all(axis=2)


def _count_ones(rows, subjects: np.ndarray, objects: np.ndarray, n_sa: int) -> int:
    s = _side_matches(rows[:, :n_sa], subjects).astype(np.int64)
    o = _side_matches(rows[:, n_sa:], objects).astype(np.int64)
    return int(np.count_nonzero(s.T @ o))


def generate_ground_truth(params: GenerationParams, rng=None) -> PolicySet:
    """Draw ``n_rules`` distinct permit rules; duplicates are redrawn."""
    rng = _rng(params.seed if rng is None else rng)
    return _policy_from_rows(params, _draw_truth_rows(params, rng))


def _accepts(params: GenerationParams, ones: int) -> bool:
    if params.target_ones is not None:
        return ones == params.target_ones
    return abs(ones / params.n_cells - params.target_density) <= params.density_tolerance + 1e-12


def generate_scenario(params: GenerationParams, scenario_id: str = "", budget: int = ATTEMPT_BUDGET) -> Scenario:
    rng = np.random.default_rng(int(params.seed))
    subjects, objects = generate_profiles(params, rng)
    half = budget // 2
    for attempt in range(1, budget + 1):
        if attempt > half:
            subjects, objects = generate_profiles(params, rng)
        if attempt == 1 or attempt > half:
            s_arr, o_arr = np.array(subjects), np.array(objects)
        rows = _draw_truth_rows(params, rng)
        if not _accepts(params, _count_ones(rows, s_arr, o_arr, params.n_subject_attrs)):
            continue
        truth = _policy_from_rows(params, rows)
        acm = reconstruct_acm(truth, subjects, objects, Semantics.PERMIT_ONLY)
        return Scenario(
            subjects=subjects,
            objects=objects,
            ground_truth=truth,
            acm=acm,
            params=params,
            seed=int(params.seed),
            attempts=attempt,
            scenario_id=scenario_id,
        )
    want = f"{params.target_ones} ones" if params.target_ones is not None else (
        f"density {params.target_density:g} +/- {params.density_tolerance:g}"
    )
    raise DensityUnreachable(f"no scenario with {want} after {budget} attempts (seed {params.seed})")


def density(acm) -> Fraction:
    """Fraction of 1-cells, as an exact rational. Accepts an AccessMatrix or any 0/1 array."""
    if not isinstance(acm, AccessMatrix):
        cells = np.asarray(acm)
        if cells.size == 0:
            raise EmptyMatrix("density of an empty matrix")
        acm = AccessMatrix(cells)
    return Fraction(acm.ones, acm.size)
