"""Named scenario presets.

``TC1``..``TC5`` are 15x15 matrices with a 10-rule ground truth and exact
ones-counts; the row label is the density percentage as printed in result
tables. ``scal-<N>`` presets have N cells, a 20-rule ground truth and about
10% density. Attribute spaces are tuned so each preset is reachable within
the generator's attempt budget.
"""

from __future__ import annotations

from dataclasses import dataclass

from .generator import GenerationParams

__all__ = ["Preset", "PRESETS", "TC_PRESETS", "SCALABILITY_PRESETS", "ORACLE_PRESET", "get_preset"]


@dataclass(frozen=True)
class Preset:
    name: str
    label: str
    params: GenerationParams

    def params_for(self, seed: int) -> GenerationParams:
        return self.params.replace(seed=int(seed))


def _tc(name, ones, label, attrs, card, max_cond):
    return Preset(
        name,
        label,
        GenerationParams(
            n_subjects=15,
            n_objects=15,
            n_subject_attrs=attrs,
            n_object_attrs=attrs,
            domain_cardinality=card,
            n_rules=10,
            max_conditions_per_rule=max_cond,
            target_ones=ones,
        ),
    )


TC_PRESETS = {
    p.name: p
    for p in (
        _tc("TC1", 29, "12.88", 3, 8, 6),
        _tc("TC2", 69, "30.67", 3, 8, 4),
        _tc("TC3", 91, "40.44", 3, 6, 4),
        _tc("TC4", 104, "46.22", 3, 6, 4),
        _tc("TC5", 118, "52.44", 3, 5, 4),
    )
}

# total cells -> (subjects, objects)
SCALABILITY_SHAPES = {
    500: (20, 25),
    700: (25, 28),
    1000: (25, 40),
    1500: (30, 50),
    2000: (40, 50),
    3000: (50, 60),
    4000: (50, 80),
    5000: (50, 100),
}

SCALABILITY_PRESETS = {
    f"scal-{total}": Preset(
        f"scal-{total}",
        str(total),
        GenerationParams(
            n_subjects=n,
            n_objects=m,
            n_subject_attrs=3,
            n_object_attrs=3,
            domain_cardinality=10,
            n_rules=20,
            max_conditions_per_rule=5,
            target_density=0.10,
            density_tolerance=0.02,
        ),
    )
    for total, (n, m) in SCALABILITY_SHAPES.items()
}

# small enough for the exact miner
ORACLE_PRESET = Preset(
    "oracle",
    "oracle",
    GenerationParams(
        n_subjects=8,
        n_objects=8,
        n_subject_attrs=3,
        n_object_attrs=3,
        domain_cardinality=2,
        n_rules=3,
        max_conditions_per_rule=3,
        target_density=0.35,
        density_tolerance=0.30,
    ),
)

PRESETS = {**TC_PRESETS, **SCALABILITY_PRESETS, ORACLE_PRESET.name: ORACLE_PRESET}


def get_preset(name: str) -> Preset:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
