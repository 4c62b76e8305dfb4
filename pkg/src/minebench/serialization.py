"""Text formats: the three input methods, the verbose illustration layout,
the rule-line grammar, and scenario directories on disk.

All renderers produce LF line endings and a trailing newline.
"""

from __future__ import annotations

import ast
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import KindMismatch, MalformedRule, NoRulesFound, ParseError
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
)

__all__ = [
    "InputMethod",
    "subject_tokens",
    "object_tokens",
    "render_access_data",
    "render_access_records",
    "render_acm_text",
    "render_attributes_json",
    "render_acm_input",
    "render_acl_input",
    "render_verbose",
    "parse_access_data",
    "access_data_matrix",
    "render_acl_text",
    "parse_acm_text",
    "parse_acl_text",
    "parse_attributes_json",
    "emit_rule_line",
    "emit_rules",
    "parse_rule_lines",
    "scan_rule_lines",
    "RuleScan",
    "write_scenario",
    "read_scenario",
]


class InputMethod(str, Enum):
    ACCESS_DATA = "access-data"
    ACM_PLUS_ATTRIBUTES = "acm"
    ACL_PLUS_ATTRIBUTES = "acl"


def _tokens(profile, kind: Kind):
    return [f"{kind.value}_{k}_{v}" for k, v in enumerate(profile, start=1)]


def subject_tokens(profile):
    return _tokens(profile, Kind.SUBJECT)


def object_tokens(profile):
    return _tokens(profile, Kind.OBJECT)


def render_access_data(scenario: Scenario) -> str:
    """One line per cell, row-major: subject tokens, object tokens, decision."""
    cells = scenario.acm.cells
    return render_access_records(
        (s, o, cells[i, j]) for i, s in enumerate(scenario.subjects) for j, o in enumerate(scenario.objects)
    )


def render_access_records(records) -> str:
    """Access-data lines for explicit ``(subject, object, decision)`` records."""
    lines = [
        " ".join(subject_tokens(s) + object_tokens(o) + [str(int(d))]) for s, o, d in records
    ]
    return "".join(line + "\n" for line in lines)


def render_acm_text(acm: AccessMatrix) -> str:
    return "".join(" ".join(str(int(v)) for v in row) + "\n" for row in acm.cells)


def render_attributes_json(scenario: Scenario) -> str:
    doc = {
        "SV": [subject_tokens(s) for s in scenario.subjects],
        "OV": [object_tokens(o) for o in scenario.objects],
    }
    return json.dumps(doc, indent=4) + "\n"


def render_acm_input(scenario: Scenario):
    """Return ``(ACM.txt, output.json)`` contents."""
    return render_acm_text(scenario.acm), render_attributes_json(scenario)


def render_acl_text(acm: AccessMatrix) -> str:
    lines = []
    for j in range(acm.n_objects):
        subjects = np.flatnonzero(acm.cells[:, j])
        lines.append(" ".join([f"{j}:"] + [str(int(i)) for i in subjects]))
    return "\n".join(lines) + "\n"


def render_acl_input(scenario: Scenario):
    """Return ``(ACL.txt, output.json)`` contents."""
    return render_acl_text(scenario.acm), render_attributes_json(scenario)


def _verbose_entity(prefix, idx, profile, labels):
    pairs = []
    for k, v in enumerate(profile, start=1):
        name = f"{prefix}A{k}"
        value = labels.get((name, v), f"{prefix}_{k}_{v}") if labels else f"{prefix}_{k}_{v}"
        pairs.append(f"{name}={value}")
    return f"{prefix}{idx}: " + ", ".join(pairs)


def render_verbose(scenario: Scenario, method=InputMethod.ACCESS_DATA, labels: Optional[dict] = None) -> str:
    """Human-oriented layout with 1-based entity names (``S1: SA1=... | Decision=1``).

    ``labels`` optionally maps ``("SA1", value_index)`` to a display string
    such as ``"Dept_A"``; unmapped values fall back to their token.
    """
    method = InputMethod(method)
    subs = [_verbose_entity("S", i, s, labels) for i, s in enumerate(scenario.subjects, 1)]
    objs = [_verbose_entity("O", j, o, labels) for j, o in enumerate(scenario.objects, 1)]
    cells = scenario.acm.cells
    if method is InputMethod.ACCESS_DATA:
        lines = [
            f"{subs[i]} | {objs[j]} | Decision={int(cells[i, j])}"
            for i in range(len(subs))
            for j in range(len(objs))
        ]
        return "\n".join(lines) + "\n"

    out = []
    if method is InputMethod.ACM_PLUS_ATTRIBUTES:
        out.append("ACM:")
        out.append("        " + "  ".join(f"O{j}" for j in range(1, len(objs) + 1)))
        for i in range(len(subs)):
            name = f"S{i + 1}"
            out.append(name.ljust(8) + "   ".join(str(int(v)) for v in cells[i]))
    else:
        out.append("Access Control Lists:")
        for j in range(len(objs)):
            allowed = ", ".join(f"S{i + 1}" for i in np.flatnonzero(cells[:, j]))
            out.append(f"O{j + 1}: [{allowed}]")
    out += ["", "Subject Attributes:", *subs, "", "Object Attributes:", *objs]
    return "\n".join(out) + "\n"


# -- parsing the data formats back ------------------------------------------


def _parse_token_row(tokens, kind: Kind):
    values = []
    for k, tok in enumerate(tokens, start=1):
        av = AttributeValue.parse_token(tok)
        if av.attr.kind is not kind or av.attr.index != k:
            raise ParseError(f"token {tok!r} out of place (expected {kind.value}_{k}_*)")
        values.append(av.value)
    return tuple(values)


def parse_attributes_json(text: str):
    doc = json.loads(text)
    subjects = [_parse_token_row(row, Kind.SUBJECT) for row in doc["SV"]]
    objects = [_parse_token_row(row, Kind.OBJECT) for row in doc["OV"]]
    return subjects, objects


def parse_acm_text(text: str) -> AccessMatrix:
    rows = [[int(x) for x in line.split()] for line in text.splitlines() if line.strip()]
    return AccessMatrix(rows)


def parse_acl_text(text: str, n_subjects: int, n_objects: int) -> AccessMatrix:
    cells = np.zeros((n_subjects, n_objects), dtype=np.uint8)
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        head, _, rest = line.partition(":")
        try:
            j = int(head)
            for i in rest.split():
                cells[int(i), j] = 1
        except (ValueError, IndexError) as exc:
            raise ParseError(f"bad ACL line {line!r}", line=lineno) from exc
    return AccessMatrix(cells)


def parse_access_data(text: str):
    """Return ``(subject_profile, object_profile, decision)`` records in file order."""
    records = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        *toks, decision = line.split()
        s = [t for t in toks if t.startswith("S_")]
        o = [t for t in toks if t.startswith("O_")]
        if len(s) + len(o) != len(toks) or decision not in ("0", "1"):
            raise ParseError(f"bad access-data line {line!r}", line=lineno)
        records.append((_parse_token_row(s, Kind.SUBJECT), _parse_token_row(o, Kind.OBJECT), int(decision)))
    return records


def access_data_matrix(text: str, n_subjects: int, n_objects: int) -> AccessMatrix:
    """Rebuild the ACM from row-major access-data lines."""
    records = parse_access_data(text)
    if len(records) != n_subjects * n_objects:
        raise ParseError(f"expected {n_subjects * n_objects} lines, got {len(records)}")
    cells = np.array([r[2] for r in records], dtype=np.uint8).reshape(n_subjects, n_objects)
    return AccessMatrix(cells)


# -- rule-line grammar ------------------------------------------------------


def emit_rule_line(rule: Rule) -> str:
    rule = normalize_rule(rule)
    conds = ", ".join(f"('{c.attr.name}', '{c.token}')" for c in rule.conditions)
    return f"{{'rule': [{conds}], 'decision': '{rule.decision.value}'}}"


def emit_rules(policy: PolicySet) -> str:
    return "".join(emit_rule_line(r) + "\n" for r in policy)


_QUOTES = str.maketrans({"‘": "'", "’": "'", "`": "'", "´": "'", "“": '"', "”": '"'})


@dataclass
class RuleScan:
    policy: PolicySet
    skipped: list = field(default_factory=list)  # 1-based line numbers of non-rule lines

    @property
    def n_skipped(self) -> int:
        return len(self.skipped)


def _rule_from_literal(obj, lineno) -> Rule:
    if not isinstance(obj, dict) or "rule" not in obj or "decision" not in obj:
        raise MalformedRule("expected a dict with 'rule' and 'decision' keys", line=lineno)
    decision = str(obj["decision"]).strip().lower()
    if decision not in ("permit", "deny"):
        raise MalformedRule(f"unknown decision {obj['decision']!r}", line=lineno)
    pairs = obj["rule"]
    if not isinstance(pairs, (list, tuple)):
        raise MalformedRule("'rule' must be a list of (attribute, value) pairs", line=lineno)
    conds = []
    for pair in pairs:
        if not isinstance(pair, (list, tuple)) or len(pair) != 2:
            raise MalformedRule(f"bad condition {pair!r}", line=lineno)
        name, token = (str(x).strip() for x in pair)
        try:
            attr = AttributeRef.parse(name)
            av = AttributeValue.parse_token(token)
        except ValueError as exc:
            raise MalformedRule(str(exc), line=lineno) from exc
        if av.attr != attr:
            raise KindMismatch(f"value {token!r} does not belong to attribute {name!r}", line=lineno)
        conds.append(av)
    try:
        return normalize_rule(Rule(conds, Decision(decision)))
    except ValueError as exc:
        raise MalformedRule(str(exc), line=lineno) from exc


def scan_rule_lines(text: str, strict: bool = False) -> RuleScan:
    """Parse rule lines, skipping (and recording) anything that is not a rule.

    A rule may wrap over several physical lines; it is collected until its
    braces balance. Blank lines are ignored without being counted.
    """
    lines = text.translate(_QUOTES).splitlines()
    rules, skipped = [], []
    i = 0
    while i < len(lines):
        raw = lines[i].strip()
        lineno = i + 1
        if not raw:
            i += 1
            continue
        if not raw.startswith("{"):
            if strict:
                raise MalformedRule(f"unexpected text {raw[:40]!r}", line=lineno)
            skipped.append(lineno)
            i += 1
            continue
        chunk = raw
        while chunk.count("{") > chunk.count("}") and i + 1 < len(lines):
            i += 1
            chunk += " " + lines[i].strip()
        i += 1
        chunk = chunk.rstrip(",;").strip()
        try:
            obj = ast.literal_eval(chunk)
        except (ValueError, SyntaxError) as exc:
            raise MalformedRule(f"cannot parse {chunk[:60]!r}", line=lineno) from exc
        rules.append(_rule_from_literal(obj, lineno))
    if not rules:
        raise NoRulesFound("no rule lines found")
    return RuleScan(PolicySet(rules), skipped)


def parse_rule_lines(text: str, strict: bool = False) -> PolicySet:
    return scan_rule_lines(text, strict=strict).policy


# -- scenario directories ---------------------------------------------------

SCENARIO_FILES = ("output.json", "ACM.txt", "groundtruth.rules", "meta.json")


def write_scenario(scenario: Scenario, directory, extra_formats: bool = True) -> Path:
    """Write a scenario directory; ``extra_formats`` adds access_data.txt and ACL.txt."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    acm_text, attrs = render_acm_input(scenario)
    _write(d / "output.json", attrs)
    _write(d / "ACM.txt", acm_text)
    _write(d / "groundtruth.rules", emit_rules(scenario.ground_truth))
    params = scenario.params.to_dict() if hasattr(scenario.params, "to_dict") else scenario.params
    meta = {
        "scenario_id": scenario.scenario_id,
        "seed": scenario.seed,
        "attempts": scenario.attempts,
        "params": params,
        "n_subjects": len(scenario.subjects),
        "n_objects": len(scenario.objects),
        "ones": scenario.acm.ones,
    }
    _write(d / "meta.json", json.dumps(meta, indent=2, sort_keys=True) + "\n")
    if extra_formats:
        _write(d / "access_data.txt", render_access_data(scenario))
        _write(d / "ACL.txt", render_acl_text(scenario.acm))
    return d


def _write(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def read_scenario(directory) -> Scenario:
    from .generator import GenerationParams

    d = Path(directory)
    subjects, objects = parse_attributes_json((d / "output.json").read_text(encoding="utf-8"))
    acm = parse_acm_text((d / "ACM.txt").read_text(encoding="utf-8"))
    truth = parse_rule_lines((d / "groundtruth.rules").read_text(encoding="utf-8"), strict=True)
    meta_path = d / "meta.json"
    meta = json.loads(meta_path.read_text(encoding="utf-8")) if meta_path.exists() else {}
    params = meta.get("params")
    if isinstance(params, dict):
        params = GenerationParams.from_dict(params)
    return Scenario(
        subjects=subjects,
        objects=objects,
        ground_truth=truth,
        acm=acm,
        params=params,
        seed=int(meta.get("seed", 0)),
        attempts=int(meta.get("attempts", 1)),
        scenario_id=meta.get("scenario_id") or d.name,
    )
