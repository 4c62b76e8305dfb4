"""Phased experiment runner and result summarization.

A run directory holds::

    config.json        resolved configuration
    results.csv        one row per (preset, seed, engine, strategy, provider)
    scenarios/<id>/    scenario files
    rules/<run>.rules  mined policies
    attempts/          raw LLM responses and attempt records
    summary.txt        per-metric tables (rows = preset label, columns = configuration)
    plot_<metric>.dat, plot.gp

Rows are appended as runs finish, so an interrupted run resumes by skipping
rows already present. On completion the CSV is rewritten in task order,
which keeps it byte-identical across runs of deterministic engines.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import threading
import zlib
from collections import OrderedDict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from decimal import ROUND_HALF_UP, Decimal
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import MinebenchError, MissingCredential
from .generator import density, generate_scenario
from .metrics import CSV_FIELDS, csv_row, grade
from .miners import exact_minimal_policy, mine_generalize_validate
from .presets import SCALABILITY_PRESETS, TC_PRESETS, get_preset
from .prompts import PromptStrategy
from .providers import AttemptStore, make_provider, mine_with_regeneration
from .serialization import emit_rules, write_scenario

log = logging.getLogger(__name__)

__all__ = ["Phase", "ExperimentConfig", "run_experiment", "summarize", "RESULT_FIELDS", "ENGINES"]

EXTRA_FIELDS = ("phase", "preset", "label", "engine", "seed", "failure")
RESULT_FIELDS = CSV_FIELDS + EXTRA_FIELDS
ENGINES = ("reference", "exact", "llm")
NETWORK_KINDS = ("openai-chat", "gemini")
METRICS = ("ratio", "accuracy", "precision", "recall", "f1")


class Phase(str, Enum):
    MODEL_SCREENING = "model-screening"
    INPUT_FORMATS = "input-formats"
    PROMPT_STUDY = "prompt-study"
    SCALABILITY = "scalability"
    CUSTOM = "custom"


_TC = tuple(TC_PRESETS)
_SCAL = tuple(SCALABILITY_PRESETS)
_ACCESS_DATA_STRATEGIES = ("prompt1", "prompt2", "prompt3", "cot", "no0to1", "deny-allowed")

PHASE_DEFAULTS = {
    Phase.MODEL_SCREENING: dict(presets=_TC, strategies=("prompt1",)),
    Phase.INPUT_FORMATS: dict(presets=_TC, strategies=("prompt1", "acm", "acl")),
    Phase.PROMPT_STUDY: dict(presets=_TC, strategies=_ACCESS_DATA_STRATEGIES),
    Phase.SCALABILITY: dict(presets=_SCAL, strategies=("prompt1", "cot")),
    Phase.CUSTOM: dict(presets=_TC, strategies=("prompt1",)),
}


@dataclass
class ExperimentConfig:
    phase: Phase = Phase.CUSTOM
    presets: tuple = ()
    strategies: tuple = ()
    engines: tuple = ("llm",)
    providers: tuple = ()  # ProviderConfig
    seeds: tuple = (0,)
    out_dir: str = "runs"
    jobs: int = 1
    offline: bool = False
    fresh_scenarios: bool = False

    def __post_init__(self):
        self.phase = Phase(self.phase)
        defaults = PHASE_DEFAULTS[self.phase]
        self.presets = tuple(self.presets) or defaults["presets"]
        self.strategies = tuple(PromptStrategy(s).value for s in (self.strategies or defaults["strategies"]))
        self.engines = tuple(self.engines)
        for e in self.engines:
            if e not in ENGINES:
                raise ValueError(f"unknown engine {e!r}")
        for p in self.presets:
            try:
                get_preset(p)
            except KeyError as exc:
                raise ValueError(exc.args[0]) from None
        if "llm" in self.engines and not self.providers:
            raise ValueError("the llm engine needs at least one provider")
        self.seeds = tuple(int(s) for s in self.seeds)
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phase"] = self.phase.value
        d["providers"] = [asdict(p) for p in self.providers]
        return d


@dataclass(frozen=True)
class Task:
    index: int
    preset: str
    seed: int
    engine: str
    strategy: str
    provider: str

    @property
    def key(self):
        return (self.preset, str(self.seed), self.engine, self.strategy, self.provider)


def plan_tasks(cfg: ExperimentConfig) -> list:
    tasks = []
    for preset in cfg.presets:
        for seed in cfg.seeds:
            for engine in cfg.engines:
                if engine == "llm":
                    for p in cfg.providers:
                        for s in cfg.strategies:
                            tasks.append((preset, seed, engine, s, p.provider_id))
                else:
                    tasks.append((preset, seed, engine, "-", engine))
    return [Task(i, *t) for i, t in enumerate(tasks)]


def _derived_seed(seed: int, salt: str) -> int:
    ss = np.random.SeedSequence([seed, zlib.crc32(salt.encode())])
    return int(ss.generate_state(1, np.uint64)[0])


class _ScenarioCache:
    def __init__(self, cfg: ExperimentConfig, root: Path):
        self.cfg, self.root = cfg, root
        self._cache, self._lock = {}, threading.Lock()

    def get(self, task: Task):
        if self.cfg.fresh_scenarios and task.engine == "llm":
            sid = f"{task.preset}-s{task.seed}-{task.strategy}"
            seed = _derived_seed(task.seed, task.strategy)
        else:
            sid, seed = f"{task.preset}-s{task.seed}", task.seed
        with self._lock:
            if sid not in self._cache:
                self._cache[sid] = threading.Lock(), None
            lock, _ = self._cache[sid]
        with lock:
            scenario = self._cache[sid][1]
            if scenario is None:
                scenario = generate_scenario(get_preset(task.preset).params_for(seed), scenario_id=sid)
                write_scenario(scenario, self.root / "scenarios" / sid)
                self._cache[sid] = lock, scenario
        return scenario


class _CsvAppender:
    def __init__(self, path: Path):
        self.path = path
        self._lock = threading.Lock()
        if not path.exists():
            with open(path, "w", newline="", encoding="utf-8") as fh:
                csv.DictWriter(fh, RESULT_FIELDS, lineterminator="\n").writeheader()

    def append(self, row: dict):
        with self._lock, open(self.path, "a", newline="", encoding="utf-8") as fh:
            csv.DictWriter(fh, RESULT_FIELDS, lineterminator="\n").writerow(row)


def _row_key(row):
    return (row["preset"], row["seed"], row["engine"], row["strategy"], row["provider"])


def _execute(task: Task, cfg: ExperimentConfig, scenarios: _ScenarioCache, providers: dict, store, root: Path):
    scenario = scenarios.get(task)
    failure, report, policy = "", None, None
    try:
        if task.engine == "reference":
            policy = mine_generalize_validate(scenario, allow_empty=True)
            report = grade(scenario, policy)
        elif task.engine == "exact":
            policy = exact_minimal_policy(scenario)
            report = grade(scenario, policy)
        else:
            attempt = mine_with_regeneration(scenario, task.strategy, providers[task.provider], store)
            policy, report, failure = attempt.policy, attempt.metrics, attempt.failure or ""
    except MissingCredential:
        raise
    except MinebenchError as exc:
        failure = f"{type(exc).__name__}: {exc}"
    if policy is not None:
        name = f"{scenario.scenario_id}__{task.engine}__{task.strategy}__{task.provider}.rules"
        with open(root / "rules" / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(emit_rules(policy))
    row = csv_row(report, scenario.scenario_id, task.strategy, task.provider, density(scenario.acm))
    row.update(
        phase=cfg.phase.value,
        preset=task.preset,
        label=get_preset(task.preset).label,
        engine=task.engine,
        seed=str(task.seed),
        failure=failure.replace("\n", " ")[:200],
    )
    return row


def run_experiment(cfg: ExperimentConfig, provider_factory=make_provider) -> Path:
    """Run (or resume) every task of ``cfg``; return the run directory."""
    if "llm" in cfg.engines and not cfg.offline:
        for p in cfg.providers:
            if p.kind in NETWORK_KINDS:
                p.secret()  # fail before anything is written
    root = Path(cfg.out_dir)
    for sub in ("scenarios", "rules", "attempts"):
        (root / sub).mkdir(parents=True, exist_ok=True)
    with open(root / "config.json", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")

    tasks = plan_tasks(cfg)
    results = root / "results.csv"
    done = {}
    if results.exists():
        with open(results, newline="", encoding="utf-8") as fh:
            # a row cut short by an interruption has missing fields; rerun it
            done = {_row_key(r): r for r in csv.DictReader(fh) if None not in r.values()}
        log.info("resuming: %d of %d runs already recorded", len(done), len(tasks))
    appender = _CsvAppender(results)

    providers = {}
    if "llm" in cfg.engines:
        providers = {p.provider_id: provider_factory(p, offline=cfg.offline) for p in cfg.providers}
    store = AttemptStore(root / "attempts")
    scenarios = _ScenarioCache(cfg, root)
    pending = [t for t in tasks if t.key not in done]

    def work(task):
        row = _execute(task, cfg, scenarios, providers, store, root)
        appender.append(row)
        return task, row

    if cfg.jobs == 1:
        finished = [work(t) for t in pending]
    else:
        with ThreadPoolExecutor(max_workers=cfg.jobs) as pool:
            finished = list(pool.map(work, pending))
    for task, row in finished:
        done[task.key] = row

    ordered = [done[t.key] for t in tasks]
    _write_csv(results, ordered)
    write_summary(root, ordered)
    return root


def _write_csv(path: Path, rows):
    buf = io.StringIO()
    w = csv.DictWriter(buf, RESULT_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: r.get(k, "") for k in RESULT_FIELDS})
    tmp = path.with_suffix(".tmp")
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        fh.write(buf.getvalue())
    tmp.replace(path)


# -- summaries --------------------------------------------------------------


def _column_name(row) -> str:
    if row["engine"] == "llm":
        return f"{row['provider']} ({row['strategy']})"
    return row["engine"]


def summary_tables(rows) -> "OrderedDict[str, dict]":
    """``{metric: {"rows": [...labels], "columns": [...], "cells": {(label, col): text}}}``.

    Several seeds in one cell are averaged over successful runs; a cell with
    no successful run shows ``*``.
    """
    labels, columns = [], []
    values = {}
    for r in rows:
        label, col = r["label"], _column_name(r)
        if label not in labels:
            labels.append(label)
        if col not in columns:
            columns.append(col)
        values.setdefault((label, col), []).append(r)
    tables = OrderedDict()
    for metric in METRICS:
        cells = {}
        for key, group in values.items():
            ok = [Decimal(g[metric]) for g in group if g["failed_flag"] == "0"]
            if not ok:
                cells[key] = "*"
                continue
            mean = sum(ok) / len(ok)
            places = Decimal("0.1") if metric == "ratio" else Decimal("0.01")
            cells[key] = str(mean.quantize(places, rounding=ROUND_HALF_UP))
        tables[metric] = {"rows": labels, "columns": columns, "cells": cells}
    return tables


def render_tables(tables) -> str:
    out = []
    for metric, t in tables.items():
        header = ["label"] + t["columns"]
        body = [[lab] + [t["cells"].get((lab, c), "") for c in t["columns"]] for lab in t["rows"]]
        widths = [max(len(str(x)) for x in col) for col in zip(header, *body)]
        out.append(f"## {metric}")
        for line in [header] + body:
            out.append("  ".join(str(x).ljust(w) for x, w in zip(line, widths)).rstrip())
        out.append("")
    return "\n".join(out)


def write_summary(root: Path, rows):
    tables = summary_tables(rows)
    _text(root / "summary.txt", render_tables(tables))
    script = ['set datafile missing "*"', "set key outside", "set style data linespoints", "set terminal pngcairo size 900,500"]
    for metric, t in tables.items():
        lines = ["label\t" + "\t".join(c.replace(" ", "_") for c in t["columns"])]
        for lab in t["rows"]:
            lines.append("\t".join([lab] + [t["cells"].get((lab, c), "*") or "*" for c in t["columns"]]))
        _text(root / f"plot_{metric}.dat", "\n".join(lines) + "\n")
        n = len(t["columns"])
        script.append(f'set output "plot_{metric}.png"; set ylabel "{metric}"')
        plots = ", ".join(f'"plot_{metric}.dat" using {i + 2}:xtic(1) title columnheader({i + 2})' for i in range(n))
        script.append(f"plot {plots}")
    _text(root / "plot.gp", "\n".join(script) + "\n")


def _text(path: Path, text: str):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)


def summarize(path) -> str:
    """Rebuild summary tables and plot data from a run directory or results CSV."""
    p = Path(path)
    csv_path = p / "results.csv" if p.is_dir() else p
    with open(csv_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    write_summary(csv_path.parent, rows)
    return render_tables(summary_tables(rows))
