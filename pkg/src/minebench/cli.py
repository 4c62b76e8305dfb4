"""``minebench`` command line.

Exit codes: 0 success (failed mining runs are data, not errors), 2 usage,
3 operational failure.

Global options may appear before or after the subcommand. A TOML config file
(``--config``) supplies defaults underneath explicit flags::

    seed = 3
    jobs = 4
    offline = true

    [experiment]
    phase = "prompt-study"
    seeds = [0, 1, 2]

    [providers.gpt4o]
    kind = "openai-chat"
    model_name = "gpt-4o"
    endpoint = "https://api.openai.com/v1/chat/completions"
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .engine import Semantics
from .errors import MinebenchError, ParseError
from .experiment import ENGINES, ExperimentConfig, Phase, run_experiment, summarize
from .generator import GenerationParams, generate_scenario
from .metrics import CSV_FIELDS, csv_row, grade
from .miners import exact_minimal_policy, mine_generalize_validate
from .presets import PRESETS, get_preset
from .prompts import PromptStrategy, build_prompt
from .providers import AttemptStore, ProviderConfig, make_provider, mine_with_regeneration
from .serialization import (
    emit_rules,
    read_scenario,
    render_access_data,
    render_acl_text,
    render_acm_text,
    render_attributes_json,
    render_verbose,
    scan_rule_lines,
    write_scenario,
)

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

log = logging.getLogger("minebench")

EXIT_OK, EXIT_USAGE, EXIT_FAIL = 0, 2, 3


class UsageError(Exception):
    pass


def _global_options(parser, suppress):
    g = parser.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="random seed (default 0)")
    g.add_argument("--out", default=argparse.SUPPRESS, help="output file or directory")
    g.add_argument("--jobs", type=int, default=argparse.SUPPRESS, help="concurrent runs (default 1)")
    g.add_argument("--offline", action="store_true", default=argparse.SUPPRESS, help="never touch the network")
    g.add_argument("--config", default=argparse.SUPPRESS if suppress else None, help="TOML config file")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="minebench", description="ABAC policy-mining benchmark harness")
    _global_options(p, suppress=False)
    sub = p.add_subparsers(dest="command", required=True, metavar="COMMAND")

    def add(name, help_):
        sp = sub.add_parser(name, help=help_, description=help_)
        _global_options(sp, suppress=True)
        return sp

    g = add("generate", "generate a scenario directory")
    g.add_argument("--preset", choices=sorted(PRESETS))
    g.add_argument("--id", dest="scenario_id", default=None, help="scenario id (default: <preset>-s<seed>)")
    g.add_argument("--subjects", type=int)
    g.add_argument("--objects", type=int)
    g.add_argument("--subject-attrs", type=int)
    g.add_argument("--object-attrs", type=int)
    g.add_argument("--cardinality", type=int)
    g.add_argument("--rules", type=int)
    g.add_argument("--max-conditions", type=int)
    g.add_argument("--density", type=float)
    g.add_argument("--tolerance", type=float)
    g.add_argument("--ones", type=int, help="exact ones-count target")

    r = add("render", "render a scenario in one input format")
    r.add_argument("scenario")
    r.add_argument(
        "--format",
        default="access-data",
        choices=["access-data", "acm", "acl", "attributes", "verbose", "prompt"],
    )
    r.add_argument("--strategy", default="prompt1", choices=[s.value for s in PromptStrategy])

    m = add("mine", "mine a policy for a scenario")
    m.add_argument("scenario")
    m.add_argument("--engine", required=True, choices=ENGINES)
    m.add_argument("--strategy", choices=[s.value for s in PromptStrategy])
    m.add_argument("--provider", help="provider id from the config, 'echo', or 'fixture'")
    m.add_argument("--fixtures", help="directory of recorded responses (provider 'fixture')")
    m.add_argument("--budget", type=int, default=4, help="size budget for the exact engine")

    e = add("evaluate", "grade a rules file against a scenario")
    e.add_argument("scenario")
    e.add_argument("rules")
    e.add_argument("--semantics", choices=[s.value for s in Semantics], default=None)
    e.add_argument("--strict", action="store_true", help="reject unparsable lines instead of skipping them")

    x = add("experiment", "run a phase of the experiment matrix")
    x.add_argument("--phase", choices=[ph.value for ph in Phase], default=argparse.SUPPRESS)
    x.add_argument("--presets", type=_csv_list, default=argparse.SUPPRESS)
    x.add_argument("--strategies", type=_csv_list, default=argparse.SUPPRESS)
    x.add_argument("--engines", type=_csv_list, default=argparse.SUPPRESS)
    x.add_argument("--providers", type=_csv_list, default=argparse.SUPPRESS)
    x.add_argument("--seeds", type=_seed_list, default=argparse.SUPPRESS, help="e.g. 0-4 or 0,3,7")
    x.add_argument("--fixtures", default=argparse.SUPPRESS)
    x.add_argument("--fresh-scenarios", action="store_true", default=argparse.SUPPRESS)

    s = add("summarize", "rebuild summary tables from a run directory or results CSV")
    s.add_argument("path")
    return p


def _csv_list(text):
    return tuple(t.strip() for t in text.split(",") if t.strip())


def _seed_list(text):
    seeds = []
    for part in _csv_list(text):
        if "-" in part:
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    return tuple(seeds)


# -- configuration ----------------------------------------------------------


def load_config(path) -> dict:
    if not path:
        return {}
    with open(path, "rb") as fh:
        try:
            return tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise UsageError(f"{path}: {exc}") from None


def resolve(ns, config: dict, key: str, default=None, section=None):
    """Explicit flag, then config (section first, then top level), then default."""
    if key in ns:
        return ns[key]
    if section and key in config.get(section, {}):
        return config[section][key]
    if key in config and not isinstance(config[key], dict):
        return config[key]
    return default


def provider_config(pid: str, config: dict, fixtures=None) -> ProviderConfig:
    table = config.get("providers", {})
    if pid in table:
        return ProviderConfig(provider_id=pid, **table[pid])
    if pid == "echo":
        return ProviderConfig("echo", kind="echo")
    if pid == "fixture":
        if not fixtures:
            raise UsageError("provider 'fixture' needs --fixtures DIR")
        return ProviderConfig("fixture", endpoint=str(fixtures), kind="fixture")
    raise UsageError(f"unknown provider {pid!r}; define [providers.{pid}] in the config")


# -- commands ---------------------------------------------------------------


def cmd_generate(args, ns, config):
    seed = resolve(ns, config, "seed", 0)
    if args.preset:
        params = get_preset(args.preset).params_for(seed)
    else:
        params = GenerationParams.from_dict(config.get("generate", {})) if config.get("generate") else GenerationParams()
        params = params.replace(seed=seed)
    overrides = {
        "n_subjects": args.subjects,
        "n_objects": args.objects,
        "n_subject_attrs": args.subject_attrs,
        "n_object_attrs": args.object_attrs,
        "domain_cardinality": args.cardinality,
        "n_rules": args.rules,
        "max_conditions_per_rule": args.max_conditions,
        "target_density": args.density,
        "density_tolerance": args.tolerance,
        "target_ones": args.ones,
    }
    params = params.replace(**{k: v for k, v in overrides.items() if v is not None})
    sid = args.scenario_id or f"{args.preset or 'custom'}-s{seed}"
    scenario = generate_scenario(params, scenario_id=sid)
    out = resolve(ns, config, "out") or f"scenarios/{sid}"
    write_scenario(scenario, out)
    acm = scenario.acm
    print(
        f"{sid}: {acm.n_subjects}x{acm.n_objects}, {acm.ones} ones "
        f"({100 * acm.ones / acm.size:.2f}%), {len(scenario.ground_truth)} rules, "
        f"{scenario.attempts} attempt(s) -> {out}"
    )


def cmd_render(args, ns, config):
    scenario = read_scenario(args.scenario)
    fmt = args.format
    if fmt == "access-data":
        text = render_access_data(scenario)
    elif fmt == "acm":
        text = render_acm_text(scenario.acm)
    elif fmt == "acl":
        text = render_acl_text(scenario.acm)
    elif fmt == "attributes":
        text = render_attributes_json(scenario)
    elif fmt == "verbose":
        text = render_verbose(scenario)
    else:
        text = build_prompt(args.strategy, scenario).as_single_text()
    _emit(text, resolve(ns, config, "out"))


def _emit(text, out):
    if out:
        with open(out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_mine(args, ns, config):
    scenario = read_scenario(args.scenario)
    out = Path(resolve(ns, config, "out") or Path(args.scenario) / f"mined_{args.engine}.rules")
    if args.engine == "reference":
        policy = mine_generalize_validate(scenario, allow_empty=True)
        report, failure = grade(scenario, policy), None
    elif args.engine == "exact":
        policy = exact_minimal_policy(scenario, size_budget=args.budget)
        report, failure = grade(scenario, policy), None
    else:
        if not (args.strategy and args.provider):
            raise UsageError("--engine llm needs --strategy and --provider")
        cfg = provider_config(args.provider, config, args.fixtures)
        provider = make_provider(cfg, offline=resolve(ns, config, "offline", False))
        store = AttemptStore(out.parent / "attempts")
        attempt = mine_with_regeneration(scenario, args.strategy, provider, store)
        policy, report, failure = attempt.policy, attempt.metrics, attempt.failure
    out.parent.mkdir(parents=True, exist_ok=True)
    if policy is not None:
        _emit(emit_rules(policy), out)
    _print_report(report, failure)
    if policy is not None:
        print(f"rules -> {out}")


def _print_report(report, failure=None):
    if report is None:
        print(f"*  no usable policy ({failure})")
        return
    c = report.counts
    rows = [
        ("TP / TN / FP / FN", f"{c.tp} / {c.tn} / {c.fp} / {c.fn}"),
        ("accuracy", f"{float(report.accuracy):.4f}"),
        ("precision", f"{float(report.precision):.4f}"),
        ("recall", f"{float(report.recall):.4f}"),
        ("F1", f"{float(report.f1):.4f}"),
        ("size", f"{report.mined_size} (ground truth {report.ground_truth_size})"),
        ("ratio", str(report.ratio_rounded)),
    ]
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k.ljust(width)}  {v}")


def cmd_evaluate(args, ns, config):
    from .generator import density

    scenario = read_scenario(args.scenario)
    text = Path(args.rules).read_text(encoding="utf-8")
    scan = scan_rule_lines(text, strict=args.strict)
    for lineno in scan.skipped:
        log.warning("%s:%d: skipped unparsable line", args.rules, lineno)
    report = grade(scenario, scan.policy, Semantics(args.semantics) if args.semantics else None)
    _print_report(report)
    out = Path(resolve(ns, config, "out") or Path(args.rules).with_suffix(""))
    row = csv_row(report, scenario.scenario_id, "-", "-", density(scenario.acm))
    out.parent.mkdir(parents=True, exist_ok=True)
    _emit(report.to_json() + "\n", f"{out}.metrics.json")
    _emit(",".join(CSV_FIELDS) + "\n" + ",".join(row[k] for k in CSV_FIELDS) + "\n", f"{out}.metrics.csv")


def cmd_experiment(args, ns, config):
    sec = "experiment"
    fixtures = resolve(ns, config, "fixtures", None, sec)
    engines = tuple(resolve(ns, config, "engines", ("llm",), sec))
    provider_ids = tuple(resolve(ns, config, "providers", (), sec))
    if not provider_ids and "llm" in engines:
        provider_ids = tuple(config.get("providers", {})) or (("fixture",) if fixtures else ())
    phase = resolve(ns, config, "phase", "custom", sec)
    cfg = ExperimentConfig(
        phase=phase,
        presets=tuple(resolve(ns, config, "presets", (), sec)),
        strategies=tuple(resolve(ns, config, "strategies", (), sec)),
        engines=engines,
        providers=tuple(provider_config(p, config, fixtures) for p in provider_ids) if "llm" in engines else (),
        seeds=tuple(resolve(ns, config, "seeds", (resolve(ns, config, "seed", 0),), sec)),
        out_dir=resolve(ns, config, "out") or f"out/{Phase(phase).value}",
        jobs=int(resolve(ns, config, "jobs", 1)),
        offline=bool(resolve(ns, config, "offline", False)),
        fresh_scenarios=bool(resolve(ns, config, "fresh_scenarios", False, sec)),
    )
    root = run_experiment(cfg)
    print((root / "summary.txt").read_text(encoding="utf-8"), end="")
    print(f"results -> {root / 'results.csv'}")


def cmd_summarize(args, ns, config):
    print(summarize(args.path), end="")


COMMANDS = {
    "generate": cmd_generate,
    "render": cmd_render,
    "mine": cmd_mine,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "summarize": cmd_summarize,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    ns = {k: v for k, v in vars(args).items() if v is not None}
    try:
        config = load_config(ns.get("config"))
    except (UsageError, OSError) as exc:
        print(f"minebench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(
        level=logging.INFO if resolve(ns, config, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        COMMANDS[args.command](args, ns, config)
    except UsageError as exc:
        print(f"minebench: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"minebench: parse error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (MinebenchError, OSError, ValueError, KeyError) as exc:
        print(f"minebench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
