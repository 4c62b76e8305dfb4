"""Acceptance checks. Each test prints one PASS/FAIL line for its criterion."""

import time
from fractions import Fraction

import numpy as np
import pytest

from minebench.cli import main
from minebench.engine import Semantics, decide
from minebench.errors import ProviderError
from minebench.experiment import ExperimentConfig, run_experiment
from minebench.generator import GenerationParams, density, generate_scenario
from minebench.metrics import ConfusionCounts, confusion, grade, score
from minebench.miners import exact_minimal_policy, mine_generalize_validate
from minebench.model import AccessMatrix, Decision, PolicySet, Rule
from minebench.presets import ORACLE_PRESET, PRESETS, SCALABILITY_PRESETS, TC_PRESETS, get_preset
from minebench.providers import ScriptedProvider, is_anomalous, mine_with_regeneration
from minebench.serialization import (
    emit_rules,
    parse_rule_lines,
    read_scenario,
    render_access_records,
    render_acl_text,
    render_acm_text,
)

from test_engine import DENY_EXAMPLE_RULES
from test_providers import FIXED, _truth_table, truth_text
from test_serialization import SAMPLE_ACL, SAMPLE_ACM, PROMPT1_DATASET

TC_ONES = {"TC1": 29, "TC2": 69, "TC3": 91, "TC4": 104, "TC5": 118}


@pytest.fixture
def report(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nAC{n} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok

    return emit


def _consistency_scenarios():
    for seed in range(100):
        yield generate_scenario(GenerationParams(seed=seed))
    for seed in range(100):
        yield generate_scenario(GenerationParams(n_subjects=30, n_objects=30, density_tolerance=0.05, seed=seed))


@pytest.fixture(scope="module")
def consistency_run():
    t0 = time.perf_counter()
    scenarios = list(_consistency_scenarios())
    return scenarios, time.perf_counter() - t0


def _violations(sc):
    cells = sc.acm.cells
    bad = pairs = 0
    for profiles, axis in ((sc.subjects, 0), (sc.objects, 1)):
        for i in range(len(profiles)):
            for k in range(i + 1, len(profiles)):
                if profiles[i] == profiles[k]:
                    pairs += 1
                    a, b = (cells[i], cells[k]) if axis == 0 else (cells[:, i], cells[:, k])
                    bad += not np.array_equal(a, b)
    return bad, pairs


def test_ac1_consistency(consistency_run, report):
    scenarios, gen_time = consistency_run
    t0 = time.perf_counter()
    bad = pairs = 0
    for sc in scenarios:
        b, p = _violations(sc)
        bad, pairs = bad + b, pairs + p
    elapsed = gen_time + time.perf_counter() - t0
    ok = len(scenarios) == 200 and bad == 0 and elapsed < 10
    report(1, ok, f"{len(scenarios)} scenarios, {pairs} equal-profile pairs, {bad} violations, {elapsed:.2f}s")
    assert ok


def test_ac2_ground_truth_fidelity(consistency_run, report):
    scenarios, _ = consistency_run
    misses = 0
    for sc in scenarios:
        r = grade(sc, sc.ground_truth)
        misses += not (r.accuracy == r.precision == r.recall == r.f1 == 1 and r.size_ratio == 1)
    report(2, misses == 0, f"{len(scenarios)} scenarios, {misses} imperfect")
    assert misses == 0


def test_ac3_presets(tmp_path, report, capsys):
    problems = []
    for name, ones in TC_ONES.items():
        for seed in range(5):
            out = tmp_path / f"{name}-{seed}"
            code = main(["generate", "--preset", name, "--seed", str(seed), "--out", str(out)])
            sc = read_scenario(out) if code == 0 else None
            if sc is None or sc.acm.shape != (15, 15) or sc.acm.ones != ones or len(sc.ground_truth) != 10:
                problems.append(f"{name}/s{seed}")
    densities = {}
    for name in SCALABILITY_PRESETS:
        sc = generate_scenario(get_preset(name).params_for(0))
        densities[name] = float(density(sc.acm))
        if not 0.08 <= densities[name] <= 0.12 or sc.acm.size != int(name.split("-")[1]):
            problems.append(name)
    capsys.readouterr()
    ok = not problems
    spread = f"{min(densities.values()):.4f}..{max(densities.values()):.4f}"
    report(3, ok, f"TC ones 29/69/91/104/118 x 5 seeds, 8 scalability sizes density {spread}; problems: {problems or 'none'}")
    assert ok


def test_ac4_reference_miner(report):
    t0 = time.perf_counter()
    problems, densities = [], []
    for name in TC_PRESETS:
        for seed in range(20):
            sc = generate_scenario(get_preset(name).params_for(seed))
            densities.append(float(density(sc.acm)))
            policy = mine_generalize_validate(sc)
            r = grade(sc, policy)
            if not (r.precision == 1 and r.recall == 1 and len(policy) <= sc.acm.ones):
                problems.append(f"{name}/s{seed}")
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 60 and len(densities) == 100
    report(4, ok, f"100 scenarios, density {min(densities):.1%}..{max(densities):.1%}, "
                  f"{len(problems)} unsound/incomplete, {elapsed:.2f}s")
    assert ok


def test_ac5_oracle_agreement(report):
    problems, ratios = [], []
    for seed in range(50):
        sc = generate_scenario(ORACLE_PRESET.params_for(seed))
        assert sc.acm.size <= 64 and sc.params.n_attrs <= 6 and len(sc.ground_truth) <= 3
        exact = exact_minimal_policy(sc)
        greedy = mine_generalize_validate(sc, allow_empty=True)
        if not (grade(sc, exact).is_perfect and len(exact) <= len(sc.ground_truth) and len(exact) <= len(greedy)):
            problems.append(seed)
        if len(exact):
            ratios.append(Fraction(len(greedy), len(exact)))
    mean = float(sum(ratios) / len(ratios))
    ok = not problems
    report(5, ok, f"50 scenarios, {len(problems)} violations; greedy/optimal size ratio "
                  f"mean {mean:.3f}, max {float(max(ratios)):.2f}")
    assert ok


def test_ac6_golden_formats(sample_scenario, prompt1_records, report):
    goldens = (
        render_acm_text(sample_scenario.acm) == SAMPLE_ACM,
        render_acl_text(sample_scenario.acm) == SAMPLE_ACL,
        render_access_records(prompt1_records) == PROMPT1_DATASET,
    )
    rng = np.random.default_rng(2024)
    diffs = 0
    for _ in range(1000):
        rules = []
        for _ in range(int(rng.integers(1, 8))):
            conds = [(f"{k}_{i}", int(rng.integers(1, 30))) for k in ("SA", "OA") for i in range(1, 6) if rng.random() < 0.4]
            rules.append(Rule(conds, "permit" if rng.random() < 0.8 else "deny"))
        policy = PolicySet(rules)
        text = emit_rules(policy)
        back = parse_rule_lines(text, strict=True)
        diffs += back != policy.normalized() or emit_rules(back) != text
    ok = all(goldens) and diffs == 0
    report(6, ok, f"ACM/ACL/Prompt-1 goldens {sum(goldens)}/3 byte-equal, 1000 round trips, {diffs} diffs")
    assert ok


def test_ac7_metric_formulas(report):
    rng = np.random.default_rng(7)
    mismatches = 0
    for _ in range(100):
        a = rng.integers(0, 2, (10, 10))
        b = rng.integers(0, 2, (10, 10))
        tp = int(((a == 1) & (b == 1)).sum())
        tn = int(((a == 0) & (b == 0)).sum())
        fp = int(((a == 0) & (b == 1)).sum())
        fn = int(((a == 1) & (b == 0)).sum())
        c = confusion(AccessMatrix(a), AccessMatrix(b))
        r = score(c, 1, 1)
        p = Fraction(tp, tp + fp) if tp + fp else Fraction(int(tp + fn == 0))
        rc = Fraction(tp, tp + fn) if tp + fn else Fraction(1)
        f1 = 2 * p * rc / (p + rc) if p + rc else Fraction(0)
        mismatches += (c.tp, c.tn, c.fp, c.fn) != (tp, tn, fp, fn) or (
            r.accuracy, r.precision, r.recall, r.f1) != (Fraction(tp + tn, 100), p, rc, f1)
    # rows with 0.00 precision: nothing right, with or without false positives
    zero_rows = [score(ConfusionCounts(0, 196, 0, 29), 1, 10), score(ConfusionCounts(0, 150, 46, 29), 4, 10)]
    degenerate_ok = all(r.precision == 0 and r.recall == 0 and r.f1 == 0 for r in zero_rows)
    envelope = score(ConfusionCounts(5000, 4900, 60, 40), 1, 1)
    envelope_ok = envelope.accuracy == Fraction(99, 100) and envelope.counts.fp + envelope.counts.fn == 100
    ok = mismatches == 0 and degenerate_ok and envelope_ok
    report(7, ok, f"100 random pairs, {mismatches} mismatches; zero-precision rows "
                  f"{'ok' if degenerate_ok else 'wrong'}; 0.99 of 10000 cells = 100 errors "
                  f"{'ok' if envelope_ok else 'wrong'}")
    assert ok


def test_ac8_regeneration(report):
    tc1 = generate_scenario(get_preset("TC1").params_for(0), scenario_id="TC1-s0")
    cases = _truth_table(tc1)
    wrong = sum(is_anomalous(a, tc1) is not want for a, want in cases)
    p1 = ScriptedProvider([truth_text(tc1), truth_text(tc1)])
    mine_with_regeneration(tc1, "prompt1", p1, clock=FIXED)
    p2 = ScriptedProvider(["{'rule': [], 'decision': 'permit'}", truth_text(tc1), truth_text(tc1)])
    mine_with_regeneration(tc1, "prompt1", p2, clock=FIXED)
    p3 = ScriptedProvider(["prose only", ProviderError("down"), ProviderError("down")])
    both_failed = mine_with_regeneration(tc1, "prompt1", p3, clock=FIXED)
    star = both_failed.failed and both_failed.metrics is None
    ok = len(cases) == 50 and wrong == 0 and p1.calls == 1 and p2.calls == 2 and star
    report(8, ok, f"{len(cases)}-case truth table, {wrong} wrong; calls {p1.calls} when fine, "
                  f"{p2.calls} when anomalous; both failed -> {'*' if star else 'value'}")
    assert ok


def test_ac9_deny_overrides(deny_example_records, report):
    policy = parse_rule_lines(DENY_EXAMPLE_RULES)
    want = [Decision.PERMIT if d else Decision.DENY for *_, d in deny_example_records]
    got = [decide(policy, s, o, Semantics.DENY_OVERRIDES) for s, o, _ in deny_example_records]
    rng = np.random.default_rng(9)

    def rule(decision):
        return Rule([(f"{k}_{i}", int(rng.integers(1, 4))) for k in ("SA", "OA") for i in (1, 2, 3)
                     if rng.random() < 0.35], decision)

    violations = 0
    for _ in range(1000):
        s, o = tuple(rng.integers(1, 4, 3).tolist()), tuple(rng.integers(1, 4, 3).tolist())
        permits = [rule("permit") for _ in range(int(rng.integers(0, 4)))]
        denies = [rule("deny") for _ in range(int(rng.integers(0, 3)))]
        base = decide(PolicySet(permits + denies), s, o, Semantics.DENY_OVERRIDES)
        more_deny = decide(PolicySet(permits + denies + [rule("deny")]), s, o, Semantics.DENY_OVERRIDES)
        more_permit = decide(PolicySet(permits + [rule("permit")]), s, o, Semantics.PERMIT_ONLY)
        violations += base is Decision.DENY and more_deny is Decision.PERMIT
        violations += decide(PolicySet(permits), s, o, Semantics.PERMIT_ONLY) is Decision.PERMIT and (
            more_permit is Decision.DENY)
    ok = len(policy) == 2 and got == want and violations == 0
    report(9, ok, f"worked example {sum(g == w for g, w in zip(got, want))}/4 correct with 2 rules, "
                  f"1000 monotonicity samples, {violations} violations")
    assert ok


def test_ac10_determinism(tmp_path, report):
    def run(d):
        cfg = ExperimentConfig(presets=tuple(PRESETS), engines=("reference",), seeds=(0, 1),
                               out_dir=str(d), offline=True)
        return (run_experiment(cfg) / "results.csv").read_bytes()

    a, b = run(tmp_path / "a"), run(tmp_path / "b")
    rows = a.decode().count("\n") - 1
    ok = a == b and rows == 2 * len(PRESETS)
    report(10, ok, f"offline reference run over {len(PRESETS)} presets x 2 seeds, {rows} rows, "
                   f"CSVs {'byte-identical' if a == b else 'differ'}")
    assert ok

