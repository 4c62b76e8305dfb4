import json

import numpy as np
import pytest
from hypothesis import given, settings

from conftest import make_scenario, policies
from minebench.errors import KindMismatch, MalformedRule, NoRulesFound, ParseError
from minebench.generator import GenerationParams, generate_scenario
from minebench.model import AccessMatrix, PolicySet, Rule
from minebench.serialization import (
    InputMethod,
    access_data_matrix,
    emit_rule_line,
    emit_rules,
    parse_access_data,
    parse_acl_text,
    parse_acm_text,
    parse_attributes_json,
    parse_rule_lines,
    read_scenario,
    render_access_data,
    render_access_records,
    render_acl_input,
    render_acl_text,
    render_acm_input,
    render_verbose,
    scan_rule_lines,
    write_scenario,
)

SAMPLE_ACM = "0 0 0 0\n0 0 0 0\n1 1 1 1\n1 1 1 1\n"
SAMPLE_ACL = "0: 2 3\n1: 2 3\n2: 2 3\n3: 2 3\n"
SAMPLE_SV_HEAD = """{
    "SV": [
        [
            "S_1_1",
            "S_2_3",
            "S_3_2"
        ],
        [
            "S_1_1",
"""
SAMPLE_OV_HEAD = """    "OV": [
        [
            "O_1_5",
            "O_2_4",
            "O_3_1"
        ],
        [
            "O_1_3",
"""
PROMPT1_DATASET = """\
S_1_1 S_2_1 O_1_1 O_2_1 1
S_1_2 S_2_2 O_1_1 O_2_1 1
S_1_3 S_2_1 O_1_2 O_2_1 0
"""
DENY_DATASET = """\
S_1_1 S_2_1 O_1_1 O_2_1 1
S_1_2 S_2_2 O_1_1 O_2_1 1
S_1_3 S_2_1 O_1_1 O_2_1 0
S_1_4 S_2_1 O_1_1 O_2_1 1
"""


# -- goldens ----------------------------------------------------------------


def test_sample_acm_golden(sample_scenario):
    acm_text, attrs = render_acm_input(sample_scenario)
    assert acm_text == SAMPLE_ACM
    assert attrs.startswith(SAMPLE_SV_HEAD)
    assert SAMPLE_OV_HEAD in attrs


def test_sample_acl_golden(sample_scenario):
    acl_text, attrs = render_acl_input(sample_scenario)
    assert acl_text == SAMPLE_ACL
    assert attrs == render_acm_input(sample_scenario)[1]


def test_prompt1_dataset_golden(prompt1_records):
    assert render_access_records(prompt1_records) == PROMPT1_DATASET
    assert parse_access_data(PROMPT1_DATASET) == prompt1_records


def test_deny_dataset_golden(deny_example_records):
    assert render_access_records(deny_example_records) == DENY_DATASET


def test_smallest_access_data():
    sc = make_scenario([(1,)], [(1,)], [[]])
    assert render_access_data(sc) == "S_1_1 O_1_1 1\n"


def _two_by_two():
    # S1 may access O1 only, S2 may access O2 only
    return make_scenario(
        [(1, 1), (2, 2)], [(1, 1), (2, 2)], [[("SA_1", 1), ("OA_1", 1)], [("SA_1", 2), ("OA_1", 2)]]
    )


def test_two_by_two_access_data_row_major():
    lines = render_access_data(_two_by_two()).splitlines()
    assert [l.rsplit(" ", 1)[1] for l in lines] == ["1", "0", "0", "1"]
    assert lines[1] == "S_1_1 S_2_1 O_1_2 O_2_2 0"


LABELS = {
    ("SA1", 1): "Dept_A", ("SA1", 2): "Dept_B", ("SA2", 1): "Role_X", ("SA2", 2): "Role_Y",
    ("OA1", 1): "Type_A", ("OA1", 2): "Type_B", ("OA2", 1): "Level_1", ("OA2", 2): "Level_2",
}


def test_verbose_access_data():
    text = render_verbose(_two_by_two(), InputMethod.ACCESS_DATA, LABELS)
    assert text == (
        "S1: SA1=Dept_A, SA2=Role_X | O1: OA1=Type_A, OA2=Level_1 | Decision=1\n"
        "S1: SA1=Dept_A, SA2=Role_X | O2: OA1=Type_B, OA2=Level_2 | Decision=0\n"
        "S2: SA1=Dept_B, SA2=Role_Y | O1: OA1=Type_A, OA2=Level_1 | Decision=0\n"
        "S2: SA1=Dept_B, SA2=Role_Y | O2: OA1=Type_B, OA2=Level_2 | Decision=1\n"
    )


def test_verbose_acm_and_acl():
    attrs = (
        "\nSubject Attributes:\nS1: SA1=Dept_A, SA2=Role_X\nS2: SA1=Dept_B, SA2=Role_Y\n"
        "\nObject Attributes:\nO1: OA1=Type_A, OA2=Level_1\nO2: OA1=Type_B, OA2=Level_2\n"
    )
    acm = render_verbose(_two_by_two(), InputMethod.ACM_PLUS_ATTRIBUTES, LABELS)
    assert acm == "ACM:\n        O1  O2\nS1      1   0\nS2      0   1\n" + attrs
    acl = render_verbose(_two_by_two(), InputMethod.ACL_PLUS_ATTRIBUTES, LABELS)
    assert acl == "Access Control Lists:\nO1: [S1]\nO2: [S2]\n" + attrs


def test_verbose_without_labels_uses_tokens():
    assert render_verbose(_two_by_two()).startswith("S1: SA1=S_1_1, SA2=S_2_1 | O1: OA1=O_1_1")


# -- data formats round trip ------------------------------------------------


def test_all_zero_acl():
    assert render_acl_text(AccessMatrix.zeros(2, 3)) == "0:\n1:\n2:\n"


@pytest.mark.parametrize("seed", range(5))
def test_formats_describe_same_matrix(seed):
    sc = generate_scenario(GenerationParams(seed=seed))
    acm_text, attrs = render_acm_input(sc)
    acl_text, _ = render_acl_input(sc)
    n, m = sc.acm.shape
    assert parse_acm_text(acm_text) == sc.acm
    assert parse_acl_text(acl_text, n, m) == sc.acm
    assert access_data_matrix(render_access_data(sc), n, m) == sc.acm
    assert len(render_access_data(sc).splitlines()) == n * m
    subs, objs = parse_attributes_json(attrs)
    assert tuple(subs) == sc.subjects and tuple(objs) == sc.objects


def test_bad_acl_line_reports_line():
    with pytest.raises(ParseError, match="line 2"):
        parse_acl_text("0: 1\nx: 1\n", 2, 2)


def test_bad_access_data_line():
    with pytest.raises(ParseError):
        parse_access_data("S_1_1 O_1_1 2\n")
    with pytest.raises(ParseError):
        access_data_matrix(PROMPT1_DATASET, 2, 2)


def test_scenario_directory_round_trip(tmp_path):
    sc = generate_scenario(GenerationParams(seed=3), scenario_id="rt")
    d = write_scenario(sc, tmp_path / "rt")
    for name in ("output.json", "ACM.txt", "groundtruth.rules", "meta.json", "access_data.txt", "ACL.txt"):
        assert (d / name).exists()
    back = read_scenario(d)
    assert back == sc and back.scenario_id == "rt"
    assert json.loads((d / "output.json").read_text())["SV"][0][0].startswith("S_1_")
    assert b"\r\n" not in (d / "ACM.txt").read_bytes()


# -- rule lines -------------------------------------------------------------


def test_emit_prompt1_answer():
    r = Rule([("OA_1", 1), ("OA_2", 1)])
    assert emit_rule_line(r) == "{'rule': [('OA_1', 'O_1_1'), ('OA_2', 'O_2_1')], 'decision': 'permit'}"


def test_emit_normalizes_and_deny():
    r = Rule([("SA_2", 2), ("OA_1", 7)], "deny")
    assert emit_rule_line(r) == "{'rule': [('OA_1', 'O_1_7'), ('SA_2', 'S_2_2')], 'decision': 'deny'}"


def test_parse_single_rule():
    p = parse_rule_lines("{'rule': [('SA_1', 'S_1_3')], 'decision': 'permit'}")
    assert p == PolicySet([Rule([("SA_1", 3)])])


def test_parse_wildcard():
    p = parse_rule_lines("{'rule': [], 'decision': 'permit'}\n")
    assert p == PolicySet([Rule()])


def test_parse_skips_prose():
    text = (
        "Here are the rules you asked for:\n"
        "{'rule': [('OA_1', 'O_1_1')], 'decision': 'permit'}\n"
        "\n"
        '{"rule": [("SA_2", "S_2_2"),   ("OA_3","O_3_1")], "decision": "permit"}\n'
    )
    scan = scan_rule_lines(text)
    assert len(scan.policy) == 2
    assert scan.skipped == [1]
    assert scan.n_skipped == 1
    with pytest.raises(ParseError):
        scan_rule_lines(text, strict=True)


def test_parse_tolerates_fences_curly_quotes_and_wrapping():
    text = (
        "```python\n"
        "{‘rule’: [(‘OA_1’, ‘O_1_1’), (‘OA_2’, ‘O_2_1’)], ‘decision’: ‘permit’}\n"
        "{'rule': [('SA_1', 'S_1_3'), ('SA_2', 'S_2_1'), \n"
        " ('OA_1', 'O_1_1'), ('OA_2', 'O_2_1')], 'decision': 'deny'},\n"
        "```\n"
    )
    scan = scan_rule_lines(text)
    assert len(scan.policy) == 2 and scan.policy.has_deny
    assert scan.skipped == [1, 5]


def test_parse_errors():
    with pytest.raises(NoRulesFound):
        parse_rule_lines("I could not find any rules.\n")
    with pytest.raises(MalformedRule, match="line 2"):
        parse_rule_lines("{'rule': [], 'decision': 'permit'}\n{'rule': [('SA_1', 'S_1_1')\n")
    with pytest.raises(KindMismatch):
        parse_rule_lines("{'rule': [('SA_1', 'O_1_2')], 'decision': 'permit'}")
    with pytest.raises(KindMismatch):
        parse_rule_lines("{'rule': [('SA_2', 'S_1_2')], 'decision': 'permit'}")
    with pytest.raises(MalformedRule):
        parse_rule_lines("{'rule': [], 'decision': 'maybe'}")


def test_parse_result_is_normalized():
    p = parse_rule_lines("{'rule': [('SA_2', 'S_2_2'), ('OA_1', 'O_1_7')], 'decision': 'permit'}")
    assert [c.token for c in p[0].conditions] == ["O_1_7", "S_2_2"]


@settings(max_examples=200)
@given(policies(n_sa=4, n_oa=4, card=12))
def test_emit_parse_round_trip(policy):
    if not len(policy):
        return
    text = emit_rules(policy)
    back = parse_rule_lines(text, strict=True)
    assert back == policy.normalized()
    assert emit_rules(back) == text


def test_emit_parse_round_trip_1000_random_policies():
    rng = np.random.default_rng(0)
    diffs = 0
    for _ in range(1000):
        rules = []
        for _ in range(int(rng.integers(1, 8))):
            conds = [(f"{k}_{i}", int(rng.integers(1, 20))) for k in ("SA", "OA") for i in range(1, 5) if rng.random() < 0.4]
            rules.append(Rule(conds, "permit" if rng.random() < 0.8 else "deny"))
        policy = PolicySet(rules)
        text = emit_rules(policy)
        back = parse_rule_lines(text, strict=True)
        diffs += back != policy.normalized() or emit_rules(back) != text
    assert diffs == 0
