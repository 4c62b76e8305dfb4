from pathlib import Path

import pytest
from hypothesis import strategies as st

from minebench import PolicySet, Rule, Scenario, reconstruct_acm
from minebench.model import AttributeRef, AttributeValue, Kind

DATA = Path(__file__).parent / "data"


def make_scenario(subjects, objects, rules, scenario_id="t"):
    policy = PolicySet(Rule(conds) for conds in rules)
    acm = reconstruct_acm(policy, subjects, objects)
    return Scenario(subjects, objects, policy, acm, scenario_id=scenario_id)


@pytest.fixture
def sample_scenario():
    # 4x4 example behind the ACM/ACL prompt illustrations. Only SV[0], the
    # first value of SV[1], SV[2], SV[3] and OV[0] are shown there; the other
    # values are filled in so SA_1 still separates permit from deny subjects.
    subjects = [(1, 3, 2), (1, 4, 4), (3, 2, 5), (3, 1, 3)]
    objects = [(5, 4, 1), (3, 2, 2), (2, 1, 5), (4, 3, 3)]
    return make_scenario(subjects, objects, [[("SA_1", 3)]], "sample")


@pytest.fixture
def prompt1_records():
    return [
        ((1, 1), (1, 1), 1),
        ((2, 2), (1, 1), 1),
        ((3, 1), (2, 1), 0),
    ]


@pytest.fixture
def deny_example_records():
    return [
        ((1, 1), (1, 1), 1),
        ((2, 2), (1, 1), 1),
        ((3, 1), (1, 1), 0),
        ((4, 1), (1, 1), 1),
    ]


# -- hypothesis strategies --------------------------------------------------


@st.composite
def rules(draw, n_sa=3, n_oa=3, card=4, decision=None):
    refs = [AttributeRef(Kind.SUBJECT, i) for i in range(1, n_sa + 1)]
    refs += [AttributeRef(Kind.OBJECT, i) for i in range(1, n_oa + 1)]
    chosen = draw(st.lists(st.sampled_from(refs), unique=True, max_size=len(refs)))
    conds = tuple(AttributeValue(r, draw(st.integers(1, card))) for r in chosen)
    dec = decision or draw(st.sampled_from(["permit", "deny"]))
    return Rule(conds, dec)


@st.composite
def policies(draw, n_sa=3, n_oa=3, card=4, decision=None, max_rules=6):
    return PolicySet(draw(st.lists(rules(n_sa, n_oa, card, decision), max_size=max_rules)))


@st.composite
def profiles(draw, n, n_attrs=3, card=4):
    return [tuple(draw(st.integers(1, card)) for _ in range(n_attrs)) for _ in range(n)]
