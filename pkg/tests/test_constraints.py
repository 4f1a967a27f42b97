import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ptp.constraints import (ConstraintStore, ModelError, add_constraint, count_groundings, eq, ne,
                             partition_constants)
from ptp.logic import Atom
from ptp.terms import Const, Domain, Predicate, Var


def dom(n, names=("A", "B", "C")):
    return {"D": Domain("D", n, list(names[:n]))}


x, y, z = (Var(n, "D") for n in "xyz")
A, B, C = (Const(n, "D") for n in "ABC")
R1 = Predicate("R", ("D",))
R2 = Predicate("R", ("D", "D"))


def test_direct_contradiction():
    s = ConstraintStore(dom(2)).add(ne(x, A))
    assert add_constraint(s, eq(x, A)) is None


def test_equality_propagates_exclusion():
    s = ConstraintStore(dom(2)).add_all([eq(x, y), ne(y, B)])
    assert s.live(x) == s.live(y) == {A}


def test_live_after_exclusion():
    s = ConstraintStore(dom(3)).add(ne(x, A))
    assert s.live(x) == {B, C}


def test_sort_mismatch():
    d = {**dom(2), "E": Domain("E", 1)}
    with pytest.raises(ModelError):
        ConstraintStore(d).add(eq(x, Var("u", "E")))


def test_count_groundings_examples():
    d = dom(3)
    assert count_groundings(Atom(R2, (x, y)), ConstraintStore(d).add(ne(x, A))) == 6
    assert count_groundings(Atom(R2, (A, B)), ConstraintStore(d).add(ne(x, A))) == 1
    assert count_groundings(Atom(R2, (x, y)), ConstraintStore(d).add(eq(x, y))) == 3


def test_partition_no_constraints_single_block():
    d = dom(3)
    assert partition_constants([x], ConstraintStore(d), d["D"]) == [[A, B, C]]


def test_partition_two_exclusions_blocks():
    d = dom(3)
    s = ConstraintStore(d).add_all([ne(x, A), ne(y, B)])
    blocks = partition_constants([x, y], s, d["D"])
    assert sorted(map(tuple, blocks)) == [(A,), (B,), (C,)]


def test_partition_residual_block():
    d = {"D": Domain("D", 5, ["A", "B"])}
    s = ConstraintStore(d).add_all([ne(x, A), ne(x, B)])
    blocks = partition_constants([x], s, d["D"])
    # A and B are unusable for x; the three anonymous objects share a block
    assert blocks == [[Const("D#2", "D"), Const("D#3", "D"), Const("D#4", "D")]]


# -- property: store counts agree with enumeration --------------------------

VARS = [x, y, z]
TERMS = VARS + [A, B, C]


@st.composite
def constraint_lists(draw):
    n = draw(st.integers(1, 3))
    cs = []
    for _ in range(draw(st.integers(0, 5))):
        lhs = draw(st.sampled_from(VARS))
        rhs = draw(st.sampled_from(TERMS[: 3 + n]))
        if rhs == lhs:
            continue
        cs.append((eq if draw(st.booleans()) else ne)(lhs, rhs))
    return n, cs


def _brute(n, cs):
    consts = [A, B, C][:n]
    out = 0
    for vals in itertools.product(consts, repeat=3):
        th = dict(zip(VARS, vals))
        ok = all((th.get(c.lhs, c.lhs) == th.get(c.rhs, c.rhs)) == c.equal for c in cs)
        out += ok
    return out


@settings(max_examples=300, deadline=None)
@given(constraint_lists())
def test_store_count_matches_enumeration(data):
    n, cs = data
    s = ConstraintStore(dom(n)).add_all(cs)
    want = _brute(n, cs)
    if s is None:
        assert want == 0
    else:
        assert s.count(VARS) == want
