import itertools

import pytest

from ptp.constraints import ConstraintStore, eq, ne
from ptp.logic import (CNF, And, Atom, Clause, Exists, Iff, Implies, Literal, Not, Or, UnsupportedFeature,
                       cnf_convert, evaluate, ground, unify)
from ptp.terms import Const, Domain, Predicate, Var

A0, B0, C0 = (Atom(Predicate(n), ()) for n in "ABC")
D = {"D": Domain("D", 2, ["B", "C"])}
R2 = Predicate("R", ("D", "D"))
S2 = Predicate("S", ("D", "D"))
R1 = Predicate("R", ("D",))
x, y, z = (Var(n, "D") for n in "xyz")
B, C = Const("B", "D"), Const("C", "D")


def clause_sets(cnf):
    return {frozenset((l.atom, l.negated) for l in c.literals) for c in cnf.clauses}


def equivalent(f, cnf, atoms):
    for bits in itertools.product((False, True), repeat=len(atoms)):
        w = dict(zip(atoms, bits))
        got = all(any(w[l.atom] != l.negated for l in c.literals) for c in cnf.clauses)
        if got != evaluate(f, w):
            return False
    return True


def test_cnf_distributes_or_over_and():
    f = Or((Not(A0), And((B0, C0))))
    got = cnf_convert(f)
    assert clause_sets(got) == {frozenset({(A0, True), (B0, False)}), frozenset({(A0, True), (C0, False)})}


def test_cnf_atom_is_unit_clause():
    assert clause_sets(cnf_convert(A0)) == {frozenset({(A0, False)})}


def test_cnf_iff():
    got = cnf_convert(Iff(A0, B0))
    assert clause_sets(got) == {frozenset({(A0, True), (B0, False)}), frozenset({(A0, False), (B0, True)})}


@pytest.mark.parametrize("f", [
    Implies(And((A0, B0)), Not(C0)),
    Iff(Or((A0, B0)), And((B0, Not(C0)))),
    Not(Iff(A0, Implies(B0, C0))),
    Or((And((A0, B0)), And((Not(A0), C0)))),
])
def test_cnf_truth_table(f):
    assert equivalent(f, cnf_convert(f), [A0, B0, C0])


def test_existential_rejected():
    with pytest.raises(UnsupportedFeature):
        cnf_convert(Exists(x, Atom(R1, (x,))))


def test_unify_binds_variables():
    s = ConstraintStore(D)
    u = unify(Literal(Atom(R2, (x, y))), Literal(Atom(R2, (B, z))), s)
    assert u is not None
    assert u.value(x) == B
    assert u.find(y) == u.find(z)


def test_unify_respects_store():
    s = ConstraintStore(D).add(ne(x, B))
    assert unify(Literal(Atom(R1, (x,))), Literal(Atom(R1, (B,))), s) is None


def test_unify_up_to_sign():
    u = unify(Literal(Atom(R1, (x,))), Literal(Atom(R1, (y,)), True), ConstraintStore(D))
    assert u is not None and u.find(x) == u.find(y)


def test_ground_worked_example():
    cnf = CNF((Clause((Literal(Atom(R2, (B, C))),)),
               Clause((Literal(Atom(R2, (x, y)), True), Literal(Atom(S2, (y, z)))),
                      ConstraintStore(D).add_all([eq(x, y), ne(z, B)]))))
    g = ground(cnf, None, D)
    want = {
        frozenset({(Atom(R2, (B, C)), False)}),
        frozenset({(Atom(R2, (B, B)), True), (Atom(S2, (B, C)), False)}),
        frozenset({(Atom(R2, (C, C)), True), (Atom(S2, (C, C)), False)}),
    }
    assert clause_sets(g) == want


def test_ground_clause_without_variables_is_itself():
    c = Clause((Literal(Atom(R1, (B,))),))
    assert clause_sets(ground(CNF((c,)), None, D)) == {frozenset({(Atom(R1, (B,)), False)})}


def test_ground_enumerates_domain():
    g = ground(CNF((Clause((Literal(Atom(R1, (x,))),)),)), None, D)
    assert clause_sets(g) == {frozenset({(Atom(R1, (B,)), False)}), frozenset({(Atom(R1, (C,)), False)})}
