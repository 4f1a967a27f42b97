import math

import pytest

from corpus import np_pkb_z, random_small_pkb, rel_close
from ptp.constraints import ModelError
from ptp.logic import And, Atom, Literal, Not, Or
from ptp.pkb import (PKB, InconsistentKB, add_evidence, kbmc_prune, log_partition_function,
                     partition_function, ptp, wcnf)
from ptp.terms import Const, Var


def one_atom(phi=0.5, forall=False, n=3):
    k = PKB()
    k.add_domain("D", n)
    r = k.add_predicate("R", ["D"])
    arg = Var("x", "D") if forall else Const("A", "D")
    k.add(Atom(r, (arg,)), phi)
    return k, r


def test_wcnf_ground_soft_formula():
    k, r = one_atom()
    wc = wcnf(k)
    aux = [p for p in wc.predicates if p.name != "R"]
    assert len(aux) == 1 and aux[0].sorts == ()
    assert wc.weights.get(aux[0]) == (1.0, 0.5)
    assert len(wc.cnf.clauses) == 2


def test_wcnf_first_order_aux_takes_variables():
    k, r = one_atom(0.3, forall=True)
    wc = wcnf(k)
    aux = [p for p in wc.predicates if p.name != "R"][0]
    assert aux.sorts == ("D",)
    assert wc.weights.get(aux) == (1.0, 0.3)


def test_wcnf_hard_only_has_unit_weights():
    k, r = one_atom(0.0)
    wc = wcnf(k)
    assert not wc.weights.weights
    assert len(wc.predicates) == 1


def test_negative_potential_rejected():
    k, r = one_atom()
    with pytest.raises(ModelError):
        k.add(Atom(r, (Var("x", "D"),)), -0.1)


def test_partition_function_examples():
    assert partition_function(one_atom(n=1)[0]) == pytest.approx(1.5, rel=1e-12)
    assert partition_function(one_atom(forall=True)[0]) == pytest.approx(3.375, rel=1e-12)
    k = PKB()
    k.add_predicate("U")
    assert partition_function(k) == pytest.approx(2.0, rel=1e-12)
    assert partition_function(one_atom(forall=True)[0], engine="ground") == pytest.approx(3.375, rel=1e-12)


def test_ptp_examples():
    k, r = one_atom()
    assert ptp(k, Atom(r, (Const("A", "D"),))).probability == pytest.approx(2 / 3, rel=1e-12)
    k, r = one_atom(forall=True)
    assert ptp(k, Atom(r, (Const("A", "D"),))).probability == pytest.approx(2 / 3, rel=1e-12)


def test_entailed_query_is_exactly_one():
    k = PKB()
    k.add_domain("D", 3)
    r = k.add_predicate("R", ["D"])
    s = k.add_predicate("S", ["D"])
    x = Var("x", "D")
    k.hard(Or((Not(Atom(r, (x,))), Atom(s, (x,)))))
    k.hard(Atom(r, (Const("A", "D"),)))
    assert ptp(k, Atom(s, (Const("A", "D"),))).probability == 1.0
    assert ptp(k, Atom(s, (Const("B", "D"),))).probability < 1.0


def test_evidence_becomes_hard_formula():
    k, r = one_atom(forall=True)
    a = Atom(r, (Const("A", "D"),))
    for neg in (False, True):
        out = add_evidence(k, [Literal(a, neg)])
        assert out.formulas[-1].phi == 0.0
        assert out.formulas[-1].formula == (Not(a) if neg else a)
    assert len(k.formulas) == 1


def test_non_ground_evidence_rejected():
    k, r = one_atom(forall=True)
    with pytest.raises(ModelError):
        add_evidence(k, [Literal(Atom(r, (Var("x", "D"),)))])


def test_contradictory_evidence_is_inconsistent():
    k, r = one_atom(forall=True)
    a = Atom(r, (Const("A", "D"),))
    with pytest.raises(InconsistentKB):
        ptp(k, a, evidence=[Literal(a), Literal(a, True)])


def test_kbmc_prunes_unconnected_formula():
    k = PKB()
    k.add_domain("D", 2)
    r = k.add_predicate("R", ["D"])
    s = k.add_predicate("S", ["D"])
    ra, sb = Atom(r, (Const("A", "D"),)), Atom(s, (Const("B", "D"),))
    k.add(ra, 0.5)
    k.add(sb, 0.5)
    pruned, store = kbmc_prune(k, ra)
    assert [wf.formula for wf in pruned.formulas] == [ra]
    assert ptp(k, ra, prune=True).probability == pytest.approx(ptp(k, ra).probability, rel=1e-12)
    # query sharing nothing with K: answer from its own worlds
    t = k.add_predicate("T", [])
    q = Atom(t, ())
    assert kbmc_prune(k, q)[0].formulas == []
    assert ptp(k, q, prune=True).probability == pytest.approx(0.5, rel=1e-12)


def test_kbmc_connected_is_identity():
    k = PKB()
    k.add_domain("D", 2)
    r = k.add_predicate("R", ["D"])
    s = k.add_predicate("S", ["D"])
    x = Var("x", "D")
    k.add(Or((Atom(r, (x,)), Atom(s, (x,)))), 0.4)
    k.add(And((Atom(s, (x,)), Not(Atom(r, (x,))))), 0.7)
    assert kbmc_prune(k, Atom(r, (Const("A", "D"),)))[0].formulas == k.formulas


def test_pruning_preserves_probability():
    for seed in range(150):
        k, ev, q = random_small_pkb(seed)
        k = add_evidence(k, ev)
        if np_pkb_z(k) == 0:
            continue
        assert rel_close(ptp(k, q, prune=True).probability, ptp(k, q).probability), seed


def test_log_partition_matches_numpy_oracle():
    for seed in range(100):
        k, ev, _ = random_small_pkb(seed)
        z = np_pkb_z(add_evidence(k, ev))
        lz = log_partition_function(add_evidence(k, ev))
        assert rel_close(z, 0.0 if lz == -math.inf else math.exp(lz)), seed
