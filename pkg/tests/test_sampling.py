import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from corpus import np_pkb_z, random_small_pkb
from ptp.logic import Atom, Not, Or
from ptp.pkb import PKB, add_evidence, ptp
from ptp.sampling import (Estimate, estimate_probability, pkb_sampler, proposal_one_step, run_sampler,
                          sample_log_z, stream)
from ptp.terms import Const, Var

logs = st.lists(st.floats(-50, 50) | st.just(-math.inf), min_size=2, max_size=60)


@settings(max_examples=200, deadline=None)
@given(logs)
def test_welford_matches_numpy(xs):
    e = Estimate()
    for x in xs:
        e.add(x)
    ref = max(xs)
    if ref == -math.inf:
        assert e.value == 0.0
        return
    scaled = np.exp(np.array(xs) - ref)
    assert e.value == pytest.approx(float(scaled.mean()) * math.exp(ref), rel=1e-9)
    sd = float(scaled.std(ddof=1)) / math.sqrt(len(xs)) * math.exp(ref)
    assert e.stderr == pytest.approx(sd, rel=1e-6, abs=1e-300 + 1e-12 * e.value)


@settings(max_examples=200, deadline=None)
@given(logs, logs)
def test_merge_equals_sequential(xs, ys):
    a, b, c = Estimate(), Estimate(), Estimate()
    for x in xs:
        a.add(x)
        c.add(x)
    for y in ys:
        b.add(y)
        c.add(y)
    m = a.merge(b)
    assert m.n == c.n
    assert m.value == pytest.approx(c.value, rel=1e-9)
    assert m.stderr == pytest.approx(c.stderr, rel=1e-6, abs=1e-12 * c.value)


def test_streams_are_reproducible_and_distinct():
    assert stream(1, 2, "a").random() == stream(1, 2, "a").random()
    assert stream(1, 2, "a").random() != stream(1, 3, "a").random()


def test_one_step_proposal():
    assert proposal_one_step(0, 0, 1.0, 1.0) == 0.5
    assert proposal_one_step(3, 1, 1.0, 1.0) == 0.75
    assert proposal_one_step(2, 2, 3.0, 1.0) == 0.75


def _kb():
    k = PKB()
    k.add_domain("D", 4)
    r = k.add_predicate("R", ["D"])
    s = k.add_predicate("S", ["D", "D"])
    x, y = Var("x", "D"), Var("y", "D")
    k.add(Or((Atom(r, (x,)), Atom(s, (x, y)))), 0.3)
    k.add(Or((Not(Atom(r, (x,))), Atom(r, (y,)))), 0.6)
    return k, r


@pytest.mark.parametrize("lifted", [True, False])
def test_sampled_z_close_to_exact(lifted):
    k, _ = _kb()
    z = np_pkb_z(k) if k.n_ground_atoms() <= 22 else None
    est = sample_log_z(k, 4000, seed=3, lifted=lifted, exact_budget=0)
    assert abs(est.value - z) <= 5 * est.stderr


@pytest.mark.parametrize("lifted", [True, False])
def test_exact_budget_small_model_is_exact(lifted):
    # a model that fits the exact budget is counted without variance
    for seed in range(20):
        k, ev, _ = random_small_pkb(seed, max_atoms=8)
        k = add_evidence(k, ev)
        z = np_pkb_z(k)
        est = run_sampler(pkb_sampler(k, lifted=lifted, seed=seed, exact_budget=10 ** 6), 3, seed)
        if z == 0:
            assert est.value == 0.0
        else:
            assert est.value == pytest.approx(z, rel=1e-9)
            assert est.stderr == pytest.approx(0.0, abs=1e-9 * z)


def test_sampler_is_deterministic_for_seed():
    k, _ = _kb()
    a = sample_log_z(k, 200, seed=9, exact_budget=0)
    b = sample_log_z(k, 200, seed=9, exact_budget=0)
    assert (a.value, a.stderr) == (b.value, b.stderr)


def test_probability_estimate():
    k, r = _kb()
    q = Atom(r, (Const("A", "D"),))
    exact = ptp(k, q).probability
    est = estimate_probability(k, q, 3000, seed=1, exact_budget=0)
    assert abs(est.probability - exact) <= 5 * est.stderr + 1e-12
    assert set(est.terms) == {"num", "neg"}


def test_entailed_query_sampled_exactly_one():
    k, r = _kb()
    a = Atom(r, (Const("A", "D"),))
    k.hard(a)
    est = estimate_probability(k, a, 50, seed=0, exact_budget=0)
    assert est.probability == 1.0
