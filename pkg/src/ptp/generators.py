"""Benchmark model generators: random unary PKBs and link prediction."""

from __future__ import annotations

import random

from .logic import And, Atom, Implies, Literal, Not, Or
from .pkb import PKB
from .terms import Const, Var


def _uniform_open(rng: random.Random) -> float:
    while True:
        u = rng.random()
        if u > 0.0:
            return u


def random_pkb(n: int, m: int, s: int, e: int, c: int, seed: int = 0):
    """Random PKB over ``n`` unary predicates and ``c`` objects.

    Each of the ``m`` clauses picks ``s`` distinct predicates over one shared
    variable and negates each with probability 1/2; its potential is drawn
    uniformly from (0, 1).  ``e`` distinct ground atoms become evidence with
    a fair-coin truth value.  Returns ``(pkb, evidence)``.
    """
    if n < 1 or m < 0 or c < 1 or e < 0:
        raise ValueError("need n >= 1, c >= 1, m >= 0, e >= 0")
    if not 1 <= s <= n:
        raise ValueError(f"clause size s={s} must be in [1, n={n}]")
    if e > n * c:
        raise ValueError(f"e={e} exceeds the {n * c} ground atoms")
    rng = random.Random(seed)
    k = PKB()
    k.add_domain("obj", c, [f"O{i}" for i in range(c)], explicit=True)
    preds = [k.add_predicate(f"R{i}", ["obj"]) for i in range(n)]
    x = Var("x", "obj")
    for _ in range(m):
        lits = []
        for p in rng.sample(preds, s):
            a = Atom(p, (x,))
            lits.append(Not(a) if rng.random() < 0.5 else a)
        k.add(lits[0] if s == 1 else Or(tuple(lits)), _uniform_open(rng))
    cells = rng.sample(range(n * c), e)
    evidence = []
    for cell in cells:
        p, o = divmod(cell, c)
        evidence.append(Literal(Atom(preds[p], (Const(f"O{o}", "obj"),)), rng.random() < 0.5))
    return k, evidence


def random_query(pkb: PKB, seed: int = 0) -> Atom:
    """A ground atom of a random predicate on a random object."""
    rng = random.Random(seed)
    preds = [p for p in pkb.predicates.values()]
    p = rng.choice(preds)
    args = []
    for srt in p.sorts:
        d = pkb.domains[srt]
        args.append(Const(d.name_of(rng.randrange(d.size)), srt))
    return Atom(p, tuple(args))


LINK_PHI = (0.2, 0.4)


def link_prediction_pkb(n_profs: int, n_students: int, evidence_fraction: float, seed: int = 0,
                        pair_evidence: bool = False, phi=LINK_PHI):
    """The two-clause advising model with random evidence.

    Evidence covers ``evidence_fraction`` of the unary atoms (GoodProf,
    GoodStudent, FutureProf); with ``pair_evidence`` the Coauthor atoms join
    the pool.  Returns ``(pkb, evidence)``.
    """
    if not 0.0 <= evidence_fraction <= 1.0:
        raise ValueError("evidence fraction must be in [0, 1]")
    if n_profs < 1 or n_students < 1:
        raise ValueError("need at least one professor and one student")
    rng = random.Random(seed)
    k = PKB()
    k.add_domain("prof", n_profs, [f"P{i}" for i in range(n_profs)], explicit=True)
    k.add_domain("student", n_students, [f"S{i}" for i in range(n_students)], explicit=True)
    gp = k.add_predicate("GoodProf", ["prof"])
    gs = k.add_predicate("GoodStudent", ["student"])
    adv = k.add_predicate("Advises", ["prof", "student"])
    fp = k.add_predicate("FutureProf", ["student"])
    co = k.add_predicate("Coauthor", ["prof", "student"])
    x, y = Var("x", "prof"), Var("y", "student")
    k.add(Implies(And((Atom(gp, (x,)), Atom(gs, (y,)), Atom(adv, (x, y)))), Atom(fp, (y,))), phi[0])
    k.add(Implies(Atom(co, (x, y)), Atom(adv, (x, y))), phi[1])
    pool = [Atom(gp, (Const(f"P{i}", "prof"),)) for i in range(n_profs)]
    for j in range(n_students):
        sj = Const(f"S{j}", "student")
        pool.append(Atom(gs, (sj,)))
        pool.append(Atom(fp, (sj,)))
    if pair_evidence:
        for i in range(n_profs):
            for j in range(n_students):
                pool.append(Atom(co, (Const(f"P{i}", "prof"), Const(f"S{j}", "student"))))
    chosen = rng.sample(pool, round(evidence_fraction * len(pool)))
    evidence = [Literal(a, rng.random() < 0.5) for a in chosen]
    return k, evidence


def link_prediction_query(pkb: PKB, evidence, seed: int = 0) -> Atom:
    """FutureProf of a student whose FutureProf atom is not evidence (if any)."""
    rng = random.Random(seed)
    fp = pkb.predicates["FutureProf"]
    seen = {lit.atom for lit in evidence}
    d = pkb.domains["student"]
    cands = [Atom(fp, (c,)) for c in d.constants() if Atom(fp, (c,)) not in seen]
    if not cands:
        cands = [Atom(fp, (c,)) for c in d.constants()]
    return rng.choice(cands)
