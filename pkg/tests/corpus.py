"""Random instance generators shared by the tests.

``random_small_pkb`` draws PKBs with at most ``max_atoms`` ground atoms
(mixed hard and soft formulas, arbitrary connectives, constants and
evidence).  ``np_pkb_z`` is a vectorized brute-force partition function
over those PKBs; it evaluates formulas itself and shares no code with the
package beyond the formula data types.
"""

from __future__ import annotations

import itertools
import math
import random

import numpy as np

from ptp.constraints import ConstraintStore, ne
from ptp.logic import CNF, And, Atom, Clause, Iff, Implies, Literal, Not, Or
from ptp.pkb import PKB
from ptp.terms import Const, Domain, Predicate, Var
from ptp.wmc import WeightMap

NAMES = {"P": ["A", "B", "C"], "Q": ["K", "L"]}


def _n_atoms(preds, sizes):
    return sum(math.prod(sizes[s] for s in p.sorts) for p in preds)


def _term(rng, sort, consts, var_p=0.75):
    vs = {"P": [Var("x", "P"), Var("y", "P")], "Q": [Var("z", "Q")]}[sort]
    if consts[sort] and rng.random() > var_p:
        return Const(rng.choice(consts[sort]), sort)
    return rng.choice(vs)


def _formula(rng, preds, consts, depth):
    if depth == 0 or rng.random() < 0.35:
        p = rng.choice(preds)
        a = Atom(p, tuple(_term(rng, s, consts) for s in p.sorts))
        return Not(a) if rng.random() < 0.3 else a
    kind = rng.choice(["and", "or", "or", "imp", "iff", "not"])
    if kind == "not":
        return Not(_formula(rng, preds, consts, depth - 1))
    a = _formula(rng, preds, consts, depth - 1)
    b = _formula(rng, preds, consts, depth - 1)
    return {"and": lambda: And((a, b)), "or": lambda: Or((a, b)), "imp": lambda: Implies(a, b),
            "iff": lambda: Iff(a, b)}[kind]()


def random_small_pkb(seed: int, max_atoms: int = 15, hard_only: bool = False, n_formulas=(1, 4)):
    """``(pkb, evidence, query)`` with at most ``max_atoms`` ground atoms."""
    rng = random.Random(seed)
    while True:
        sizes = {"P": rng.randint(1, 3), "Q": rng.randint(1, 2)}
        pool = [Predicate("R", ("P",)), Predicate("S", ("P", "Q")), Predicate("T", ("Q",)),
                Predicate("U", ()), Predicate("E", ("P", "P"))]
        preds = [p for p in pool if rng.random() < 0.6] or [pool[0]]
        if _n_atoms(preds, sizes) <= max_atoms:
            break
    k = PKB()
    consts = {}
    for s, n in sizes.items():
        named = NAMES[s][: rng.randint(0, n)]
        k.add_domain(s, n, named, explicit=rng.random() < 0.3 and len(named) == n)
        consts[s] = named
    for p in preds:
        k.add_predicate(p.name, p.sorts)
    for _ in range(rng.randint(*n_formulas)):
        f = _formula(rng, preds, consts, 2)
        if hard_only or rng.random() < 0.2:
            k.hard(f)
        else:
            k.add(f, rng.choice([rng.uniform(0.05, 2.0), rng.uniform(0.05, 0.95), 1.0]))
    atoms = [a for p in preds for a in _ground_atoms(p, k.domains)]
    evidence = [Literal(a, rng.random() < 0.5) for a in rng.sample(atoms, min(len(atoms), rng.randint(0, 2)))]
    q = rng.choice(atoms)
    if rng.random() < 0.2:
        q = _formula(rng, preds, {s: [] for s in consts}, 1)  # may be non-ground
    return k, evidence, q


def _ground_atoms(p, domains):
    return [Atom(p, args) for args in itertools.product(*(domains[s].constants() for s in p.sorts))]


# ---------------------------------------------------------------------------
# vectorized brute force


def _eval(f, cols, theta):
    """Truth of ``f`` in every world: boolean vector."""
    if isinstance(f, Atom):
        args = tuple(theta.get(t, t) for t in f.args)
        return cols[Atom(f.pred, args)]
    if isinstance(f, Not):
        return ~_eval(f.arg, cols, theta)
    if isinstance(f, And):
        out = _eval(f.args[0], cols, theta)
        for g in f.args[1:]:
            out = out & _eval(g, cols, theta)
        return out
    if isinstance(f, Or):
        out = _eval(f.args[0], cols, theta)
        for g in f.args[1:]:
            out = out | _eval(g, cols, theta)
        return out
    if isinstance(f, Implies):
        return ~_eval(f.lhs, cols, theta) | _eval(f.rhs, cols, theta)
    if isinstance(f, Iff):
        return _eval(f.lhs, cols, theta) == _eval(f.rhs, cols, theta)
    raise TypeError(f)


def _vars(f, out=None):
    out = [] if out is None else out
    if isinstance(f, Atom):
        for t in f.args:
            if isinstance(t, Var) and t not in out:
                out.append(t)
    else:
        for g in (f.args if isinstance(f, (And, Or)) else (f.arg,) if isinstance(f, Not) else (f.lhs, f.rhs)):
            _vars(g, out)
    return out


def _world_table(k: PKB):
    atoms = [a for p in k.predicates.values() for a in _ground_atoms(p, k.domains)]
    n = len(atoms)
    if n > 22:
        raise ValueError("too many atoms to enumerate")
    idx = np.arange(2 ** n, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(n)) & 1).astype(bool)
    return {a: bits[:, i] for i, a in enumerate(atoms)}, 2 ** n


def np_log_weights(k: PKB, extra_hard=()):
    """Per-world log weight under ``k`` plus extra hard formulas."""
    cols, nw = _world_table(k)
    lw = np.zeros(nw)
    forms = [(wf.formula, wf.phi) for wf in k.formulas] + [(f, 0.0) for f in extra_hard]
    for f, phi in forms:
        vs = _vars(f)
        for vals in itertools.product(*(k.domains[v.sort].constants() for v in vs)):
            sat = _eval(f, cols, dict(zip(vs, vals)))
            lw = np.where(sat, lw, lw + (math.log(phi) if phi > 0 else -np.inf))
    return lw


def np_pkb_z(k: PKB, extra_hard=()) -> float:
    lw = np_log_weights(k, extra_hard)
    return float(np.exp(lw).sum())


def np_satisfiable(k: PKB, extra_hard=()) -> bool:
    return bool(np.isfinite(np_log_weights(k, extra_hard)).any())


def evidence_formulas(evidence):
    return [Not(l.atom) if l.negated else l.atom for l in evidence]


# ---------------------------------------------------------------------------
# random first-order CNFs with constraints (for the counters directly)


def random_fo_cnf(seed: int):
    """``(cnf, domains, preds, weights)``: small clause sets with substitution constraints."""
    rng = random.Random(seed)
    D = {"P": Domain("P", rng.randint(1, 3)), "Q": Domain("Q", rng.randint(1, 2))}
    consts = {"P": [Const(n, "P") for n in NAMES["P"][: D["P"].size]], "Q": [Const("K", "Q")]}
    for s in consts:
        consts[s] = consts[s][: rng.randint(0, len(consts[s]))]
        for c in consts[s]:
            D[s].index(c.name)
    preds = [Predicate("R", ("P",)), Predicate("S", ("P", "Q")), Predicate("T", ("Q",)), Predicate("U", ()),
             Predicate("E", ("P", "P"))]
    vars_ = {"P": [Var("x", "P"), Var("y", "P")], "Q": [Var("s", "Q")]}
    clauses = []
    for _ in range(rng.randint(1, 3)):
        lits = []
        for _ in range(rng.randint(1, 3)):
            p = rng.choice(preds)
            args = tuple(rng.choice(vars_[s] + consts[s]) if rng.random() < 0.8 else rng.choice(vars_[s])
                         for s in p.sorts)
            lits.append(Literal(Atom(p, args), rng.random() < 0.5))
        lits = tuple(dict.fromkeys(lits))
        vs = list(dict.fromkeys(v for l in lits for v in l.atom.variables()))
        cs = [ne(v, rng.choice(consts[v.sort])) for v in vs if rng.random() < 0.3 and consts[v.sort]]
        pv = [v for v in vs if v.sort == "P"]
        if len(pv) == 2 and rng.random() < 0.4:
            cs.append(ne(pv[0], pv[1]))
        st = None
        if cs:
            st = ConstraintStore(D).add_all(cs)
            if st is None:
                continue
        clauses.append(Clause(lits, st))
    w = WeightMap({p.name: (rng.choice([0.0, 0.3, 1.0, 2.5]), rng.choice([0.5, 1.0, 1.7])) for p in preds})
    return CNF(tuple(clauses)), D, preds, w


def random_ground_clauses(seed: int, max_atoms: int = 12):
    """Integer clause lists for the kernels: ``(n, clauses, lw_pos, lw_neg)``."""
    rng = random.Random(seed)
    n = rng.randint(1, max_atoms)
    cl = []
    for _ in range(rng.randint(0, 3 * n)):
        k = rng.randint(1, 4)
        c = tuple(sorted({rng.choice((-1, 1)) * rng.randint(1, n) for _ in range(k)}))
        if any(-x in c for x in c):
            continue
        cl.append(c)
    lp = [math.log(rng.uniform(0.05, 3.0)) if rng.random() > 0.1 else -math.inf for _ in range(n)]
    ln = [math.log(rng.uniform(0.05, 3.0)) for _ in range(n)]
    return n, cl, lp, ln


def brute_int_wmc(n, clauses, lp, ln) -> float:
    """Enumeration over integer clauses (linear scale)."""
    idx = np.arange(2 ** n, dtype=np.int64)
    bits = ((idx[:, None] >> np.arange(n)) & 1).astype(bool)
    ok = np.ones(2 ** n, dtype=bool)
    for c in clauses:
        sat = np.zeros(2 ** n, dtype=bool)
        for x in c:
            col = bits[:, abs(x) - 1]
            sat |= col if x > 0 else ~col
        ok &= sat
    w = np.ones(2 ** n)
    for a in range(n):
        w *= np.where(bits[:, a], math.exp(lp[a]), math.exp(ln[a]))
    return float(w[ok].sum())


def rel_close(a: float, b: float, tol: float = 1e-9) -> bool:
    if a == b:
        return True
    return abs(a - b) <= tol * max(abs(a), abs(b))
