"""Propositional weighted model counting over ground CNFs."""

from __future__ import annotations

from dataclasses import dataclass, field
from math import exp, inf, log
from typing import Mapping

from . import _ground_py
from ._kernel import NEG_INF, Kernel
from .logic import CNF, Atom, Clause, Literal
from .terms import Predicate


def safe_log(x: float) -> float:
    if x < 0:
        raise ValueError(f"negative weight {x}")
    return log(x) if x > 0 else -inf


@dataclass
class WeightMap:
    """Per-predicate literal weights ``(W_A, W_notA)``, default ``(1, 1)``."""

    weights: dict[str, tuple[float, float]] = field(default_factory=dict)

    def __post_init__(self):
        for name, (wp, wn) in self.weights.items():
            if wp < 0 or wn < 0:
                raise ValueError(f"negative weight for {name}")

    def get(self, pred) -> tuple[float, float]:
        name = pred.name if isinstance(pred, Predicate) else pred
        return self.weights.get(name, (1.0, 1.0))

    def set(self, pred, pos: float, neg: float):
        if pos < 0 or neg < 0:
            raise ValueError("weights must be nonnegative")
        name = pred.name if isinstance(pred, Predicate) else pred
        self.weights[name] = (float(pos), float(neg))

    def log(self, pred) -> tuple[float, float]:
        wp, wn = self.get(pred)
        return safe_log(wp), safe_log(wn)

    def copy(self) -> "WeightMap":
        return WeightMap(dict(self.weights))


@dataclass
class Stats:
    calls: int = 0
    cache_hits: int = 0
    cache_misses: int = 0

    def absorb(self, k):
        self.calls += k.calls
        self.cache_hits += k.hits
        self.cache_misses += k.misses


def _index_atoms(cnf: CNF):
    for c in cnf.clauses:
        for lit in c.literals:
            if not lit.atom.is_ground:
                raise ValueError(f"wmc needs a ground CNF; {lit.atom} has variables")
    atoms = sorted(cnf.atoms())
    return atoms, {a: i for i, a in enumerate(atoms)}


def compile_ground(cnf: CNF, w: WeightMap):
    """Integer clauses plus per-atom log weights for the kernel."""
    atoms, index = _index_atoms(cnf)
    clauses = []
    for c in cnf.clauses:
        lits = tuple(sorted({(-(index[l.atom] + 1) if l.negated else index[l.atom] + 1) for l in c.literals}))
        if any(-x in lits for x in lits):
            continue
        clauses.append(lits)
    lw_pos = [w.log(a.pred)[0] for a in atoms]
    lw_neg = [w.log(a.pred)[1] for a in atoms]
    return atoms, clauses, lw_pos, lw_neg


def log_wmc(cnf: CNF, w: WeightMap, *, cache: bool = True, unit_prop: bool = True, seed: int = 0,
            stats: Stats | None = None, hook=None, call_limit: int | None = None) -> float:
    """Natural log of the weighted model count (``-inf`` when unsatisfiable)."""
    atoms, clauses, lw_pos, lw_neg = compile_ground(cnf, w)
    # hooks need the instrumented pure-Python kernel
    K = _ground_py.Kernel if hook is not None else Kernel
    k = K(lw_pos, lw_neg, cache, unit_prop, seed, hook)
    k.call_limit = call_limit
    try:
        v = k.count(clauses, frozenset(range(len(atoms))))
    finally:
        if stats is not None:
            stats.absorb(k)
    return v


def wmc(cnf: CNF, w: WeightMap, **kw) -> float:
    """Sum over satisfying worlds of the product of true-literal weights."""
    v = log_wmc(cnf, w, **kw)
    return 0.0 if v == NEG_INF else exp(v)


# ---------------------------------------------------------------------------
# the individual steps, on logic-level CNFs


def condition(cnf: CNF, lit: Literal) -> CNF:
    """C|lit: drop satisfied clauses (keeping their atoms), strip the complement."""
    out = []
    sat = list(cnf.satisfied_atoms)
    comp = -lit
    for c in cnf.clauses:
        if lit in c.literals:
            sat.extend(l.atom for l in c.literals if l.atom != lit.atom)
            continue
        if comp in c.literals:
            out.append(Clause(tuple(l for l in c.literals if l != comp)))
        else:
            out.append(c)
    kept = {l.atom for c in out for l in c.literals}
    sat = tuple(dict.fromkeys(a for a in sat if a not in kept and a != lit.atom))
    return CNF(tuple(out), sat)


def decompose(cnf: CNF) -> list[CNF]:
    """Connected components over unsatisfied clauses.

    Satisfied atoms form their own trailing component (a pure base-case
    factor) when present.
    """
    parent: dict[Atom, Atom] = {}

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for c in cnf.clauses:
        atoms = [l.atom for l in c.literals]
        for a in atoms:
            parent.setdefault(a, a)
        for a in atoms[1:]:
            parent[find(a)] = find(atoms[0])
    groups: dict[Atom, list[Clause]] = {}
    empty = []
    for c in cnf.clauses:
        if not c.literals:
            empty.append(c)
            continue
        groups.setdefault(find(c.literals[0].atom), []).append(c)
    out = [CNF(tuple(g)) for g in groups.values()]
    if empty:
        out.append(CNF(tuple(empty)))
    if cnf.satisfied_atoms:
        out.append(CNF((), cnf.satisfied_atoms))
    return out


def unit_propagate(cnf: CNF, w: WeightMap) -> tuple[CNF, float]:
    """Unit resolution to a fixpoint.

    Returns the residual CNF and the product of the forced literals'
    weights; a conflict yields ``(CNF([[]]), 0.0)``.
    """
    factor = 1.0
    cur = cnf
    while True:
        if any(not c.literals for c in cur.clauses):
            return CNF((Clause(()),)), 0.0
        unit = next((c.literals[0] for c in cur.clauses if len(c.literals) == 1), None)
        if unit is None:
            return cur, factor
        wp, wn = w.get(unit.atom.pred)
        factor *= wn if unit.negated else wp
        cur = condition(cur, unit)
        cur = CNF(cur.clauses, tuple(a for a in cur.satisfied_atoms if a != unit.atom))


def choose_atom(cnf: CNF, seed: int = 0) -> Atom:
    """Most frequent atom among unsatisfied clauses; ties by seeded hash."""
    atoms, clauses, lw_pos, lw_neg = compile_ground(cnf, WeightMap())
    if not clauses:
        raise ValueError("no unsatisfied clause to split on")
    k = Kernel(lw_pos, lw_neg, False, False, seed)
    return atoms[k.choose(clauses)]
