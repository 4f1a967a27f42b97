"""First-order formulas, clausal form, unification and grounding.

Free variables of a formula are implicitly universally quantified.
Grounding (:func:`ground`) is the reference semantics every lifted
operation is tested against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .constraints import ConstraintStore, ModelError, eq, ne
from .terms import Const, Domain, Predicate, Var, is_var


class UnsupportedFeature(ModelError):
    pass


# ---------------------------------------------------------------------------
# formulas


@dataclass(frozen=True, order=True)
class Atom:
    pred: Predicate
    args: tuple = ()

    def __post_init__(self):
        if len(self.args) != self.pred.arity:
            raise ModelError(f"{self.pred.name} expects {self.pred.arity} arguments, got {len(self.args)}")
        for t, s in zip(self.args, self.pred.sorts):
            if t.sort != s:
                raise ModelError(f"argument {t} of {self.pred.name} has sort {t.sort}, expected {s}")

    @property
    def is_ground(self) -> bool:
        return not any(is_var(t) for t in self.args)

    def variables(self) -> list[Var]:
        return list(dict.fromkeys(t for t in self.args if is_var(t)))

    def substitute(self, theta: Mapping) -> "Atom":
        return Atom(self.pred, tuple(theta.get(t, t) for t in self.args))

    def __str__(self):
        if not self.args:
            return self.pred.name
        return f"{self.pred.name}({','.join(map(str, self.args))})"


@dataclass(frozen=True)
class Not:
    arg: object

    def __str__(self):
        return f"!{_paren(self.arg)}"


@dataclass(frozen=True)
class And:
    args: tuple

    def __str__(self):
        return " ^ ".join(_paren(a) for a in self.args)


@dataclass(frozen=True)
class Or:
    args: tuple

    def __str__(self):
        return " v ".join(_paren(a) for a in self.args)


@dataclass(frozen=True)
class Implies:
    lhs: object
    rhs: object

    def __str__(self):
        return f"{_paren(self.lhs)} => {_paren(self.rhs)}"


@dataclass(frozen=True)
class Iff:
    lhs: object
    rhs: object

    def __str__(self):
        return f"{_paren(self.lhs)} <=> {_paren(self.rhs)}"


@dataclass(frozen=True)
class Exists:
    """Reserved node kind; existential quantification is not supported."""

    vars: tuple
    body: object

    def __str__(self):
        return f"exists {','.join(map(str, self.vars))} {_paren(self.body)}"


def _paren(f) -> str:
    if isinstance(f, (Atom, Not)):
        return str(f)
    return f"({f})"


Formula = Atom | Not | And | Or | Implies | Iff | Exists


def atoms_of(f) -> list[Atom]:
    out = []

    def walk(g):
        if isinstance(g, Atom):
            out.append(g)
        elif isinstance(g, Not):
            walk(g.arg)
        elif isinstance(g, (And, Or)):
            for a in g.args:
                walk(a)
        elif isinstance(g, (Implies, Iff)):
            walk(g.lhs)
            walk(g.rhs)
        elif isinstance(g, Exists):
            walk(g.body)
        else:
            raise TypeError(f"not a formula: {g!r}")

    walk(f)
    return out


def free_vars(f) -> list[Var]:
    return list(dict.fromkeys(v for a in atoms_of(f) for v in a.variables()))


def substitute(f, theta: Mapping):
    if isinstance(f, Atom):
        return f.substitute(theta)
    if isinstance(f, Not):
        return Not(substitute(f.arg, theta))
    if isinstance(f, (And, Or)):
        return type(f)(tuple(substitute(a, theta) for a in f.args))
    if isinstance(f, (Implies, Iff)):
        return type(f)(substitute(f.lhs, theta), substitute(f.rhs, theta))
    if isinstance(f, Exists):
        raise UnsupportedFeature("existential quantifiers are not supported")
    raise TypeError(f"not a formula: {f!r}")


def evaluate(f, world: Mapping[Atom, bool]) -> bool:
    """Truth value of a ground formula in a world (missing atoms are false)."""
    if isinstance(f, Atom):
        return world.get(f, False)
    if isinstance(f, Not):
        return not evaluate(f.arg, world)
    if isinstance(f, And):
        return all(evaluate(a, world) for a in f.args)
    if isinstance(f, Or):
        return any(evaluate(a, world) for a in f.args)
    if isinstance(f, Implies):
        return (not evaluate(f.lhs, world)) or evaluate(f.rhs, world)
    if isinstance(f, Iff):
        return evaluate(f.lhs, world) == evaluate(f.rhs, world)
    raise UnsupportedFeature("existential quantifiers are not supported")


# ---------------------------------------------------------------------------
# clausal form


@dataclass(frozen=True, order=True)
class Literal:
    atom: Atom
    negated: bool = False

    def __neg__(self) -> "Literal":
        return Literal(self.atom, not self.negated)

    def substitute(self, theta) -> "Literal":
        return Literal(self.atom.substitute(theta), self.negated)

    def __str__(self):
        return ("!" if self.negated else "") + str(self.atom)


@dataclass(frozen=True)
class Clause:
    literals: tuple[Literal, ...]
    constraints: ConstraintStore | None = None

    def variables(self) -> list[Var]:
        return list(dict.fromkeys(v for lit in self.literals for v in lit.atom.variables()))

    def __str__(self):
        body = " v ".join(map(str, self.literals)) if self.literals else "[]"
        if self.constraints is not None and self.constraints.constraints():
            body += f" | {self.constraints!r}"
        return body


@dataclass(frozen=True)
class CNF:
    clauses: tuple[Clause, ...]
    satisfied_atoms: tuple[Atom, ...] = ()

    def atoms(self) -> set[Atom]:
        return {lit.atom for c in self.clauses for lit in c.literals} | set(self.satisfied_atoms)

    def __str__(self):
        return " ^ ".join(f"({c})" for c in self.clauses) or "TRUE"


def _nnf(f, neg=False):
    if isinstance(f, Atom):
        return Literal(f, neg)
    if isinstance(f, Not):
        return _nnf(f.arg, not neg)
    if isinstance(f, And):
        parts = tuple(_nnf(a, neg) for a in f.args)
        return ("or" if neg else "and", parts)
    if isinstance(f, Or):
        parts = tuple(_nnf(a, neg) for a in f.args)
        return ("and" if neg else "or", parts)
    if isinstance(f, Implies):
        return _nnf(Or((Not(f.lhs), f.rhs)), neg)
    if isinstance(f, Iff):
        both = And((Implies(f.lhs, f.rhs), Implies(f.rhs, f.lhs)))
        return _nnf(both, neg)
    if isinstance(f, Exists):
        raise UnsupportedFeature("existential quantifiers are not supported")
    raise TypeError(f"not a formula: {f!r}")


def _distribute(n) -> list[tuple[Literal, ...]]:
    """Clause list (each a tuple of literals) for an NNF tree."""
    if isinstance(n, Literal):
        return [(n,)]
    op, parts = n
    sub = [_distribute(p) for p in parts]
    if op == "and":
        return [c for s in sub for c in s]
    out = [()]
    for s in sub:
        out = [a + b for a in out for b in s]
    return out


def cnf_convert(f) -> CNF:
    """Clausal form by distribution (no auxiliary atoms).

    Duplicate literals are merged; tautological clauses are dropped and
    their atoms kept in ``satisfied_atoms`` so that counting still sees them.
    """
    clauses = []
    satisfied = []
    seen = set()
    for raw in _distribute(_nnf(f)):
        lits = tuple(dict.fromkeys(raw))
        if any(-lit in lits for lit in lits):
            satisfied.extend(lit.atom for lit in lits)
            continue
        key = frozenset(lits)
        if key in seen:
            continue
        seen.add(key)
        clauses.append(Clause(lits))
    kept = {lit.atom for c in clauses for lit in c.literals}
    sat = tuple(dict.fromkeys(a for a in satisfied if a not in kept))
    return CNF(tuple(clauses), sat)


def standardize_apart(clauses: Iterable[Clause], prefix: str = "v") -> list[Clause]:
    out = []
    for i, c in enumerate(clauses):
        theta = {v: Var(f"{prefix}{i}_{v.name}", v.sort) for v in c.variables()}
        lits = tuple(lit.substitute(theta) for lit in c.literals)
        store = c.constraints
        if store is not None and store.constraints():
            fresh = ConstraintStore(store.domains)
            cs = []
            for k in store.constraints():
                rhs = theta.get(k.rhs, k.rhs) if is_var(k.rhs) else k.rhs
                lhs = theta.get(k.lhs, Var(f"{prefix}{i}_{k.lhs.name}", k.lhs.sort))
                cs.append(type(k)(lhs, k.equal, rhs))
            store = fresh.add_all(cs)
        out.append(Clause(lits, store))
    return out


# ---------------------------------------------------------------------------
# unification


def unify(l1: Literal, l2: Literal, s: ConstraintStore):
    """Most general unifier of two literals up to sign, or ``None``.

    The unifier is returned as a constraint store extending ``s`` with the
    equalities it needs.  It exists iff some ground atom consistent with the
    constraints is an instance of both literals.
    """
    a1, a2 = l1.atom, l2.atom
    if a1.pred != a2.pred:
        return None
    cs = []
    for t1, t2 in zip(a1.args, a2.args):
        if is_var(t1):
            cs.append(eq(t1, t2))
        elif is_var(t2):
            cs.append(eq(t2, t1))
        elif t1 != t2:
            return None
    out = s.add_all(cs)
    if out is None:
        return None
    vs = list(dict.fromkeys(a1.variables() + a2.variables()))
    if vs and out.count(vs) == 0:
        return None
    return out


def substitution_of(store: ConstraintStore, vs: Iterable[Var]) -> dict:
    """The equalities of ``store`` over ``vs`` as an explicit mapping."""
    theta = {}
    for v in vs:
        c = store.value(v)
        r = store.find(v)
        if c is not None:
            theta[v] = c
        elif r != v:
            theta[v] = r
    return theta


# ---------------------------------------------------------------------------
# grounding


def groundings(vs: list[Var], store: ConstraintStore | None, domains: Mapping[str, Domain]):
    """Yield every substitution of ``vs`` by constants consistent with ``store``."""
    pools = [domains[v.sort].constants() for v in vs]
    for combo in itertools.product(*pools):
        theta = dict(zip(vs, combo))
        if store is None or _consistent(theta, store):
            yield theta


def _consistent(theta, store: ConstraintStore) -> bool:
    for c in store.constraints():
        lhs = theta.get(c.lhs)
        rhs = theta.get(c.rhs, c.rhs) if is_var(c.rhs) else c.rhs
        if lhs is None or is_var(rhs):
            continue
        if (lhs == rhs) != c.equal:
            return False
    return True


def ground(cnf: CNF, s: ConstraintStore | None, domains: Mapping[str, Domain]) -> CNF:
    """Conjunction of all groundings of each clause consistent with ``s``.

    Constraints local to a clause are applied together with ``s``.  Ground
    atoms of ``satisfied_atoms`` are grounded the same way and kept.
    """
    out = []
    seen = set()
    for c in cnf.clauses:
        store = s
        if c.constraints is not None:
            if store is None:
                store = c.constraints
            else:
                store = store.add_all(c.constraints.constraints())
                if store is None:
                    continue
        for theta in groundings(c.variables(), store, domains):
            lits = tuple(dict.fromkeys(lit.substitute(theta) for lit in c.literals))
            key = frozenset(lits)
            if key not in seen:
                seen.add(key)
                out.append(Clause(lits))
    sat = []
    for a in cnf.satisfied_atoms:
        for theta in groundings(a.variables(), s, domains):
            sat.append(a.substitute(theta))
    kept = {lit.atom for c in out for lit in c.literals}
    return CNF(tuple(out), tuple(dict.fromkeys(a for a in sat if a not in kept)))


def ground_atoms(pred: Predicate, domains: Mapping[str, Domain]) -> list[Atom]:
    pools = [domains[s].constants() for s in pred.sorts]
    return [Atom(pred, combo) for combo in itertools.product(*pools)]
