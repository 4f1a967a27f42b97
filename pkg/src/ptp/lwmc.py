"""Lifted weighted model counting for first-order CNFs.

:func:`log_lwmc` counts a CNF over the full Herbrand base of the given
predicates without grounding it.  The same engine, with lifting disabled,
serves as the propositional reference route (``lifting=False``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from . import fol
from ._kernel import NEG_INF, logaddexp
from .constraints import ModelError
from .engine import LiftedEngine, Split, Vocab, deep
from .fol import FOClause, Work
from .logic import CNF, Atom, Clause, Literal
from .terms import Const, Domain, Predicate, Var, is_var
from .wmc import Stats, WeightMap


@dataclass
class Compiler:
    """Maps sorts, predicates and constants to the engine's integer ids."""

    domains: Mapping[str, Domain]
    preds: list[Predicate] = field(default_factory=list)

    def __post_init__(self):
        self.sort_names = list(self.domains)
        self.sort_id = {s: i for i, s in enumerate(self.sort_names)}
        self.pred_id: dict[Predicate, int] = {}
        for p in list(self.preds):
            self.pred(p)

    def pred(self, p: Predicate) -> int:
        i = self.pred_id.get(p)
        if i is None:
            for s in p.sorts:
                if s not in self.sort_id:
                    raise ModelError(f"unknown sort {s!r} in {p}")
            i = len(self.pred_id)
            self.pred_id[p] = i
            if p not in self.preds:
                self.preds.append(p)
        return i

    def vocab(self) -> Vocab:
        sizes = [self.domains[s].size for s in self.sort_names]
        return Vocab(sizes, [[self.sort_id[s] for s in p.sorts] for p in self.preds])

    def const(self, c: Const) -> int:
        return self.domains[c.sort].index(c.name)

    def clause(self, c: Clause) -> list[FOClause]:
        order: dict[Var, int] = {}
        for lit in c.literals:
            for v in lit.atom.variables():
                order.setdefault(v, -(len(order) + 1))
        if c.constraints is not None:
            for k in c.constraints.constraints():
                for v in (k.lhs, k.rhs):
                    if is_var(v):
                        order.setdefault(v, -(len(order) + 1))

        def term(t):
            return order[t] if is_var(t) else self.const(t)

        lits = [(self.pred(l.atom.pred), not l.negated, tuple(term(t) for t in l.atom.args))
                for l in c.literals]
        sorts = tuple(self.sort_id[v.sort] for v in sorted(order, key=lambda v: -order[v]))
        sizes = self.vocab().sizes
        w = Work(lits, sorts, {}, set(), {}, sizes)
        if c.constraints is not None:
            for k in c.constraints.constraints():
                op = w.eq if k.equal else w.ne
                if not op(term(k.lhs), term(k.rhs)):
                    return []
        return fol.finish(w, sizes)

    def cnf(self, cnf: CNF) -> list[FOClause]:
        out = []
        for c in cnf.clauses:
            out.extend(self.clause(c))
        for a in cnf.satisfied_atoms:
            self.pred(a.pred)
        return out

    def decode_atom(self, p: int, args) -> Atom:
        pred = self.preds[p]
        return Atom(pred, tuple(Const(self.domains[s].name_of(a), s) for s, a in zip(pred.sorts, args)))

    def decode_clause(self, c: FOClause) -> Clause:
        """Back to a logic-level clause (constraints become ``!=`` literals)."""
        from .constraints import ConstraintStore, ne

        vs = [Var(f"x{i}", self.sort_names[s]) for i, s in enumerate(c.sorts)]

        def term(a, s):
            return vs[-a - 1] if a < 0 else Const(self.domains[s].name_of(a), s)

        lits = []
        for p, pos, args in c.lits:
            pred = self.preds[p]
            lits.append(Literal(Atom(pred, tuple(term(a, s) for a, s in zip(args, pred.sorts))), not pos))
        cs = []
        for i, e in enumerate(c.excl):
            s = self.sort_names[c.sorts[i]]
            cs.extend(ne(vs[i], Const(self.domains[s].name_of(k), s)) for k in sorted(e))
        for a, b in sorted(c.neq):
            cs.append(ne(vs[-a - 1], vs[-b - 1]))
        store = ConstraintStore(self.domains).add_all(cs) if cs else None
        return Clause(tuple(lits), store)


@dataclass
class ConstrainedCNF:
    """A compiled first-order CNF: engine clauses plus their vocabulary."""

    clauses: list[FOClause]
    compiler: Compiler

    @classmethod
    def of(cls, cnf: CNF, domains: Mapping[str, Domain], preds: Iterable[Predicate] = ()):
        comp = Compiler(domains, list(preds))
        return cls(comp.cnf(cnf), comp)

    def to_cnf(self) -> CNF:
        return CNF(tuple(self.compiler.decode_clause(c) for c in self.clauses))


def _normalized(comp: Compiler, w: WeightMap):
    """Per-predicate normalized log weights and the global log normalizer."""
    vocab = comp.vocab()
    lw_pos, lw_neg = [], []
    glob = 0.0
    for i, p in enumerate(comp.preds):
        wp, wn = w.get(p)
        tot = wp + wn
        n = vocab.n_atoms(i)
        if tot == 0:
            if n:
                return None
            lw_pos.append(NEG_INF)
            lw_neg.append(NEG_INF)
            continue
        lw_pos.append(math.log(wp / tot) if wp > 0 else NEG_INF)
        lw_neg.append(math.log(wn / tot) if wn > 0 else NEG_INF)
        glob += n * math.log(tot)
    return lw_pos, lw_neg, glob


def make_engine(cc: ConstrainedCNF, w: WeightMap, **opts):
    norm = _normalized(cc.compiler, w)
    if norm is None:
        return None, NEG_INF
    lw_pos, lw_neg, glob = norm
    return LiftedEngine(cc.compiler.vocab(), lw_pos, lw_neg, **opts), glob


def log_lwmc(cnf, w: WeightMap, domains: Mapping[str, Domain] | None = None,
             preds: Iterable[Predicate] = (), *, cache=True, unit_prop=True, lifting=True, seed=0,
             cache_mb: float | None = None, stats: Stats | None = None, hook=None) -> float:
    """Log weighted count of ``cnf`` over every ground atom of ``preds``.

    ``cnf`` is a logic-level :class:`CNF` (with ``domains``) or a
    :class:`ConstrainedCNF`.  Predicates of the CNF are always included.
    """
    if isinstance(cnf, ConstrainedCNF):
        cc = cnf
        for p in preds:
            cc.compiler.pred(p)
    else:
        if domains is None:
            raise ValueError("domains are required for a logic-level CNF")
        cc = ConstrainedCNF.of(cnf, domains, preds)
    cache_bytes = None if cache_mb is None else int(cache_mb * 1024 * 1024)
    eng, glob = make_engine(cc, w, cache=cache, unit_prop=unit_prop, lifting=lifting, seed=seed,
                            cache_bytes=cache_bytes, hook=hook)
    if eng is None:
        return NEG_INF
    v = deep(eng.count, list(cc.clauses))
    if stats is not None:
        stats.calls += eng.total_calls
        stats.cache_hits += eng.total_hits
        stats.cache_misses += eng.total_misses
    return NEG_INF if v == NEG_INF else v + glob


def lwmc(cnf, w: WeightMap, domains=None, preds=(), **kw) -> float:
    v = log_lwmc(cnf, w, domains, preds, **kw)
    return 0.0 if v == NEG_INF else math.exp(v)


# ---------------------------------------------------------------------------
# individual lifted operations (mostly for inspection and tests)


def _engine(cc: ConstrainedCNF, w: WeightMap | None = None):
    eng, _ = make_engine(cc, w or WeightMap())
    return eng


def find_decomposer(cc: ConstrainedCNF):
    """``{Predicate: argument position}`` or ``None``."""
    eng = _engine(cc)
    comps = eng.components(cc.clauses)
    if len(comps) != 1:
        return None
    dec = eng.find_decomposer(cc.clauses)
    if dec is None:
        return None
    return {cc.compiler.preds[p]: pos for p, pos in dec.items()}


def lifted_decompose(cc: ConstrainedCNF):
    """``[(ConstrainedCNF, multiplicity)]`` blocks of the decomposer, or ``None``."""
    eng = _engine(cc)
    dec = eng.find_decomposer(cc.clauses)
    if dec is None:
        return None
    return [(ConstrainedCNF(sub, cc.compiler), m) for sub, m in eng.decompose_blocks(cc.clauses, dec)]


def lifted_split(cc: ConstrainedCNF, w: WeightMap):
    """Branches of the heuristic lifted split.

    Returns ``(split, [(log weight, ConstrainedCNF or None)])`` where
    ``None`` marks a branch refuted by conditioning.
    """
    eng = _engine(cc, w)
    sp = eng.choose_split(cc.clauses)
    out = []
    for lw, cur in eng.split_branches(cc.clauses, sp):
        out.append((lw, None if cur is None else ConstrainedCNF(cur, cc.compiler)))
    return sp, out


def lifted_condition(cc: ConstrainedCNF, atom: Atom, value: bool):
    """Condition on a (possibly non-ground) atom pattern set to ``value``.

    Variables of ``atom`` range over their whole sorts.  Returns ``None`` on
    conflict.
    """
    comp = cc.compiler
    p = comp.pred(atom.pred)
    order: dict = {}
    args = tuple(order.setdefault(t, -(len(order) + 1)) if is_var(t) else comp.const(t) for t in atom.args)
    g = fol.AtomSet(p, args, {})
    eng = _engine(cc)
    out = eng.condition_all(cc.clauses, g, value)
    return None if out is None else ConstrainedCNF(out, comp)


def cache_key(cc: ConstrainedCNF):
    """Renaming-invariant key: equal for CNFs equal up to variable and constant renaming."""
    return _engine(cc).canonical(cc.clauses)
