"""Probabilistic knowledge bases and the PTP driver.

A PKB is a list of first-order formulas with potentials.  A world's weight
is the product of ``phi`` over every false grounding of every formula (hard
formulas have ``phi = 0``).  ``P(Q | K) = Z(K + (Q, 0)) / Z(K)`` where ``Z``
is computed as a weighted model count of the compiled CNF.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping

from ._kernel import NEG_INF, ResourceLimit
from .constraints import ConstraintStore, ModelError
from .engine import deep
from .logic import (CNF, Atom, Clause, Iff, Literal, Not, atoms_of, cnf_convert, free_vars, ground,
                    standardize_apart, unify)
from .lwmc import ConstrainedCNF, Compiler, log_lwmc
from .terms import Domain, Predicate, Var, is_var
from .wmc import Stats, WeightMap, log_wmc, safe_log


class InconsistentKB(ValueError):
    """Z(K) = 0: the hard formulas and evidence admit no world."""


class Inconclusive(ValueError):
    """A sampled denominator was zero."""


AUX_PREFIX = "_F"


@dataclass(frozen=True)
class WeightedFormula:
    formula: object
    phi: float

    @property
    def hard(self) -> bool:
        return self.phi == 0.0


@dataclass
class PKB:
    domains: dict[str, Domain] = field(default_factory=dict)
    predicates: dict[str, Predicate] = field(default_factory=dict)
    formulas: list[WeightedFormula] = field(default_factory=list)

    def add_domain(self, name: str, size: int, names: Iterable[str] = (), explicit: bool = False) -> Domain:
        if name in self.domains:
            raise ModelError(f"domain {name!r} declared twice")
        d = Domain(name, size, list(names), explicit)
        self.domains[name] = d
        return d

    def add_predicate(self, name: str, sorts: Iterable[str] = ()) -> Predicate:
        sorts = tuple(sorts)
        for s in sorts:
            if s not in self.domains:
                raise ModelError(f"predicate {name}: unknown domain {s!r}")
        if name in self.predicates:
            raise ModelError(f"predicate {name!r} declared twice")
        p = Predicate(name, sorts)
        self.predicates[name] = p
        return p

    def add(self, formula, phi: float) -> "PKB":
        phi = float(phi)
        if not phi >= 0.0:
            raise ModelError(f"potential must be nonnegative, got {phi}")
        for a in atoms_of(formula):
            if self.predicates.get(a.pred.name) != a.pred:
                raise ModelError(f"undeclared predicate {a.pred}")
            for t in a.args:
                if not is_var(t):
                    try:
                        self.domains[t.sort].index(t.name)
                    except (KeyError, ValueError) as e:
                        raise ModelError(str(e).strip('"')) from None
        self.formulas.append(WeightedFormula(formula, phi))
        return self

    def hard(self, formula) -> "PKB":
        return self.add(formula, 0.0)

    def add_weighted(self, formula, w: float) -> "PKB":
        """Markov-logic style log weight: ``phi = exp(-w)``."""
        return self.add(formula, math.exp(-w))

    def copy(self) -> "PKB":
        return PKB({k: d.copy() for k, d in self.domains.items()}, dict(self.predicates), list(self.formulas))

    def n_ground_atoms(self) -> int:
        return sum(math.prod(self.domains[s].size for s in p.sorts) for p in self.predicates.values())


@dataclass
class WeightedCNF:
    cnf: CNF
    weights: WeightMap
    predicates: list[Predicate]
    domains: Mapping[str, Domain]


def _aux_name(i: int, taken) -> str:
    name = f"{AUX_PREFIX}{i}"
    while name in taken:
        name = "_" + name
    return name


def wcnf(k: PKB) -> WeightedCNF:
    """Hard CNF plus literal weights whose weighted count equals Z(K).

    Each soft formula F with potential phi becomes the hard formula
    ``F <=> Aux(vars of F)`` with ``W(!Aux) = phi``.
    """
    clauses: list[Clause] = []
    sat: list[Atom] = []
    w = WeightMap()
    preds = list(k.predicates.values())
    taken = set(k.predicates)
    for i, wf in enumerate(k.formulas):
        if wf.phi < 0:
            raise ModelError(f"negative potential {wf.phi}")
        f = wf.formula
        if wf.phi == 1.0:
            continue  # factor one either way
        if not wf.hard:
            vs = free_vars(f)
            name = _aux_name(i + 1, taken)
            taken.add(name)
            aux = Predicate(name, tuple(v.sort for v in vs))
            preds.append(aux)
            w.set(aux, 1.0, wf.phi)
            f = Iff(f, Atom(aux, tuple(vs)))
        c = cnf_convert(f)
        clauses.extend(c.clauses)
        sat.extend(c.satisfied_atoms)
    cs = standardize_apart(clauses)
    return WeightedCNF(CNF(tuple(cs), tuple(sat)), w, preds, k.domains)


# ---------------------------------------------------------------------------
# counting


@dataclass
class CountOptions:
    lifting: bool = True
    cache: bool = True
    unit_prop: bool = True
    seed: int = 0
    cache_mb: float | None = None
    call_limit: int | None = None


def _log_count_ground(wc: WeightedCNF, opts: CountOptions, stats: Stats) -> float:
    """Propositional route: ground, count, and add the untouched atoms."""
    g = ground(wc.cnf, None, wc.domains)
    v = deep(log_wmc, g, wc.weights, cache=opts.cache, unit_prop=opts.unit_prop, seed=opts.seed,
             stats=stats, call_limit=opts.call_limit)
    if v == NEG_INF:
        return v
    present: dict = {}
    for a in g.atoms():
        present[a.pred] = present.get(a.pred, 0) + 1
    for p in wc.predicates:
        n = math.prod(wc.domains[s].size for s in p.sorts) - present.get(p, 0)
        if n:
            wp, wn = wc.weights.get(p)
            if wp + wn == 0:
                return NEG_INF
            v += n * math.log(wp + wn)
    return v


def log_count(wc: WeightedCNF, opts: CountOptions | None = None, stats: Stats | None = None) -> float:
    opts = opts or CountOptions()
    stats = stats if stats is not None else Stats()
    if not opts.lifting:
        return _log_count_ground(wc, opts, stats)
    cc = ConstrainedCNF.of(wc.cnf, wc.domains, wc.predicates)
    from .lwmc import make_engine

    cache_bytes = None if opts.cache_mb is None else int(opts.cache_mb * 1024 * 1024)
    eng, glob = make_engine(cc, wc.weights, cache=opts.cache, unit_prop=opts.unit_prop, seed=opts.seed,
                            cache_bytes=cache_bytes, call_limit=opts.call_limit)
    if eng is None:
        return NEG_INF
    try:
        v = deep(eng.count, list(cc.clauses))
    finally:
        stats.calls += eng.total_calls
        stats.cache_hits += eng.total_hits
        stats.cache_misses += eng.total_misses
    return NEG_INF if v == NEG_INF else v + glob


def log_partition_function(k: PKB, opts: CountOptions | None = None, stats: Stats | None = None) -> float:
    return log_count(wcnf(k), opts, stats)


def partition_function(k: PKB, engine: str = "exact", **kw) -> float:
    """Z(K).  ``engine`` is ``exact``, ``ground`` or ``sampled``."""
    if engine == "sampled":
        from .sampling import sample_log_z

        est = sample_log_z(k, **kw)
        return est.value
    opts = CountOptions(**kw)
    if engine == "ground":
        opts.lifting = False
    elif engine != "exact":
        raise ValueError(f"unknown engine {engine!r}")
    v = log_partition_function(k, opts)
    return 0.0 if v == NEG_INF else math.exp(v)


# ---------------------------------------------------------------------------
# evidence, pruning, queries


def add_evidence(k: PKB, lits: Iterable[Literal]) -> PKB:
    out = k.copy()
    for lit in lits:
        if not lit.atom.is_ground:
            raise ModelError(f"evidence must be ground: {lit}")
        out.hard(Not(lit.atom) if lit.negated else lit.atom)
    return out


def with_query(k: PKB, q) -> PKB:
    out = k.copy()
    out.hard(q)
    return out


def _literals(f) -> list[Literal]:
    c = cnf_convert(f)
    lits = [l for cl in c.clauses for l in cl.literals]
    lits.extend(Literal(a) for a in c.satisfied_atoms)
    return lits


def kbmc_prune(k: PKB, q) -> tuple[PKB, ConstraintStore]:
    """Keep the formulas linked to the query by chains of unifiable literals.

    Dropped formulas share no ground atom with the kept ones or the query,
    so their factors cancel in the PTP ratio.  The returned seed store is
    empty (no constraints are carried over from the connecting paths).
    """
    k = with_query(k, q)  # interns the query's constants
    k.formulas.pop()
    store = ConstraintStore(k.domains)
    frontier = [_std(_literals(q), "q")]
    pending = [(i, _std(_literals(wf.formula), f"f{i}")) for i, wf in enumerate(k.formulas)]
    keep = set()
    while frontier:
        lits = frontier.pop()
        rest = []
        for i, flits in pending:
            if any(unify(a, b, store) is not None for a in lits for b in flits):
                keep.add(i)
                frontier.append(flits)
            else:
                rest.append((i, flits))
        pending = rest
    out = k.copy()
    out.formulas = [wf for i, wf in enumerate(k.formulas) if i in keep]
    return out, store


def _std(lits: list[Literal], tag: str) -> list[Literal]:
    vs = {v for l in lits for v in l.atom.variables()}
    theta = {v: Var(f"{tag}_{v.name}", v.sort) for v in vs}
    return [l.substitute(theta) for l in lits]


@dataclass
class PTPResult:
    probability: float
    log_z_num: float
    log_z_den: float
    calls: int = 0
    cache_hits: int = 0
    cache_misses: int = 0
    wall_ms: float = 0.0
    seed: int = 0

    def report(self) -> dict:
        return {"answer": self.probability, "log_z_num": self.log_z_num, "log_z_den": self.log_z_den,
                "calls": self.calls, "cache_hits": self.cache_hits, "cache_misses": self.cache_misses,
                "wall_ms": round(self.wall_ms, 3), "seed": self.seed}


def ptp(k: PKB, q, *, prune: bool = False, evidence: Iterable[Literal] = (), **kw) -> PTPResult:
    """Exact ``P(q | K)`` by two weighted model counts."""
    t0 = time.perf_counter()
    opts = CountOptions(**kw)
    if evidence:
        k = add_evidence(k, evidence)
    if prune:
        k, _ = kbmc_prune(k, q)
    stats = Stats()
    den = log_partition_function(k, opts, stats)
    if den == NEG_INF:
        raise InconsistentKB("the knowledge base has no possible world (Z = 0)")
    num = log_partition_function(with_query(k, q), opts, stats)
    if num == NEG_INF:
        p = 0.0
    elif num - den > -1e-9 and not free_vars(q):
        # near one: the complement count decides exact entailment
        comp = log_partition_function(with_query(k, Not(q)), opts, stats)
        p = 1.0 if comp == NEG_INF else max(0.0, min(1.0, -math.expm1(comp - den)))
    else:
        p = max(0.0, min(1.0, math.exp(num - den)))
    return PTPResult(p, num, den, stats.calls, stats.cache_hits, stats.cache_misses,
                     (time.perf_counter() - t0) * 1e3, opts.seed)


def probability(k: PKB, q, **kw) -> float:
    return ptp(k, q, **kw).probability
