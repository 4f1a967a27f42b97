"""Compact first-order clauses with local substitution constraints.

This is the representation the lifted counter works on.  Constants are
sort-local integers ``>= 0``; variables are negative integers (variable ``i``
is ``-(i + 1)``).  A clause carries, per variable, the set of excluded
constants, plus variable-variable disequalities.  Equalities never survive
normalization: they are applied as substitutions.

A clause stands for the conjunction of its groundings consistent with its
constraints, over the full domain of each sort.
"""

from __future__ import annotations

from typing import NamedTuple

from .constraints import count_colorings


class FOClause(NamedTuple):
    lits: tuple  # ((pred, positive, args), ...)
    sorts: tuple  # sort id of variable i
    excl: tuple  # frozenset of excluded constants for variable i
    neq: frozenset  # {(a, b)} variable terms, a < b


class AtomSet(NamedTuple):
    """A set of ground atoms: pattern args plus constraints on its variables."""

    pred: int
    args: tuple
    excl: dict  # var term -> frozenset
    neq: frozenset = frozenset()


EMPTY = frozenset()


def var_index(t: int) -> int:
    return -t - 1


def var_term(i: int) -> int:
    return -(i + 1)


def clause_vars(c: FOClause) -> list[int]:
    return [var_term(i) for i in range(len(c.sorts))]


def is_ground(c: FOClause) -> bool:
    return not c.sorts


def count_clause(c: FOClause, sizes) -> int:
    """Number of groundings of the clause's variables."""
    n = len(c.sorts)
    if n == 0:
        return 1
    edges = [(var_index(a), var_index(b)) for a, b in c.neq]
    return count_colorings([sizes[s] for s in c.sorts], list(c.excl), edges)


def atom_set(c: FOClause, li: int) -> AtomSet:
    """Ground atoms of literal ``li`` (constraints to other variables dropped)."""
    p, _, args = c.lits[li]
    vs = {a for a in args if a < 0}
    excl = {v: c.excl[var_index(v)] for v in vs if c.excl[var_index(v)]}
    neq = frozenset(pr for pr in c.neq if pr[0] in vs and pr[1] in vs)
    return AtomSet(p, args, excl, neq)


class Work:
    """Mutable clause under construction (substitutions applied lazily)."""

    __slots__ = ("lits", "sorts", "excl", "neq", "sub", "sizes")

    def __init__(self, lits, sorts, excl, neq, sub, sizes):
        self.lits = lits
        self.sorts = sorts
        self.excl = excl
        self.neq = neq
        self.sub = sub
        self.sizes = sizes

    @classmethod
    def of(cls, c: FOClause, sizes) -> "Work":
        return cls(list(c.lits), c.sorts, {var_term(i): e for i, e in enumerate(c.excl) if e},
                   set(c.neq), {}, sizes)

    def copy(self) -> "Work":
        return Work(list(self.lits), self.sorts, dict(self.excl), set(self.neq), dict(self.sub),
                    self.sizes)

    def resolve(self, t: int) -> int:
        while t < 0 and t in self.sub:
            t = self.sub[t]
        return t

    def live_vars(self) -> list[int]:
        return [var_term(i) for i in range(len(self.sorts)) if var_term(i) not in self.sub]

    def sort_of(self, v: int) -> int:
        return self.sorts[var_index(v)]

    # -- primitive constraints ---------------------------------------------
    def bind(self, v: int, k: int) -> bool:
        if k in self.excl.get(v, EMPTY):
            return False
        self.sub[v] = k
        self.excl.pop(v, None)
        for pr in [pr for pr in self.neq if v in pr]:
            self.neq.discard(pr)
            o = pr[1] if pr[0] == v else pr[0]
            self.excl[o] = self.excl.get(o, EMPTY) | {k}
        return True

    def merge(self, v: int, w: int) -> bool:
        if v == w:
            return True
        if (min(v, w), max(v, w)) in self.neq:
            return False
        self.sub[w] = v
        ew = self.excl.pop(w, EMPTY)
        if ew:
            self.excl[v] = self.excl.get(v, EMPTY) | ew
        for pr in [pr for pr in self.neq if w in pr]:
            self.neq.discard(pr)
            o = pr[1] if pr[0] == w else pr[0]
            if o == v:
                return False
            self.neq.add((min(o, v), max(o, v)))
        return True

    def eq(self, a: int, b: int) -> bool:
        a, b = self.resolve(a), self.resolve(b)
        if a >= 0 and b >= 0:
            return a == b
        if a >= 0:
            a, b = b, a
        if b >= 0:
            return self.bind(a, b)
        return self.merge(a, b)

    def ne(self, a: int, b: int) -> bool:
        a, b = self.resolve(a), self.resolve(b)
        if a >= 0 and b >= 0:
            return a != b
        if a >= 0:
            a, b = b, a
        if b >= 0:
            self.excl[a] = self.excl.get(a, EMPTY) | {b}
            return True
        if a == b:
            return False
        self.neq.add((min(a, b), max(a, b)))
        return True

    def notin(self, a: int, es: frozenset) -> bool:
        a = self.resolve(a)
        if a >= 0:
            return a not in es
        if es:
            self.excl[a] = self.excl.get(a, EMPTY) | es
        return True

    def apply(self, prim) -> bool:
        op, a, b = prim
        if op == "eq":
            return self.eq(a, b)
        if op == "ne":
            return self.ne(a, b)
        return self.notin(a, b)

    def negate(self, prim) -> list["Work"]:
        """Copies of self, jointly covering exactly where ``prim`` fails."""
        op, a, b = prim
        if op == "eq":
            w = self.copy()
            return [w] if w.ne(a, b) else []
        if op == "ne":
            w = self.copy()
            return [w] if w.eq(a, b) else []
        a = self.resolve(a)
        if a >= 0:
            return [self.copy()] if a in b else []
        # a in b  <=>  a not in (domain - b)
        w = self.copy()
        w.notin(a, frozenset(range(self.sizes[self.sort_of(a)])) - b)
        return [w]

    def count(self, sizes=None) -> int:
        sizes = self.sizes if sizes is None else sizes
        vs = self.live_vars()
        if not vs:
            return 1
        idx = {v: i for i, v in enumerate(vs)}
        edges = [(idx[a], idx[b]) for a, b in self.neq]
        return count_colorings([sizes[self.sort_of(v)] for v in vs],
                               [self.excl.get(v, EMPTY) for v in vs], edges)


def membership(args: tuple, g: AtomSet, resolve=None):
    """Constraints on clause terms ``args`` for the atom to lie in ``g``.

    Returns a list of primitives ``(op, a, b)`` over clause terms, or ``None``
    when the atom can never lie in ``g``.
    """
    parent: dict = {}

    def find(x):
        while parent.get(x, x) != x:
            x = parent[x]
        return x

    def union(x, y):
        rx, ry = find(x), find(y)
        if rx != ry:
            parent[rx] = ry

    keys = []
    for t, u in zip(args, g.args):
        if resolve is not None:
            t = resolve(t)
        kt = ("k", t) if t >= 0 else ("v", t)
        ku = ("k", u) if u >= 0 else ("g", u)
        keys.append(kt)
        keys.append(ku)
        union(kt, ku)
    classes: dict = {}
    for k in dict.fromkeys(keys):
        classes.setdefault(find(k), []).append(k)
    rep_of = {}
    prims = []
    for root, members in classes.items():
        consts = {m[1] for m in members if m[0] == "k"}
        if len(consts) > 1:
            return None
        cvars = [m[1] for m in members if m[0] == "v"]
        rep = next(iter(consts)) if consts else (cvars[0] if cvars else None)
        for v in cvars:
            if v != rep:
                prims.append(("eq", v, rep))
        for m in members:
            if m[0] == "g":
                rep_of[m[1]] = rep
                es = g.excl.get(m[1])
                if es:
                    if rep >= 0:
                        if rep in es:
                            return None
                    else:
                        prims.append(("notin", rep, es))
    for a, b in g.neq:
        ra, rb = rep_of[a], rep_of[b]
        if ra == rb:
            return None
        if ra >= 0 and rb >= 0:
            continue
        prims.append(("ne", ra, rb))
    return prims


# ---------------------------------------------------------------------------
# normalization


def finish(w: Work, sizes) -> list[FOClause]:
    """Normalize a work clause into zero or more canonical clauses.

    Drops the clause when it has no groundings or is tautological; applies
    single-valued variables as substitutions; removes variables that no
    longer occur in a literal, splitting the clause when such a variable's
    existence depends on the others.
    """
    changed = True
    while changed:
        changed = False
        for v in w.live_vars():
            size = sizes[w.sort_of(v)]
            ex = w.excl.get(v, EMPTY)
            avail = size - len(ex)
            if avail <= 0:
                return []
            if avail == 1:
                k = next(c for c in range(size) if c not in ex)
                if not w.bind(v, k):
                    return []
                changed = True
    if any(w.resolve(a) == w.resolve(b) for a, b in w.neq):
        return []
    in_lits = set()
    lits = []
    for p, pos, args in w.lits:
        args = tuple(w.resolve(a) for a in args)
        lits.append((p, pos, args))
        in_lits.update(a for a in args if a < 0)
    w.lits = lits
    w.neq = {(min(w.resolve(a), w.resolve(b)), max(w.resolve(a), w.resolve(b))) for a, b in w.neq}
    # dangling variables
    for v in w.live_vars():
        if v in in_lits:
            continue
        nbrs = [pr[1] if pr[0] == v else pr[0] for pr in w.neq if v in pr]
        size = sizes[w.sort_of(v)]
        ex = w.excl.get(v, EMPTY)
        avail = size - len(ex)
        if avail > len(nbrs):
            for pr in [pr for pr in w.neq if v in pr]:
                w.neq.discard(pr)
            w.sub[v] = 0  # retired: no longer referenced
            w.excl.pop(v, None)
            continue
        allowed = frozenset(c for c in range(size) if c not in ex)
        o = nbrs[0]
        pr = (min(v, o), max(v, o))
        if allowed <= w.excl.get(o, EMPTY):
            w.neq.discard(pr)
            return finish(w, sizes)
        out = []
        a = w.copy()
        a.neq.discard(pr)
        a.excl[o] = a.excl.get(o, EMPTY) | allowed
        out.extend(finish(a, sizes))
        for k in sorted(allowed - w.excl.get(o, EMPTY)):
            b = w.copy()
            if b.bind(o, k):
                out.extend(finish(b, sizes))
        return out
    # literals: dedupe, tautology
    seen = {}
    for lit in lits:
        seen.setdefault(lit, None)
    lits = list(seen)
    pos_set = {(p, args) for p, pos, args in lits if pos}
    if any((p, args) in pos_set for p, pos, args in lits if not pos):
        return []
    if w.neq:
        if w.count(sizes) == 0:
            return []
    return [_renumber(lits, w, sizes)]


def _lit_shape(lit):
    p, pos, args = lit
    return (p, not pos, tuple(a if a >= 0 else -1 for a in args))


def _renumber(lits, w: Work, sizes) -> FOClause:
    lits = sorted(lits, key=_lit_shape)
    order = {}
    for _, _, args in lits:
        for a in args:
            if a < 0 and a not in order:
                order[a] = var_term(len(order))
    new_lits = tuple((p, pos, tuple(order.get(a, a) for a in args)) for p, pos, args in lits)
    new_lits = tuple(sorted(new_lits, key=lambda l: (l[0], not l[1], l[2])))
    inv = sorted(order.items(), key=lambda kv: -kv[1])
    sorts = tuple(w.sort_of(old) for old, _ in inv)
    excl = tuple(frozenset(w.excl.get(old, EMPTY)) for old, _ in inv)
    neq = frozenset((min(order[a], order[b]), max(order[a], order[b])) for a, b in w.neq)
    return FOClause(new_lits, sorts, excl, neq)


def normalize(c: FOClause, sizes) -> list[FOClause]:
    return finish(Work.of(c, sizes), sizes)


# ---------------------------------------------------------------------------
# conditioning on a set of ground atoms


def shatter(w: Work, prims):
    """Split ``w`` into the part satisfying every primitive and the rest."""
    outside = []
    cur = w.copy()
    for prim in prims:
        outside.extend(cur.negate(prim))
        if not cur.apply(prim):
            return None, outside
    return cur, outside


def condition_clause(c: FOClause, g: AtomSet, value: bool, sizes) -> list[FOClause]:
    """Clause pieces left after fixing every atom of ``g`` to ``value``.

    Pieces satisfied by the assignment disappear; literals over ``g`` that
    become false are removed.  An empty result clause signals a conflict.
    """
    if all(lit[0] != g.pred for lit in c.lits):
        return [c]
    out: list[FOClause] = []
    _cond(Work.of(c, sizes), g, value, 0, out, sizes)
    return out


def _cond(w: Work, g: AtomSet, value: bool, start: int, out: list, sizes):
    for i in range(start, len(w.lits)):
        p, pos, args = w.lits[i]
        if p != g.pred:
            continue
        prims = membership(args, g, w.resolve)
        if prims is None:
            continue
        inside, outside = shatter(w, prims)
        for o in outside:
            _cond(o, g, value, i + 1, out, sizes)
        if inside is None:
            return
        if pos == value:
            return
        del inside.lits[i]
        _cond(inside, g, value, i, out, sizes)
        return
    out.extend(finish(w, sizes))


def groundings(c: FOClause, sizes):
    """Every consistent assignment of the clause's variables (as dicts)."""
    n = len(c.sorts)
    vals: dict[int, int] = {}
    nbr: dict[int, list[int]] = {}
    for a, b in c.neq:
        nbr.setdefault(a, []).append(b)
        nbr.setdefault(b, []).append(a)

    def go(i):
        if i == n:
            yield dict(vals)
            return
        v = var_term(i)
        ex = c.excl[i]
        for k in range(sizes[c.sorts[i]]):
            if k in ex or any(vals.get(o) == k for o in nbr.get(v, ())):
                continue
            vals[v] = k
            yield from go(i + 1)
            del vals[v]

    yield from go(0)


def first_grounding(c: FOClause, sizes) -> dict | None:
    """Lexicographically first consistent assignment of the clause's variables."""
    n = len(c.sorts)
    vals: dict[int, int] = {}
    nbr: dict[int, list[int]] = {}
    for a, b in c.neq:
        nbr.setdefault(a, []).append(b)
        nbr.setdefault(b, []).append(a)

    def go(i):
        if i == n:
            return True
        v = var_term(i)
        ex = c.excl[i]
        for k in range(sizes[c.sorts[i]]):
            if k in ex or any(vals.get(o) == k for o in nbr.get(v, ())):
                continue
            vals[v] = k
            if go(i + 1):
                return True
            del vals[v]
        return False

    return vals if go(0) else None
