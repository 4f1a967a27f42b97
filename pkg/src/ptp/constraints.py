"""Substitution constraints (x = y, x != y) with forward checking.

A :class:`ConstraintStore` is a persistent value: :meth:`ConstraintStore.add`
returns a new store (or ``None`` when the result is inconsistent) and never
mutates the receiver.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Iterable, Mapping

from .terms import Const, Domain, Var, is_var


class ModelError(ValueError):
    """Ill-typed or otherwise malformed model input."""


@dataclass(frozen=True)
class SubstitutionConstraint:
    lhs: Var
    equal: bool
    rhs: Var | Const

    def __post_init__(self):
        if not is_var(self.lhs):
            raise ModelError(f"constraint lhs must be a variable, got {self.lhs}")
        if self.lhs.sort != self.rhs.sort:
            raise ModelError(f"sort mismatch in constraint {self}")

    def __str__(self):
        return f"{self.lhs} {'=' if self.equal else '!='} {self.rhs}"


def eq(x, y) -> SubstitutionConstraint:
    return SubstitutionConstraint(x, True, y)


def ne(x, y) -> SubstitutionConstraint:
    return SubstitutionConstraint(x, False, y)


# ---------------------------------------------------------------------------
# counting assignments under exclusion sets and pairwise disequalities


def count_colorings(sizes: list[int], excls: list[frozenset], edges: Iterable[tuple[int, int]]) -> int:
    """Number of assignments of values to variables ``0..n-1``.

    Variable ``i`` ranges over ``sizes[i]`` objects minus ``excls[i]``; each
    edge ``(i, j)`` forbids equal values.  Edges must join variables over
    the same domain.  Deletion-contraction on the edge set, applied per
    connected component; exact for any graph.
    """
    n = len(sizes)
    edges = {(min(i, j), max(i, j)) for i, j in edges}
    for i, j in edges:
        if i == j:
            return 0
    if not edges:
        return prod(max(0, s - len(e)) for s, e in zip(sizes, excls))
    # split into connected components
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, j in edges:
        parent[find(i)] = find(j)
    comps: dict[int, list[int]] = {}
    for v in range(n):
        comps.setdefault(find(v), []).append(v)
    total = 1
    for members in comps.values():
        if len(members) == 1:
            v = members[0]
            total *= max(0, sizes[v] - len(excls[v]))
        else:
            idx = {v: k for k, v in enumerate(members)}
            sub = [(idx[i], idx[j]) for i, j in edges if i in idx]
            total *= _dc(tuple((sizes[v], excls[v]) for v in members), tuple(sorted(sub)))
        if total == 0:
            return 0
    return total


def _dc(groups, edges) -> int:
    if not edges:
        return prod(max(0, s - len(e)) for s, e in groups)
    (i, j), rest = edges[0], edges[1:]
    deleted = _dc(groups, rest)
    # contract j into i
    size, ex = groups[i][0], groups[i][1] | groups[j][1]
    merged = [g for k, g in enumerate(groups) if k != j]
    ii = i if i < j else i - 1
    merged[ii] = (size, ex)

    def remap(k):
        if k == j:
            return ii
        return k if k < j else k - 1

    new_edges = set()
    for a, b in rest:
        a, b = remap(a), remap(b)
        if a == b:
            return deleted  # contraction creates a self-loop: no colourings
        new_edges.add((min(a, b), max(a, b)))
    return deleted - _dc(tuple(merged), tuple(sorted(new_edges)))


# ---------------------------------------------------------------------------


class ConstraintStore:
    """Equalities via union-find, disequalities on class representatives.

    Every variable has a live domain: the constants of its sort minus its
    excluded constants (or the single constant it is bound to).  A store is
    inconsistent iff some live domain is empty; single-valued live domains
    are bound eagerly and the binding is forwarded to disequal neighbours.
    """

    __slots__ = ("domains", "_parent", "_bound", "_excl", "_neq", "_vars")

    def __init__(self, domains: Mapping[str, Domain], _state=None):
        self.domains = domains
        if _state is None:
            self._parent, self._bound, self._excl, self._neq, self._vars = {}, {}, {}, frozenset(), frozenset()
        else:
            self._parent, self._bound, self._excl, self._neq, self._vars = _state

    # -- queries -------------------------------------------------------------
    def find(self, v: Var) -> Var:
        while v in self._parent:
            v = self._parent[v]
        return v

    @property
    def variables(self) -> frozenset:
        return self._vars

    def value(self, v: Var) -> Const | None:
        return self._bound.get(self.find(v))

    def excluded(self, v: Var) -> frozenset:
        return self._excl.get(self.find(v), frozenset())

    def live(self, v: Var) -> frozenset:
        c = self.value(v)
        if c is not None:
            return frozenset([c])
        ex = self.excluded(v)
        return frozenset(c for c in self.domains[v.sort].constants() if c not in ex)

    def live_size(self, v: Var) -> int:
        if self.value(v) is not None:
            return 1
        return self.domains[v.sort].size - len(self.excluded(v))

    def disequal(self, a: Var, b: Var) -> bool:
        return frozenset((self.find(a), self.find(b))) in self._neq

    def constraints(self) -> list[SubstitutionConstraint]:
        out = []
        for v in sorted(self._vars):
            r = self.find(v)
            if r != v:
                out.append(eq(v, r))
            elif r in self._bound:
                out.append(eq(v, self._bound[r]))
            else:
                out.extend(ne(v, c) for c in sorted(self._excl.get(r, ())))
        for pair in sorted(tuple(sorted(p)) for p in self._neq):
            out.append(ne(*pair))
        return out

    def __eq__(self, other):
        return isinstance(other, ConstraintStore) and self._canon() == other._canon()

    def __hash__(self):
        return hash(self._canon())

    def _canon(self):
        classes = {}
        for v in self._vars:
            classes.setdefault(self.find(v), set()).add(v)
        return frozenset(
            (frozenset(m), self._bound.get(r), self._excl.get(r, frozenset()))
            for r, m in classes.items()
        ), self._neq

    def __repr__(self):
        return "{" + ", ".join(map(str, self.constraints())) + "}"

    # -- updates ---------------------------------------------------------------
    def add(self, c: SubstitutionConstraint) -> "ConstraintStore | None":
        if c.lhs.sort != c.rhs.sort:
            raise ModelError(f"sort mismatch in constraint {c}")
        st = _Mut(self)
        ok = st.add(c)
        return st.freeze() if ok else None

    def add_all(self, cs: Iterable[SubstitutionConstraint]) -> "ConstraintStore | None":
        st = _Mut(self)
        for c in cs:
            if c.lhs.sort != c.rhs.sort:
                raise ModelError(f"sort mismatch in constraint {c}")
            if not st.add(c):
                return None
        return st.freeze()

    def restrict(self, vs: Iterable[Var]) -> "ConstraintStore":
        """Projection keeping only constraints among ``vs`` (unary ones kept)."""
        vs = set(vs)
        out = _Mut(ConstraintStore(self.domains))
        for c in self.constraints():
            if c.lhs in vs and (not is_var(c.rhs) or c.rhs in vs):
                out.add(c)
            elif c.lhs in vs and c.equal and is_var(c.rhs):
                r = self.value(c.rhs)
                if r is not None:
                    out.add(eq(c.lhs, r))
                else:
                    for k in self.excluded(c.rhs):
                        out.add(ne(c.lhs, k))
        for v in vs:
            out.touch(v)
        return out.freeze()

    def count(self, vs: Iterable[Var]) -> int:
        """Number of assignments to ``vs`` consistent with the store.

        Constraints linking ``vs`` to variables outside ``vs`` are projected
        away (their existential extension is not checked).
        """
        reps = {}
        for v in vs:
            reps.setdefault(self.find(v), v)
        if not self.consistent:
            return 0
        order = list(reps)
        idx = {r: i for i, r in enumerate(order)}
        sizes, excls = [], []
        for r in order:
            if r in self._bound:
                sizes.append(1)
                excls.append(frozenset())
            else:
                sizes.append(self.domains[r.sort].size)
                excls.append(self._excl.get(r, frozenset()))
        edges = []
        for pair in self._neq:
            a, b = tuple(pair)
            if a in idx and b in idx:
                edges.append((idx[a], idx[b]))
        # bound classes reduce to singleton sets; disequal bound pairs were rejected on insertion
        for (i, j) in list(edges):
            if order[i] in self._bound or order[j] in self._bound:
                edges.remove((i, j))
        return count_colorings(sizes, excls, edges)

    @property
    def consistent(self) -> bool:
        return all(self.live_size(v) > 0 for v in self._vars)


class _Mut:
    def __init__(self, s: ConstraintStore):
        self.domains = s.domains
        self.parent = dict(s._parent)
        self.bound = dict(s._bound)
        self.excl = dict(s._excl)
        self.neq = set(s._neq)
        self.vars = set(s._vars)

    def freeze(self) -> ConstraintStore:
        return ConstraintStore(
            self.domains,
            (self.parent, self.bound, self.excl, frozenset(self.neq), frozenset(self.vars)),
        )

    def touch(self, v: Var):
        if v.sort not in self.domains:
            raise ModelError(f"unknown sort {v.sort!r}")
        self.vars.add(v)

    def find(self, v):
        while v in self.parent:
            v = self.parent[v]
        return v

    def live_size(self, r):
        if r in self.bound:
            return 1
        return self.domains[r.sort].size - len(self.excl.get(r, ()))

    def add(self, c: SubstitutionConstraint) -> bool:
        self.touch(c.lhs)
        a = self.find(c.lhs)
        if is_var(c.rhs):
            self.touch(c.rhs)
            b = self.find(c.rhs)
            if c.equal:
                return self.merge(a, b)
            if a == b:
                return False
            ba, bb = self.bound.get(a), self.bound.get(b)
            if ba is not None and bb is not None:
                return ba != bb
            if ba is not None:
                return self.exclude(b, ba)
            if bb is not None:
                return self.exclude(a, bb)
            self.neq.add(frozenset((a, b)))
            return True
        if c.rhs.name not in self.domains[c.rhs.sort]:
            raise ModelError(f"constant {c.rhs} is not in domain {c.rhs.sort!r}")
        if c.equal:
            return self.bind(a, c.rhs)
        return self.exclude(a, c.rhs)

    def exclude(self, r, k) -> bool:
        b = self.bound.get(r)
        if b is not None:
            return b != k
        ex = self.excl.get(r, frozenset())
        if k in ex:
            return True
        self.excl[r] = ex | {k}
        return self.check(r)

    def bind(self, r, k) -> bool:
        b = self.bound.get(r)
        if b is not None:
            return b == k
        if k in self.excl.get(r, ()):
            return False
        self.bound[r] = k
        self.excl.pop(r, None)
        for pair in [p for p in self.neq if r in p]:
            self.neq.discard(pair)
            (other,) = pair - {r}
            if not self.exclude(other, k):
                return False
        return True

    def merge(self, a, b) -> bool:
        if a == b:
            return True
        if frozenset((a, b)) in self.neq:
            return False
        ba, bb = self.bound.get(a), self.bound.get(b)
        if ba is not None and bb is not None and ba != bb:
            return False
        self.parent[b] = a
        ex = self.excl.pop(b, frozenset()) | self.excl.get(a, frozenset())
        if ex:
            self.excl[a] = ex
        for pair in [p for p in self.neq if b in p]:
            self.neq.discard(pair)
            (other,) = pair - {b}
            if other == a:
                return False
            self.neq.add(frozenset((a, other)))
        if bb is not None:
            self.bound.pop(b)
            return self.bind(a, bb) if ba is None else True
        if ba is not None:
            bound = self.bound.pop(a)
            return self.bind(a, bound)
        return self.check(a)

    def check(self, r) -> bool:
        n = self.live_size(r)
        if n == 0:
            return False
        if n == 1 and r not in self.bound:
            ex = self.excl.get(r, frozenset())
            (k,) = [c for c in self.domains[r.sort].constants() if c not in ex]
            return self.bind(r, k)
        return True


# ---------------------------------------------------------------------------


def add_constraint(s: ConstraintStore, c: SubstitutionConstraint) -> ConstraintStore | None:
    return s.add(c)


def count_groundings(atom, s: ConstraintStore) -> int:
    """n_A(S): ground instances of ``atom`` consistent with ``s``.

    Counting uses the full declared domain of every sort.
    """
    vs = [t for t in atom.args if is_var(t)]
    if not s.consistent:
        return 0
    # constant arguments must survive the store's equalities untouched
    return s.count(vs)


def partition_constants(decomposer: Iterable[Var], s: ConstraintStore, domain: Domain) -> list[list[Const]]:
    """Blocks of constants that yield identical CNFs when substituted.

    Constants are grouped by their constraint signature w.r.t. the
    decomposer variables (and any other mention in the store); a constant
    that no decomposer variable can take is dropped.
    """
    decomposer = list(decomposer)
    mentioned: dict[Const, list] = {}
    for c in s.constraints():
        if isinstance(c.rhs, Const):
            mentioned.setdefault(c.rhs, []).append((c.lhs, c.equal))
    blocks: dict[tuple, list[Const]] = {}
    for k in domain.constants():
        sig = []
        usable = False
        for x in decomposer:
            v = s.value(x)
            if v is not None:
                status = "=" if v == k else "x"
            elif k in s.excluded(x):
                status = "x"
            else:
                status = ""
            usable |= status != "x"
            sig.append(status)
        if not usable:
            continue
        others = tuple(sorted((str(v), e) for v, e in mentioned.get(k, ()) if v not in decomposer))
        key = (tuple(sig), others, k if others else None)
        blocks.setdefault(key, []).append(k)
    return list(blocks.values())
