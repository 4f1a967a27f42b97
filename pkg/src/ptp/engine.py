"""Lifted weighted model counting over :class:`~ptp.fol.FOClause` sets.

Weights are normalized per predicate (``w + w_bar = 1``) so an atom no
clause mentions contributes a factor of one; the caller adds the global
normalizer back.  Everything is in log space.
"""

from __future__ import annotations

import math
import sys
from collections import OrderedDict
from math import lgamma, log

from ._ground_py import _mix
from ._kernel import NEG_INF, Kernel, ResourceLimit, logaddexp
from .fol import (EMPTY, AtomSet, FOClause, Work, atom_set, condition_clause, count_clause, groundings,
                  finish, first_grounding, membership, normalize, shatter, var_index)


def log_binom(n: int, k: int) -> float:
    return lgamma(n + 1) - lgamma(k + 1) - lgamma(n - k + 1)


def _entry_bytes(key) -> int:
    n = 64
    for c in key:
        n += 48 + 24 * len(c.lits) + 8 * sum(len(e) for e in c.excl)
    return n


class Vocab:
    """Sort sizes and predicate signatures (by integer id)."""

    def __init__(self, sizes, pred_sorts):
        self.sizes = list(sizes)
        self.pred_sorts = [tuple(s) for s in pred_sorts]

    def n_atoms(self, p: int) -> int:
        return math.prod(self.sizes[s] for s in self.pred_sorts[p])


class Split:
    """A lifted split candidate.

    ``free`` is ``None`` for a ground atom; otherwise ``pattern`` has one
    variable ``free`` ranging over the constants ``block``.
    """

    __slots__ = ("pred", "pattern", "free", "block", "partial")

    def __init__(self, pred, pattern, free=None, block=(), partial=False):
        self.pred = pred
        self.pattern = pattern
        self.free = free
        self.block = tuple(block)
        self.partial = partial

    @property
    def branches(self) -> int:
        return 2 if self.free is None else len(self.block) + 1

    def atom_set(self, consts, sort_size) -> AtomSet:
        if self.free is None:
            return AtomSet(self.pred, self.pattern, {})
        return AtomSet(self.pred, self.pattern,
                       {self.free: frozenset(range(sort_size)) - frozenset(consts)})

    def __repr__(self):
        return f"Split(pred={self.pred}, pattern={self.pattern}, block={self.block})"


class LiftedEngine:
    def __init__(self, vocab: Vocab, lw_pos, lw_neg, *, cache=True, unit_prop=True, seed=0,
                 cache_bytes=None, hook=None, lifting=True, call_limit=None, ground_ratio=1):
        self.vocab = vocab
        self.sizes = vocab.sizes
        self.lw_pos = list(lw_pos)
        self.lw_neg = list(lw_neg)
        self.use_cache = cache
        self.unit_prop = unit_prop
        self.seed = seed
        self.hook = hook
        self.lifting = lifting
        self.cache_bytes = cache_bytes
        self.cache: OrderedDict = OrderedDict()
        self.cache_used = 0
        self.calls = 0
        self.hits = 0
        self.misses = 0
        self.draws = 0
        self.plans: dict = {}
        self.plan_limit = 200_000
        self.exact_budget = 0
        # ground atoms handed to the propositional kernel
        self.atom_ids: dict = {}
        self.g_pos: list[float] = []
        self.g_neg: list[float] = []
        self.call_limit = call_limit
        self.lookahead = 48
        self.ground_ratio = ground_ratio
        self.ground_min_clauses = 8
        self.ground_limit = 512
        self.kernel = Kernel(self.g_pos, self.g_neg, cache, unit_prop, seed, None)
        self.kernel.call_limit = call_limit

    # -- statistics ----------------------------------------------------------
    @property
    def total_calls(self):
        return self.calls + self.kernel.calls

    @property
    def total_hits(self):
        return self.hits + self.kernel.hits

    @property
    def total_misses(self):
        return self.misses + self.kernel.misses

    # -- ground handoff ------------------------------------------------------
    def _atom(self, p, args) -> int:
        key = (p, args)
        i = self.atom_ids.get(key)
        if i is None:
            i = len(self.g_pos)
            self.atom_ids[key] = i
            self.g_pos.append(self.lw_pos[p])
            self.g_neg.append(self.lw_neg[p])
        return i

    def _ground_clauses(self, clauses):
        out = []
        for c in clauses:
            out.append(tuple(sorted({(self._atom(p, args) + 1) * (1 if pos else -1)
                                     for p, pos, args in c.lits})))
        return out

    def _as_ground(self, clauses):
        """Integer clauses when grounding the node costs no more than lifting it.

        That is when it is already ground, when its groundings number at most
        ``ground_ratio`` per first-order clause, or when evidence has
        fragmented it into many clauses with few groundings in total.  In
        the last two cases the lifted operators would only add overhead.
        Otherwise ``None``.
        """
        if all(not c.sorts for c in clauses):
            return self._ground_clauses(clauses)
        if not self.ground_ratio:
            return None
        budget = self.ground_ratio * len(clauses)
        if len(clauses) >= self.ground_min_clauses:
            budget = max(budget, self.ground_limit)
        total = 0
        for c in clauses:
            total += count_clause(c, self.sizes)
            if total > budget:
                return None
        out = set()
        for c in clauses:
            if not c.sorts:
                out.add(tuple(sorted({(self._atom(p, args) + 1) * (1 if pos else -1) for p, pos, args in c.lits})))
                continue
            for th in groundings(c, self.sizes):
                lits = {(self._atom(p, tuple(th.get(a, a) for a in args)) + 1) * (1 if pos else -1)
                        for p, pos, args in c.lits}
                if not any(-x in lits for x in lits):
                    out.add(tuple(sorted(lits)))
        return sorted(out)

    # -- weight of forcing a unit clause -------------------------------------
    def _unit_weight(self, c: FOClause) -> float:
        p, pos, _ = c.lits[0]
        lw = self.lw_pos[p] if pos else self.lw_neg[p]
        n = count_clause(c, self.sizes)
        if n == 0:
            return 0.0
        if lw == NEG_INF:
            return NEG_INF
        return n * lw

    def condition_all(self, clauses, g: AtomSet, value: bool):
        """Condition every clause; ``None`` on an empty clause (conflict)."""
        out = []
        for c in clauses:
            if all(lit[0] != g.pred for lit in c.lits):
                out.append(c)
                continue
            for piece in condition_clause(c, g, value, self.sizes):
                if not piece.lits:
                    return None
                out.append(piece)
        return out

    def propagate(self, clauses):
        """Lifted unit propagation: (clauses, log factor) or ``None``."""
        logf = 0.0
        clauses = list(clauses)
        while True:
            ui = next((i for i, c in enumerate(clauses) if len(c.lits) == 1), None)
            if ui is None:
                return clauses, logf
            u = clauses[ui]
            lw = self._unit_weight(u)
            if lw == NEG_INF:
                return None
            logf += lw
            rest = clauses[:ui] + clauses[ui + 1:]
            new = self.condition_all(rest, atom_set(u, 0), u.lits[0][1])
            if new is None:
                return None
            clauses = new

    # -- canonical form ------------------------------------------------------
    def _shape(self, c: FOClause):
        return (tuple((p, pos, tuple(a if a < 0 else -1000 for a in args)) for p, pos, args in c.lits),
                c.sorts, tuple(len(e) for e in c.excl), tuple(sorted(c.neq)))

    def _ckey(self, c: FOClause):
        return (self._shape(c), c.lits, tuple(tuple(sorted(e)) for e in c.excl))

    def signatures(self, clauses):
        """Occurrence signature of each named constant, per sort."""
        sig: dict = {}
        ps = self.vocab.pred_sorts
        for ci, c in enumerate(clauses):
            for li, (p, _, args) in enumerate(c.lits):
                for ai, a in enumerate(args):
                    if a >= 0:
                        sig.setdefault((ps[p][ai], a), []).append((0, ci, li, ai))
            for vi, e in enumerate(c.excl):
                s = c.sorts[vi]
                for k in e:
                    sig.setdefault((s, k), []).append((1, ci, vi, 0))
        return {k: tuple(v) for k, v in sig.items()}

    def classes(self, clauses, sig=None):
        """Per sort: list of constant classes (tuples), anonymous class last."""
        if sig is None:
            sig = self.signatures(clauses)
        by_sort: dict = {}
        for (s, k), v in sig.items():
            by_sort.setdefault(s, {}).setdefault(v, []).append(k)
        out = {}
        for s, groups in by_sort.items():
            out[s] = [tuple(sorted(groups[v])) for v in sorted(groups)]
        return out

    def anonymous(self, s: int, clauses_classes) -> list[int]:
        named = {k for cls in clauses_classes.get(s, ()) for k in cls}
        return [k for k in range(self.sizes[s]) if k not in named]

    def canonical(self, clauses):
        """Rename variables and constants so equivalent CNFs compare equal."""
        ordered = sorted(clauses, key=self._ckey)
        sig = self.signatures(ordered)
        by_sort: dict = {}
        for (s, k), v in sig.items():
            by_sort.setdefault(s, []).append((v, k))
        ren: dict = {}
        for s, items in by_sort.items():
            items.sort()
            for i, (_, k) in enumerate(items):
                ren[(s, k)] = i
        ps = self.vocab.pred_sorts
        out = []
        for c in ordered:
            lits = [(p, pos, tuple(a if a < 0 else ren[(ps[p][ai], a)] for ai, a in enumerate(args)))
                    for p, pos, args in c.lits]
            w = Work(lits, c.sorts,
                     {-(i + 1): frozenset(ren[(c.sorts[i], k)] for k in e) for i, e in enumerate(c.excl) if e},
                     set(c.neq), {}, self.sizes)
            out.extend(finish(w, self.sizes))
        out.sort(key=self._ckey)
        return tuple(out)

    def _cache_get(self, key):
        v = self.cache.get(key)
        if v is not None:
            self.cache.move_to_end(key)
        return v

    def _cache_put(self, key, val):
        if self.cache_bytes is not None:
            size = _entry_bytes(key)
            if size > self.cache_bytes:
                return
            while self.cache and self.cache_used + size > self.cache_bytes:
                old, _ = self.cache.popitem(last=False)
                self.cache_used -= _entry_bytes(old)
            self.cache_used += size
        self.cache[key] = val

    # -- components ----------------------------------------------------------
    def may_unify(self, c1: FOClause, l1: int, c2: FOClause, l2: int) -> bool:
        g = atom_set(c2, l2)
        prims = membership(c1.lits[l1][2], g)
        if prims is None:
            return False
        w = Work.of(c1, self.sizes)
        for prim in prims:
            if not w.apply(prim):
                return False
        return w.count(self.sizes) > 0

    def components(self, clauses):
        parent = list(range(len(clauses)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        occ: dict = {}
        for ci, c in enumerate(clauses):
            for li, lit in enumerate(c.lits):
                occ.setdefault(lit[0], []).append((ci, li))
        for p, lst in occ.items():
            general = next(((ci, li) for ci, li in lst if _general(clauses[ci], li)), None)
            if general is not None:
                for ci, _ in lst:
                    parent[find(ci)] = find(general[0])
                continue
            for i in range(len(lst)):
                ci, li = lst[i]
                for j in range(i + 1, len(lst)):
                    cj, lj = lst[j]
                    if find(ci) == find(cj):
                        continue
                    if self.may_unify(clauses[ci], li, clauses[cj], lj):
                        parent[find(ci)] = find(cj)
        groups: dict = {}
        for ci in range(len(clauses)):
            groups.setdefault(find(ci), []).append(clauses[ci])
        return list(groups.values())

    # -- decomposer ----------------------------------------------------------
    def find_decomposer(self, clauses):
        """Designated argument position per predicate, or ``None``."""
        preds = list(dict.fromkeys(lit[0] for c in clauses for lit in c.lits))
        if not preds or any(not self.vocab.pred_sorts[p] for p in preds):
            return None
        by_pred: dict = {p: [] for p in preds}
        for ci, c in enumerate(clauses):
            for lit in c.lits:
                by_pred[lit[0]].append(ci)

        def ok(assign):
            has_var = False
            for c in clauses:
                term = None
                for p, _, args in c.lits:
                    if p not in assign:
                        continue
                    t = args[assign[p]]
                    if term is None:
                        term = t
                    elif t != term:
                        return False
                if term is not None and term < 0:
                    has_var = True
            return has_var or len(assign) < len(preds)

        def go(i, assign):
            if i == len(preds):
                return dict(assign)
            p = preds[i]
            for pos in range(len(self.vocab.pred_sorts[p])):
                assign[p] = pos
                if ok(assign):
                    r = go(i + 1, assign)
                    if r is not None:
                        return r
                del assign[p]
            return None

        r = go(0, {})
        if r is None:
            return None
        sorts = {self.vocab.pred_sorts[p][pos] for p, pos in r.items()}
        if len(sorts) != 1:
            return None
        return r

    def decompose_blocks(self, clauses, dec):
        """[(sub-CNF, multiplicity)] for the decomposer ``dec``."""
        p0 = next(iter(dec))
        s = self.vocab.pred_sorts[p0][dec[p0]]
        cls = self.classes(clauses)
        blocks = [list(k) for k in cls.get(s, [])]
        anon = self.anonymous(s, cls)
        if anon:
            blocks.append(anon)
        out = []
        for block in blocks:
            x = block[0]
            sub = []
            for c in clauses:
                p, _, args = c.lits[0]
                t = args[dec[p]]
                if t >= 0:
                    if t == x:
                        sub.append(c)
                    continue
                if x in c.excl[var_index(t)]:
                    continue
                w = Work.of(c, self.sizes)
                if w.bind(t, x):
                    sub.extend(finish(w, self.sizes))
            if sub:
                out.append((sub, len(block)))
        return out

    # -- split heuristic -----------------------------------------------------
    def split_candidates(self, clauses):
        cls = self.classes(clauses)
        anon_cache: dict = {}
        seen = {}
        for c in clauses:
            fg = None
            for p, _, args in c.lits:
                vs = list(dict.fromkeys(a for a in args if a < 0))
                if not vs:
                    key = (p, args, None, ())
                    seen.setdefault(key, Split(p, args))
                    continue
                if fg is None:
                    fg = first_grounding(c, self.sizes)
                    if fg is None:
                        break
                for f in vs:
                    s = c.sorts[var_index(f)]
                    fixed = {v: fg[v] for v in vs if v != f}
                    pattern = tuple(fixed.get(a, a) if a < 0 and a != f else a for a in args)
                    blocks = list(cls.get(s, []))
                    if s not in anon_cache:
                        anon_cache[s] = tuple(self.anonymous(s, cls))
                    if anon_cache[s]:
                        blocks.append(anon_cache[s])
                    ex = c.excl[var_index(f)]
                    banned = set(fixed.values()) if fixed else set()
                    for nb in c.neq:
                        if f in nb:
                            o = nb[1] if nb[0] == f else nb[0]
                            if o in fixed:
                                banned.add(fixed[o])
                    for block in blocks:
                        if block[0] in ex:
                            continue
                        b = tuple(k for k in block if k not in banned and k not in ex)
                        if not b:
                            continue
                        if len(b) == 1:
                            ga = tuple(b[0] if a == f else a for a in pattern)
                            seen.setdefault((p, ga, None, ()), Split(p, ga))
                            continue
                        key = (p, pattern, f, b)
                        seen.setdefault(key, Split(p, pattern, f, b, partial=bool(fixed)))
        return list(seen.values())

    def _occurrences(self, clauses, sp: Split) -> int:
        s = None if sp.free is None else self.vocab.pred_sorts[sp.pred][sp.pattern.index(sp.free)]
        g = sp.atom_set(sp.block, self.sizes[s] if s is not None else 0)
        n = 0
        for c in clauses:
            for li, lit in enumerate(c.lits):
                if lit[0] == sp.pred and membership(lit[2], g) is not None:
                    n += 1
        return n

    def _hash(self, sp: Split) -> int:
        free = 0 if sp.free is None else sp.free
        return _mix(self.seed, hash((sp.pred, sp.pattern, free, sp.block)) & 0xFFFFFFFF)

    def _progress(self, clauses, sp: Split) -> bool:
        """Whether a representative branch of ``sp`` decomposes or grounds out."""
        p = sp.pred
        if sp.free is None:
            cur = self.condition_all(clauses, AtomSet(p, sp.pattern, {}), True)
        else:
            size = self.sizes[self.vocab.pred_sorts[p][sp.pattern.index(sp.free)]]
            k = len(sp.block) // 2
            cur = clauses
            if k:
                cur = self.condition_all(cur, sp.atom_set(sp.block[:k], size), True)
            if cur is not None:
                cur = self.condition_all(cur, sp.atom_set(sp.block[k:], size), False)
        if cur is None:
            return True
        if self.unit_prop:
            r = self.propagate(cur)
            if r is None:
                return True
            cur = r[0]
        for comp in self.components(cur):
            if any(c.sorts for c in comp) and self.find_decomposer(comp) is None:
                return False
        return True

    def choose_split(self, clauses) -> Split:
        """Fewest branches among splits whose branch decomposes, else fewest branches.

        Ties go to the atom with the most clause occurrences, then to a
        seeded hash.
        """
        cands = self.split_candidates(clauses)
        if self.lifting and len(cands) > 1 and any(c.sorts for c in clauses):
            order = sorted(cands, key=lambda sp: (sp.partial, sp.branches, self._hash(sp)))
            tried = set()
            for sp in order:
                # one representative per predicate / pattern shape
                shape = (sp.pred, sp.free is None, sp.partial,
                         tuple(a < 0 for a in sp.pattern), sp.branches if sp.free is not None else 0)
                if shape in tried:
                    continue
                tried.add(shape)
                if len(tried) > self.lookahead:
                    break
                if self._progress(clauses, sp):
                    return sp
        best = min((sp.partial, sp.branches) for sp in cands)
        tied = [sp for sp in cands if (sp.partial, sp.branches) == best]
        if len(tied) == 1:
            return tied[0]
        return min(tied, key=lambda sp: (-self._occurrences(clauses, sp), self._hash(sp)))

    def split_branches(self, clauses, sp: Split):
        """Yield ``(log weight, conditioned clauses or None)`` per branch."""
        p = sp.pred
        if sp.free is None:
            g = AtomSet(p, sp.pattern, {})
            yield self.lw_pos[p], self.condition_all(clauses, g, True)
            yield self.lw_neg[p], self.condition_all(clauses, g, False)
            return
        s = self.vocab.pred_sorts[p][sp.pattern.index(sp.free)]
        size = self.sizes[s]
        n = len(sp.block)
        for k in range(n + 1):
            lw = log_binom(n, k)
            if k:
                lw = NEG_INF if self.lw_pos[p] == NEG_INF else lw + k * self.lw_pos[p]
            if n - k:
                lw = NEG_INF if self.lw_neg[p] == NEG_INF or lw == NEG_INF else lw + (n - k) * self.lw_neg[p]
            if lw == NEG_INF:
                yield NEG_INF, None
                continue
            cur = clauses
            if k:
                cur = self.condition_all(cur, sp.atom_set(sp.block[:k], size), True)
            if cur is not None and n - k:
                cur = self.condition_all(cur, sp.atom_set(sp.block[k:], size), False)
            yield lw, cur

    # -- exact counting ------------------------------------------------------
    def count(self, clauses) -> float:
        self.calls += 1
        if self.call_limit is not None and self.calls > self.call_limit:
            raise ResourceLimit(f"more than {self.call_limit} recursive calls")
        if any(not c.lits for c in clauses):
            return NEG_INF
        logf = 0.0
        if self.unit_prop:
            r = self.propagate(clauses)
            if r is None:
                return NEG_INF
            clauses, logf = r
        if not clauses:
            return logf
        gc = self._as_ground(clauses)
        if gc is not None:
            scope = frozenset(abs(x) - 1 for c in gc for x in c)
            return logf + self.kernel.count(gc, scope)
        clauses = self.canonical(clauses)
        key = None
        if self.use_cache:
            key = clauses
            v = self._cache_get(key)
            if v is not None:
                self.hits += 1
                return logf + v
            self.misses += 1
        val = self._count_canonical(clauses)
        if key is not None:
            self._cache_put(key, val)
        return logf + val

    def _count_canonical(self, clauses) -> float:
        comps = self.components(clauses)
        if len(comps) > 1:
            groups: dict = {}
            for comp in comps:
                k = self.canonical(comp)
                groups[k] = groups.get(k, 0) + 1
            val = 0.0
            parts = []
            for comp, m in groups.items():
                v = self.count(list(comp))
                parts.append((comp, m, v))
                if v == NEG_INF:
                    val = NEG_INF
                    break
                val += m * v
            if self.hook is not None:
                self.hook("decompose", clauses, parts, val)
            return val
        dec = self.find_decomposer(clauses) if self.lifting else None
        if dec is not None:
            val = 0.0
            parts = []
            for sub, m in self.decompose_blocks(clauses, dec):
                v = self.count(sub)
                parts.append((sub, m, v))
                if v == NEG_INF:
                    val = NEG_INF
                    break
                val += m * v
            if self.hook is not None:
                self.hook("decompose", clauses, parts, val)
            return val
        sp = self.choose_split(clauses)
        val = NEG_INF
        parts = []
        for lw, cur in self.split_branches(clauses, sp):
            if cur is None or lw == NEG_INF:
                v = NEG_INF
            else:
                v = self.count(cur)
            parts.append((lw, cur, v))
            val = logaddexp(val, lw + v if v != NEG_INF else NEG_INF)
        if self.hook is not None:
            self.hook("split", clauses, sp, parts, val)
        return val

    # -- sampling ------------------------------------------------------------
    def _proposal_ground(self, clauses, sp: Split) -> float:
        g = AtomSet(sp.pred, sp.pattern, {})
        nt = nf = 0
        unit_t = unit_f = False
        for c in clauses:
            for lit in c.lits:
                if lit[0] != sp.pred:
                    continue
                prims = membership(lit[2], g)
                if prims is None:
                    continue
                inside, _ = shatter(Work.of(c, self.sizes), prims)
                if inside is None:
                    continue
                n = inside.count(self.sizes)
                if lit[1]:
                    nt += n
                    unit_t |= len(c.lits) == 1 and not c.sorts
                else:
                    nf += n
                    unit_f |= len(c.lits) == 1 and not c.sorts
        wt = nt * math.exp(self.lw_pos[sp.pred]) if nt else 0.0
        wf = nf * math.exp(self.lw_neg[sp.pred]) if nf else 0.0
        q = wt / (wt + wf) if wt + wf > 0 else 0.5
        ok_t = self.lw_pos[sp.pred] != NEG_INF and not unit_f
        ok_f = self.lw_neg[sp.pred] != NEG_INF and not unit_t
        eps = self.kernel.epsilon
        if ok_t and q < eps:
            q = eps if ok_f else 1.0
        if ok_f and q > 1.0 - eps:
            q = 1.0 - eps if ok_t else 0.0
        if not ok_t and ok_f:
            q = 0.0
        if not ok_f and ok_t:
            q = 1.0
        return q

    def _draw(self, rng) -> float:
        self.draws += 1
        return rng.random()

    def _plan(self, clauses):
        """Memoized search-node structure for sampling.

        Everything a draw does at a node except the random choice depends
        only on the node's clauses, so it is computed once and reused.
        """
        key = tuple(clauses)
        plan = self.plans.get(key)
        if plan is not None:
            return plan
        if len(self.plans) >= self.plan_limit:
            self.plans.clear()
        plan = self._make_plan(clauses)
        self.plans[key] = plan
        return plan

    def _make_plan(self, clauses):
        if any(not c.lits for c in clauses):
            return ("zero",)
        logf = 0.0
        if self.unit_prop:
            r = self.propagate(clauses)
            if r is None:
                return ("zero",)
            clauses, logf = r
        if not clauses:
            return ("const", logf)
        gc = self._as_ground(clauses)
        if gc is not None:
            return ("ground", logf, gc, frozenset(abs(x) - 1 for c in gc for x in c))
        clauses = self.canonical(clauses)
        if self.exact_budget:
            v = self._try_exact(clauses)
            if v is not None:
                return ("zero",) if v == NEG_INF else ("const", logf + v)
        comps = self.components(clauses)
        if len(comps) > 1:
            groups: dict = {}
            for comp in comps:
                k = self.canonical(comp)
                groups[k] = groups.get(k, 0) + 1
            return ("product", logf, [(list(k), m) for k, m in groups.items()])
        dec = self.find_decomposer(clauses) if self.lifting else None
        if dec is not None:
            return ("product", logf, list(self.decompose_blocks(clauses, dec)))
        sp = self.choose_split(clauses)
        if sp.free is None:
            return ("atom", logf, clauses, sp, self._proposal_ground(clauses, sp), {})
        branches = list(self._binomial_weights(sp))
        return ("block", logf, clauses, sp, branches, self._block_proposal(branches), {})

    def _try_exact(self, clauses):
        outer = self.call_limit, self.kernel.call_limit
        self.call_limit = self.calls + self.exact_budget
        self.kernel.call_limit = self.kernel.calls + self.exact_budget
        try:
            return self.count(clauses)
        except ResourceLimit:
            return None
        finally:
            self.call_limit, self.kernel.call_limit = outer

    def _branch(self, memo, key, make):
        if key not in memo:
            memo[key] = make()
        return memo[key]

    def sample(self, clauses, rng) -> float:
        """Log of one unbiased importance-sampling draw of the count."""
        self.calls += 1
        plan = self._plan(clauses)
        kind = plan[0]
        if kind == "zero":
            return NEG_INF
        logf = plan[1]
        if kind == "const":
            return logf
        if kind == "ground":
            v = self.kernel.sample(plan[2], plan[3], _Counting(rng, self))
            return logf + v if v != NEG_INF else NEG_INF
        if kind == "product":
            return self._sample_product(logf, plan[2], rng)
        if kind == "atom":
            _, _, cl, sp, q, memo = plan
            p = sp.pred
            if self._draw(rng) < q:
                lw, value, lq = self.lw_pos[p], True, log(q)
            else:
                lw, value, lq = self.lw_neg[p], False, log(1.0 - q)
            cur = self._branch(memo, value, lambda: self.condition_all(cl, AtomSet(p, sp.pattern, {}), value))
            if cur is None:
                return NEG_INF
            v = self.sample(cur, rng)
            return NEG_INF if v == NEG_INF else logf + lw - lq + v
        _, _, cl, sp, branches, q, memo = plan
        u = self._draw(rng)
        acc = 0.0
        k = len(branches) - 1
        for i, qi in enumerate(q):
            if qi == 0.0:
                continue
            acc += qi
            if u < acc:
                k = i
                break
        while q[k] == 0.0:
            k -= 1
        lq = log(q[k])

        def make():
            s = self.vocab.pred_sorts[sp.pred][sp.pattern.index(sp.free)]
            size = self.sizes[s]
            cur = cl
            if k:
                cur = self.condition_all(cur, sp.atom_set(sp.block[:k], size), True)
            if cur is not None and k < len(sp.block):
                cur = self.condition_all(cur, sp.atom_set(sp.block[k:], size), False)
            return cur

        cur = self._branch(memo, k, make)
        if cur is None:
            return NEG_INF
        v = self.sample(cur, rng)
        return NEG_INF if v == NEG_INF else logf + branches[k] - lq + v

    def _block_proposal(self, branches) -> list[float]:
        """Binomial weights mixed with a uniform floor over the feasible counts."""
        tot = NEG_INF
        for lw in branches:
            tot = logaddexp(tot, lw)
        live = [lw != NEG_INF for lw in branches]
        eps = self.kernel.epsilon
        n_live = sum(live)
        return [(1.0 - eps) * math.exp(lw - tot) + eps / n_live if ok else 0.0 for lw, ok in zip(branches, live)]

    def _binomial_weights(self, sp: Split):
        p = sp.pred
        n = len(sp.block)
        for k in range(n + 1):
            lw = log_binom(n, k)
            if k:
                lw = NEG_INF if self.lw_pos[p] == NEG_INF else lw + k * self.lw_pos[p]
            if n - k and lw != NEG_INF:
                lw = NEG_INF if self.lw_neg[p] == NEG_INF else lw + (n - k) * self.lw_neg[p]
            yield lw

    def _sample_product(self, logf, parts, rng) -> float:
        """Product over parts; a part with multiplicity m gets m independent draws.

        When a draw consumed no randomness it is exact, and is raised to the
        power m instead of repeated.
        """
        val = logf
        for sub, m in parts:
            before = self.draws
            v = self.sample(sub, rng)
            if v == NEG_INF:
                return NEG_INF
            if self.draws == before:
                val += m * v
                continue
            val += v
            for _ in range(m - 1):
                v = self.sample(sub, rng)
                if v == NEG_INF:
                    return NEG_INF
                val += v
        return val


class _Counting:
    """RNG wrapper that counts draws made by the ground kernel."""

    __slots__ = ("rng", "engine")

    def __init__(self, rng, engine):
        self.rng = rng
        self.engine = engine

    def random(self):
        self.engine.draws += 1
        return self.rng.random()


def _general(c: FOClause, li: int) -> bool:
    """Literal whose atom set is every atom of its predicate."""
    args = c.lits[li][2]
    if len(set(args)) != len(args) or any(a >= 0 for a in args):
        return False
    for a in args:
        if c.excl[var_index(a)]:
            return False
        if any(a in pr for pr in c.neq):
            return False
    return True


def deep(fn, *args, stack_mb: int = 512, **kw):
    """Run ``fn`` on a thread with a large stack and a raised recursion limit."""
    import threading

    result = {}

    def run():
        try:
            result["v"] = fn(*args, **kw)
        except BaseException as e:  # re-raised on the caller's thread
            result["e"] = e

    old_limit = sys.getrecursionlimit()
    old_size = threading.stack_size()
    sys.setrecursionlimit(max(old_limit, 200000))
    threading.stack_size(stack_mb * 1024 * 1024)
    try:
        t = threading.Thread(target=run)
        t.start()
        t.join()
    finally:
        threading.stack_size(old_size)
        sys.setrecursionlimit(old_limit)
    if "e" in result:
        raise result["e"]
    return result["v"]
