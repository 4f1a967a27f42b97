"""Pure-Python ground weighted model counting kernel.

Clauses are tuples of nonzero ints: literal ``a + 1`` is atom ``a`` true,
``-(a + 1)`` is atom ``a`` false.  All weights are natural logs.  The
compiled twin in ``_ground_ext.pyx`` implements the identical algorithm
(same recursion, same atom choice, same call counts).
"""

from math import exp, inf, log, log1p

NEG_INF = -inf


class ResourceLimit(RuntimeError):
    """A configured call budget was exhausted."""


def logaddexp(a, b):
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


def _mix(seed, a):
    # splitmix64-style integer hash; deterministic across processes
    z = (seed * 0x9E3779B97F4A7C15 + (a + 1) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & 0xFFFFFFFFFFFFFFFF
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & 0xFFFFFFFFFFFFFFFF
    return z ^ (z >> 31)


class Kernel:
    """Alg-4 style counter with unit propagation, components and caching."""

    def __init__(self, lw_pos, lw_neg, cache=True, unit_prop=True, seed=0, hook=None, cache_limit=None):
        self.lw_pos = lw_pos
        self.lw_neg = lw_neg
        self.use_cache = cache
        self.unit_prop = unit_prop
        self.seed = seed
        self.hook = hook
        self.cache_limit = cache_limit
        self.cache = {}
        self.calls = 0
        self.hits = 0
        self.misses = 0
        self.epsilon = 0.05
        self.call_limit = None
        # sampling: sub-problems whose exact count needs at most this many
        # calls are counted exactly instead of sampled (0 disables)
        self.exact_budget = 0
        self.too_hard = set()

    # -- helpers -------------------------------------------------------------
    def lw_sum(self, a):
        return logaddexp(self.lw_pos[a], self.lw_neg[a])

    def choose(self, clauses):
        occ = {}
        for c in clauses:
            for lit in c:
                a = lit - 1 if lit > 0 else -lit - 1
                occ[a] = occ.get(a, 0) + 1
        best = -1
        best_key = None
        seed = self.seed
        for a, n in occ.items():
            key = (-n, _mix(seed, a))
            if best_key is None or key < best_key:
                best, best_key = a, key
        return best

    @staticmethod
    def condition(clauses, lit):
        out = []
        neg = -lit
        for c in clauses:
            if lit in c:
                continue
            if neg in c:
                out.append(tuple(x for x in c if x != neg))
            else:
                out.append(c)
        return out

    @staticmethod
    def components(clauses):
        parent = {}

        def find(x):
            root = x
            while parent[root] != root:
                root = parent[root]
            while parent[x] != root:
                parent[x], x = root, parent[x]
            return root

        for c in clauses:
            first = None
            for lit in c:
                a = lit if lit > 0 else -lit
                if a not in parent:
                    parent[a] = a
                if first is None:
                    first = find(a)
                else:
                    r = find(a)
                    if r != first:
                        parent[r] = first
        groups = {}
        for c in clauses:
            lit = c[0]
            groups.setdefault(find(lit if lit > 0 else -lit), []).append(c)
        return list(groups.values())

    def propagate(self, clauses):
        """Unit resolution to fixpoint: (clauses, log factor, forced atoms) or None."""
        logf = 0.0
        forced = set()
        clauses = list(clauses)
        while True:
            unit = 0
            for c in clauses:
                if len(c) == 0:
                    return None
                if len(c) == 1:
                    unit = c[0]
                    break
            if unit == 0:
                return clauses, logf, forced
            a = unit - 1 if unit > 0 else -unit - 1
            forced.add(a)
            logf += self.lw_pos[a] if unit > 0 else self.lw_neg[a]
            if logf == NEG_INF:
                return None
            neg = -unit
            out = []
            for c in clauses:
                if unit in c:
                    continue
                if neg in c:
                    c = tuple(x for x in c if x != neg)
                    if not c:
                        return None
                out.append(c)
            clauses = out

    # -- exact counting -------------------------------------------------------
    def count(self, clauses, scope):
        """Log weighted count of ``clauses`` over the atoms in ``scope``."""
        self.calls += 1
        if self.call_limit is not None and self.calls > self.call_limit:
            raise ResourceLimit(f"more than {self.call_limit} recursive calls")
        logf = 0.0
        if self.unit_prop:
            r = self.propagate(clauses)
            if r is None:
                return NEG_INF
            clauses, logf, forced = r
            if forced:
                scope = scope - forced
        else:
            for c in clauses:
                if len(c) == 0:
                    return NEG_INF
        present = set()
        for c in clauses:
            for lit in c:
                present.add(lit - 1 if lit > 0 else -lit - 1)
        for a in scope:
            if a not in present:
                logf += self.lw_sum(a)
        if not clauses:
            return logf
        clauses = sorted(set(clauses))
        key = None
        if self.use_cache:
            key = tuple(clauses)
            v = self.cache.get(key)
            if v is not None:
                self.hits += 1
                return logf + v
            self.misses += 1
        comps = self.components(clauses)
        if len(comps) > 1:
            val = 0.0
            vals = []
            for comp in comps:
                atoms = {lit - 1 if lit > 0 else -lit - 1 for c in comp for lit in c}
                v = self.count(comp, atoms)
                vals.append(v)
                val += v
                if v == NEG_INF:
                    val = NEG_INF
                    break
            if self.hook is not None:
                self.hook("decompose", clauses, comps, vals, val)
        else:
            a = self.choose(clauses)
            rest = present - {a}
            vt = self.count(self.condition(clauses, a + 1), rest)
            vf = self.count(self.condition(clauses, -(a + 1)), rest)
            val = logaddexp(self.lw_pos[a] + vt, self.lw_neg[a] + vf)
            if self.hook is not None:
                self.hook("split", clauses, a, vt, vf, val)
        if key is not None:
            if self.cache_limit is not None and len(self.cache) >= self.cache_limit:
                self.cache.pop(next(iter(self.cache)))
            self.cache[key] = val
        return logf + val

    # -- sampling -------------------------------------------------------------
    def proposal(self, clauses, a):
        """One-step lookahead probability of setting atom ``a`` true."""
        pos, neg = a + 1, -(a + 1)
        nt = nf = 0
        unit_pos = unit_neg = False
        for c in clauses:
            if pos in c:
                nt += 1
                if len(c) == 1:
                    unit_pos = True
            elif neg in c:
                nf += 1
                if len(c) == 1:
                    unit_neg = True
        wt = nt * exp(self.lw_pos[a]) if nt else 0.0
        wf = nf * exp(self.lw_neg[a]) if nf else 0.0
        if wt + wf > 0:
            q = wt / (wt + wf)
        else:
            q = 0.5
        # support: never starve a branch that is not immediately refuted
        ok_t = self.lw_pos[a] != NEG_INF and not unit_neg
        ok_f = self.lw_neg[a] != NEG_INF and not unit_pos
        eps = self.epsilon
        if ok_t and q < eps:
            q = eps if ok_f else 1.0
        if ok_f and q > 1.0 - eps:
            q = 1.0 - eps if ok_t else 0.0
        if not ok_t and ok_f:
            q = 0.0
        if not ok_f and ok_t:
            q = 1.0
        return q

    def try_exact(self, clauses, present):
        """Exact count of a canonical clause list within the budget, else None."""
        key = tuple(clauses)
        if self.use_cache:
            v = self.cache.get(key)
            if v is not None:
                return v
        if key in self.too_hard:
            return None
        outer = self.call_limit
        self.call_limit = self.calls + self.exact_budget
        try:
            return self.count(clauses, present)
        except ResourceLimit:
            self.too_hard.add(key)
            return None
        finally:
            self.call_limit = outer

    def sample(self, clauses, scope, rng):
        """Log of one unbiased draw of the weighted count."""
        self.calls += 1
        logf = 0.0
        if self.unit_prop:
            r = self.propagate(clauses)
            if r is None:
                return NEG_INF
            clauses, logf, forced = r
            if forced:
                scope = scope - forced
        else:
            for c in clauses:
                if len(c) == 0:
                    return NEG_INF
        present = set()
        for c in clauses:
            for lit in c:
                present.add(lit - 1 if lit > 0 else -lit - 1)
        for a in scope:
            if a not in present:
                logf += self.lw_sum(a)
        if not clauses:
            return logf
        clauses = sorted(set(clauses))
        if self.exact_budget:
            v = self.try_exact(clauses, present)
            if v is not None:
                return logf + v
        comps = self.components(clauses)
        if len(comps) > 1:
            val = logf
            for comp in comps:
                atoms = {lit - 1 if lit > 0 else -lit - 1 for c in comp for lit in c}
                v = self.sample(comp, atoms, rng)
                if v == NEG_INF:
                    return NEG_INF
                val += v
            return val
        a = self.choose(clauses)
        q = self.proposal(clauses, a)
        rest = present - {a}
        if rng.random() < q:
            return logf + self.lw_pos[a] - log(q) + self.sample(self.condition(clauses, a + 1), rest, rng)
        return logf + self.lw_neg[a] - log(1.0 - q) + self.sample(self.condition(clauses, -(a + 1)), rest, rng)
