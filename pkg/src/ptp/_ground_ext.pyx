# distutils: language = c++
# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ground counting kernel.

Same algorithm as ``_ground_py.Kernel`` (same propagation order, atom
choice, component order and cache keys, hence the same call counts), on
flat C++ arrays: a clause set is ``lit`` plus clause offsets ``start``.
Log weights are read from the caller's lists, which may grow between
calls (the lifted engine appends atoms as it grounds them).
"""

from libc.math cimport exp, log, log1p, INFINITY
from libc.stdint cimport uint64_t, int64_t
from libc.string cimport memcpy
from libcpp cimport bool as cbool
from libcpp.algorithm cimport sort
from libcpp.deque cimport deque
from libcpp.string cimport string
from libcpp.unordered_map cimport unordered_map
from libcpp.unordered_set cimport unordered_set
from libcpp.vector cimport vector
from cython.operator cimport dereference as deref

from . import _ground_py
from ._ground_py import ResourceLimit

cdef double NEG_INF = -INFINITY


cdef inline double _lae(double a, double b) noexcept nogil:
    if a == NEG_INF:
        return b
    if b == NEG_INF:
        return a
    if a > b:
        return a + log1p(exp(b - a))
    return b + log1p(exp(a - b))


cdef inline uint64_t _mix(uint64_t seed, uint64_t a) noexcept nogil:
    cdef uint64_t z = seed * <uint64_t>0x9E3779B97F4A7C15ULL + (a + 1) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 30)) * <uint64_t>0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * <uint64_t>0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline int _atom(int lit) noexcept nogil:
    return lit - 1 if lit > 0 else -lit - 1


# lexicographic clause order (Python tuple order) for std::sort
cdef const int* _cmp_lit
cdef const int* _cmp_start


cdef cbool _clause_less(int i, int j) noexcept nogil:
    cdef int a = _cmp_start[i], ae = _cmp_start[i + 1]
    cdef int b = _cmp_start[j], be = _cmp_start[j + 1]
    while a < ae and b < be:
        if _cmp_lit[a] != _cmp_lit[b]:
            return _cmp_lit[a] < _cmp_lit[b]
        a += 1
        b += 1
    return (ae - a) < (be - b)


cdef class Kernel:
    cdef public object lw_pos, lw_neg, hook, seed, cache_limit, call_limit, cache
    cdef public bint use_cache, unit_prop
    cdef public long long calls, hits, misses
    cdef public double epsilon
    cdef public long long exact_budget
    cdef unordered_set[string] hard
    cdef vector[double] wp, wn
    cdef uint64_t useed
    cdef long long limit
    cdef long long climit
    cdef unordered_map[string, double] table
    cdef deque[string] order
    # stamped scratch, indexed by atom
    cdef vector[int] stamp
    cdef vector[int] cnt
    cdef vector[int] parent
    cdef int tick
    cdef object rng

    def __init__(self, lw_pos, lw_neg, cache=True, unit_prop=True, seed=0, hook=None, cache_limit=None):
        if hook is not None:
            raise ValueError("the compiled kernel has no hooks; use _ground_py.Kernel")
        self.lw_pos = lw_pos
        self.lw_neg = lw_neg
        self.use_cache = bool(cache)
        self.unit_prop = bool(unit_prop)
        self.seed = seed
        self.useed = <uint64_t>(int(seed) & 0xFFFFFFFFFFFFFFFF)
        self.hook = None
        self.cache_limit = cache_limit
        self.cache = None
        self.calls = self.hits = self.misses = 0
        self.epsilon = 0.05
        self.call_limit = None
        self.exact_budget = 0
        self.tick = 0

    # -- python-level helpers (shared with the fallback) --------------------
    condition = staticmethod(_ground_py.Kernel.condition)
    components = staticmethod(_ground_py.Kernel.components)

    def propagate(self, clauses):
        return _ground_py.Kernel.propagate(self, clauses)

    def lw_sum(self, a):
        return _ground_py.logaddexp(self.lw_pos[a], self.lw_neg[a])

    def choose(self, clauses):
        cdef vector[int] lit, start, pres
        self._sync()
        self._load(clauses, lit, start)
        self._present(lit, pres)
        return self._choose(lit, pres)

    def proposal(self, clauses, a):
        cdef vector[int] lit, start
        self._sync()
        self._load(clauses, lit, start)
        return self._proposal(lit, start, a)

    @property
    def cache_size(self):
        return self.table.size()

    # -- plumbing -------------------------------------------------------------
    cdef void _sync(self):
        cdef Py_ssize_t n = len(self.lw_pos), i
        cdef Py_ssize_t have = self.wp.size()
        for i in range(have, n):
            self.wp.push_back(self.lw_pos[i])
            self.wn.push_back(self.lw_neg[i])
        if <Py_ssize_t>self.stamp.size() < n:
            self.stamp.resize(n, 0)
            self.cnt.resize(n, 0)
            self.parent.resize(n, 0)
        self.limit = -1 if self.call_limit is None else self.call_limit
        self.climit = -1 if self.cache_limit is None else self.cache_limit

    cdef void _load(self, clauses, vector[int]& lit, vector[int]& start):
        cdef int x, n = <int>len(self.lw_pos)
        start.push_back(0)
        for c in clauses:
            for x in c:
                if x == 0 or (x if x > 0 else -x) > n:
                    raise ValueError(f"literal {x} outside 1..{n}")
                lit.push_back(x)
            start.push_back(lit.size())

    cdef inline int _next_tick(self) noexcept:
        self.tick += 1
        if self.tick == 0x7FFFFFFF:
            for i in range(self.stamp.size()):
                self.stamp[i] = 0
            self.tick = 1
        return self.tick

    cdef void _present(self, vector[int]& lit, vector[int]& pres):
        cdef int t = self._next_tick(), a
        cdef size_t i
        for i in range(lit.size()):
            a = _atom(lit[i])
            if self.stamp[a] != t:
                self.stamp[a] = t
                pres.push_back(a)
        sort(pres.begin(), pres.end())

    cdef int _choose(self, vector[int]& lit, vector[int]& pres):
        cdef size_t i
        cdef int a, best = -1, n, best_n = 0
        cdef uint64_t h, best_h = 0
        for i in range(pres.size()):
            self.cnt[pres[i]] = 0
        for i in range(lit.size()):
            self.cnt[_atom(lit[i])] += 1
        for i in range(pres.size()):
            a = pres[i]
            n = self.cnt[a]
            h = _mix(self.useed, <uint64_t>a)
            if best < 0 or n > best_n or (n == best_n and h < best_h):
                best, best_n, best_h = a, n, h
        return best

    cdef void _condition(self, vector[int]& lit, vector[int]& start, int u,
                         vector[int]& olit, vector[int]& ostart):
        cdef size_t c, j, nc = start.size() - 1
        cdef int neg = -u
        cdef cbool sat
        olit.clear()
        ostart.clear()
        ostart.push_back(0)
        for c in range(nc):
            sat = False
            for j in range(<size_t>start[c], <size_t>start[c + 1]):
                if lit[j] == u:
                    sat = True
                    break
            if sat:
                continue
            for j in range(<size_t>start[c], <size_t>start[c + 1]):
                if lit[j] != neg:
                    olit.push_back(lit[j])
            ostart.push_back(olit.size())

    cdef int _propagate(self, vector[int]& lit, vector[int]& start, double* logf,
                        vector[int]& forced) except -1:
        """Unit resolution in place.  Returns 1 on conflict."""
        cdef vector[int] nl, ns
        cdef size_t c, nc
        cdef int unit, a, ln
        while True:
            unit = 0
            nc = start.size() - 1
            for c in range(nc):
                ln = start[c + 1] - start[c]
                if ln == 0:
                    return 1
                if ln == 1:
                    unit = lit[start[c]]
                    break
            if unit == 0:
                return 0
            a = _atom(unit)
            forced.push_back(a)
            logf[0] += self.wp[a] if unit > 0 else self.wn[a]
            if logf[0] == NEG_INF:
                return 1
            self._condition(lit, start, unit, nl, ns)
            nc = ns.size() - 1
            for c in range(nc):
                if ns[c + 1] == ns[c]:
                    return 1
            lit.swap(nl)
            start.swap(ns)

    cdef void _canonical(self, vector[int]& lit, vector[int]& start,
                         vector[int]& olit, vector[int]& ostart):
        """Sorted, duplicate-free clause list."""
        global _cmp_lit, _cmp_start
        cdef size_t nc = start.size() - 1, k, j
        cdef vector[int] idx
        idx.reserve(nc)
        for k in range(nc):
            idx.push_back(<int>k)
        _cmp_lit = lit.data()
        _cmp_start = start.data()
        sort(idx.begin(), idx.end(), _clause_less)
        olit.clear()
        ostart.clear()
        ostart.push_back(0)
        cdef int prev = -1, i
        for k in range(nc):
            i = idx[k]
            if prev >= 0 and not _clause_less(prev, i) and not _clause_less(i, prev):
                continue
            prev = i
            for j in range(<size_t>start[i], <size_t>start[i + 1]):
                olit.push_back(lit[j])
            ostart.push_back(olit.size())

    cdef string _key(self, vector[int]& lit, vector[int]& start):
        cdef size_t nc = start.size() - 1
        cdef string s
        s.resize((lit.size() + nc) * sizeof(int))
        cdef char* p = &s[0]
        cdef size_t c
        cdef int ln
        for c in range(nc):
            ln = start[c + 1] - start[c]
            memcpy(p, &ln, sizeof(int))
            p += sizeof(int)
            memcpy(p, &lit[start[c]], ln * sizeof(int))
            p += ln * sizeof(int)
        return s

    cdef int _find(self, int x) noexcept:
        cdef int root = x, nxt
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            nxt = self.parent[x]
            self.parent[x] = root
            x = nxt
        return root

    cdef int _components(self, vector[int]& lit, vector[int]& start, vector[int]& comp_of):
        """Component id per clause, numbered by first appearance."""
        cdef size_t c, j, nc = start.size() - 1
        cdef int first, r, a, t = self._next_tick(), ncomp = 0
        for c in range(nc):
            first = -1
            for j in range(<size_t>start[c], <size_t>start[c + 1]):
                a = lit[j]
                a = a if a > 0 else -a
                a -= 1
                if self.stamp[a] != t:
                    self.stamp[a] = t
                    self.parent[a] = a
                    self.cnt[a] = -1
                if first < 0:
                    first = self._find(a)
                else:
                    r = self._find(a)
                    if r != first:
                        self.parent[r] = first
        comp_of.resize(nc)
        for c in range(nc):
            r = self._find(_atom(lit[start[c]]))
            if self.cnt[r] < 0:
                self.cnt[r] = ncomp
                ncomp += 1
            comp_of[c] = self.cnt[r]
        return ncomp

    cdef void _extract(self, vector[int]& lit, vector[int]& start, vector[int]& comp_of, int k,
                       vector[int]& olit, vector[int]& ostart, vector[int]& atoms):
        cdef size_t c, j, nc = start.size() - 1
        olit.clear()
        ostart.clear()
        ostart.push_back(0)
        for c in range(nc):
            if comp_of[c] != k:
                continue
            for j in range(<size_t>start[c], <size_t>start[c + 1]):
                olit.push_back(lit[j])
            ostart.push_back(olit.size())
        atoms.clear()
        self._present(olit, atoms)

    cdef double _prefix(self, vector[int]& lit, vector[int]& start, vector[int]& scope,
                        vector[int]& pres, cbool* done) except? -2:
        """Propagation plus free-atom factor; fills ``pres``.  ``done`` if no clause is left."""
        cdef double logf = 0.0
        cdef vector[int] forced
        cdef size_t c, i
        cdef int t
        done[0] = False
        if self.unit_prop:
            if self._propagate(lit, start, &logf, forced):
                done[0] = True
                return NEG_INF
        else:
            for c in range(start.size() - 1):
                if start[c + 1] == start[c]:
                    done[0] = True
                    return NEG_INF
        self._present(lit, pres)
        t = self.tick  # stamp marks the present atoms
        if forced.size():
            t = self._next_tick()
            for i in range(pres.size()):
                self.stamp[pres[i]] = t
            for i in range(forced.size()):
                self.stamp[forced[i]] = t
        for i in range(scope.size()):
            if self.stamp[scope[i]] != t:
                logf += _lae(self.wp[scope[i]], self.wn[scope[i]])
        if start.size() == 1:
            done[0] = True
        return logf

    # -- exact counting -------------------------------------------------------
    cdef double _count(self, vector[int]& lit0, vector[int]& start0, vector[int]& scope) except? -2:
        cdef vector[int] lit = lit0, start = start0, pres, cl, cs, comp_of, sl, ss, atoms
        cdef cbool done
        cdef double logf, val, v, vt, vf
        cdef int ncomp, k, a
        cdef string key
        cdef unordered_map[string, double].iterator it
        cdef size_t i
        self.calls += 1
        if self.limit >= 0 and self.calls > self.limit:
            raise ResourceLimit(f"more than {self.limit} recursive calls")
        logf = self._prefix(lit, start, scope, pres, &done)
        if done:
            return logf
        self._canonical(lit, start, cl, cs)
        if self.use_cache:
            key = self._key(cl, cs)
            it = self.table.find(key)
            if it != self.table.end():
                self.hits += 1
                return logf + deref(it).second
            self.misses += 1
        ncomp = self._components(cl, cs, comp_of)
        if ncomp > 1:
            val = 0.0
            for k in range(ncomp):
                self._extract(cl, cs, comp_of, k, sl, ss, atoms)
                v = self._count(sl, ss, atoms)
                val += v
                if v == NEG_INF:
                    val = NEG_INF
                    break
        else:
            a = self._choose(cl, pres)
            atoms.clear()
            for i in range(pres.size()):
                if pres[i] != a:
                    atoms.push_back(pres[i])
            self._condition(cl, cs, a + 1, sl, ss)
            vt = self._count(sl, ss, atoms)
            self._condition(cl, cs, -(a + 1), sl, ss)
            vf = self._count(sl, ss, atoms)
            val = _lae(self.wp[a] + vt, self.wn[a] + vf)
        if self.use_cache:
            if self.climit >= 0 and <long long>self.table.size() >= self.climit and self.order.size():
                self.table.erase(self.order.front())
                self.order.pop_front()
            self.table[key] = val
            self.order.push_back(key)
        return logf + val

    def count(self, clauses, scope):
        """Log weighted count of ``clauses`` over the atoms in ``scope``."""
        cdef vector[int] lit, start, sc
        self._sync()
        self._load(clauses, lit, start)
        for a in sorted(scope):
            sc.push_back(a)
        return self._count(lit, start, sc)

    # -- sampling -------------------------------------------------------------
    cdef double _proposal(self, vector[int]& lit, vector[int]& start, int a) except? -2:
        cdef int pos = a + 1, neg = -(a + 1), nt = 0, nf = 0, x
        cdef cbool unit_pos = False, unit_neg = False, hit_p, hit_n
        cdef size_t c, j, nc = start.size() - 1
        cdef double wt, wf, q, eps = self.epsilon
        for c in range(nc):
            hit_p = hit_n = False
            for j in range(<size_t>start[c], <size_t>start[c + 1]):
                x = lit[j]
                if x == pos:
                    hit_p = True
                elif x == neg:
                    hit_n = True
            if hit_p:
                nt += 1
                if start[c + 1] - start[c] == 1:
                    unit_pos = True
            elif hit_n:
                nf += 1
                if start[c + 1] - start[c] == 1:
                    unit_neg = True
        wt = nt * exp(self.wp[a]) if nt else 0.0
        wf = nf * exp(self.wn[a]) if nf else 0.0
        q = wt / (wt + wf) if wt + wf > 0 else 0.5
        ok_t = self.wp[a] != NEG_INF and not unit_neg
        ok_f = self.wn[a] != NEG_INF and not unit_pos
        if ok_t and q < eps:
            q = eps if ok_f else 1.0
        if ok_f and q > 1.0 - eps:
            q = 1.0 - eps if ok_t else 0.0
        if not ok_t and ok_f:
            q = 0.0
        if not ok_f and ok_t:
            q = 1.0
        return q

    cdef bint _try_exact(self, vector[int]& cl, vector[int]& cs, vector[int]& pres, double* out) except -1:
        cdef string key = self._key(cl, cs)
        cdef unordered_map[string, double].iterator it
        if self.use_cache:
            it = self.table.find(key)
            if it != self.table.end():
                out[0] = deref(it).second
                return True
        if self.hard.count(key):
            return False
        cdef long long outer = self.limit
        self.limit = self.calls + self.exact_budget
        try:
            out[0] = self._count(cl, cs, pres)
            return True
        except ResourceLimit:
            self.hard.insert(key)
            return False
        finally:
            self.limit = outer

    cdef double _sample(self, vector[int]& lit0, vector[int]& start0, vector[int]& scope) except? -2:
        cdef vector[int] lit = lit0, start = start0, pres, cl, cs, comp_of, sl, ss, atoms
        cdef cbool done
        cdef double logf, v, q
        cdef int ncomp, k, a
        cdef size_t i
        self.calls += 1
        logf = self._prefix(lit, start, scope, pres, &done)
        if done:
            return logf
        self._canonical(lit, start, cl, cs)
        if self.exact_budget > 0 and self._try_exact(cl, cs, pres, &v):
            return logf + v
        ncomp = self._components(cl, cs, comp_of)
        if ncomp > 1:
            for k in range(ncomp):
                self._extract(cl, cs, comp_of, k, sl, ss, atoms)
                v = self._sample(sl, ss, atoms)
                if v == NEG_INF:
                    return NEG_INF
                logf += v
            return logf
        a = self._choose(cl, pres)
        q = self._proposal(cl, cs, a)
        for i in range(pres.size()):
            if pres[i] != a:
                atoms.push_back(pres[i])
        if self.rng.random() < q:
            self._condition(cl, cs, a + 1, sl, ss)
            return logf + self.wp[a] - log(q) + self._sample(sl, ss, atoms)
        self._condition(cl, cs, -(a + 1), sl, ss)
        return logf + self.wn[a] - log(1.0 - q) + self._sample(sl, ss, atoms)

    def sample(self, clauses, scope, rng):
        """Log of one unbiased draw of the weighted count."""
        cdef vector[int] lit, start, sc
        self._sync()
        self._load(clauses, lit, start)
        for a in sorted(scope):
            sc.push_back(a)
        old = self.rng
        self.rng = rng
        try:
            return self._sample(lit, start, sc)
        finally:
            self.rng = old
