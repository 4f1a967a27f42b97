"""Importance-sampling estimators of weighted model counts.

``mc_wmc`` replaces each ground split of the exact counter by one branch
drawn from a one-step lookahead proposal; ``mc_lwmc`` does the same for
lifted splits (drawing a whole block of assignments).  Each draw is an
unbiased estimate of the count.  Draws are returned as natural logs
(``-inf`` for a rejected, zero-valued draw).
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from ._kernel import NEG_INF, Kernel
from .engine import deep
from .logic import CNF, Not, free_vars, ground
from .lwmc import ConstrainedCNF, make_engine
from .pkb import PKB, Inconclusive, WeightedCNF, add_evidence, wcnf, with_query
from .wmc import WeightMap, compile_ground


def stream(seed: int, index: int, tag: str = "") -> random.Random:
    """Independent, reproducible generator for sample ``index``."""
    return random.Random(f"ptp/{seed}/{tag}/{index}")


@dataclass
class Estimate:
    """Running mean and variance of nonnegative draws given as logs.

    Values are held relative to a log scale ``ref`` (Welford's update on
    the scaled values), so draws of any magnitude can be combined.
    """

    n: int = 0
    ref: float = NEG_INF
    mean: float = 0.0
    m2: float = 0.0

    def _rescale(self, new_ref: float):
        if self.ref == NEG_INF:
            self.ref = new_ref
            return
        f = math.exp(self.ref - new_ref)
        self.mean *= f
        self.m2 *= f * f
        self.ref = new_ref

    def add(self, logx: float) -> "Estimate":
        if logx > self.ref:
            self._rescale(logx)
        x = 0.0 if logx == NEG_INF else math.exp(logx - self.ref)
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)
        return self

    def merge(self, other: "Estimate") -> "Estimate":
        """Combine two independent streams with the pairwise mean and variance update."""
        if other.n == 0:
            return Estimate(self.n, self.ref, self.mean, self.m2)
        if self.n == 0:
            return Estimate(other.n, other.ref, other.mean, other.m2)
        a = Estimate(self.n, self.ref, self.mean, self.m2)
        b = Estimate(other.n, other.ref, other.mean, other.m2)
        ref = max(a.ref, b.ref)
        a._rescale(ref)
        b._rescale(ref)
        n = a.n + b.n
        d = b.mean - a.mean
        mean = a.mean + d * b.n / n
        m2 = a.m2 + b.m2 + d * d * a.n * b.n / n
        return Estimate(n, ref, mean, m2)

    @property
    def log_mean(self) -> float:
        if self.n == 0 or self.mean <= 0.0:
            return NEG_INF
        return math.log(self.mean) + self.ref

    @property
    def value(self) -> float:
        lm = self.log_mean
        return 0.0 if lm == NEG_INF else math.exp(lm)

    @property
    def log_stderr(self) -> float:
        """Log standard error of the mean (``inf`` with fewer than two draws)."""
        if self.n < 2:
            return math.inf
        v = self.m2 / (self.n - 1) / self.n
        return NEG_INF if v <= 0.0 else 0.5 * math.log(v) + self.ref

    @property
    def stderr(self) -> float:
        ls = self.log_stderr
        if ls == math.inf:
            return math.inf
        return 0.0 if ls == NEG_INF else math.exp(ls)

    @property
    def variance(self) -> float:
        """Sample variance of the draws (linear scale; may overflow to inf)."""
        if self.n < 2:
            return math.inf
        v = self.m2 / (self.n - 1)
        if v <= 0.0:
            return 0.0
        try:
            return math.exp(math.log(v) + 2 * self.ref)
        except OverflowError:
            return math.inf

    @property
    def relative_stderr(self) -> float:
        if self.n < 2:
            return math.inf
        if self.mean <= 0.0:
            return math.inf if self.m2 > 0 else 0.0
        return math.sqrt(max(self.m2, 0.0) / (self.n - 1) / self.n) / self.mean


# ---------------------------------------------------------------------------
# proposal


def proposal_one_step(n_true: int, n_false: int, w_pos: float, w_neg: float) -> float:
    """Q(A = true) from the number of ground clauses each value satisfies."""
    t = n_true * w_pos
    f = n_false * w_neg
    if t + f == 0:
        return 0.5
    return t / (t + f)


# ---------------------------------------------------------------------------
# ground sampler


EXACT_BUDGET = 64


class GroundSampler:
    """MC-WMC over a ground CNF; one compiled kernel serves many draws.

    Sub-problems whose exact count finishes within ``exact_budget``
    recursive calls are counted exactly (and cached) instead of sampled;
    this keeps every draw unbiased and only removes variance.
    """

    def __init__(self, cnf: CNF, w: WeightMap, unit_prop: bool = True, seed: int = 0,
                 exact_budget: int = EXACT_BUDGET):
        self.atoms, self.clauses, lw_pos, lw_neg = compile_ground(cnf, w)
        self.kernel = Kernel(lw_pos, lw_neg, True, unit_prop, seed)
        self.kernel.exact_budget = exact_budget
        self.scope = frozenset(range(len(self.atoms)))

    def draw(self, rng) -> float:
        return self.kernel.sample(self.clauses, self.scope, rng)

    @property
    def calls(self):
        return self.kernel.calls


def mc_wmc(cnf: CNF, w: WeightMap, rng, unit_prop: bool = True, exact_budget: int = EXACT_BUDGET) -> float:
    """One unbiased log draw of ``wmc(cnf, w)``."""
    return GroundSampler(cnf, w, unit_prop, exact_budget=exact_budget).draw(rng)


class LiftedSampler:
    """MC-LWMC over a first-order CNF, with the global normalizer folded in."""

    def __init__(self, cc: ConstrainedCNF, w: WeightMap, unit_prop: bool = True, seed: int = 0,
                 exact_budget: int = EXACT_BUDGET):
        self.engine, self.glob = make_engine(cc, w, cache=True, unit_prop=unit_prop, seed=seed)
        if self.engine is not None:
            self.engine.exact_budget = exact_budget
            self.engine.kernel.exact_budget = exact_budget
        self.clauses = list(cc.clauses)

    def draw(self, rng) -> float:
        if self.engine is None:
            return NEG_INF
        v = self.engine.sample(self.clauses, rng)
        return NEG_INF if v == NEG_INF else v + self.glob

    @property
    def calls(self):
        return 0 if self.engine is None else self.engine.total_calls


def mc_lwmc(cc: ConstrainedCNF, w: WeightMap, rng, unit_prop: bool = True, exact_budget: int = EXACT_BUDGET) -> float:
    """One unbiased log draw of the lifted count of ``cc``."""
    return LiftedSampler(cc, w, unit_prop, exact_budget=exact_budget).draw(rng)


class _PKBGroundSampler:
    """MC-WMC for a compiled PKB, including atoms the grounding never touches."""

    def __init__(self, wc: WeightedCNF, unit_prop: bool, seed: int, exact_budget: int):
        g = ground(wc.cnf, None, wc.domains)
        self.inner = GroundSampler(g, wc.weights, unit_prop, seed, exact_budget)
        present: dict = {}
        for a in self.inner.atoms:
            present[a.pred] = present.get(a.pred, 0) + 1
        self.extra = 0.0
        for p in wc.predicates:
            n = math.prod(wc.domains[s].size for s in p.sorts) - present.get(p, 0)
            if n:
                wp, wn = wc.weights.get(p)
                self.extra = NEG_INF if wp + wn == 0 or self.extra == NEG_INF else self.extra + n * math.log(wp + wn)

    def draw(self, rng) -> float:
        v = self.inner.draw(rng)
        return NEG_INF if v == NEG_INF or self.extra == NEG_INF else v + self.extra

    @property
    def calls(self):
        return self.inner.calls


def pkb_sampler(k: PKB, lifted: bool = True, unit_prop: bool = True, seed: int = 0,
                exact_budget: int = EXACT_BUDGET):
    wc = wcnf(k)
    if lifted:
        return LiftedSampler(ConstrainedCNF.of(wc.cnf, wc.domains, wc.predicates), wc.weights, unit_prop, seed,
                             exact_budget)
    return _PKBGroundSampler(wc, unit_prop, seed, exact_budget)


def run_sampler(sampler, n: int, seed: int, tag: str = "") -> Estimate:
    est = Estimate()

    def go():
        for i in range(n):
            est.add(sampler.draw(stream(seed, i, tag)))

    deep(go)
    return est


def sample_log_z(k: PKB, n_samples: int = 1000, seed: int = 0, lifted: bool = True,
                 unit_prop: bool = True, exact_budget: int = EXACT_BUDGET) -> Estimate:
    """Estimate of Z(K) from ``n_samples`` independent draws."""
    if n_samples < 1:
        raise ValueError("need at least one sample")
    return run_sampler(pkb_sampler(k, lifted, unit_prop, seed, exact_budget), n_samples, seed, "z")


@dataclass
class ProbabilityEstimate:
    probability: float
    stderr: float
    terms: dict = field(default_factory=dict)  # name -> Estimate
    calls: int = 0

    def report(self) -> dict:
        out = {"answer": self.probability, "stderr": self.stderr, "calls": self.calls}
        for name, e in self.terms.items():
            out[f"log_z_{name}"] = e.log_mean
            out[f"stderr_{name}"] = e.stderr
        return out


def estimate_probability(k: PKB, q, n_samples: int = 1000, seed: int = 0, lifted: bool = True,
                         unit_prop: bool = True, evidence=(), exact_budget: int = EXACT_BUDGET) -> ProbabilityEstimate:
    """Sampled ``P(q | K)``: a ratio of unbiased estimates (consistent, not unbiased).

    For a ground query the denominator is split as ``Z(K ^ q) + Z(K ^ !q)``,
    so entailed (or refuted) queries come out exactly 1 (or 0).
    """
    if n_samples < 1:
        raise ValueError("need at least one sample")
    if evidence:
        k = add_evidence(k, evidence)
    calls = 0
    if not free_vars(q):
        sa = pkb_sampler(with_query(k, q), lifted, unit_prop, seed, exact_budget)
        sb = pkb_sampler(with_query(k, Not(q)), lifted, unit_prop, seed, exact_budget)
        a = run_sampler(sa, n_samples, seed, "num")
        b = run_sampler(sb, n_samples, seed, "neg")
        calls = sa.calls + sb.calls
        if a.log_mean == NEG_INF and b.log_mean == NEG_INF:
            raise Inconclusive("all draws were zero; use more samples or the exact engine")
        ref = max(a.log_mean, b.log_mean)
        x = 0.0 if a.log_mean == NEG_INF else math.exp(a.log_mean - ref)
        y = 0.0 if b.log_mean == NEG_INF else math.exp(b.log_mean - ref)
        p = x / (x + y)
        if a.n < 2:
            se = math.inf
        else:
            sx = 0.0 if a.log_stderr == NEG_INF else math.exp(a.log_stderr - ref)
            sy = 0.0 if b.log_stderr == NEG_INF else math.exp(b.log_stderr - ref)
            se = math.sqrt(y * y * sx * sx + x * x * sy * sy) / (x + y) ** 2
        return ProbabilityEstimate(p, se, {"num": a, "neg": b}, calls)
    sn = pkb_sampler(with_query(k, q), lifted, unit_prop, seed, exact_budget)
    sd = pkb_sampler(k, lifted, unit_prop, seed, exact_budget)
    num = run_sampler(sn, n_samples, seed, "num")
    den = run_sampler(sd, n_samples, seed, "den")
    calls = sn.calls + sd.calls
    if den.log_mean == NEG_INF:
        raise Inconclusive("denominator estimate is zero; use more samples or the exact engine")
    p = 0.0 if num.log_mean == NEG_INF else math.exp(num.log_mean - den.log_mean)
    if num.n < 2:
        se = math.inf
    else:
        se = p * math.sqrt(num.relative_stderr ** 2 + den.relative_stderr ** 2)
    return ProbabilityEstimate(min(1.0, max(0.0, p)), se, {"num": num, "den": den}, calls)
