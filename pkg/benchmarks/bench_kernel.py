"""Compiled vs pure-Python ground kernel on identical workloads.

    python3 benchmarks/bench_kernel.py [--reps 3] [--csv out.csv]

Workloads: random 3-CNFs near the satisfiability threshold, and the
grounding of a random unary PKB.  Both kernels must report the same
call counts; the table gives the best-of-reps wall time and the speedup.
"""

import argparse
import csv
import math
import random
import sys
import time

from ptp import _ground_py
from ptp.generators import random_pkb
from ptp.logic import ground
from ptp.pkb import add_evidence, wcnf
from ptp.wmc import compile_ground

try:
    from ptp._ground_ext import Kernel as Compiled
except ImportError:
    Compiled = None


def random_3cnf(n, ratio, seed):
    r = random.Random(seed)
    cl = [tuple(r.choice((-1, 1)) * v for v in r.sample(range(1, n + 1), 3)) for _ in range(int(ratio * n))]
    lp = [math.log(r.uniform(0.1, 0.9)) for _ in range(n)]
    ln = [math.log(1 - math.exp(x)) for x in lp]
    return f"3cnf n={n} r={ratio}", cl, lp, ln


def grounded_pkb(s, c, seed):
    k, ev = random_pkb(20, 20, s, c // 10, c, seed)
    wc = wcnf(add_evidence(k, ev))
    atoms, cl, lp, ln = compile_ground(ground(wc.cnf, None, wc.domains), wc.weights)
    return f"pkb n=m=20 s={s} c={c}", cl, lp, ln


def run(K, cl, lp, ln, reps):
    best = math.inf
    for _ in range(reps):
        k = K(lp, ln, True, True, 0)
        t = time.perf_counter()
        v = k.count(cl, frozenset(range(len(lp))))
        best = min(best, time.perf_counter() - t)
    return v, k.calls, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--reps", type=int, default=3)
    ap.add_argument("--csv")
    a = ap.parse_args(argv)
    if Compiled is None:
        print("compiled kernel not built; run: pip install -e . --no-build-isolation", file=sys.stderr)
        return 1
    loads = [random_3cnf(60, 3.0, 1), random_3cnf(120, 4.3, 3), grounded_pkb(3, 6, 1), grounded_pkb(4, 5, 2)]
    rows = []
    for name, cl, lp, ln in loads:
        vp, cp, tp = run(_ground_py.Kernel, cl, lp, ln, a.reps)
        vc, cc, tc = run(Compiled, cl, lp, ln, a.reps)
        assert cp == cc, (name, cp, cc)
        assert vp == vc or abs(vp - vc) <= 1e-9 * max(1.0, abs(vp)), (name, vp, vc)
        rows.append({"workload": name, "calls": cp, "python_s": round(tp, 4), "compiled_s": round(tc, 4),
                     "speedup": round(tp / tc, 1) if tc > 0 else math.inf, "log_wmc": vp})
        r = rows[-1]
        print(f"{name:28s} calls={r['calls']:>8d}  python={r['python_s']:8.3f}s  "
              f"compiled={r['compiled_s']:8.4f}s  x{r['speedup']}")
    if a.csv:
        with open(a.csv, "w", newline="") as f:
            w = csv.DictWriter(f, list(rows[0]))
            w.writeheader()
            w.writerows(rows)
    return 0


if __name__ == "__main__":
    sys.exit(main())
