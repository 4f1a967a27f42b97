"""Command-line interface.

    ptp query  -m model.pkb [-e ev.db] -q "R(A)" [--samples N]
    ptp sample -m model.pkb -q "R(A)" --samples 1000
    ptp z      -m model.pkb
    ptp wmc    ground.cnf
    ptp gen-random --n 40 --m 40 --s 3 --e 1 --c 10 -o out
    ptp gen-linkpred --profs 5 --students 5 --fraction 0.2 -o out
    ptp bench random|linkpred ...   (CSV on stdout)

Exit codes: 0 ok, 1 usage, 2 parse error, 3 inconsistent KB, 4 resource limit.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import json
import math
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import _kernel
from ._kernel import NEG_INF, ResourceLimit
from .constraints import ModelError
from .generators import link_prediction_pkb, link_prediction_query, random_pkb, random_query
from .io import ParseError, log_wmc_dimacs, parse_evidence, parse_formula, parse_model, parse_wcnf, print_evidence, print_model
from .logic import UnsupportedFeature
from .pkb import CountOptions, Inconclusive, InconsistentKB, add_evidence, kbmc_prune, log_partition_function, ptp
from .sampling import estimate_probability, sample_log_z
from .wmc import Stats

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_INCONSISTENT, EXIT_RESOURCE = 0, 1, 2, 3, 4

COLUMNS = ["answer", "log_z_num", "log_z_den", "calls", "cache_hits", "cache_misses", "wall_ms", "seed"]


class UsageError(Exception):
    pass


def _read(path: str) -> str:
    try:
        return Path(path).read_text()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None


def _emit(row: dict, fmt: str, out=None):
    out = out or sys.stdout
    if fmt == "json":
        out.write(json.dumps(row) + "\n")
    elif fmt == "csv":
        cols = COLUMNS + [k for k in row if k not in COLUMNS]
        w = csv.DictWriter(out, cols, extrasaction="ignore")
        w.writeheader()
        w.writerow({c: row.get(c, "") for c in cols})
    else:
        ans = row["answer"]
        out.write(f"{ans:.6f}\n" if isinstance(ans, float) else f"{ans}\n")
        extras = {k: v for k, v in row.items() if k != "answer" and v != ""}
        if extras:
            sys.stderr.write(" ".join(f"{k}={v}" for k, v in extras.items()) + "\n")


def _opts(a) -> CountOptions:
    return CountOptions(lifting=not a.no_lifting, cache=not a.no_cache, unit_prop=not a.no_unit_prop,
                        seed=a.seed, cache_mb=a.cache_mb, call_limit=a.max_calls)


def _load(a):
    k = parse_model(_read(a.model))
    ev = parse_evidence(_read(a.evidence), k) if a.evidence else []
    return k, ev


def cmd_query(a) -> dict:
    k, ev = _load(a)
    if not a.query:
        raise UsageError("query needs -q")
    q = parse_formula(a.query, k)
    if a.samples:
        return _sampled_query(k, q, ev, a)
    opts = _opts(a)
    r = ptp(k, q, prune=a.prune, evidence=ev, lifting=opts.lifting, cache=opts.cache, unit_prop=opts.unit_prop,
            seed=opts.seed, cache_mb=opts.cache_mb, call_limit=opts.call_limit)
    return r.report()


def _sampled_query(k, q, ev, a) -> dict:
    t0 = time.perf_counter()
    if a.prune:
        k, _ = kbmc_prune(add_evidence(k, ev), q)
        ev = []
    r = estimate_probability(k, q, a.samples, seed=a.seed, lifted=not a.no_lifting,
                             unit_prop=not a.no_unit_prop, evidence=ev)
    row = r.report()
    num = r.terms["num"].log_mean
    den = r.terms["den"].log_mean if "den" in r.terms else _logaddexp(num, r.terms["neg"].log_mean)
    row.update(log_z_num=num, log_z_den=den, cache_hits=0, cache_misses=0,
               wall_ms=round((time.perf_counter() - t0) * 1e3, 3), seed=a.seed, samples=a.samples)
    return row


def _logaddexp(a, b):
    return _kernel.logaddexp(a, b)


def cmd_sample(a) -> dict:
    if not a.samples:
        a.samples = 1000
    if a.query:
        return cmd_query(a)
    return cmd_z(a)


def cmd_z(a) -> dict:
    k, ev = _load(a)
    if ev:
        k = add_evidence(k, ev)
    t0 = time.perf_counter()
    if a.samples:
        est = sample_log_z(k, a.samples, seed=a.seed, lifted=not a.no_lifting, unit_prop=not a.no_unit_prop)
        lz = est.log_mean
        extra = {"stderr": est.stderr, "samples": a.samples}
        stats = Stats()
    else:
        stats = Stats()
        lz = log_partition_function(k, _opts(a), stats)
        extra = {}
    z = 0.0 if lz == NEG_INF else math.exp(lz) if lz < 709 else math.inf
    row = {"answer": z, "log_z_num": lz, "log_z_den": "", "calls": stats.calls, "cache_hits": stats.cache_hits,
           "cache_misses": stats.cache_misses, "wall_ms": round((time.perf_counter() - t0) * 1e3, 3),
           "seed": a.seed, "log_z": lz}
    row.update(extra)
    return row


def cmd_wmc(a) -> dict:
    n, clauses, weights = parse_wcnf(_read(a.cnf))
    t0 = time.perf_counter()
    v, k = log_wmc_dimacs(n, clauses, weights, cache=not a.no_cache, unit_prop=not a.no_unit_prop,
                          seed=a.seed, call_limit=a.max_calls)
    z = 0.0 if v == NEG_INF else math.exp(v) if v < 709 else math.inf
    return {"answer": z, "log_z_num": v, "log_z_den": "", "calls": k.calls, "cache_hits": k.hits,
            "cache_misses": k.misses, "wall_ms": round((time.perf_counter() - t0) * 1e3, 3), "seed": a.seed}


def _write_out(prefix, k, ev, q):
    p = Path(prefix)
    p.with_suffix(".pkb").write_text(print_model(k))
    p.with_suffix(".db").write_text(print_evidence(ev))
    p.with_suffix(".query").write_text(f"{q}\n")
    return {"answer": str(p.with_suffix(".pkb")), "evidence": str(p.with_suffix(".db")), "query": str(q)}


def cmd_gen_random(a) -> dict:
    e = a.e if a.e is not None else max(1, a.c // 10)
    k, ev = random_pkb(a.n, a.m, a.s, e, a.c, a.seed)
    return _write_out(a.out, k, ev, random_query(k, a.seed))


def cmd_gen_linkpred(a) -> dict:
    k, ev = link_prediction_pkb(a.profs, a.students, a.fraction, a.seed, pair_evidence=a.pair_evidence)
    return _write_out(a.out, k, ev, link_prediction_query(k, ev, a.seed))


# ---------------------------------------------------------------------------
# bench


def _ints(s: str) -> list[int]:
    return [int(x) for x in s.split(",") if x]


def _floats(s: str) -> list[float]:
    return [float(x) for x in s.split(",") if x]


def _bench_one(job):
    kind, params, flags = job
    if kind == "random":
        k, ev = random_pkb(params["n"], params["m"], params["s"], params["e"], params["c"], params["seed"])
        q = random_query(k, params["seed"])
    else:
        k, ev = link_prediction_pkb(params["objects"] // 2, params["objects"] - params["objects"] // 2,
                                    params["fraction"], params["seed"])
        q = link_prediction_query(k, ev, params["seed"])
    row = dict(params)
    try:
        r = ptp(k, q, evidence=ev, **flags)
        row.update(r.report())
        row["status"] = "ok"
    except ResourceLimit:
        row.update(answer="", status="limit")
    except InconsistentKB:
        row.update(answer="", status="inconsistent")
    return row


def cmd_bench(a) -> list[dict]:
    flags = dict(lifting=not a.no_lifting, cache=not a.no_cache, unit_prop=not a.no_unit_prop,
                 cache_mb=a.cache_mb, call_limit=a.max_calls, seed=a.seed)
    jobs = []
    for seed in range(a.seed, a.seed + a.repeats):
        if a.kind == "random":
            for s in _ints(a.s):
                for c in _ints(a.c):
                    e = a.e if a.e is not None else max(1, c // 10)
                    jobs.append(("random", dict(n=a.n, m=a.m, s=s, e=e, c=c, seed=seed), flags))
        else:
            for n in _ints(a.objects):
                for f in _floats(a.fractions):
                    jobs.append(("linkpred", dict(objects=n, fraction=f, seed=seed), flags))
    if a.workers > 1:
        with ProcessPoolExecutor(a.workers) as ex:
            return list(ex.map(_bench_one, jobs))
    return [_bench_one(j) for j in jobs]


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ptp", description="Exact and sampled lifted probabilistic inference.")
    ap.add_argument("--version", action="version", version=f"%(prog)s 0.1.0 (kernel: {'compiled' if _kernel.COMPILED else 'python'})")
    sub = ap.add_subparsers(dest="cmd", required=True)

    def engine_flags(p):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--cache-mb", type=float, default=None, help="cache budget (default: unbounded)")
        p.add_argument("--no-cache", action="store_true")
        p.add_argument("--no-lifting", action="store_true", help="ground the model and count propositionally")
        p.add_argument("--no-unit-prop", action="store_true")
        p.add_argument("--max-calls", type=int, default=None, help="fail with exit code 4 beyond this many calls")
        p.add_argument("--report", choices=["text", "json", "csv"], default="text")

    def model_flags(p, query=True):
        p.add_argument("-m", "--model", required=True)
        p.add_argument("-e", "--evidence")
        if query:
            p.add_argument("-q", "--query")
        g = p.add_mutually_exclusive_group()
        g.add_argument("--exact", dest="samples", action="store_const", const=0)
        g.add_argument("--samples", type=int, default=0, metavar="N")
        p.add_argument("--prune", action="store_true", help="drop formulas unreachable from the query")

    p = sub.add_parser("query", help="P(query | model, evidence)")
    model_flags(p)
    engine_flags(p)
    p.set_defaults(fn=cmd_query)

    p = sub.add_parser("sample", help="importance-sampled query or Z")
    model_flags(p)
    engine_flags(p)
    p.set_defaults(fn=cmd_sample)

    p = sub.add_parser("z", help="partition function")
    model_flags(p, query=False)
    engine_flags(p)
    p.set_defaults(fn=cmd_z)

    p = sub.add_parser("wmc", help="weighted model count of a ground DIMACS file")
    p.add_argument("cnf")
    engine_flags(p)
    p.set_defaults(fn=cmd_wmc)

    p = sub.add_parser("gen-random", help="random unary PKB")
    for name, d in (("n", 40), ("m", 40), ("s", 3), ("c", 10)):
        p.add_argument(f"--{name}", type=int, default=d)
    p.add_argument("--e", type=int, default=None, help="evidence atoms (default c/10)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True, help="output prefix (.pkb/.db/.query)")
    p.add_argument("--report", choices=["text", "json", "csv"], default="text")
    p.set_defaults(fn=cmd_gen_random)

    p = sub.add_parser("gen-linkpred", help="link-prediction PKB")
    p.add_argument("--profs", type=int, default=5)
    p.add_argument("--students", type=int, default=5)
    p.add_argument("--fraction", type=float, default=0.1)
    p.add_argument("--pair-evidence", action="store_true", help="also draw Coauthor atoms as evidence")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--out", required=True)
    p.add_argument("--report", choices=["text", "json", "csv"], default="text")
    p.set_defaults(fn=cmd_gen_linkpred)

    p = sub.add_parser("bench", help="parameter sweep, CSV on stdout")
    p.add_argument("kind", choices=["random", "linkpred"])
    p.add_argument("--n", type=int, default=40)
    p.add_argument("--m", type=int, default=40)
    p.add_argument("--s", default="3")
    p.add_argument("--c", default="10")
    p.add_argument("--e", type=int, default=None)
    p.add_argument("--objects", default="10")
    p.add_argument("--fractions", default="0.1")
    p.add_argument("--repeats", type=int, default=1)
    p.add_argument("--workers", type=int, default=1)
    engine_flags(p)
    p.set_defaults(fn=cmd_bench, report="csv")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        a = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    try:
        res = a.fn(a)
    except UsageError as e:
        print(f"ptp: {e}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, UnsupportedFeature) as e:
        print(f"ptp: parse error: {e}", file=sys.stderr)
        return EXIT_PARSE
    except InconsistentKB as e:
        print(f"ptp: inconsistent: {e}", file=sys.stderr)
        return EXIT_INCONSISTENT
    except (ResourceLimit, MemoryError, RecursionError) as e:
        print(f"ptp: resource limit: {e or type(e).__name__}", file=sys.stderr)
        return EXIT_RESOURCE
    except Inconclusive as e:
        print(f"ptp: inconclusive: {e}", file=sys.stderr)
        return EXIT_RESOURCE
    except ModelError as e:
        print(f"ptp: model error: {e}", file=sys.stderr)
        return EXIT_PARSE
    if isinstance(res, list):
        buf = _io.StringIO()
        cols = list(dict.fromkeys([c for r in res for c in r]))
        w = csv.DictWriter(buf, cols, extrasaction="ignore")
        w.writeheader()
        w.writerows(res)
        sys.stdout.write(buf.getvalue())
    else:
        _emit(res, a.report)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
