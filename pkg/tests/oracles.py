"""Brute-force reference implementations (independent of the engines).

Everything here enumerates worlds explicitly with numpy; it shares no
counting code with the package, only the formula/grounding data types.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from ptp.logic import CNF, ground, ground_atoms, evaluate
from ptp.terms import Domain


def _universe(preds, domains, extra=()):
    atoms = []
    for p in preds:
        atoms.extend(ground_atoms(p, domains))
    atoms.extend(extra)
    return sorted(set(atoms))


def worlds(n: int) -> np.ndarray:
    """All 2^n assignments as a boolean matrix (row = world)."""
    if n > 22:
        raise ValueError(f"{n} atoms is too many to enumerate")
    idx = np.arange(2 ** n, dtype=np.int64)
    return ((idx[:, None] >> np.arange(n)) & 1).astype(bool)


def brute_wmc(cnf: CNF, weights, domains=None, preds=()) -> float:
    """Weighted model count by enumerating every world.

    ``weights`` maps predicate name -> (W_true, W_false).  The universe is
    all ground atoms of ``preds`` plus the atoms of the grounded CNF.
    """
    domains = domains or {}
    g = ground(cnf, None, domains) if domains else cnf
    atoms = _universe(preds, domains, g.atoms())
    idx = {a: i for i, a in enumerate(atoms)}
    W = worlds(len(atoms))
    ok = np.ones(len(W), dtype=bool)
    for c in g.clauses:
        sat = np.zeros(len(W), dtype=bool)
        for lit in c.literals:
            col = W[:, idx[lit.atom]]
            sat |= ~col if lit.negated else col
        ok &= sat
    wt = np.ones(len(W))
    for a, i in idx.items():
        wp, wn = weights.get(a.pred.name, (1.0, 1.0))
        wt *= np.where(W[:, i], wp, wn)
    return float(np.sum(wt[ok]))


def brute_pkb_z(formulas, domains, preds=()) -> float:
    """Partition function of a PKB ``[(formula, phi)]`` by enumeration.

    Each grounding of a formula contributes ``phi`` in worlds where it is
    false (``phi = 0`` for hard formulas).
    """
    from ptp.logic import free_vars, groundings, substitute

    grounded = []
    for f, phi in formulas:
        vs = free_vars(f)
        for theta in groundings(vs, None, domains):
            grounded.append((substitute(f, theta), phi))
    atoms = set()
    from ptp.logic import atoms_of

    for f, _ in grounded:
        atoms.update(atoms_of(f))
    atoms = _universe(preds, domains, atoms)
    total = 0.0
    for bits in itertools.product((False, True), repeat=len(atoms)):
        world = dict(zip(atoms, bits))
        v = 1.0
        for f, phi in grounded:
            if not evaluate(f, world):
                v *= phi
                if v == 0.0:
                    break
        total += v
    return total


def brute_probability(formulas, query, domains, preds=()) -> float:
    z = brute_pkb_z(formulas, domains, preds)
    zq = brute_pkb_z(list(formulas) + [(query, 0.0)], domains, preds)
    return zq / z
