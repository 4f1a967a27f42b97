"""Text formats: models, evidence, queries and ground weighted CNFs.

Model grammar (one declaration per line, ``#`` starts a comment)::

    domain person = 3              # anonymous objects
    domain city = {Paris, Rome}    # closed, named
    domain prof = 10 {Ann, Bob}    # 10 objects, the first two named
    predicate Advises(prof, person)
    0.5 Smokes(x) => Cancer(x)     # potential: factor when false
    hard Advises(Ann, x) => Good(x)
    w 1.2 Smokes(x)                # log weight, phi = exp(-w)

Lowercase identifiers are variables, capitalized ones constants.
Connectives by increasing precedence: ``<=>``, ``=>``, ``v``, ``^``, ``!``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .constraints import ModelError
from .logic import And, Atom, Iff, Implies, Literal, Not, Or, UnsupportedFeature
from .pkb import PKB
from .terms import Const, Var


class ParseError(ModelError):
    def __init__(self, msg: str, line: int = 0, col: int = 0):
        self.line = line
        self.col = col
        where = f"line {line}, column {col}: " if line else ""
        super().__init__(where + msg)


_TOKEN = re.compile(r"\s*(?:(<=>|=>|[()!^,{}=])|([A-Za-z_][A-Za-z0-9_#']*)|([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?))")


@dataclass
class _Tok:
    kind: str  # 'op', 'id', 'num', 'end'
    text: str
    col: int


def _lex(text: str, line: int) -> list[_Tok]:
    out = []
    i = 0
    n = len(text)
    while i < n:
        if text[i].isspace():
            i += 1
            continue
        m = _TOKEN.match(text, i)
        if not m or m.end() == i:
            raise ParseError(f"unexpected character {text[i]!r}", line, i + 1)
        col = m.start(0) + (len(m.group(0)) - len(m.group(0).lstrip())) + 1
        if m.group(1):
            out.append(_Tok("op", m.group(1), col))
        elif m.group(2):
            out.append(_Tok("id", m.group(2), col))
        else:
            out.append(_Tok("num", m.group(3), col))
        i = m.end()
    out.append(_Tok("end", "", n + 1))
    return out


class _FormulaParser:
    def __init__(self, toks, pkb: PKB, line: int):
        self.toks = toks
        self.i = 0
        self.pkb = pkb
        self.line = line
        self.var_sorts: dict[str, str] = {}

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i += 1
        return t

    def error(self, msg, tok=None):
        tok = tok or self.peek()
        raise ParseError(msg, self.line, tok.col)

    def expect(self, text):
        t = self.next()
        if t.text != text or t.kind not in ("op", "id"):
            self.error(f"expected {text!r}, found {t.text or 'end of line'!r}", t)
        return t

    def parse(self):
        f = self.iff()
        if self.peek().kind != "end":
            self.error(f"unexpected {self.peek().text!r}")
        return f

    def iff(self):
        f = self.implies()
        while self.peek().text == "<=>":
            self.next()
            f = Iff(f, self.implies())
        return f

    def implies(self):
        f = self.disj()
        if self.peek().text == "=>":
            self.next()
            return Implies(f, self.implies())
        return f

    def disj(self):
        parts = [self.conj()]
        while self.peek().kind == "id" and self.peek().text == "v":
            self.next()
            parts.append(self.conj())
        return parts[0] if len(parts) == 1 else Or(tuple(parts))

    def conj(self):
        parts = [self.unary()]
        while self.peek().text == "^":
            self.next()
            parts.append(self.unary())
        return parts[0] if len(parts) == 1 else And(tuple(parts))

    def unary(self):
        t = self.peek()
        if t.text == "!":
            self.next()
            return Not(self.unary())
        if t.text == "(":
            self.next()
            f = self.iff()
            self.expect(")")
            return f
        if t.kind == "id" and t.text in ("exists", "EXISTS"):
            raise UnsupportedFeature(f"line {self.line}, column {t.col}: existential quantifiers are not supported")
        if t.kind == "id" and t.text in ("forall", "FORALL"):
            # explicit universal quantifier: free variables are universal anyway
            self.next()
            while self.peek().kind == "id" and self.peek().text[:1].islower() and self.peek().text != "v":
                self.next()
                if self.peek().text == ",":
                    self.next()
            return self.unary()
        if t.kind == "id":
            return self.atom()
        self.error(f"expected a formula, found {t.text or 'end of line'!r}")

    def atom(self):
        t = self.next()
        pred = self.pkb.predicates.get(t.text)
        if pred is None:
            self.error(f"unknown predicate {t.text!r}", t)
        args = []
        if self.peek().text == "(":
            self.next()
            if self.peek().text != ")":
                while True:
                    args.append(self.next())
                    if self.peek().text == ",":
                        self.next()
                        continue
                    break
            self.expect(")")
        if len(args) != pred.arity:
            self.error(f"{pred.name} expects {pred.arity} arguments, got {len(args)}", t)
        terms = []
        for a, s in zip(args, pred.sorts):
            if a.kind != "id":
                self.error(f"bad argument {a.text!r}", a)
            if a.text[0].islower():
                prev = self.var_sorts.setdefault(a.text, s)
                if prev != s:
                    self.error(f"variable {a.text} used with sorts {prev} and {s}", a)
                terms.append(Var(a.text, s))
            else:
                d = self.pkb.domains[s]
                try:
                    d.index(a.text)
                except (KeyError, ValueError) as e:
                    self.error(str(e).strip('"'), a)
                terms.append(Const(a.text, s))
        return Atom(pred, tuple(terms))


def _clean(line: str) -> str:
    out = []
    for i, ch in enumerate(line):
        if ch == "#" and (i == 0 or line[i - 1].isspace()):
            break
        out.append(ch)
    return "".join(out).strip()


def parse_formula(text: str, pkb: PKB, line: int = 1):
    return _FormulaParser(_lex(text, line), pkb, line).parse()


def parse_model(text: str) -> PKB:
    pkb = PKB()
    for ln, raw in enumerate(text.splitlines(), 1):
        line = _clean(raw)
        if not line:
            continue
        head = line.split(None, 1)[0]
        if head == "domain":
            _domain(pkb, line, ln)
        elif head == "predicate":
            _predicate(pkb, line, ln)
        else:
            _formula_line(pkb, line, raw, ln)
    return pkb


def _domain(pkb: PKB, line: str, ln: int):
    toks = _lex(line, ln)
    if len(toks) < 4 or toks[1].kind != "id" or toks[2].text != "=":
        raise ParseError("expected 'domain <name> = <size> | {C1, ...}'", ln, 1)
    name = toks[1].text
    i = 3
    size = None
    if toks[i].kind == "num":
        try:
            size = int(toks[i].text)
        except ValueError:
            raise ParseError(f"domain size must be an integer, got {toks[i].text}", ln, toks[i].col) from None
        if size < 0:
            raise ParseError("domain size must be nonnegative", ln, toks[i].col)
        i += 1
    names = []
    if toks[i].text == "{":
        i += 1
        while toks[i].text != "}":
            t = toks[i]
            if t.kind != "id" or not t.text[0].isupper():
                raise ParseError(f"constants must be capitalized identifiers, got {t.text!r}", ln, t.col)
            if t.text in names:
                raise ParseError(f"constant {t.text} listed twice", ln, t.col)
            names.append(t.text)
            i += 1
            if toks[i].text == ",":
                i += 1
            elif toks[i].text != "}":
                raise ParseError("expected ',' or '}'", ln, toks[i].col)
        i += 1
    if toks[i].kind != "end":
        raise ParseError(f"unexpected {toks[i].text!r}", ln, toks[i].col)
    explicit = size is None
    if size is None:
        size = len(names)
    try:
        pkb.add_domain(name, size, names, explicit)
    except ValueError as e:
        raise ParseError(str(e), ln, 1) from None


def _predicate(pkb: PKB, line: str, ln: int):
    toks = _lex(line, ln)
    if toks[1].kind != "id":
        raise ParseError("expected a predicate name", ln, toks[1].col)
    name = toks[1].text
    if not name[0].isupper():
        raise ParseError(f"predicate names must be capitalized: {name}", ln, toks[1].col)
    sorts = []
    i = 2
    if toks[i].text == "(":
        i += 1
        while toks[i].text != ")":
            t = toks[i]
            if t.kind != "id":
                raise ParseError(f"expected a domain name, got {t.text!r}", ln, t.col)
            if t.text not in pkb.domains:
                raise ParseError(f"unknown domain {t.text!r}", ln, t.col)
            sorts.append(t.text)
            i += 1
            if toks[i].text == ",":
                i += 1
            elif toks[i].text != ")":
                raise ParseError("expected ',' or ')'", ln, toks[i].col)
        i += 1
    if toks[i].kind != "end":
        raise ParseError(f"unexpected {toks[i].text!r}", ln, toks[i].col)
    try:
        pkb.add_predicate(name, sorts)
    except ModelError as e:
        raise ParseError(str(e), ln, 1) from None


def _formula_line(pkb: PKB, line: str, raw: str, ln: int):
    head, _, rest = line.partition(" ")
    rest = rest.strip()
    offset = raw.find(rest) if rest else 0
    if head == "hard":
        phi = 0.0
    elif head == "w":
        wtxt, _, rest = rest.partition(" ")
        try:
            phi = math.exp(-float(wtxt))
        except ValueError:
            raise ParseError(f"bad log weight {wtxt!r}", ln, 3) from None
        rest = rest.strip()
        offset = raw.find(rest) if rest else 0
    else:
        try:
            phi = float(head)
        except ValueError:
            raise ParseError(f"expected a potential, 'hard' or 'w', found {head!r}", ln, 1) from None
        if phi < 0 or math.isnan(phi):
            raise ParseError(f"negative potential {phi}", ln, 1)
    if not rest:
        raise ParseError("missing formula", ln, len(raw) + 1)
    toks = _lex(rest, ln)
    for t in toks:
        t.col += offset
    f = _FormulaParser(toks, pkb, ln).parse()
    pkb.add(f, phi)


def format_phi(phi: float) -> str:
    return "hard" if phi == 0.0 else repr(float(phi))


def print_model(pkb: PKB) -> str:
    lines = []
    for d in pkb.domains.values():
        if d.explicit:
            lines.append(f"domain {d.name} = {{{', '.join(d.names)}}}")
        elif d.names:
            lines.append(f"domain {d.name} = {d.size} {{{', '.join(d.names)}}}")
        else:
            lines.append(f"domain {d.name} = {d.size}")
    for p in pkb.predicates.values():
        lines.append(f"predicate {p.name}({', '.join(p.sorts)})" if p.sorts else f"predicate {p.name}")
    for wf in pkb.formulas:
        lines.append(f"{format_phi(wf.phi)} {wf.formula}")
    return "\n".join(lines) + "\n"


def parse_literal(text: str, pkb: PKB, line: int = 1) -> Literal:
    f = parse_formula(text, pkb, line)
    neg = False
    while isinstance(f, Not):
        neg = not neg
        f = f.arg
    if not isinstance(f, Atom):
        raise ParseError(f"expected a literal, got {text!r}", line, 1)
    if not f.is_ground:
        raise ParseError(f"evidence must be ground: {text!r}", line, 1)
    return Literal(f, neg)


def parse_evidence(text: str, pkb: PKB) -> list[Literal]:
    out = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = _clean(raw)
        if line:
            out.append(parse_literal(line, pkb, ln))
    return out


def print_evidence(lits) -> str:
    return "".join(f"{lit}\n" for lit in lits)


# ---------------------------------------------------------------------------
# ground weighted CNF (DIMACS with weight lines)
#
#   p cnf <atoms> <clauses>
#   w <atom> <W_true> <W_false>
#   1 -2 0


def parse_wcnf(text: str):
    """Returns ``(n_atoms, clauses, weights)``; weights map atom -> (W, W_bar)."""
    n = None
    clauses = []
    weights = {}
    cur: list[int] = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line[0] in "c%":
            continue
        parts = line.split()
        if parts[0] == "p":
            if len(parts) < 4 or parts[1] not in ("cnf", "wcnf"):
                raise ParseError("expected 'p cnf <atoms> <clauses>'", ln, 1)
            n = int(parts[2])
            continue
        if parts[0] == "w":
            try:
                a, wp = int(parts[1]), float(parts[2])
                wn = float(parts[3]) if len(parts) > 3 else 1.0
            except (ValueError, IndexError):
                raise ParseError("expected 'w <atom> <W_true> [<W_false>]'", ln, 1) from None
            if wp < 0 or wn < 0:
                raise ParseError("weights must be nonnegative", ln, 1)
            weights[a] = (wp, wn)
            continue
        for tok in parts:
            try:
                x = int(tok)
            except ValueError:
                raise ParseError(f"bad literal {tok!r}", ln, raw.find(tok) + 1) from None
            if x == 0:
                clauses.append(tuple(cur))
                cur = []
            else:
                cur.append(x)
    if cur:
        clauses.append(tuple(cur))
    if n is None:
        n = max([abs(x) for c in clauses for x in c] + list(weights) + [0])
    for c in clauses:
        for x in c:
            if abs(x) > n:
                raise ParseError(f"literal {x} exceeds declared atom count {n}")
    return n, clauses, weights


def log_wmc_dimacs(n, clauses, weights, **kw) -> float:
    from ._kernel import Kernel
    from .wmc import safe_log

    lw_pos = [safe_log(weights.get(a + 1, (1.0, 1.0))[0]) for a in range(n)]
    lw_neg = [safe_log(weights.get(a + 1, (1.0, 1.0))[1]) for a in range(n)]
    cl = []
    for c in clauses:
        c = tuple(sorted(set(c)))
        if any(-x in c for x in c):
            continue
        cl.append(c)
    k = Kernel(lw_pos, lw_neg, kw.get("cache", True), kw.get("unit_prop", True), kw.get("seed", 0))
    k.call_limit = kw.get("call_limit")
    v = k.count(cl, frozenset(range(n)))
    return v, k
