"""LTLf formulas: AST, concrete-syntax parser, printer and finite-trace semantics.

Concrete syntax (loosest to tightest binding)::

    <->   ->   |   &   U   unary {! X F G}

All binary operators associate to the right.  ``true``/``false`` are the
constants and identifiers ``[a-zA-Z_][a-zA-Z0-9_]*`` are atoms.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

ALIVE = "alive"
KEYWORDS = frozenset({"true", "false", "X", "F", "G", "U"})
_IDENT = re.compile(r"[a-zA-Z_][a-zA-Z0-9_]*\Z")


class Formula:
    """Base class of all formula nodes (immutable, structurally comparable)."""

    __slots__ = ("_hash",)

    def _cached_hash(self) -> int:
        # Nodes are immutable, so the (recursive) field hash is computed once.
        try:
            return self._hash
        except AttributeError:
            h = hash((type(self).__name__,) + tuple(getattr(self, n) for n in self.__dataclass_fields__))
            object.__setattr__(self, "_hash", h)
            return h

    def __and__(self, other: Formula) -> Formula:
        return And(self, other)

    def __or__(self, other: Formula) -> Formula:
        return Or(self, other)

    def __invert__(self) -> Formula:
        return Not(self)

    def __str__(self) -> str:
        return to_string(self)


def _node(cls):
    cls = dataclass(frozen=True, slots=True)(cls)
    cls.__hash__ = Formula._cached_hash
    return cls


@_node
class TrueF(Formula):
    pass


@_node
class FalseF(Formula):
    pass


@_node
class Atom(Formula):
    name: str

    def __post_init__(self):
        if not _IDENT.match(self.name) or self.name in KEYWORDS:
            raise ValueError(f"invalid proposition name {self.name!r}")


@_node
class Not(Formula):
    child: Formula


@_node
class And(Formula):
    left: Formula
    right: Formula


@_node
class Or(Formula):
    left: Formula
    right: Formula


@_node
class Implies(Formula):
    left: Formula
    right: Formula


@_node
class Next(Formula):
    child: Formula


@_node
class Until(Formula):
    left: Formula
    right: Formula


@_node
class Eventually(Formula):
    child: Formula


@_node
class Globally(Formula):
    child: Formula


# Internal connectives, produced only by to_nnf.


@_node
class WeakNext(Formula):
    """Holds at the last position, otherwise like Next."""

    child: Formula


@_node
class Release(Formula):
    """Dual of Until: ``a R b == !(!a U !b)``."""

    left: Formula
    right: Formula


TRUE = TrueF()
FALSE = FalseF()

UNARY = (Not, Next, Eventually, Globally, WeakNext)
BINARY = (And, Or, Implies, Until, Release)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, UNARY):
        return (f.child,)
    if isinstance(f, BINARY):
        return (f.left, f.right)
    return ()


def conjunction(parts: Iterable[Formula]) -> Formula:
    """Right-nested conjunction; ``true`` for no parts."""
    parts = list(parts)
    if not parts:
        return TRUE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = And(p, out)
    return out


def disjunction(parts: Iterable[Formula]) -> Formula:
    parts = list(parts)
    if not parts:
        return FALSE
    out = parts[-1]
    for p in reversed(parts[:-1]):
        out = Or(p, out)
    return out


def subformulas(f: Formula) -> list[Formula]:
    """Distinct subformulas in post-order (children before parents)."""
    return list(_post_order(f))


@lru_cache(maxsize=4096)
def _post_order(f: Formula) -> tuple[Formula, ...]:
    seen: dict[Formula, None] = {}

    def walk(g):
        if g in seen:
            return
        for c in children(g):
            walk(c)
        seen[g] = None

    walk(f)
    return tuple(seen)


def propositions(f: Formula) -> list[str]:
    """Atom names of ``f`` in first-occurrence (left-to-right) order."""
    out: dict[str, None] = {}
    stack = [f]
    while stack:
        g = stack.pop()
        if isinstance(g, Atom):
            out.setdefault(g.name)
        stack.extend(reversed(children(g)))
    return list(out)


def depth(f: Formula) -> int:
    cs = children(f)
    return 0 if not cs else 1 + max(depth(c) for c in cs)


# ---------------------------------------------------------------------------
# Parser


class FormulaSyntaxError(ValueError):
    """Raised on malformed concrete syntax."""

    def __init__(self, message: str, text: str, pos: int, expected: Iterable[str] = ()):
        line = text.count("\n", 0, pos) + 1
        col = pos - (text.rfind("\n", 0, pos) + 1) + 1
        self.line, self.column = line, col
        self.expected = sorted(set(expected))
        detail = f"{message} at line {line}, column {col}"
        if self.expected:
            detail += f" (expected one of: {', '.join(self.expected)})"
        super().__init__(detail)


_TOKEN = re.compile(
    r"\s*(?:(?P<op><->|->|[!&|()])|(?P<ident>[a-zA-Z_][a-zA-Z0-9_]*)|(?P<bad>\S))"
)

_OPERAND_START = ["(", "!", "X", "F", "G", "true", "false", "<identifier>"]


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    while True:
        m = _TOKEN.match(text, pos)
        if m is None:
            break
        start = m.start(m.lastgroup)
        if m.lastgroup == "bad":
            ch = m.group("bad")
            if ch in "<-=>":
                raise FormulaSyntaxError(f"unknown operator {ch!r}", text, start)
            raise FormulaSyntaxError(f"unexpected character {ch!r}", text, start)
        value = m.group(m.lastgroup)
        kind = "op" if m.lastgroup == "op" or value in KEYWORDS else "ident"
        toks.append((kind, value, start))
        pos = m.end()
    toks.append(("eof", "", len(text)))
    return toks


class _Parser:
    _LEVELS = [("<->", "iff"), ("->", Implies), ("|", Or), ("&", And), ("U", Until)]

    def __init__(self, text: str, allow_reserved: bool):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.allow_reserved = allow_reserved

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def binary(self, level: int) -> Formula:
        if level == len(self._LEVELS):
            return self.unary()
        symbol, ctor = self._LEVELS[level]
        left = self.binary(level + 1)
        kind, value, _ = self.peek()
        if kind == "op" and value == symbol:
            self.take()
            right = self.binary(level)
            if ctor == "iff":
                return And(Implies(left, right), Implies(right, left))
            return ctor(left, right)
        return left

    def unary(self) -> Formula:
        kind, value, pos = self.take()
        if kind == "op":
            if value == "!":
                return Not(self.unary())
            if value == "X":
                return Next(self.unary())
            if value == "F":
                return Eventually(self.unary())
            if value == "G":
                return Globally(self.unary())
            if value == "true":
                return TRUE
            if value == "false":
                return FALSE
            if value == "(":
                inner = self.binary(0)
                k2, v2, p2 = self.take()
                if v2 != ")" or k2 != "op":
                    raise FormulaSyntaxError(
                        "unbalanced parentheses" if k2 == "eof" else f"unexpected {v2!r}",
                        self.text, p2, [")", "&", "|", "->", "<->", "U"],
                    )
                return inner
        if kind == "ident":
            if value == ALIVE and not self.allow_reserved:
                raise FormulaSyntaxError(f"{ALIVE!r} is a reserved proposition", self.text, pos)
            return Atom(value)
        what = "end of input" if kind == "eof" else repr(value)
        raise FormulaSyntaxError(f"expected operand, found {what}", self.text, pos, _OPERAND_START)

    def parse(self) -> Formula:
        f = self.binary(0)
        kind, value, pos = self.peek()
        if kind != "eof":
            msg = "unbalanced parentheses" if value == ")" else f"unexpected {value!r}"
            raise FormulaSyntaxError(msg, self.text, pos, ["<end of input>", "&", "|", "->", "<->", "U"])
        return f


def parse(text: str, *, allow_reserved: bool = False) -> Formula:
    """Parse concrete syntax into a :class:`Formula`.

    ``alive`` is rejected unless ``allow_reserved`` is set (it is the marker
    proposition of the terminating-MDP translation).
    """
    return _Parser(text, allow_reserved).parse()


# ---------------------------------------------------------------------------
# Printer

_NATIVE = {
    "true": "true", "false": "false", "not": "!", "and": "&", "or": "|",
    "implies": "->", "next": "X", "until": "U", "eventually": "F", "globally": "G",
}

_BINARY_KEY = {And: "and", Or: "or", Implies: "implies", Until: "until"}
_UNARY_KEY = {Not: "not", Next: "next", Eventually: "eventually", Globally: "globally"}


def to_string(f: Formula, spelling: dict[str, str] | None = None, atom=None) -> str:
    """Print ``f``; binary operands that are binary get parentheses except
    right-nested chains of the same operator.  Output re-parses to ``f``."""
    sp = spelling or _NATIVE
    atom = atom or (lambda name: name)

    def go(g: Formula) -> str:
        if isinstance(g, TrueF):
            return sp["true"]
        if isinstance(g, FalseF):
            return sp["false"]
        if isinstance(g, Atom):
            return atom(g.name)
        if isinstance(g, WeakNext):
            return go(Not(Next(Not(g.child))))
        if isinstance(g, Release):
            return go(Not(Until(Not(g.left), Not(g.right))))
        if isinstance(g, UNARY):
            sym = sp[_UNARY_KEY[type(g)]]
            inner = go(g.child)
            if isinstance(g.child, BINARY):
                inner = f"({inner})"
            sep = "" if sym == "!" else " "
            return f"{sym}{sep}{inner}"
        sym = sp[_BINARY_KEY[type(g)]]
        left = go(g.left)
        if isinstance(g.left, BINARY):
            left = f"({left})"
        right = go(g.right)
        if isinstance(g.right, BINARY) and type(g.right) is not type(g):
            right = f"({right})"
        return f"{left} {sym} {right}"

    return go(f)


# ---------------------------------------------------------------------------
# Finite traces and semantics


@dataclass(frozen=True)
class Trace:
    """A nonempty finite trace; each symbol is the set of true propositions.

    ``alphabet`` is optional; when given, every symbol must be a subset and
    formulas evaluated on the trace may only mention its propositions.
    """

    symbols: tuple[frozenset[str], ...]
    alphabet: frozenset[str] | None = None

    def __post_init__(self):
        syms = tuple(frozenset(s) for s in self.symbols)
        object.__setattr__(self, "symbols", syms)
        if not syms:
            raise ValueError("traces must be nonempty")
        if self.alphabet is not None:
            alpha = frozenset(self.alphabet)
            object.__setattr__(self, "alphabet", alpha)
            for i, s in enumerate(syms):
                if not s <= alpha:
                    raise ValueError(f"symbol {i} uses propositions outside the alphabet: {sorted(s - alpha)}")

    def __len__(self) -> int:
        return len(self.symbols)

    def __getitem__(self, i: int) -> frozenset[str]:
        return self.symbols[i]


def trace(*symbols: Iterable[str], alphabet: Iterable[str] | None = None) -> Trace:
    """``trace({"p"}, {}, {"q"})`` convenience constructor."""
    return Trace(tuple(frozenset(s) for s in symbols),
                 None if alphabet is None else frozenset(alphabet))


def _as_trace(rho) -> Trace:
    if isinstance(rho, Trace):
        return rho
    return Trace(tuple(frozenset(s) for s in rho))


def truth_table(f: Formula, rho: Trace) -> dict[Formula, list[bool]]:
    """Truth value of every subformula of ``f`` at every position of ``rho``."""
    n = len(rho)
    table: dict[Formula, list[bool]] = {}
    for g in subformulas(f):
        if isinstance(g, TrueF):
            v = [True] * n
        elif isinstance(g, FalseF):
            v = [False] * n
        elif isinstance(g, Atom):
            v = [g.name in s for s in rho.symbols]
        elif isinstance(g, Not):
            v = [not x for x in table[g.child]]
        elif isinstance(g, And):
            v = [a and b for a, b in zip(table[g.left], table[g.right])]
        elif isinstance(g, Or):
            v = [a or b for a, b in zip(table[g.left], table[g.right])]
        elif isinstance(g, Implies):
            v = [(not a) or b for a, b in zip(table[g.left], table[g.right])]
        elif isinstance(g, Next):
            c = table[g.child]
            v = [i + 1 < n and c[i + 1] for i in range(n)]
        elif isinstance(g, WeakNext):
            c = table[g.child]
            v = [i + 1 >= n or c[i + 1] for i in range(n)]
        elif isinstance(g, (Until, Eventually)):
            a = table[g.left] if isinstance(g, Until) else [True] * n
            b = table[g.right] if isinstance(g, Until) else table[g.child]
            v = [False] * n
            acc = False
            for i in range(n - 1, -1, -1):
                acc = b[i] or (a[i] and acc)
                v[i] = acc
        elif isinstance(g, (Release, Globally)):
            a = table[g.left] if isinstance(g, Release) else [False] * n
            b = table[g.right] if isinstance(g, Release) else table[g.child]
            v = [False] * n
            acc = True
            for i in range(n - 1, -1, -1):
                acc = b[i] and (a[i] or acc)
                v[i] = acc
        else:
            raise TypeError(f"unknown formula node {g!r}")
        table[g] = v
    return table


def evaluate(f: Formula, rho: Trace | Sequence[Iterable[str]], i: int = 0) -> bool:
    """``rho, i |= f`` under finite-trace semantics (strong Next)."""
    rho = _as_trace(rho)
    if not 0 <= i < len(rho):
        raise IndexError(f"position {i} out of range for trace of length {len(rho)}")
    if rho.alphabet is not None:
        missing = [p for p in propositions(f) if p not in rho.alphabet]
        if missing:
            raise ValueError(f"formula mentions propositions outside the trace alphabet: {missing}")
    return truth_table(f, rho)[f][i]


def satisfies(f: Formula, rho: Trace | Sequence[Iterable[str]]) -> bool:
    return evaluate(f, rho, 0)


# ---------------------------------------------------------------------------
# Normal forms


@lru_cache(maxsize=None)
def to_nnf(f: Formula) -> Formula:
    """Negation normal form; Not only appears directly above atoms.

    Implies is eliminated; Until/Next are dualised to Release/WeakNext under
    negation.  Eventually and Globally are kept.
    """
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, And):
        return And(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Or):
        return Or(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Implies):
        return Or(_neg(f.left), to_nnf(f.right))
    if isinstance(f, Next):
        return Next(to_nnf(f.child))
    if isinstance(f, WeakNext):
        return WeakNext(to_nnf(f.child))
    if isinstance(f, Until):
        return Until(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Release):
        return Release(to_nnf(f.left), to_nnf(f.right))
    if isinstance(f, Eventually):
        return Eventually(to_nnf(f.child))
    if isinstance(f, Globally):
        return Globally(to_nnf(f.child))
    if isinstance(f, Not):
        return _neg(f.child)
    raise TypeError(f"unknown formula node {f!r}")


@lru_cache(maxsize=None)
def _neg(f: Formula) -> Formula:
    """NNF of ``Not(f)``."""
    if isinstance(f, TrueF):
        return FALSE
    if isinstance(f, FalseF):
        return TRUE
    if isinstance(f, Atom):
        return Not(f)
    if isinstance(f, Not):
        return to_nnf(f.child)
    if isinstance(f, And):
        return Or(_neg(f.left), _neg(f.right))
    if isinstance(f, Or):
        return And(_neg(f.left), _neg(f.right))
    if isinstance(f, Implies):
        return And(to_nnf(f.left), _neg(f.right))
    if isinstance(f, Next):
        return WeakNext(_neg(f.child))
    if isinstance(f, WeakNext):
        return Next(_neg(f.child))
    if isinstance(f, Until):
        return Release(_neg(f.left), _neg(f.right))
    if isinstance(f, Release):
        return Until(_neg(f.left), _neg(f.right))
    if isinstance(f, Eventually):
        return Globally(_neg(f.child))
    if isinstance(f, Globally):
        return Eventually(_neg(f.child))
    raise TypeError(f"unknown formula node {f!r}")


def is_nnf(f: Formula) -> bool:
    if isinstance(f, Not):
        return isinstance(f.child, Atom)
    if isinstance(f, Implies):
        return False
    return all(is_nnf(c) for c in children(f))
