"""Reduction of LTLf to LTL over terminating executions.

``translate_g`` maps an LTLf formula over AP to an LTL formula over
AP + {alive} whose infinite models are exactly the finite models of the
input extended with a dead (empty, non-alive) tail.  Infinite words are
represented as lassos ``prefix . loop^omega``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

from .formula import (
    ALIVE, FALSE, TRUE, And, Atom, Eventually, FalseF, Formula, Globally, Implies, Next,
    Not, Or, Release, Trace, TrueF, Until, WeakNext, propositions, subformulas, to_string,
)

ALIVE_ATOM = Atom(ALIVE)
TERMINATION = Until(ALIVE_ATOM, Globally(Not(ALIVE_ATOM)))

# Identifiers PRISM's property parser treats as keywords.
PRISM_KEYWORDS = frozenset({
    "A", "bool", "clock", "const", "ctmc", "C", "double", "dtmc", "E", "endinit", "endinvariant",
    "endmodule", "endrewards", "endsystem", "false", "formula", "filter", "func", "F", "global",
    "G", "init", "invariant", "I", "int", "label", "max", "mdp", "min", "module", "X", "nondeterministic",
    "Pmax", "Pmin", "P", "probabilistic", "prob", "pta", "rate", "rewards", "Rmax", "Rmin", "R",
    "S", "stochastic", "system", "true", "U", "W", "R", "T", "deadlock",
})

_PRISM = {
    "true": "true", "false": "false", "not": "!", "and": "&", "or": "|",
    "implies": "=>", "next": "X", "until": "U", "eventually": "F", "globally": "G",
}


class ReservedNameError(ValueError):
    pass


def to_core(f: Formula) -> Formula:
    """Rewrite into {true, false, atom, !, &, X, U}."""
    if isinstance(f, (TrueF, FalseF, Atom)):
        return f
    if isinstance(f, Not):
        return Not(to_core(f.child))
    if isinstance(f, And):
        return And(to_core(f.left), to_core(f.right))
    if isinstance(f, Or):
        return Not(And(Not(to_core(f.left)), Not(to_core(f.right))))
    if isinstance(f, Implies):
        return Not(And(to_core(f.left), Not(to_core(f.right))))
    if isinstance(f, Next):
        return Next(to_core(f.child))
    if isinstance(f, WeakNext):
        return Not(Next(Not(to_core(f.child))))
    if isinstance(f, Until):
        return Until(to_core(f.left), to_core(f.right))
    if isinstance(f, Release):
        return Not(Until(Not(to_core(f.left)), Not(to_core(f.right))))
    if isinstance(f, Eventually):
        return Until(TRUE, to_core(f.child))
    if isinstance(f, Globally):
        return Not(Until(TRUE, Not(to_core(f.child))))
    raise TypeError(f"unknown formula node {f!r}")


def _t(f: Formula) -> Formula:
    if isinstance(f, (TrueF, FalseF)):
        return f
    if isinstance(f, Atom):
        return And(f, ALIVE_ATOM)
    if isinstance(f, Not):
        return Not(_t(f.child))
    if isinstance(f, And):
        return And(_t(f.left), _t(f.right))
    if isinstance(f, Next):
        return Next(And(ALIVE_ATOM, _t(f.child)))
    if isinstance(f, Until):
        return Until(_t(f.left), And(ALIVE_ATOM, _t(f.right)))
    raise TypeError(f"not a core formula: {f!r}")


def translate_t(f: Formula) -> Formula:
    """Relativise ``f`` to the alive part of the word (derived operators are rewritten first)."""
    if ALIVE in propositions(f):
        raise ReservedNameError(f"{ALIVE!r} is reserved and may not appear in the input formula")
    return _t(to_core(f))


def translate_g(f: Formula) -> Formula:
    return And(translate_t(f), TERMINATION)


# ---------------------------------------------------------------------------
# Lasso words


@dataclass(frozen=True)
class LassoWord:
    prefix: tuple[frozenset[str], ...]
    loop: tuple[frozenset[str], ...]

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(frozenset(s) for s in self.prefix))
        object.__setattr__(self, "loop", tuple(frozenset(s) for s in self.loop))
        if not self.loop:
            raise ValueError("lasso loop must be nonempty")

    def __len__(self) -> int:
        """Number of distinct positions."""
        return len(self.prefix) + len(self.loop)

    def successor(self, i: int) -> int:
        return i + 1 if i + 1 < len(self) else len(self.prefix)

    def canonical(self, i: int) -> int:
        if i < len(self):
            return i
        return len(self.prefix) + (i - len(self.prefix)) % len(self.loop)

    def symbol(self, i: int) -> frozenset[str]:
        i = self.canonical(i)
        return self.prefix[i] if i < len(self.prefix) else self.loop[i - len(self.prefix)]


def lasso(prefix: Sequence[Iterable[str]], loop: Sequence[Iterable[str]]) -> LassoWord:
    return LassoWord(tuple(frozenset(s) for s in prefix), tuple(frozenset(s) for s in loop))


def ltl_truth_table(f: Formula, w: LassoWord) -> dict[Formula, list[bool]]:
    """Truth of every subformula at each distinct lasso position."""
    n = len(w)
    k = len(w.prefix)
    succ = [w.successor(i) for i in range(n)]
    table: dict[Formula, list[bool]] = {}

    def fix(seed: bool, step):
        # Backward sweeps: twice round the loop settles every loop position
        # (the first sweep fixes the loop head), then the prefix in one pass.
        v = [seed] * n
        for _ in range(2):
            for i in range(n - 1, k - 1, -1):
                v[i] = step(i, v)
        for i in range(k - 1, -1, -1):
            v[i] = step(i, v)
        return v

    for g in subformulas(f):
        if isinstance(g, TrueF):
            v = [True] * n
        elif isinstance(g, FalseF):
            v = [False] * n
        elif isinstance(g, Atom):
            v = [g.name in w.symbol(i) for i in range(n)]
        elif isinstance(g, Not):
            v = [not x for x in table[g.child]]
        elif isinstance(g, And):
            v = [a and b for a, b in zip(table[g.left], table[g.right])]
        elif isinstance(g, Or):
            v = [a or b for a, b in zip(table[g.left], table[g.right])]
        elif isinstance(g, Implies):
            v = [(not a) or b for a, b in zip(table[g.left], table[g.right])]
        elif isinstance(g, (Next, WeakNext)):
            c = table[g.child]
            v = [c[succ[i]] for i in range(n)]
        elif isinstance(g, Until):
            a, b = table[g.left], table[g.right]
            v = fix(False, lambda i, cur: b[i] or (a[i] and cur[succ[i]]))
        elif isinstance(g, Eventually):
            b = table[g.child]
            v = fix(False, lambda i, cur: b[i] or cur[succ[i]])
        elif isinstance(g, Release):
            a, b = table[g.left], table[g.right]
            v = fix(True, lambda i, cur: b[i] and (a[i] or cur[succ[i]]))
        elif isinstance(g, Globally):
            b = table[g.child]
            v = fix(True, lambda i, cur: b[i] and cur[succ[i]])
        else:
            raise TypeError(f"unknown formula node {g!r}")
        table[g] = v
    return table


def evaluate_ltl(f: Formula, w: LassoWord, i: int = 0) -> bool:
    """``w, i |= f`` under infinite-word semantics."""
    if i < 0:
        raise IndexError("negative position")
    return ltl_truth_table(f, w)[f][w.canonical(i)]


def lift_trace(rho: Trace | Sequence[Iterable[str]]) -> LassoWord:
    """Finite trace -> alive-marked prefix followed by the empty letter forever."""
    symbols = rho.symbols if isinstance(rho, Trace) else tuple(frozenset(s) for s in rho)
    if not symbols:
        raise ValueError("traces must be nonempty")
    return LassoWord(tuple(s | {ALIVE} for s in symbols), (frozenset(),))


# ---------------------------------------------------------------------------
# PRISM export


def prism_formula(f: Formula, quote_all: bool = False) -> str:
    """``f`` in PRISM property syntax.

    Atoms are emitted bare except ``alive`` and names clashing with PRISM
    keywords, which are written as quoted labels.  ``quote_all`` quotes every
    atom (what PRISM expects when all propositions are ``.lab`` labels).
    """
    def atom(name):
        if quote_all or name == ALIVE or name in PRISM_KEYWORDS:
            return f'"{name}"'
        return name

    return to_string(f, _PRISM, atom)


def export_prism_property(f: Formula, mode: str = "maximize", quote_all: bool = False) -> str:
    if mode != "maximize":
        raise ValueError("only probability maximisation is supported")
    return f"Pmax=? [ {prism_formula(f, quote_all)} ]"
