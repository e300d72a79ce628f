"""Deterministic finite automata for LTLf.

States of a :class:`Dfa` carry their transition function as a decision tree
over the ordered proposition list: a node is ``(prop_index, low, high)`` and
a leaf is a successor state id.  Trees test propositions in alphabet order,
so walking a tree low-branch first visits successors in assignment order
(lexicographic, first proposition most significant, false before true).

The compiler works by formula progression.  A DFA state is a propositional
formula over *obligations*, each obligation being "``chi`` must hold from the
next position on", tagged strong (the next position must exist) or weak.
Those formulas are kept as BDDs, which quotients syntactically different but
propositionally equivalent states for free.  Propositions get the top BDD
levels, so substituting the progression of every obligation into a state
BDD directly yields the per-state decision tree.
"""

from __future__ import annotations

import itertools
import json
import os
import random
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from . import bdd
from .formula import (
    And, Atom, Eventually, FalseF, Formula, Globally, Implies, Next, Not, Or,
    Release, TrueF, Until, WeakNext, Trace, conjunction, disjunction, parse,
    propositions, satisfies, subformulas, to_nnf, to_string,
)

Guard = Union[int, tuple]

DEFAULT_STATE_CAP = 2_000_000
_EXPLICIT_MAX_PROPS = 12


class ResourceLimitError(RuntimeError):
    """A construction exceeded its configured state cap."""


class AlphabetError(ValueError):
    """A trace or model mentions propositions the automaton does not know."""


@dataclass(frozen=True)
class Dfa:
    props: tuple[str, ...]
    initial: int
    accepting: frozenset[int]
    delta: tuple[Guard, ...]

    @property
    def num_states(self) -> int:
        return len(self.delta)

    def step(self, q: int, true_props: Iterable[str] | frozenset[str]) -> int:
        """Successor of ``q`` when exactly ``true_props`` hold (others are false)."""
        node = self.delta[q]
        while not isinstance(node, int):
            node = node[2] if self.props[node[0]] in true_props else node[1]
        return node

    def step_indices(self, q: int, true_idx) -> int:
        """Like :meth:`step` but ``true_idx`` holds proposition indices."""
        node = self.delta[q]
        while not isinstance(node, int):
            node = node[2] if node[0] in true_idx else node[1]
        return node

    def step_letter(self, q: int, letter: int) -> int:
        """Step on the letter with index ``letter`` (see :func:`letter_props`)."""
        k = len(self.props)
        node = self.delta[q]
        while not isinstance(node, int):
            node = node[2] if (letter >> (k - 1 - node[0])) & 1 else node[1]
        return node

    def successors(self, q: int) -> list[int]:
        """Distinct successors of ``q`` in assignment order."""
        return list(dict.fromkeys(_leaves(self.delta[q])))

    def transition_table(self) -> list[list[int]]:
        return [[self.step_letter(q, c) for c in range(1 << len(self.props))]
                for q in range(self.num_states)]


def letter_props(props: Sequence[str], letter: int) -> frozenset[str]:
    k = len(props)
    return frozenset(p for i, p in enumerate(props) if (letter >> (k - 1 - i)) & 1)


def _leaves(node: Guard) -> Iterator[int]:
    if isinstance(node, int):
        yield node
    else:
        yield from _leaves(node[1])
        yield from _leaves(node[2])


def _map_tree(node: Guard, f, memo: dict) -> Guard:
    """Relabel leaves through ``f`` and drop tests whose branches agree."""
    if isinstance(node, int):
        return f(node)
    key = id(node)
    hit = memo.get(key)
    if hit is not None:
        return hit[1]
    lo, hi = _map_tree(node[1], f, memo), _map_tree(node[2], f, memo)
    out = lo if lo == hi else (node[0], lo, hi)
    memo[key] = (node, out)
    return out


# ---------------------------------------------------------------------------
# Compilation


class _Compiler:
    def __init__(self, props: Sequence[str]):
        self.props = list(props)
        self.prop_index = {p: i for i, p in enumerate(self.props)}
        self.mgr = bdd.Manager()
        for _ in self.props:
            self.mgr.new_var()
        self.k = len(self.props)
        self.obligation_level: dict[tuple[bool, Formula], int] = {}
        self.obligations: list[tuple[bool, Formula]] = []
        self.prog_cache: dict[Formula, int] = {}

    def obligation(self, strong: bool, chi: Formula) -> int:
        key = (strong, chi)
        lv = self.obligation_level.get(key)
        if lv is None:
            lv = self.mgr.new_var()
            self.obligation_level[key] = lv
            self.obligations.append(key)
        return self.mgr.var(lv)

    def prog(self, f: Formula) -> int:
        """Progression of NNF formula ``f`` through one (symbolic) letter."""
        hit = self.prog_cache.get(f)
        if hit is not None:
            return hit
        m = self.mgr
        if isinstance(f, TrueF):
            r = bdd.TRUE_NODE
        elif isinstance(f, FalseF):
            r = bdd.FALSE_NODE
        elif isinstance(f, Atom):
            r = m.var(self.prop_index[f.name])
        elif isinstance(f, Not):
            r = m.nvar(self.prop_index[f.child.name])
        elif isinstance(f, And):
            r = m.conj(self.prog(f.left), self.prog(f.right))
        elif isinstance(f, Or):
            r = m.disj(self.prog(f.left), self.prog(f.right))
        elif isinstance(f, Next):
            r = self.obligation(True, f.child)
        elif isinstance(f, WeakNext):
            r = self.obligation(False, f.child)
        elif isinstance(f, Until):
            r = m.disj(self.prog(f.right), m.conj(self.prog(f.left), self.obligation(True, f)))
        elif isinstance(f, Release):
            r = m.conj(self.prog(f.right), m.disj(self.prog(f.left), self.obligation(False, f)))
        elif isinstance(f, Eventually):
            r = m.disj(self.prog(f.child), self.obligation(True, f))
        elif isinstance(f, Globally):
            r = m.conj(self.prog(f.child), self.obligation(False, f))
        else:
            raise TypeError(f"formula not in negation normal form: {f!r}")
        self.prog_cache[f] = r
        return r

    def substitute(self, level: int) -> int:
        return self.prog(self.obligations[level - self.k][1])

    def accepting(self, state: int) -> bool:
        # Trace ends here: strong obligations fail, weak ones hold.
        return self.mgr.evaluate(state, lambda lv: not self.obligations[lv - self.k][0])

    def run(self, f: Formula, cap: int) -> Dfa:
        start = self.obligation(True, to_nnf(f))
        ids = {start: 0}
        order = [start]
        delta: list[Guard] = []
        queue = deque([start])
        m = self.mgr

        def tree(u: int, memo: dict) -> Guard:
            if m.level(u) < self.k:
                hit = memo.get(u)
                if hit is None:
                    hit = (m.level(u), tree(m.low(u), memo), tree(m.high(u), memo))
                    memo[u] = hit
                return hit
            sid = ids.get(u)
            if sid is None:
                if len(ids) >= cap:
                    raise ResourceLimitError(f"DFA construction exceeded the state cap of {cap}")
                sid = ids[u] = len(order)
                order.append(u)
                queue.append(u)
            return sid

        while queue:
            u = queue.popleft()
            nxt = m.compose(u, self.substitute)
            delta.append(tree(nxt, {}))
        accepting = frozenset(i for i, u in enumerate(order) if self.accepting(u))
        return Dfa(tuple(self.props), 0, accepting, tuple(delta))


def compile_progression(f: Formula, cap: int | None = None) -> Dfa:
    """Unminimised progression automaton for ``f`` (all states reachable)."""
    if cap is None:
        cap = int(os.environ.get("LTLF_SYNTH_DFA_CAP", DEFAULT_STATE_CAP))
    return _Compiler(propositions(f)).run(f, cap)


def compile(f: Formula, cap: int | None = None) -> Dfa:
    """Minimal DFA accepting exactly the nonempty finite traces satisfying ``f``."""
    return minimize(compile_progression(f, cap))


# ---------------------------------------------------------------------------
# Minimisation


def prune(a: Dfa) -> Dfa:
    """Drop states unreachable from the initial state and renumber in BFS order."""
    return _renumber(a, list(range(a.num_states)))


def _renumber(a: Dfa, block_of: list[int]) -> Dfa:
    """Quotient ``a`` by ``block_of`` and number blocks in BFS discovery order."""
    rep: dict[int, int] = {}
    for q in range(a.num_states):
        rep.setdefault(block_of[q], q)
    memo: dict = {}
    btrees = {b: _map_tree(a.delta[q], lambda s: block_of[s], memo) for b, q in rep.items()}
    start = block_of[a.initial]
    new_id = {start: 0}
    order = [start]
    i = 0
    while i < len(order):
        for b in _leaves(btrees[order[i]]):
            if b not in new_id:
                new_id[b] = len(order)
                order.append(b)
        i += 1
    memo = {}
    delta = tuple(_map_tree(btrees[b], new_id.__getitem__, memo) for b in order)
    accepting = frozenset(new_id[block_of[q]] for q in a.accepting if block_of[q] in new_id)
    return Dfa(a.props, 0, accepting, delta)


def _hopcroft(table: list[list[int]], accepting: frozenset[int]) -> list[int]:
    n = len(table)
    nletters = len(table[0]) if n else 0
    inverse = [[[] for _ in range(n)] for _ in range(nletters)]
    for q, row in enumerate(table):
        for c, t in enumerate(row):
            inverse[c][t].append(q)
    acc = set(accepting)
    rej = set(range(n)) - acc
    blocks = [b for b in (acc, rej) if b]
    block_of = [0] * n
    for bid, members in enumerate(blocks):
        for q in members:
            block_of[q] = bid
    work = {min(range(len(blocks)), key=lambda b: len(blocks[b]))} if len(blocks) == 2 else set()
    while work:
        splitter = list(blocks[work.pop()])
        for c in range(nletters):
            inv_c = inverse[c]
            touched: dict[int, set[int]] = {}
            for t in splitter:
                for q in inv_c[t]:
                    touched.setdefault(block_of[q], set()).add(q)
            for bid, inside in touched.items():
                whole = blocks[bid]
                if len(inside) == len(whole):
                    continue
                new = len(blocks)
                blocks[bid] = whole - inside
                blocks.append(inside)
                for q in inside:
                    block_of[q] = new
                if bid in work:
                    work.add(new)
                else:
                    work.add(new if len(inside) <= len(blocks[bid]) else bid)
    return block_of


def _moore(a: Dfa) -> list[int]:
    """Signature refinement on decision trees; avoids enumerating 2^k letters."""
    block_of = [1 if q in a.accepting else 0 for q in range(a.num_states)]
    count = len(set(block_of))
    while True:
        memo: dict = {}
        sigs = [(block_of[q], _map_tree(a.delta[q], lambda s: block_of[s], memo))
                for q in range(a.num_states)]
        index: dict = {}
        new = [index.setdefault(s, len(index)) for s in sigs]
        if len(index) == count:
            return new
        block_of, count = new, len(index)


def minimize(a: Dfa) -> Dfa:
    """Language-equivalent DFA with the fewest states, BFS-numbered.

    Uses Hopcroft's algorithm on the explicit letter table for up to 12
    propositions and Moore refinement over decision trees beyond that.
    """
    a = prune(a)
    if len(a.props) <= _EXPLICIT_MAX_PROPS:
        block_of = _hopcroft(a.transition_table(), a.accepting)
    else:
        block_of = _moore(a)
    return _renumber(a, block_of)


# ---------------------------------------------------------------------------
# Running and checking


def _check_alphabet(a: Dfa, rho: Trace) -> None:
    allowed = set(a.props)
    for i, s in enumerate(rho.symbols):
        extra = s - allowed
        if extra:
            raise AlphabetError(f"symbol {i} uses propositions unknown to the automaton: {sorted(extra)}")


def run(a: Dfa, rho: Trace | Sequence[Iterable[str]]) -> list[int]:
    """The run ``q0 q1 ... q_n`` of ``a`` on ``rho``."""
    if not isinstance(rho, Trace):
        rho = Trace(tuple(frozenset(s) for s in rho))
    _check_alphabet(a, rho)
    states = [a.initial]
    for s in rho.symbols:
        states.append(a.step(states[-1], s))
    return states


def accepts(a: Dfa, rho: Trace | Sequence[Iterable[str]]) -> bool:
    return run(a, rho)[-1] in a.accepting


class _BatchSemantics:
    """Vectorised backward evaluation of every subformula at position 0.

    Prepending a letter to a batch of suffixes updates all truth values at
    once; this is independent of the DFA compiler and is what the language
    and Myhill-Nerode oracles are built on.
    """

    def __init__(self, f: Formula, props: Sequence[str]):
        self.f = f
        self.props = list(props)
        self.subs = subformulas(f)
        self.pos = {g: i for i, g in enumerate(self.subs)}
        self.root = self.pos[f]
        k = len(self.props)
        self.letters = [letter_props(self.props, c) for c in range(1 << k)]

    def prepend(self, letter: int, prev: np.ndarray | None, empty: np.ndarray | None, rows: int) -> np.ndarray:
        """Truth table for ``letter . v`` given the table for suffixes ``v``.

        ``prev`` is ``(rows, nsub)``; ``empty`` marks rows where ``v`` is empty
        (``prev`` is then ignored).  ``prev=None`` means every ``v`` is empty.
        """
        sym = self.letters[letter]
        out = np.empty((rows, len(self.subs)), dtype=bool)
        if prev is None:
            alive = np.zeros(rows, dtype=bool)
        else:
            alive = ~empty if empty is not None else np.ones(rows, dtype=bool)
        for i, g in enumerate(self.subs):
            if isinstance(g, TrueF):
                out[:, i] = True
            elif isinstance(g, FalseF):
                out[:, i] = False
            elif isinstance(g, Atom):
                out[:, i] = g.name in sym
            elif isinstance(g, Not):
                out[:, i] = ~out[:, self.pos[g.child]]
            elif isinstance(g, And):
                out[:, i] = out[:, self.pos[g.left]] & out[:, self.pos[g.right]]
            elif isinstance(g, Or):
                out[:, i] = out[:, self.pos[g.left]] | out[:, self.pos[g.right]]
            elif isinstance(g, Implies):
                out[:, i] = ~out[:, self.pos[g.left]] | out[:, self.pos[g.right]]
            elif isinstance(g, Next):
                out[:, i] = alive & self._prev(prev, g.child)
            elif isinstance(g, WeakNext):
                out[:, i] = ~alive | self._prev(prev, g.child)
            elif isinstance(g, Until):
                out[:, i] = out[:, self.pos[g.right]] | (out[:, self.pos[g.left]] & alive & self._prev(prev, g))
            elif isinstance(g, Eventually):
                out[:, i] = out[:, self.pos[g.child]] | (alive & self._prev(prev, g))
            elif isinstance(g, Release):
                out[:, i] = out[:, self.pos[g.right]] & (out[:, self.pos[g.left]] | ~alive | self._prev(prev, g))
            elif isinstance(g, Globally):
                out[:, i] = out[:, self.pos[g.child]] & (~alive | self._prev(prev, g))
            else:
                raise TypeError(f"unknown formula node {g!r}")
        return out

    def _prev(self, prev, g):
        if prev is None:
            return False
        return prev[:, self.pos[g]]


@dataclass(frozen=True)
class EquivalenceResult:
    equivalent: bool
    counterexample: Trace | None
    exhaustive: bool
    checked: int

    def __bool__(self) -> bool:
        return self.equivalent


def _decode(props, row, length) -> Trace:
    m = 1 << len(props)
    letters = []
    for rem in range(length - 1, -1, -1):
        block = m ** rem
        letters.append(row // block)
        row %= block
    return Trace(tuple(letter_props(props, c) for c in letters))


def language_equivalent_upto(a: Dfa, f: Formula, max_len: int, *, budget: int = 4_000_000,
                             samples: int = 20_000, seed: int = 0) -> EquivalenceResult:
    """Compare ``a`` against ``f`` on every nonempty trace of length <= ``max_len``.

    Traces range over ``a.props`` plus any extra propositions of ``f``.  When
    the number of traces exceeds ``budget``, ``samples`` random traces are
    checked instead and the result is flagged non-exhaustive.  On mismatch the
    counterexample is a shortest one (lexicographically least among those).
    """
    if max_len < 1:
        raise ValueError("max_len must be at least 1")
    props = list(a.props) + [p for p in propositions(f) if p not in a.props]
    m = 1 << len(props)
    total = sum(m ** length for length in range(1, max_len + 1))
    proj = [frozenset(a.props) & letter_props(props, c) for c in range(m)]
    if total > budget:
        return _sampled_equivalence(a, f, props, max_len, samples, seed)

    sem = _BatchSemantics(f, props)
    nq = a.num_states
    succ = np.array([[a.step(q, proj[c]) for q in range(nq)] for c in range(m)], dtype=np.int64)
    acc0 = np.zeros((1, nq), dtype=bool)
    acc0[0, list(a.accepting)] = True
    prev_t, prev_r = None, acc0
    rows = 1
    checked = 0
    for length in range(1, max_len + 1):
        t_parts, r_parts = [], []
        for c in range(m):
            t_parts.append(sem.prepend(c, prev_t, None, rows))
            r_parts.append(prev_r[:, succ[c]])
        t_new = np.concatenate(t_parts)
        r_new = np.concatenate(r_parts)
        rows *= m
        checked += rows
        bad = np.nonzero(t_new[:, sem.root] != r_new[:, a.initial])[0]
        if bad.size:
            return EquivalenceResult(False, _decode(props, int(bad[0]), length), True, checked)
        prev_t, prev_r = t_new, r_new
    return EquivalenceResult(True, None, True, checked)


def _sampled_equivalence(a, f, props, max_len, samples, seed) -> EquivalenceResult:
    rng = random.Random(seed)
    m = 1 << len(props)
    worst = None
    aprops = frozenset(a.props)
    for _ in range(samples):
        length = rng.randint(1, max_len)
        letters = [rng.randrange(m) for _ in range(length)]
        rho = Trace(tuple(letter_props(props, c) for c in letters))
        proj = Trace(tuple(s & aprops for s in rho.symbols))
        if accepts(a, proj) != satisfies(f, rho):
            key = (len(rho), letters)
            if worst is None or key < worst[0]:
                worst = (key, rho)
    if worst is not None:
        return EquivalenceResult(False, worst[1], False, samples)
    return EquivalenceResult(True, None, False, samples)


def default_nerode_bounds(num_props: int) -> tuple[int, int]:
    """(max prefix, max suffix) lengths used by the Myhill-Nerode oracle."""
    return {0: (8, 8), 1: (7, 7), 2: (5, 5)}.get(num_props, (3, 3))


def myhill_nerode_count(f: Formula, props: Sequence[str] | None = None,
                        max_prefix: int | None = None, max_suffix: int | None = None) -> int:
    """Number of residual classes of L(f) seen by brute force.

    Prefixes ``u`` with ``|u| <= max_prefix`` are grouped by the vector of
    memberships of ``u.v`` over all ``|v| <= max_suffix``.  Distinct vectors
    are distinct Nerode classes, so the count is a lower bound on the size
    of any DFA for ``f`` and equals the minimal size once the bounds are
    large enough to reach and separate every class.
    """
    props = list(props if props is not None else propositions(f))
    dp, ds = default_nerode_bounds(len(props))
    max_prefix = dp if max_prefix is None else max_prefix
    max_suffix = ds if max_suffix is None else max_suffix
    sem = _BatchSemantics(f, props)
    m = 1 << len(props)

    # All suffixes v with |v| <= max_suffix; row 0 is the empty suffix.
    tables = []
    prev, rows = None, 1
    for _ in range(max_suffix):
        cur = np.concatenate([sem.prepend(c, prev, None, rows) for c in range(m)])
        rows *= m
        tables.append(cur)
        prev = cur
    nsub = len(sem.subs)
    v_table = np.concatenate([np.zeros((1, nsub), dtype=bool)] + tables)
    v_empty = np.zeros(v_table.shape[0], dtype=bool)
    v_empty[0] = True

    signatures = set()
    # Empty prefix: membership of v itself; the empty trace is never accepted.
    sig0 = v_table[:, sem.root].copy()
    sig0[0] = False
    signatures.add(sig0.tobytes())
    frontier = {(): None}
    for _ in range(max_prefix):
        nxt = {}
        for u, table in frontier.items():
            for c in range(m):
                if table is None:
                    t = sem.prepend(c, v_table, v_empty, v_table.shape[0])
                else:
                    t = sem.prepend(c, table, None, table.shape[0])
                # prepend builds c.u; enumerate all words regardless of order.
                nxt[(c,) + u] = t
                signatures.add(t[:, sem.root].tobytes())
        frontier = nxt
    return len(signatures)


# ---------------------------------------------------------------------------
# Guards and exports


def _guard_cubes(node: Guard, path=()) -> Iterator[tuple[tuple, int]]:
    if isinstance(node, int):
        yield path, node
    else:
        yield from _guard_cubes(node[1], path + ((node[0], False),))
        yield from _guard_cubes(node[2], path + ((node[0], True),))


def edges(a: Dfa, q: int) -> list[tuple[list[tuple], int]]:
    """Edges of ``q`` as (list of cubes, successor), successors in assignment order."""
    grouped: dict[int, list[tuple]] = {}
    for cube, t in _guard_cubes(a.delta[q]):
        grouped.setdefault(t, []).append(cube)
    return [(cubes, t) for t, cubes in grouped.items()]


def guard_formula(props: Sequence[str], cubes: list[tuple]) -> Formula:
    terms = []
    for cube in cubes:
        lits = [Atom(props[i]) if v else Not(Atom(props[i])) for i, v in cube]
        terms.append(conjunction(lits))
    return disjunction(terms)


def _guard_text(props, cubes) -> str:
    return to_string(guard_formula(props, cubes))


def export_dot(a: Dfa) -> str:
    lines = ["digraph dfa {", "  rankdir=LR;", '  init [shape=point, label=""];']
    for q in range(a.num_states):
        shape = "doublecircle" if q in a.accepting else "circle"
        lines.append(f'  q{q} [shape={shape}, label="{q}"];')
    lines.append(f"  init -> q{a.initial};")
    for q in range(a.num_states):
        for cubes, t in edges(a, q):
            label = _guard_text(a.props, cubes).replace('"', '\\"')
            lines.append(f'  q{q} -> q{t} [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_json(a: Dfa) -> str:
    data = {
        "props": list(a.props),
        "states": a.num_states,
        "initial": a.initial,
        "accepting": sorted(a.accepting),
        "edges": [
            {"from": q, "guard": _guard_text(a.props, cubes), "to": t}
            for q in range(a.num_states)
            for cubes, t in edges(a, q)
        ],
    }
    return json.dumps(data, indent=2) + "\n"


def import_json(text: str) -> Dfa:
    """Inverse of :func:`export_json`; guards must partition each state's letters."""
    data = json.loads(text)
    props = tuple(data["props"])
    n = int(data["states"])
    per_state: list[list[tuple[Formula, int]]] = [[] for _ in range(n)]
    for e in data["edges"]:
        src, dst = int(e["from"]), int(e["to"])
        if not (0 <= src < n and 0 <= dst < n):
            raise ValueError(f"edge {src}->{dst} references a state outside 0..{n - 1}")
        per_state[src].append((parse(e["guard"], allow_reserved=True), dst))
    from .formula import truth_table

    delta = []
    for q, guards in enumerate(per_state):
        table: list[int] = []
        for c in range(1 << len(props)):
            sym = Trace((letter_props(props, c),))
            hits = [t for g, t in guards if truth_table(g, sym)[g][0]]
            if len(hits) != 1:
                raise ValueError(f"state {q}: guards are not a partition (letter {c} matches {len(hits)} edges)")
            table.append(hits[0])
        delta.append(_tree_from_table(table, len(props)))
    accepting = frozenset(int(x) for x in data["accepting"])
    return Dfa(props, int(data["initial"]), accepting, tuple(delta))


def _tree_from_table(table: list[int], k: int, level: int = 0, offset: int = 0) -> Guard:
    if level == k:
        return table[offset]
    half = 1 << (k - level - 1)
    lo = _tree_from_table(table, k, level + 1, offset)
    hi = _tree_from_table(table, k, level + 1, offset + half)
    return lo if lo == hi else (level, lo, hi)


def _hoa_label(cubes: list[tuple]) -> str:
    terms = []
    for cube in cubes:
        if not cube:
            return "t"
        terms.append("&".join(f"{i}" if v else f"!{i}" for i, v in cube))
    if len(terms) == 1:
        return terms[0]
    return " | ".join(f"({t})" if "&" in t else t for t in terms)


def export_hoa(a: Dfa, name: str | None = None) -> str:
    lines = ["HOA: v1"]
    if name:
        lines.append(f'name: "{name}"')
    lines += [
        f"States: {a.num_states}",
        f"Start: {a.initial}",
        "AP: " + " ".join([str(len(a.props))] + [f'"{p}"' for p in a.props]),
        "acc-name: Buchi",
        "Acceptance: 1 Inf(0)",
        "properties: trans-labels explicit-labels state-acc deterministic complete",
        "/* DFA-as-HOA: run acceptance = final state in set 0 */",
        "--BODY--",
    ]
    for q in range(a.num_states):
        lines.append(f"State: {q} {{0}}" if q in a.accepting else f"State: {q}")
        for cubes, t in edges(a, q):
            lines.append(f"  [{_hoa_label(cubes)}] {t}")
    lines.append("--END--")
    return "\n".join(lines) + "\n"


def isomorphic(a: Dfa, b: Dfa) -> bool:
    """Structural equality up to a renaming of states (both assumed reachable)."""
    if set(a.props) != set(b.props) or a.num_states != b.num_states:
        return False
    k = len(a.props)
    perm = [b.props.index(p) for p in a.props]

    def b_letter(c):
        out = 0
        for i in range(k):
            if (c >> (k - 1 - i)) & 1:
                out |= 1 << (k - 1 - perm[i])
        return out

    mapping = {a.initial: b.initial}
    queue = deque([a.initial])
    while queue:
        q = queue.popleft()
        r = mapping[q]
        if (q in a.accepting) != (r in b.accepting):
            return False
        for c in range(1 << k):
            qa, qb = a.step_letter(q, c), b.step_letter(r, b_letter(c))
            if qa in mapping:
                if mapping[qa] != qb:
                    return False
            else:
                mapping[qa] = qb
                queue.append(qa)
    return len(set(mapping.values())) == len(mapping)


def all_traces(props: Sequence[str], max_len: int) -> Iterator[Trace]:
    """Every nonempty trace over ``props`` up to ``max_len`` symbols."""
    symbols = [letter_props(props, c) for c in range(1 << len(props))]
    for length in range(1, max_len + 1):
        for word in itertools.product(symbols, repeat=length):
            yield Trace(word)
