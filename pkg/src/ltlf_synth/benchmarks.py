"""Benchmark models (gridworld, Nim, double counter) and goal-formula families."""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from fractions import Fraction

from .formula import (
    Atom, Eventually, Formula, Globally, Not, TRUE, Until, conjunction, disjunction,
)
from .mdp import Mdp, ModelError, check

Cell = tuple[int, int]

MOVES = {"north": (0, 1), "south": (0, -1), "east": (1, 0), "west": (-1, 0)}
OPPOSITE = {"north": "south", "south": "north", "east": "west", "west": "east"}
LATERAL = {"north": ("west", "east"), "south": ("east", "west"),
           "east": ("north", "south"), "west": ("south", "north")}
# Masses in hundredths: intended, opposite, each lateral, stay.
INTENDED, OPPOSITE_MASS, LATERAL_MASS, STAY_MASS = 69, 1, 10, 10


@dataclass
class GridSpec:
    """Grid of ``width x height`` cells; row 0 is the bottom row, north is +y."""

    width: int
    height: int
    goals: list[tuple[Cell, str]] = field(default_factory=list)
    avoid: set[Cell] = field(default_factory=set)
    obstacles: set[Cell] = field(default_factory=set)
    start: Cell = (0, 0)

    def in_range(self, c: Cell) -> bool:
        return 0 <= c[0] < self.width and 0 <= c[1] < self.height

    def problems(self) -> list[str]:
        out = []
        if self.width < 1 or self.height < 1:
            out.append("grid must be at least 1x1")
        if not self.in_range(self.start) or self.start in self.obstacles:
            out.append(f"start {self.start} is out of range or blocked")
        for cell, name in self.goals:
            if not self.in_range(cell) or cell in self.obstacles:
                out.append(f"goal {name} at {cell} is out of range or blocked")
        for cell in self.avoid:
            if not self.in_range(cell) or cell in self.obstacles:
                out.append(f"avoid cell {cell} is out of range or blocked")
        return out


def gridworld_kernel(spec: GridSpec, cell: Cell, action: str) -> dict[Cell, Fraction]:
    """Exact outcome distribution of ``action`` taken in ``cell``."""
    def target(direction):
        dx, dy = MOVES[direction]
        nxt = (cell[0] + dx, cell[1] + dy)
        return nxt if spec.in_range(nxt) and nxt not in spec.obstacles else cell

    out: dict[Cell, Fraction] = {}
    parts = [(target(action), INTENDED), (target(OPPOSITE[action]), OPPOSITE_MASS), (cell, STAY_MASS)]
    parts += [(target(d), LATERAL_MASS) for d in LATERAL[action]]
    for c, mass in parts:
        out[c] = out.get(c, Fraction(0)) + Fraction(mass, 100)
    assert sum(out.values()) == 1
    return out


def gen_gridworld(spec: GridSpec) -> Mdp:
    problems = spec.problems()
    if problems:
        raise ModelError("; ".join(problems))
    cells = [(x, y) for y in range(spec.height) for x in range(spec.width) if (x, y) not in spec.obstacles]
    index = {c: i for i, c in enumerate(cells)}
    goal_names = list(dict.fromkeys(name for _, name in spec.goals))
    ap = tuple(goal_names + (["bad"] if spec.avoid else []))
    actions = tuple(MOVES)
    labels, transitions = [], []
    for c in cells:
        lab = {ap.index(name) for cell, name in spec.goals if cell == c}
        if c in spec.avoid:
            lab.add(ap.index("bad"))
        labels.append(frozenset(lab))
        row = []
        for a in actions:
            dist = gridworld_kernel(spec, c, a)
            row.append(tuple(sorted((index[t], float(p)) for t, p in dist.items())))
        transitions.append(tuple(row))
    m = Mdp(len(cells), index[spec.start], ap, tuple(labels), actions,
            tuple((0, 1, 2, 3) for _ in cells), tuple(transitions), ("x", "y"), tuple(cells))
    return check(m)


def grid_layout(width: int, height: int, layout: str = "plain", seed: int = 0) -> set[Cell]:
    """Obstacle cells for a named layout.

    ``random`` blocks each cell independently with probability 0.2 (seeded);
    ``hallways`` puts a horizontal wall on every third row (y = 2, 5, ...)
    with a single gap, alternating between the east and west ends.
    """
    if layout == "plain":
        return set()
    if layout == "random":
        rng = random.Random(seed)
        return {(x, y) for y in range(height) for x in range(width) if rng.random() < 0.2}
    if layout == "hallways":
        blocked = set()
        for k, y in enumerate(range(2, height, 3)):
            gap = width - 1 if k % 2 == 0 else 0
            blocked |= {(x, y) for x in range(width) if x != gap}
        return blocked
    raise ValueError(f"unknown layout {layout!r}")


def make_grid_spec(width: int, height: int, goals: int = 3, avoid: int = 2, layout: str = "plain",
                   seed: int = 0, start: Cell = (0, 0)) -> GridSpec:
    """Seeded placement of ``goals`` goal cells (``g1..gN``) and ``avoid`` bad cells."""
    obstacles = grid_layout(width, height, layout, seed) - {start}
    free = [(x, y) for y in range(height) for x in range(width) if (x, y) not in obstacles and (x, y) != start]
    if goals + avoid > len(free):
        raise ModelError(f"grid has only {len(free)} free cells for {goals} goals and {avoid} bad cells")
    rng = random.Random(seed + 1)
    picked = rng.sample(free, goals + avoid)
    spec = GridSpec(width, height, [(c, f"g{i + 1}") for i, c in enumerate(picked[:goals])],
                    set(picked[goals:]), obstacles, start)
    return spec


# ---------------------------------------------------------------------------
# Formula families


def gen_fn_formula(n: int) -> Formula:
    """``F g1 & ... & F gn & G !bad``."""
    if not 1 <= n <= 17:
        raise ValueError("n must be between 1 and 17")
    parts = [Eventually(Atom(f"g{i}")) for i in range(1, n + 1)]
    return conjunction(parts + [Globally(Not(Atom("bad")))])


def _ordered(goals: list[str]) -> Formula:
    f = Eventually(Atom(goals[-1]))
    for g in reversed(goals[:-1]):
        f = Eventually(conjunction([Atom(g), f]))
    return f


def gen_os_formula() -> Formula:
    """Visit g1, g2, g3 in order while avoiding bad."""
    return conjunction([_ordered(["g1", "g2", "g3"]), Globally(Not(Atom("bad")))])


def gen_ol_formula() -> Formula:
    """Visit g1..g4 in order, g3 not before g1, always avoid bad."""
    return conjunction([
        _ordered(["g1", "g2", "g3", "g4"]),
        Until(Not(Atom("g3")), Atom("g1")),
        Globally(Not(Atom("bad"))),
    ])


# ---------------------------------------------------------------------------
# Games


def gen_nim(heap: int, takes: int, targets=(), forbidden=()) -> tuple[Mdp, Formula]:
    """Nim against a uniformly random opponent.

    States are ``(height, turn)``; on its turn the system removes 1..takes
    tokens, then the opponent removes a uniformly random admissible amount.
    Height 0 is absorbing.  Heights listed in ``targets`` must each be
    reached and heights in ``forbidden`` never visited.
    """
    if heap < 1 or not 1 <= takes <= heap:
        raise ModelError("need heap >= 1 and 1 <= takes <= heap")
    targets, forbidden = sorted(set(targets)), sorted(set(forbidden))
    for k in targets + forbidden:
        if not 0 <= k <= heap:
            raise ModelError(f"height {k} outside 0..{heap}")
    marked = sorted(set(targets) | set(forbidden))
    ap = tuple(f"h_{k}" for k in marked) + ("done",)
    actions = tuple(f"take{k}" for k in range(1, takes + 1)) + ("opponent", "idle")
    idle, opp = len(actions) - 1, len(actions) - 2

    def sid(h, turn):
        return 2 * (heap - h) + turn

    n = 2 * (heap + 1)
    labels, enabled, transitions, vals = [None] * n, [None] * n, [None] * n, [None] * n
    for h in range(heap + 1):
        for turn in (0, 1):
            s = sid(h, turn)
            lab = {ap.index(f"h_{h}")} if h in marked else set()
            if h == 0:
                lab.add(ap.index("done"))
            labels[s] = frozenset(lab)
            vals[s] = (h, turn)
            if h == 0:
                enabled[s], transitions[s] = (idle,), (((s, 1.0),),)
            elif turn == 0:
                ks = range(1, min(takes, h) + 1)
                enabled[s] = tuple(k - 1 for k in ks)
                transitions[s] = tuple(((sid(h - k, 1), 1.0),) for k in ks)
            else:
                ks = range(1, min(takes, h) + 1)
                p = 1.0 / len(ks)
                enabled[s] = (opp,)
                transitions[s] = (tuple(sorted((sid(h - k, 0), p) for k in ks)),)
    m = check(Mdp(n, sid(heap, 0), ap, tuple(labels), actions, tuple(enabled), tuple(transitions),
                  ("height", "turn"), tuple(vals)))
    parts = [Eventually(Atom(f"h_{k}")) for k in targets]
    if forbidden:
        parts.append(Globally(Not(disjunction([Atom(f"h_{k}") for k in forbidden]))))
    return m, conjunction(parts) if parts else TRUE


def gen_double_counter(bits: int = 4, p_env: float = 0.5, sys_start: int = 0,
                       env_start: int = 1) -> tuple[Mdp, Formula]:
    """Two ``bits``-wide wrapping counters; the system tries to match the environment's.

    Each step the system chooses to hold or increment its counter while the
    environment increments with probability ``p_env``.
    """
    if not 1 <= bits <= 8:
        raise ModelError("bits must be between 1 and 8")
    if not 0.0 < p_env < 1.0:
        raise ModelError("p_env must be strictly between 0 and 1")
    size = 1 << bits
    if not (0 <= sys_start < size and 0 <= env_start < size):
        raise ModelError("start values out of range")
    n = size * size
    labels, transitions, vals = [], [], []
    for s in range(n):
        sys_c, env_c = divmod(s, size)
        labels.append(frozenset({0}) if sys_c == env_c else frozenset())
        vals.append((sys_c, env_c))
        row = []
        for inc in (0, 1):
            ns = (sys_c + inc) % size
            stay, step = ns * size + env_c, ns * size + (env_c + 1) % size
            row.append(tuple(sorted(((stay, 1.0 - p_env), (step, p_env)))))
        transitions.append(tuple(row))
    m = check(Mdp(n, sys_start * size + env_start, ("match",), tuple(labels), ("hold", "inc"),
                  tuple((0, 1) for _ in range(n)), tuple(transitions), ("sys", "env"), tuple(vals)))
    return m, Eventually(Atom("match"))
