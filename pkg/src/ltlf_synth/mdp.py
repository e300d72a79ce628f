"""Explicit-state labelled MDPs and DTMCs, PRISM explicit-format IO and the
terminal-action augmentation used by the LTL reduction.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .formula import ALIVE

TERM_ACTION = "a_term"
STOCHASTIC_TOL = 1e-9
# Sums this close to 1 are summation noise and are kept verbatim on import.
ROUNDING_TOL = 1e-12

Distribution = tuple[tuple[int, float], ...]


class ModelError(ValueError):
    """Malformed model data (invalid structure or file contents)."""


@dataclass(frozen=True)
class Mdp:
    """Labelled MDP with states ``0..num_states-1``.

    ``transitions[s][j]`` is the distribution of action ``enabled[s][j]``.
    ``valuations`` optionally names each state by variable values
    (``state_vars`` holds the variable names) for the ``.sta`` sidecar.
    """

    num_states: int
    initial: int
    ap: tuple[str, ...]
    labels: tuple[frozenset[int], ...]
    actions: tuple[str, ...]
    enabled: tuple[tuple[int, ...], ...]
    transitions: tuple[tuple[Distribution, ...], ...]
    state_vars: tuple[str, ...] = ()
    valuations: tuple[tuple[int, ...], ...] = field(default=(), compare=False)

    def label_names(self, s: int) -> frozenset[str]:
        return frozenset(self.ap[i] for i in self.labels[s])

    def choices(self, s: int):
        """``(action index, distribution)`` pairs of state ``s``."""
        return zip(self.enabled[s], self.transitions[s])

    def distribution(self, s: int, action: int | str) -> Distribution:
        if isinstance(action, str):
            action = self.actions.index(action)
        try:
            return self.transitions[s][self.enabled[s].index(action)]
        except ValueError:
            raise ModelError(f"action {self.actions[action]!r} is not enabled in state {s}") from None

    @property
    def num_choices(self) -> int:
        return sum(len(e) for e in self.enabled)

    @property
    def num_transitions(self) -> int:
        return sum(len(d) for row in self.transitions for d in row)


def make_mdp(num_states: int, initial: int, ap: Sequence[str], labels: Sequence[Iterable[str]],
             transitions: Mapping[tuple[int, str], Mapping[int, float]],
             actions: Sequence[str] | None = None, **kw) -> Mdp:
    """Build an :class:`Mdp` from name-level data.

    ``labels[s]`` lists proposition names; ``transitions[(s, action)]`` maps
    successors to probabilities.  Actions are ordered by ``actions`` or by
    first appearance.
    """
    ap = tuple(ap)
    if actions is None:
        actions = list(dict.fromkeys(a for _, a in transitions))
    actions = tuple(actions)
    a_idx = {a: i for i, a in enumerate(actions)}
    enabled = [[] for _ in range(num_states)]
    dists = [[] for _ in range(num_states)]
    for (s, a), dist in sorted(transitions.items(), key=lambda kv: (kv[0][0], a_idx[kv[0][1]])):
        enabled[s].append(a_idx[a])
        dists[s].append(tuple(sorted((int(t), float(p)) for t, p in dist.items())))
    lab = tuple(frozenset(ap.index(p) for p in ls) for ls in labels)
    return Mdp(num_states, initial, ap, lab, actions,
               tuple(map(tuple, enabled)), tuple(map(tuple, dists)), **kw)


def validate(m: Mdp) -> list[str]:
    """Every violated model invariant, one message per problem."""
    out = []
    n = m.num_states
    if not 0 <= m.initial < n:
        out.append(f"initial state {m.initial} out of range")
    if len(m.labels) != n or len(m.enabled) != n or len(m.transitions) != n:
        out.append("per-state tables do not have one entry per state")
        return out
    for s in range(n):
        for i in m.labels[s]:
            if not 0 <= i < len(m.ap):
                out.append(f"state {s}: label index {i} out of range")
        if not m.enabled[s]:
            out.append(f"state {s}: deadlock (no enabled action)")
        if len(m.enabled[s]) != len(m.transitions[s]):
            out.append(f"state {s}: enabled actions and distributions differ in number")
            continue
        if len(set(m.enabled[s])) != len(m.enabled[s]):
            out.append(f"state {s}: action enabled twice")
        for a, dist in zip(m.enabled[s], m.transitions[s]):
            name = m.actions[a] if 0 <= a < len(m.actions) else f"#{a}"
            where = f"state {s}, action {name}"
            if not 0 <= a < len(m.actions):
                out.append(f"{where}: action index out of range")
            succs = [t for t, _ in dist]
            if len(set(succs)) != len(succs):
                out.append(f"{where}: duplicate successor")
            for t, p in dist:
                if not 0 <= t < n:
                    out.append(f"{where}: successor {t} out of range")
                if not 0.0 < p <= 1.0:
                    out.append(f"{where}: probability {p!r} to {t} outside (0, 1]")
            total = sum(p for _, p in dist)
            if abs(total - 1.0) > STOCHASTIC_TOL:
                out.append(f"{where}: probabilities sum to {total!r}, not 1")
    return out


def check(m: Mdp) -> Mdp:
    problems = validate(m)
    if problems:
        raise ModelError("; ".join(problems))
    return m


def augment(m: Mdp) -> Mdp:
    """Add the terminal sink, the terminal action and the ``alive`` label.

    The sink gets id ``num_states``, the empty label, and only the terminal
    action (a self-loop).  Every original state keeps its choices, gains the
    terminal action to the sink, and is labelled ``alive``.
    """
    if ALIVE in m.ap:
        raise ModelError(f"proposition {ALIVE!r} is reserved and already present")
    if TERM_ACTION in m.actions:
        raise ModelError(f"action {TERM_ACTION!r} is reserved and already present")
    term = m.num_states
    alive = len(m.ap)
    a_term = len(m.actions)
    labels = tuple(lab | {alive} for lab in m.labels) + (frozenset(),)
    enabled = tuple(e + (a_term,) for e in m.enabled) + ((a_term,),)
    transitions = tuple(row + (((term, 1.0),),) for row in m.transitions) + ((((term, 1.0),),),)
    valuations = m.valuations
    if valuations:
        valuations = valuations + (tuple(-1 for _ in m.state_vars),)
    return Mdp(m.num_states + 1, m.initial, m.ap + (ALIVE,), labels, m.actions + (TERM_ACTION,),
               enabled, transitions, m.state_vars, valuations)


def terminal_state(m: Mdp) -> int:
    """The sink of an augmented MDP (the one state not labelled ``alive``)."""
    alive = m.ap.index(ALIVE)
    sinks = [s for s in range(m.num_states) if alive not in m.labels[s]]
    if len(sinks) != 1:
        raise ModelError("not an augmented MDP: expected exactly one state without 'alive'")
    return sinks[0]


# ---------------------------------------------------------------------------
# DTMCs


@dataclass(frozen=True)
class Dtmc:
    num_states: int
    initial: int
    ap: tuple[str, ...]
    labels: tuple[frozenset[int], ...]
    transitions: tuple[Distribution, ...]

    def probability(self, s: int, t: int) -> float:
        return dict(self.transitions[s]).get(t, 0.0)

    def matrix(self) -> np.ndarray:
        P = np.zeros((self.num_states, self.num_states))
        for s, dist in enumerate(self.transitions):
            for t, p in dist:
                P[s, t] += p
        return P


def induced_dtmc(m: Mdp, policy: Sequence[int | str]) -> Dtmc:
    """Chain obtained by fixing action ``policy[s]`` (index or name) in every state."""
    if len(policy) != m.num_states:
        raise ModelError("policy must choose an action for every state")
    rows = []
    for s, a in enumerate(policy):
        rows.append(m.distribution(s, a))
    return Dtmc(m.num_states, m.initial, m.ap, m.labels, tuple(rows))


def can_reach(transitions: Sequence[Iterable[tuple[int, float]]], targets: Iterable[int]) -> set[int]:
    """States with a positive-probability path into ``targets``."""
    n = len(transitions)
    preds = [[] for _ in range(n)]
    for s, dist in enumerate(transitions):
        for t, p in dist:
            if p > 0:
                preds[t].append(s)
    seen = set(targets)
    stack = list(seen)
    while stack:
        t = stack.pop()
        for s in preds[t]:
            if s not in seen:
                seen.add(s)
                stack.append(s)
    return seen


def reach_probability(d: Dtmc, targets: Iterable[int]) -> np.ndarray:
    """Exact probability of eventually reaching ``targets`` from every state.

    States that cannot reach the targets are fixed at 0; the rest solve
    ``(I - P) x = b`` by LU with partial pivoting.
    """
    targets = set(targets)
    for t in targets:
        if not 0 <= t < d.num_states:
            raise ModelError(f"target {t} out of range")
    x = np.zeros(d.num_states)
    for t in targets:
        x[t] = 1.0
    live = sorted(can_reach(d.transitions, targets) - targets)
    if not live:
        return x
    pos = {s: i for i, s in enumerate(live)}
    A = np.eye(len(live))
    b = np.zeros(len(live))
    for s in live:
        for t, p in d.transitions[s]:
            if t in pos:
                A[pos[s], pos[t]] -= p
            elif t in targets:
                b[pos[s]] += p
    sol = np.linalg.solve(A, b)
    x[live] = np.clip(sol, 0.0, 1.0)
    return x


# ---------------------------------------------------------------------------
# PRISM explicit format


def export_explicit(m: Mdp) -> tuple[str, str, str]:
    """``(.tra, .sta, .lab)`` texts."""
    tra = [f"{m.num_states} {m.num_choices} {m.num_transitions}"]
    for s in range(m.num_states):
        for j, (a, dist) in enumerate(m.choices(s)):
            for t, p in dist:
                tra.append(f"{s} {j} {t} {p!r} {m.actions[a]}")
    if m.state_vars and m.valuations:
        sta = ["(" + ",".join(m.state_vars) + ")"]
        sta += [f"{s}:(" + ",".join(str(v) for v in m.valuations[s]) + ")" for s in range(m.num_states)]
    else:
        sta = ["(s)"] + [f"{s}:({s})" for s in range(m.num_states)]
    header = ['0="init"'] + [f'{i + 1}="{p}"' for i, p in enumerate(m.ap)]
    lab = [" ".join(header)]
    for s in range(m.num_states):
        ids = ([0] if s == m.initial else []) + sorted(i + 1 for i in m.labels[s])
        if ids:
            lab.append(f"{s}: " + " ".join(map(str, ids)))
    return "\n".join(tra) + "\n", "\n".join(sta) + "\n", "\n".join(lab) + "\n"


def _lines(text: str):
    for no, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if line:
            yield no, line


def import_explicit(tra: str, sta: str | None, lab: str) -> Mdp:
    """Parse PRISM explicit files.

    Distributions within 1e-9 of 1 are accepted; those off by more than
    rounding noise are renormalised, the rest are kept exactly as written.
    """
    rows = list(_lines(tra))
    if not rows:
        raise ModelError(".tra: empty file")
    no, header = rows[0]
    try:
        n, n_choices, n_trans = (int(x) for x in header.split())
    except ValueError:
        raise ModelError(f".tra line {no}: malformed header {header!r}") from None
    actions: dict[str, int] = {}
    choice: dict[tuple[int, int], list] = {}
    for no, line in rows[1:]:
        parts = line.split()
        if len(parts) not in (4, 5):
            raise ModelError(f".tra line {no}: expected 'src choice dst prob [action]', got {line!r}")
        try:
            s, j, t, p = int(parts[0]), int(parts[1]), int(parts[2]), float(parts[3])
        except ValueError:
            raise ModelError(f".tra line {no}: malformed numbers in {line!r}") from None
        for v in (s, t):
            if not 0 <= v < n:
                raise ModelError(f".tra line {no}: state {v} out of range (model has {n} states)")
        name = parts[4] if len(parts) == 5 else f"act{j}"
        entry = choice.setdefault((s, j), [name, {}])
        if entry[0] != name:
            raise ModelError(f".tra line {no}: choice {j} of state {s} has two action names")
        if t in entry[1]:
            raise ModelError(f".tra line {no}: duplicate successor {t}")
        entry[1][t] = p
        actions.setdefault(name, len(actions))
    if len(rows) - 1 != n_trans or len(choice) != n_choices:
        raise ModelError(f".tra: header announces {n_choices} choices / {n_trans} transitions, "
                         f"found {len(choice)} / {len(rows) - 1}")
    enabled = [[] for _ in range(n)]
    dists = [[] for _ in range(n)]
    for (s, j) in sorted(choice):
        name, dist = choice[(s, j)]
        if j != len(enabled[s]):
            raise ModelError(f".tra: state {s} choices are not numbered 0..k-1")
        total = sum(dist.values())
        if abs(total - 1.0) > STOCHASTIC_TOL:
            raise ModelError(f".tra: state {s} choice {j} probabilities sum to {total!r}")
        enabled[s].append(actions[name])
        scale = total if abs(total - 1.0) > ROUNDING_TOL else 1.0
        dists[s].append(tuple((t, p / scale) for t, p in sorted(dist.items())))

    ap, labels, initial = _parse_lab(lab, n)
    state_vars, valuations = _parse_sta(sta, n) if sta else ((), ())
    m = Mdp(n, initial, ap, labels, tuple(actions), tuple(map(tuple, enabled)),
            tuple(map(tuple, dists)), state_vars, valuations)
    problems = validate(m)
    if problems:
        raise ModelError("; ".join(problems))
    return m


def _parse_lab(text: str, n: int):
    rows = list(_lines(text))
    if not rows:
        raise ModelError(".lab: empty file")
    names: dict[int, str] = {}
    for tok in rows[0][1].split():
        key, _, val = tok.partition("=")
        try:
            names[int(key)] = val.strip('"')
        except ValueError:
            raise ModelError(f".lab line {rows[0][0]}: malformed label declaration {tok!r}") from None
    init_id = next((i for i, v in names.items() if v == "init"), None)
    skip = {i for i, v in names.items() if v in ("init", "deadlock")}
    ap_ids = [i for i in sorted(names) if i not in skip]
    ap = tuple(names[i] for i in ap_ids)
    remap = {i: k for k, i in enumerate(ap_ids)}
    labels = [set() for _ in range(n)]
    initial = None
    for no, line in rows[1:]:
        head, _, rest = line.partition(":")
        try:
            s = int(head)
            ids = [int(x) for x in rest.split()]
        except ValueError:
            raise ModelError(f".lab line {no}: malformed {line!r}") from None
        if not 0 <= s < n:
            raise ModelError(f".lab line {no}: state {s} out of range (model has {n} states)")
        for i in ids:
            if i not in names:
                raise ModelError(f".lab line {no}: undeclared label {i}")
            if i == init_id:
                if initial is not None and initial != s:
                    raise ModelError(".lab: more than one initial state")
                initial = s
            elif i in remap:
                labels[s].add(remap[i])
    if initial is None:
        raise ModelError(".lab: no state carries the init label")
    return ap, tuple(frozenset(x) for x in labels), initial


def _parse_sta(text: str, n: int):
    rows = list(_lines(text))
    if not rows:
        return (), ()
    head = rows[0][1].strip()
    if not (head.startswith("(") and head.endswith(")")):
        raise ModelError(f".sta line {rows[0][0]}: expected '(var,...)' header")
    state_vars = tuple(v.strip() for v in head[1:-1].split(",") if v.strip())
    vals: dict[int, tuple[int, ...]] = {}
    for no, line in rows[1:]:
        sid, _, rest = line.partition(":")
        rest = rest.strip()
        try:
            s = int(sid)
            vals[s] = tuple(int(v) for v in rest.strip("()").split(","))
        except ValueError:
            raise ModelError(f".sta line {no}: malformed {line!r}") from None
        if not 0 <= s < n:
            raise ModelError(f".sta line {no}: state {s} out of range")
    if state_vars == ("s",) and all(vals.get(s) == (s,) for s in range(n)):
        return (), ()
    return state_vars, tuple(vals.get(s, ()) for s in range(n))


def write_explicit(m: Mdp, stem: str) -> list[str]:
    """Write ``stem.tra/.sta/.lab``; returns the paths."""
    paths = []
    for ext, text in zip(("tra", "sta", "lab"), export_explicit(m)):
        path = f"{stem}.{ext}"
        with open(path, "w") as fh:
            fh.write(text)
        paths.append(path)
    return paths


def read_explicit(stem: str) -> Mdp:
    import os

    def read(ext, required=True):
        path = f"{stem}.{ext}"
        if not os.path.exists(path):
            if required:
                raise ModelError(f"missing file {path}")
            return None
        with open(path) as fh:
            return fh.read()

    return import_explicit(read("tra"), read("sta", required=False), read("lab"))


def example_mdp() -> Mdp:
    """The four-state worked example: s0 {p1}, s1 {p2}, s2 {p1,p2}, s3 {}."""
    return make_mdp(
        4, 0, ("p1", "p2"),
        [{"p1"}, {"p2"}, {"p1", "p2"}, set()],
        {
            (0, "a0"): {0: 1.0},
            (0, "a1"): {1: 0.5, 2: 0.5},
            (1, "a0"): {0: 1.0},
            (1, "a1"): {3: 1.0},
            (2, "a0"): {0: 1.0},
            (3, "a0"): {3: 1.0},
        },
        actions=("a0", "a1"),
    )
