"""Policy synthesis on MDP x DFA products by maximal reachability.

The automaton component of a product state always reflects the labels of
every visited MDP state *including the current one*: the initial product
state is ``(s_init, delta(q0, L(s_init)))`` and a move to ``s'`` steps the
automaton on ``L(s')``.  Reaching an accepting product state therefore means
some prefix of the path satisfies the formula.
"""

from __future__ import annotations

import json
import os
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from . import _kernels
from .automata import AlphabetError, Dfa, ResourceLimitError, compile
from .formula import ALIVE, Formula
from .mdp import Dtmc, Mdp, augment, reach_probability, terminal_state

DEFAULT_EPSILON = 1e-6
DEFAULT_MAX_ITERS = 1_000_000
DEFAULT_PRODUCT_CAP = 2_000_000


class ConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations, self.residual = iterations, residual
        super().__init__(f"value iteration did not converge in {iterations} sweeps (residual {residual:.3e})")


class BudgetExceeded(RuntimeError):
    """An enumeration oracle was asked to handle a model above its budget."""


def product_cap() -> int:
    return int(os.environ.get("LTLF_SYNTH_STATE_CAP", DEFAULT_PRODUCT_CAP))


@dataclass
class ProductMdp:
    """Reachable part of ``base x automaton`` in CSR form.

    Product state ``x`` owns choices ``state_ptr[x]:state_ptr[x+1]``; choice
    ``c`` takes base action ``choice_action[c]`` and owns transitions
    ``choice_ptr[c]:choice_ptr[c+1]`` into ``succ`` with ``prob``.
    """

    base: Mdp
    automaton: Dfa
    pairs: list[tuple[int, int]]
    initial: int
    accepting: frozenset[int]
    state_ptr: np.ndarray
    choice_action: np.ndarray
    choice_ptr: np.ndarray
    succ: np.ndarray
    prob: np.ndarray

    @property
    def num_states(self) -> int:
        return len(self.pairs)

    @property
    def num_choices(self) -> int:
        return len(self.choice_action)

    @property
    def num_transitions(self) -> int:
        return len(self.succ)

    def choices(self, x: int):
        """``(action index, [(successor, prob), ...])`` for product state ``x``."""
        for c in range(self.state_ptr[x], self.state_ptr[x + 1]):
            lo, hi = self.choice_ptr[c], self.choice_ptr[c + 1]
            yield int(self.choice_action[c]), list(zip(self.succ[lo:hi].tolist(), self.prob[lo:hi].tolist()))


def _dfa_indices(m: Mdp, a: Dfa) -> list[frozenset[int]]:
    """Per MDP state, the automaton-proposition indices that are true."""
    missing = [p for p in a.props if p not in m.ap]
    if missing:
        raise AlphabetError(f"formula propositions {missing} are not in the model's AP {list(m.ap)}")
    where = {p: i for i, p in enumerate(a.props)}
    out = []
    for lab in m.labels:
        out.append(frozenset(where[m.ap[i]] for i in lab if m.ap[i] in where))
    return out


def build_product(m: Mdp, a: Dfa, cap: int | None = None) -> ProductMdp:
    """Forward-reachable product; propositions the automaton ignores are projected away."""
    cap = product_cap() if cap is None else cap
    lab = _dfa_indices(m, a)
    step_cache: dict[tuple[int, int], int] = {}

    def step(q, s):
        key = (q, s)
        r = step_cache.get(key)
        if r is None:
            r = step_cache[key] = a.step_indices(q, lab[s])
        return r

    start = (m.initial, step(a.initial, m.initial))
    index = {start: 0}
    pairs = [start]
    state_ptr = [0]
    choice_action: list[int] = []
    choice_ptr = [0]
    succ: list[int] = []
    prob: list[float] = []
    i = 0
    while i < len(pairs):
        s, q = pairs[i]
        for act, dist in m.choices(s):
            for t, p in dist:
                y = (t, step(q, t))
                j = index.get(y)
                if j is None:
                    if len(pairs) >= cap:
                        raise ResourceLimitError(f"product construction exceeded the state cap of {cap}")
                    j = index[y] = len(pairs)
                    pairs.append(y)
                succ.append(j)
                prob.append(p)
            choice_action.append(act)
            choice_ptr.append(len(succ))
        state_ptr.append(len(choice_action))
        i += 1
    accepting = frozenset(x for x, (_, q) in enumerate(pairs) if q in a.accepting)
    return ProductMdp(m, a, pairs, 0, accepting,
                      np.asarray(state_ptr, dtype=np.int64), np.asarray(choice_action, dtype=np.int64),
                      np.asarray(choice_ptr, dtype=np.int64), np.asarray(succ, dtype=np.int64),
                      np.asarray(prob, dtype=np.float64))


def _choice_owner(p: ProductMdp) -> np.ndarray:
    return np.repeat(np.arange(p.num_states), np.diff(p.state_ptr))


def prob0(p: ProductMdp) -> frozenset[int]:
    """States from which no policy reaches an accepting state with positive probability."""
    owner = _choice_owner(p)
    trans_owner = np.repeat(owner, np.diff(p.choice_ptr))
    preds: list[list[int]] = [[] for _ in range(p.num_states)]
    for src, dst in zip(trans_owner.tolist(), p.succ.tolist()):
        preds[dst].append(src)
    good = set(p.accepting)
    queue = deque(good)
    while queue:
        y = queue.popleft()
        for x in preds[y]:
            if x not in good:
                good.add(x)
                queue.append(x)
    return frozenset(range(p.num_states)) - good


@dataclass
class Stats:
    product_states: int
    product_transitions: int
    product_choices: int
    dfa_states: int
    iterations: int = 0
    residual: float = 0.0
    seconds: float = 0.0
    nonmonotone: bool = False

    CSV_HEADER = "states,transitions,choices,dfa_states,iterations,residual"

    def csv(self, timing: bool = False) -> str:
        row = (f"{self.product_states},{self.product_transitions},{self.product_choices},"
               f"{self.dfa_states},{self.iterations},{self.residual:.3e}")
        return row + (f",{self.seconds:.3f}" if timing else "")

    def human(self, timing: bool = False) -> str:
        text = (f"product: {self.product_states} states, {self.product_transitions} transitions, "
                f"{self.product_choices} choices; dfa: {self.dfa_states} states; "
                f"value iteration: {self.iterations} sweeps, residual {self.residual:.3e}")
        return text + (f"; {self.seconds:.3f} s" if timing else "")


@dataclass
class SynthesisResult:
    probability: np.ndarray
    optimal_value: float
    policy: np.ndarray
    stats: Stats
    product: ProductMdp | None = field(default=None, repr=False)

    def action_name(self, x: int) -> str:
        return self.product.base.actions[int(self.policy[x])]


def value_iteration(p: ProductMdp, epsilon: float = DEFAULT_EPSILON, max_iters: int = DEFAULT_MAX_ITERS,
                    threads: int = 1, polish: bool = True) -> SynthesisResult:
    """Maximal probability of reaching an accepting product state.

    Accepting states are pinned to 1 and Prob0 states to 0; the rest start
    at 0 and are swept Gauss-Seidel style in ascending order until the
    max-norm change drops below ``epsilon``.  ``threads > 1`` switches to a
    parallel Jacobi sweep whose values agree with the sequential one to
    within about ``10 * epsilon``.

    With ``polish`` the extracted policy is refined by exact policy
    iteration (see :func:`improve_policy`) and each state reports the larger
    of the two lower bounds, so the returned value is attained by the
    returned policy and no longer depends on where the sweeps stopped.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    t0 = time.perf_counter()
    zero = prob0(p)
    V = np.zeros(p.num_states)
    fixed = np.zeros(p.num_states, dtype=np.bool_)
    for x in p.accepting:
        V[x] = 1.0
        fixed[x] = True
    for x in zero:
        fixed[x] = True
    if threads > 1:
        _kernels.set_threads(threads)
        sweep = _kernels.jacobi
    else:
        sweep = _kernels.gauss_seidel
    iters, residual, nonmonotone = sweep(p.state_ptr, p.choice_ptr, p.succ, p.prob, fixed, V,
                                         float(epsilon), int(max_iters))
    if residual >= epsilon:
        raise ConvergenceError(iters, residual)
    policy = extract_policy(p, V, tolerance=max(10 * epsilon, 1e-12))
    if polish:
        policy, exact = improve_policy(p, policy)
        # Both vectors are lower bounds on the optimum; keep the tighter one.
        V = np.maximum(V, exact)
    stats = Stats(p.num_states, p.num_transitions, p.num_choices, p.automaton.num_states,
                  iters, float(residual), time.perf_counter() - t0, bool(nonmonotone))
    return SynthesisResult(V, float(V[p.initial]), policy, stats, p)


def evaluate_policy(p: ProductMdp, policy: Sequence[int]) -> np.ndarray:
    """Exact reachability probabilities of the chain induced by ``policy``."""
    n = p.num_states
    owner = _choice_owner(p)
    picked = np.zeros(n, dtype=np.int64) - 1
    for c in range(p.num_choices - 1, -1, -1):
        if p.choice_action[c] == policy[owner[c]]:
            picked[owner[c]] = c
    if (picked < 0).any():
        raise ValueError("policy picks a disabled action")
    acc = np.zeros(n, dtype=bool)
    acc[list(p.accepting)] = True
    counts = p.choice_ptr[picked + 1] - p.choice_ptr[picked]
    rows = np.repeat(np.arange(n), counts)
    idx = np.concatenate([np.arange(p.choice_ptr[c], p.choice_ptr[c + 1]) for c in picked]) if n else np.zeros(0, int)
    cols, vals = p.succ[idx], p.prob[idx]
    keep = ~acc[rows]
    rows, cols, vals = rows[keep], cols[keep], vals[keep]

    # Restrict to states with a path into the accepting set.
    preds: list[list[int]] = [[] for _ in range(n)]
    for r, c in zip(rows.tolist(), cols.tolist()):
        preds[c].append(r)
    live = acc.copy()
    stack = list(np.nonzero(acc)[0])
    while stack:
        y = stack.pop()
        for x in preds[y]:
            if not live[x]:
                live[x] = True
                stack.append(x)
    solve = live & ~acc
    x = acc.astype(float)
    m = int(solve.sum())
    if m == 0:
        return x
    pos = np.full(n, -1)
    pos[solve] = np.arange(m)
    b = np.zeros(m)
    into_acc = solve[rows] & acc[cols]
    np.add.at(b, pos[rows[into_acc]], vals[into_acc])
    inner = solve[rows] & solve[cols]
    A = sparse.identity(m, format="csr") - sparse.csr_matrix(
        (vals[inner], (pos[rows[inner]], pos[cols[inner]])), shape=(m, m))
    x[solve] = np.clip(spsolve(A.tocsc(), b), 0.0, 1.0)
    return x


POLICY_IMPROVEMENT_TOL = 1e-10
POLICY_IMPROVEMENT_ROUNDS = 100


def improve_policy(p: ProductMdp, policy: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Policy iteration from ``policy``; returns the final policy and its exact values.

    A state switches only when some choice beats its current exact value by
    more than ``POLICY_IMPROVEMENT_TOL``.  When no state can switch, the
    policy value is a fixpoint of the Bellman operator that some policy
    attains, hence the least one, i.e. the optimum up to that tolerance.
    """
    policy = policy.copy()
    owner = _choice_owner(p)
    values = evaluate_policy(p, policy)
    fixed = np.zeros(p.num_states, dtype=bool)
    fixed[list(p.accepting)] = True
    for _ in range(POLICY_IMPROVEMENT_ROUNDS):
        if not p.num_choices:
            break
        q_values = np.add.reduceat(p.prob * values[p.succ], p.choice_ptr[:-1])
        best = np.full(p.num_states, -np.inf)
        np.maximum.at(best, owner, q_values)
        better = np.nonzero((best > values + POLICY_IMPROVEMENT_TOL) & ~fixed)[0]
        if not better.size:
            break
        for x in better.tolist():
            lo, hi = p.state_ptr[x], p.state_ptr[x + 1]
            top = q_values[lo:hi] >= best[x] - POLICY_IMPROVEMENT_TOL
            policy[x] = p.choice_action[lo:hi][top].min()
        values = evaluate_policy(p, policy)
    return policy, values


def extract_policy(p: ProductMdp, V: np.ndarray, tolerance: float) -> np.ndarray:
    """Stationary product policy attaining ``V``.

    Plain argmax can select a self-loop whose value ties with the optimum
    without ever reaching the target.  Instead, among the choices within
    ``tolerance`` of the best, states are assigned in breadth-first layers
    backwards from the accepting set: a state picks the smallest action
    index whose choice reaches an already-assigned state.  States never
    layered (value 0) take their smallest enabled action index.
    """
    n = p.num_states
    q_values = np.add.reduceat(p.prob * V[p.succ], p.choice_ptr[:-1]) if p.num_choices else np.zeros(0)
    owner = _choice_owner(p)
    best = np.full(n, -np.inf)
    np.maximum.at(best, owner, q_values)
    good = q_values >= best[owner] - tolerance

    policy = np.empty(n, dtype=np.int64)
    for x in range(n):
        lo, hi = p.state_ptr[x], p.state_ptr[x + 1]
        policy[x] = p.choice_action[lo:hi].min()

    # Predecessor choices of every state, restricted to near-optimal choices.
    trans_choice = np.repeat(np.arange(p.num_choices), np.diff(p.choice_ptr))
    preds: list[list[int]] = [[] for _ in range(n)]
    for c, t in zip(trans_choice.tolist(), p.succ.tolist()):
        if good[c]:
            preds[t].append(c)
    assigned = np.zeros(n, dtype=bool)
    assigned[list(p.accepting)] = True
    layer = sorted(p.accepting)
    while layer:
        owners = sorted({int(owner[c]) for t in layer for c in preds[t]})
        chosen = {}
        for x in owners:
            if assigned[x] or V[x] <= 0.0:
                continue
            acts = [int(p.choice_action[c]) for c in range(p.state_ptr[x], p.state_ptr[x + 1])
                    if good[c] and assigned[p.succ[p.choice_ptr[c]:p.choice_ptr[c + 1]]].any()]
            chosen[x] = min(acts)
        for x, act in chosen.items():
            policy[x] = act
            assigned[x] = True
        layer = sorted(chosen)
    for x in range(n):
        if not assigned[x] and V[x] > 0.0:
            lo, hi = p.state_ptr[x], p.state_ptr[x + 1]
            c = lo + int(np.argmax(q_values[lo:hi]))
            policy[x] = p.choice_action[c]
    return policy


def synthesize(m: Mdp, f: Formula, epsilon: float = DEFAULT_EPSILON, max_iters: int = DEFAULT_MAX_ITERS,
               cap: int | None = None, threads: int = 1, polish: bool = True) -> SynthesisResult:
    """Compile, build the product and solve maximal reachability."""
    a = compile(f)
    p = build_product(m, a, cap)
    return value_iteration(p, epsilon, max_iters, threads, polish)


def policy_dtmc(p: ProductMdp, policy: Sequence[int]) -> Dtmc:
    """Product chain induced by ``policy`` with accepting states made absorbing."""
    rows = []
    for x in range(p.num_states):
        if x in p.accepting:
            rows.append(((x, 1.0),))
            continue
        for act, dist in p.choices(x):
            if act == policy[x]:
                merged: dict[int, float] = {}
                for t, pr in dist:
                    merged[t] = merged.get(t, 0.0) + pr
                rows.append(tuple(sorted(merged.items())))
                break
        else:
            raise ValueError(f"policy picks a disabled action in product state {x}")
    return Dtmc(p.num_states, p.initial, (), tuple(frozenset() for _ in range(p.num_states)), tuple(rows))


def export_policy(r: SynthesisResult, p: ProductMdp | None = None) -> str:
    """JSON with the automaton (for online tracking), the product policy and the value."""
    from .automata import export_json

    p = p or r.product
    entries = [
        {"mdp_state": s, "dfa_state": q, "action": p.base.actions[int(r.policy[x])]}
        for x, (s, q) in sorted(enumerate(p.pairs), key=lambda e: e[1])
    ]
    data = {
        "optimal_value": r.optimal_value,
        "initial": {"mdp_state": p.pairs[p.initial][0], "dfa_state": p.pairs[p.initial][1]},
        "dfa": json.loads(export_json(p.automaton)),
        "policy": entries,
    }
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Enumeration oracles


@dataclass
class _Explicit:
    """Minimal explicit product used by the oracles (built independently of build_product)."""

    states: list[tuple]
    choices: list[list[tuple[int, tuple[tuple[int, float], ...]]]]
    initial: int
    targets: frozenset[int]


def _explicit_product(m: Mdp, a: Dfa, terminating: bool = False) -> _Explicit:
    """Product of ``m`` and ``a`` by direct DFA runs.

    With ``terminating`` the model must be augmented: the automaton reads the
    alive-projected labels, entering the sink leaves it untouched, and the
    targets are the sink copies whose automaton state is accepting.
    """
    term = terminal_state(m) if terminating else None
    missing = [p for p in a.props if p not in m.ap]
    if missing:
        raise AlphabetError(f"formula propositions {missing} are not in the model's AP")
    dfa_props = frozenset(a.props)

    def enter(q, s):
        return q if s == term else a.step(q, m.label_names(s) & dfa_props)

    init = (m.initial, enter(a.initial, m.initial))
    index = {init: 0}
    states = [init]
    choices = []
    i = 0
    while i < len(states):
        s, q = states[i]
        row = []
        for act, dist in m.choices(s):
            out = {}
            for t, pr in dist:
                y = (t, enter(q, t))
                if y not in index:
                    index[y] = len(states)
                    states.append(y)
                out[index[y]] = out.get(index[y], 0.0) + pr
            row.append((act, tuple(sorted(out.items()))))
        choices.append(row)
        i += 1
    if terminating:
        targets = frozenset(x for x, (s, q) in enumerate(states) if s == term and q in a.accepting)
    else:
        targets = frozenset(x for x, (_, q) in enumerate(states) if q in a.accepting)
    return _Explicit(states, choices, 0, targets)


@dataclass
class OracleResult:
    value: float
    policy: dict[tuple, int]
    policies_checked: int


def _enumerate(prod: _Explicit, max_policies: int, must_reach: frozenset[int] | None = None) -> OracleResult:
    """Best stationary deterministic policy by exhaustive enumeration.

    Only states reachable under the partial policy are branched on, so two
    policies that differ on unreachable states are counted once.  With
    ``must_reach`` only policies reaching that set almost surely count.
    """
    n = len(prod.states)
    assign: dict[int, int] = {}
    best = [-1.0, None]
    count = [0]

    def frontier():
        seen = {prod.initial}
        queue = deque([prod.initial])
        while queue:
            x = queue.popleft()
            if x in prod.targets:
                continue
            j = assign.get(x)
            if j is None:
                return x
            for t, _ in prod.choices[x][j][1]:
                if t not in seen:
                    seen.add(t)
                    queue.append(t)
        return None

    def evaluate():
        rows = []
        for x in range(n):
            if x in prod.targets or x not in assign:
                rows.append(((x, 1.0),))
            else:
                rows.append(prod.choices[x][assign[x]][1])
        d = Dtmc(n, prod.initial, (), tuple(frozenset() for _ in range(n)), tuple(rows))
        if must_reach is not None:
            reach = reach_probability(d, must_reach)
            if reach[prod.initial] < 1.0 - 1e-12:
                return None
        return float(reach_probability(d, prod.targets)[prod.initial])

    def rec():
        x = frontier()
        if x is None:
            count[0] += 1
            if count[0] > max_policies:
                raise BudgetExceeded(f"more than {max_policies} policies to enumerate")
            v = evaluate()
            if v is not None and v > best[0]:
                best[0] = v
                best[1] = {prod.states[y]: prod.choices[y][j][0] for y, j in assign.items()}
            return
        for j in range(len(prod.choices[x])):
            assign[x] = j
            rec()
            del assign[x]

    rec()
    if best[1] is None:
        return OracleResult(0.0, {}, count[0])
    return OracleResult(best[0], best[1], count[0])


def _check_budget(prod: _Explicit, max_states: int, max_actions: int, ignore: frozenset = frozenset()):
    decision = [x for x in range(len(prod.states)) if x not in ignore]
    if len(decision) > max_states:
        raise BudgetExceeded(f"product has {len(decision)} states (budget {max_states})")
    widest = max(len(prod.choices[x]) for x in decision) if decision else 0
    if widest > max_actions:
        raise BudgetExceeded(f"product state with {widest} actions (budget {max_actions})")


def oracle_solve(m: Mdp, f: Formula, max_states: int = 14, max_actions: int = 3,
                 max_policies: int = 500_000) -> OracleResult:
    prod = _explicit_product(m, compile(f))
    _check_budget(prod, max_states, max_actions)
    return _enumerate(prod, max_policies)


def oracle_max_probability(m: Mdp, f: Formula, max_states: int = 14, max_actions: int = 3,
                           max_policies: int = 500_000) -> float:
    """Maximum over all stationary deterministic product policies, each solved exactly."""
    return oracle_solve(m, f, max_states, max_actions, max_policies).value


@dataclass
class Lemma1Report:
    native: float
    augmented: float
    difference: float
    native_policies: int
    augmented_policies: int

    @property
    def passed(self) -> bool:
        return self.difference < 1e-9


def verify_lemma1(m: Mdp, f: Formula, max_states: int = 14, max_actions: int = 3,
                  max_policies: int = 500_000) -> Lemma1Report:
    """Compare the optimum on ``m`` with the optimum of terminating in an
    accepting automaton state on the augmented model."""
    a = compile(f)
    native = _explicit_product(m, a)
    _check_budget(native, max_states, max_actions)
    aug = _explicit_product(augment(m), a, terminating=True)
    term = terminal_state(augment(m))
    sinks = frozenset(x for x, (s, _) in enumerate(aug.states) if s == term)
    _check_budget(aug, max_states, max_actions + 1, ignore=sinks)
    r1 = _enumerate(native, max_policies)
    r2 = _enumerate(aug, max_policies, must_reach=sinks)
    return Lemma1Report(r1.value, r2.value, abs(r1.value - r2.value), r1.policies_checked, r2.policies_checked)
