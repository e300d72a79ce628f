import json
import random

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from corpus import formula_corpus, random_formulas, random_mdp
from ltlf_synth import _kernels, benchmarks
from ltlf_synth.automata import AlphabetError, ResourceLimitError, compile
from ltlf_synth.formula import FALSE, TRUE, parse
from ltlf_synth.mdp import example_mdp, make_mdp, reach_probability
from ltlf_synth.synthesis import (
    BudgetExceeded, ConvergenceError, Stats, build_product, evaluate_policy, export_policy,
    oracle_max_probability, oracle_solve, policy_dtmc, prob0, synthesize, value_iteration,
    verify_lemma1,
)

FIG1 = example_mdp()
F12 = parse("F (p1 & p2)")
X12 = parse("X (p1 & p2)")


def one_state(label=(), ap=("p",)):
    return make_mdp(1, 0, ap, [set(label)], {(0, "stay"): {0: 1.0}})


def coin():
    """s0 goes to goal or sink with probability 1/2 each."""
    return make_mdp(3, 0, ("goal",), [set(), {"goal"}, set()],
                    {(0, "go"): {1: 0.5, 2: 0.5}, (1, "go"): {1: 1.0}, (2, "go"): {2: 1.0}})


class TestProduct:
    def test_fig1_initial_and_accepting(self):
        a = compile(F12)
        p = build_product(FIG1, a)
        s, q = p.pairs[p.initial]
        assert s == 0 and q == a.initial and q not in a.accepting
        for x, (s, q) in enumerate(p.pairs):
            if s == 2:
                assert x in p.accepting

    def test_true_is_isomorphic_to_model(self):
        p = build_product(FIG1, compile(TRUE))
        assert p.num_states == FIG1.num_states
        assert p.accepting == frozenset(range(p.num_states))
        assert p.num_choices == FIG1.num_choices and p.num_transitions == FIG1.num_transitions

    def test_false_has_no_accepting(self):
        assert build_product(FIG1, compile(FALSE)).accepting == frozenset()

    def test_distributions_sum_to_one(self):
        p = build_product(FIG1, compile(X12))
        for x in range(p.num_states):
            for _, dist in p.choices(x):
                assert sum(pr for _, pr in dist) == pytest.approx(1.0, abs=1e-9)

    def test_alphabet_mismatch(self):
        with pytest.raises(AlphabetError):
            build_product(FIG1, compile(parse("F zz")))

    def test_cap(self):
        with pytest.raises(ResourceLimitError):
            build_product(FIG1, compile(F12), cap=2)

    def test_extra_model_props_projected(self):
        p = build_product(FIG1, compile(parse("F p2")))
        assert p.automaton.props == ("p2",)
        assert synthesize(FIG1, parse("F p2")).optimal_value == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("text", ["F (p1 & p2)", "X (p1 & p2)", "G (p1 -> X p2)", "p1 U p2"])
    def test_label_soundness_random_walks(self, text):
        a = compile(parse(text))
        p = build_product(FIG1, a)
        index = {pair: x for x, pair in enumerate(p.pairs)}
        rng = random.Random(1)
        for _ in range(1000):
            x = p.initial
            s = FIG1.initial
            q = a.step(a.initial, FIG1.label_names(s))
            for _ in range(rng.randint(0, 8)):
                assert p.pairs[x] == (s, q)
                _, dist = rng.choice(list(p.choices(x)))
                r, acc = rng.random(), 0.0
                for y, pr in dist:
                    acc += pr
                    if r < acc:
                        break
                x = y
                s = p.pairs[x][0]
                q = a.step(q, FIG1.label_names(s))
            assert p.pairs[x] == (s, q) and index[(s, q)] == x


class TestProb0:
    def test_all_accepting(self):
        assert prob0(build_product(FIG1, compile(TRUE))) == frozenset()

    def test_unreachable_component(self):
        p = build_product(coin(), compile(parse("F goal")))
        assert {p.pairs[x][0] for x in prob0(p)} == {2}

    def test_fig1_sink(self):
        a = compile(F12)
        p = build_product(FIG1, a)
        zero = prob0(p)
        expected = {x for x, (s, q) in enumerate(p.pairs) if s == 3 and q not in a.accepting}
        assert expected and zero == expected

    def test_exact_zeros(self):
        p = build_product(coin(), compile(parse("F goal")))
        r = value_iteration(p)
        for x in prob0(p):
            assert r.probability[x] == 0.0


class TestValueIteration:
    def test_fig1(self):
        assert synthesize(FIG1, F12).optimal_value == pytest.approx(1.0, abs=1e-6)
        assert synthesize(FIG1, X12).optimal_value == pytest.approx(0.5, abs=1e-6)

    def test_constants(self):
        r = synthesize(FIG1, TRUE)
        assert r.optimal_value == 1.0 and (r.probability == 1.0).all()
        assert synthesize(FIG1, FALSE).optimal_value == 0.0

    def test_coin_one_sweep(self):
        p = build_product(coin(), compile(parse("F goal")))
        V = np.zeros(p.num_states)
        fixed = np.zeros(p.num_states, dtype=np.bool_)
        for x in p.accepting | prob0(p):
            fixed[x] = True
            V[x] = 1.0 if x in p.accepting else 0.0
        _kernels.gauss_seidel(p.state_ptr, p.choice_ptr, p.succ, p.prob, fixed, V, 1e-6, 1)
        assert V[p.initial] == 0.5
        r = value_iteration(p)
        assert r.optimal_value == 0.5
        # The second sweep only confirms the residual.
        assert r.stats.iterations == 2

    def test_targets_are_one_and_range(self):
        r = synthesize(FIG1, parse("F p2 & F p1"))
        p = r.product
        assert all(r.probability[x] == 1.0 for x in p.accepting)
        assert (r.probability >= 0).all() and (r.probability <= 1).all()

    def test_policy_avoids_self_loop(self):
        r = synthesize(FIG1, F12)
        p = r.product
        x0 = p.initial
        assert r.action_name(x0) == "a1"

    def test_nonconvergence(self):
        with pytest.raises(ConvergenceError):
            synthesize(FIG1, F12, epsilon=1e-12, max_iters=2, polish=False)

    def test_bad_epsilon(self):
        with pytest.raises(ValueError):
            synthesize(FIG1, F12, epsilon=0)

    def test_parallel_agrees(self):
        spec = benchmarks.make_grid_spec(6, 6, goals=2, avoid=2, seed=3)
        m = benchmarks.gen_gridworld(spec)
        f = benchmarks.gen_fn_formula(2)
        seq = synthesize(m, f)
        par = synthesize(m, f, threads=2)
        assert np.max(np.abs(seq.probability - par.probability)) < 10 * 1e-6
        raw = synthesize(m, f, threads=2, polish=False)
        assert np.all(raw.probability <= seq.probability + 1e-12)

    def test_monotone_flag(self):
        spec = benchmarks.make_grid_spec(5, 5, goals=3, avoid=2, seed=1)
        r = synthesize(benchmarks.gen_gridworld(spec), benchmarks.gen_fn_formula(3))
        assert not r.stats.nonmonotone

    def test_stats_format(self):
        r = synthesize(FIG1, F12)
        assert Stats.CSV_HEADER == "states,transitions,choices,dfa_states,iterations,residual"
        fields = r.stats.csv().split(",")
        assert fields[:4] == ["7", "13", "11", "2"]
        assert len(r.stats.csv(timing=True).split(",")) == 7

    def test_polish_reaches_optimum(self):
        # Policy iteration leaves no state with a strictly better choice.
        spec = benchmarks.make_grid_spec(6, 6, goals=2, avoid=2, seed=3)
        r = synthesize(benchmarks.gen_gridworld(spec), benchmarks.gen_fn_formula(2))
        p, V = r.product, r.probability
        q = np.add.reduceat(p.prob * V[p.succ], p.choice_ptr[:-1])
        owner = np.repeat(np.arange(p.num_states), np.diff(p.state_ptr))
        assert np.all(q <= V[owner] + 1e-9)

    def test_policy_consistency(self):
        for f in (F12, X12, parse("F p2 & F p1"), parse("p1 U p2")):
            r = synthesize(FIG1, f)
            d = policy_dtmc(r.product, r.policy)
            value = reach_probability(d, r.product.accepting)[r.product.initial]
            assert value == pytest.approx(r.optimal_value, abs=1e-7)
            exact = evaluate_policy(r.product, r.policy)
            assert exact[r.product.initial] == pytest.approx(value, abs=1e-12)


class TestOracle:
    def test_fig1(self):
        assert oracle_max_probability(FIG1, F12) == pytest.approx(1.0, abs=1e-12)
        assert oracle_max_probability(FIG1, X12) == pytest.approx(0.5, abs=1e-12)

    def test_one_state(self):
        assert oracle_max_probability(one_state({"p"}), parse("F p")) == 1.0
        assert oracle_max_probability(one_state(), parse("F p")) == 0.0

    def test_fig1_optimal_policy(self):
        r = oracle_solve(FIG1, F12)
        assert r.policy[(0, compile(F12).initial)] == FIG1.actions.index("a1")

    def test_budget(self):
        m = benchmarks.gen_gridworld(benchmarks.make_grid_spec(4, 4, goals=1, avoid=0))
        with pytest.raises(BudgetExceeded):
            oracle_max_probability(m, parse("F g1"))

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10**6))
    def test_vi_agrees_with_oracle(self, seed):
        rng = random.Random(seed)
        m = random_mdp(rng)
        f = random_formulas(1, seed, props=("p", "q"), max_depth=3, min_depth=0)[0]
        try:
            expected = oracle_max_probability(m, f)
        except BudgetExceeded:
            return
        r = synthesize(m, f)
        assert abs(r.optimal_value - expected) < 1e-6
        assert not r.stats.nonmonotone


class TestLemma1:
    def test_fig1(self):
        for f, v in ((F12, 1.0), (X12, 0.5)):
            rep = verify_lemma1(FIG1, f)
            assert rep.native == pytest.approx(v, abs=1e-12)
            assert rep.augmented == pytest.approx(v, abs=1e-12)
            assert rep.passed

    def test_false(self):
        rep = verify_lemma1(one_state(), FALSE)
        assert rep.native == rep.augmented == 0.0

    def test_initial_label_counts(self):
        rep = verify_lemma1(one_state({"p"}), parse("p"))
        assert rep.native == rep.augmented == 1.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 10**6))
    def test_random(self, seed):
        rng = random.Random(seed)
        m = random_mdp(rng, max_states=4)
        f = random_formulas(1, seed, props=("p", "q"), max_depth=3, min_depth=0)[0]
        try:
            rep = verify_lemma1(m, f)
        except BudgetExceeded:
            return
        assert rep.difference < 1e-9


class TestExport:
    def test_fig1(self):
        r = synthesize(FIG1, F12)
        data = json.loads(export_policy(r))
        assert data["optimal_value"] == pytest.approx(1.0, abs=1e-6)
        q0 = data["dfa"]["initial"]
        entry = [e for e in data["policy"] if e["mdp_state"] == 0 and e["dfa_state"] == q0]
        assert entry == [{"action": "a1", "dfa_state": q0, "mdp_state": 0}]

    def test_total_when_nothing_accepts(self):
        r = synthesize(FIG1, FALSE)
        data = json.loads(export_policy(r))
        assert len(data["policy"]) == r.product.num_states
        assert all(e["action"] == FIG1.actions[FIG1.enabled[e["mdp_state"]][0]] for e in data["policy"])

    def test_deterministic(self):
        assert export_policy(synthesize(FIG1, X12)) == export_policy(synthesize(FIG1, X12))
