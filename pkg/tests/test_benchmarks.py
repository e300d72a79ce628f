import itertools
from fractions import Fraction
from functools import lru_cache

import pytest

from ltlf_synth import benchmarks as B
from ltlf_synth.automata import compile, language_equivalent_upto
from ltlf_synth.formula import And, Atom, Eventually, Globally, Not, parse, propositions
from ltlf_synth.mdp import ModelError, validate
from ltlf_synth.synthesis import oracle_max_probability, synthesize


def nim_value(heap, takes, targets, forbidden):
    """Max probability that some prefix has visited every target and no forbidden height.

    Heights only decrease, so backward induction over (height, turn, targets
    still missing) is exact.
    """
    @lru_cache(maxsize=None)
    def value(h, turn, missing):
        if h in forbidden:
            return Fraction(0)
        missing = missing - {h}
        if not missing:
            return Fraction(1)
        if h == 0:
            return Fraction(0)
        moves = [value(h - k, 1 - turn, missing) for k in range(1, min(takes, h) + 1)]
        return max(moves) if turn == 0 else sum(moves) / len(moves)

    return float(value(heap, 0, frozenset(targets)))


class TestGridKernel:
    def spec(self, w, h, **kw):
        return B.GridSpec(w, h, **kw)

    def test_interior_east(self):
        d = B.gridworld_kernel(self.spec(3, 3), (1, 1), "east")
        assert d == {(2, 1): Fraction(69, 100), (0, 1): Fraction(1, 100), (1, 2): Fraction(1, 10),
                     (1, 0): Fraction(1, 10), (1, 1): Fraction(1, 10)}

    def test_single_cell(self):
        for a in B.MOVES:
            assert B.gridworld_kernel(self.spec(1, 1), (0, 0), a) == {(0, 0): 1}

    def test_corner_north(self):
        d = B.gridworld_kernel(self.spec(2, 2), (0, 0), "north")
        assert d == {(0, 1): Fraction(69, 100), (1, 0): Fraction(1, 10), (0, 0): Fraction(21, 100)}

    def test_obstacle_redirects_to_stay(self):
        d = B.gridworld_kernel(self.spec(3, 1, obstacles={(2, 0)}), (1, 0), "east")
        assert d[(1, 0)] == Fraction(69 + 10 + 10 + 10, 100)

    @pytest.mark.parametrize("w, h", [(1, 1), (2, 3), (4, 4)])
    def test_exact_sums(self, w, h):
        spec = self.spec(w, h)
        for cell in itertools.product(range(w), range(h)):
            for a in B.MOVES:
                assert sum(B.gridworld_kernel(spec, cell, a).values()) == 1


class TestGridworld:
    def test_labels_and_validity(self):
        spec = B.GridSpec(3, 2, goals=[((2, 1), "g1")], avoid={(1, 0)}, start=(0, 0))
        m = B.gen_gridworld(spec)
        assert validate(m) == []
        assert m.ap == ("g1", "bad") and m.num_states == 6
        cell = {v: s for s, v in enumerate(m.valuations)}
        assert m.label_names(cell[(2, 1)]) == {"g1"}
        assert m.label_names(cell[(1, 0)]) == {"bad"}
        assert m.actions == ("north", "south", "east", "west")

    def test_invalid_spec(self):
        with pytest.raises(ModelError):
            B.gen_gridworld(B.GridSpec(2, 2, goals=[((5, 5), "g1")]))
        with pytest.raises(ModelError):
            B.gen_gridworld(B.GridSpec(2, 2, obstacles={(0, 0)}))

    def test_layouts(self):
        hall = B.grid_layout(4, 6, "hallways")
        assert hall == {(0, 2), (1, 2), (2, 2), (1, 5), (2, 5), (3, 5)}
        rnd = B.grid_layout(10, 10, "random", seed=3)
        assert rnd == B.grid_layout(10, 10, "random", seed=3)
        assert 5 <= len(rnd) <= 40
        with pytest.raises(ValueError):
            B.grid_layout(3, 3, "maze")

    @pytest.mark.parametrize("layout", ["plain", "random", "hallways"])
    def test_seeded_specs_valid(self, layout):
        spec = B.make_grid_spec(6, 6, goals=3, avoid=2, layout=layout, seed=7)
        assert spec == B.make_grid_spec(6, 6, goals=3, avoid=2, layout=layout, seed=7)
        assert validate(B.gen_gridworld(spec)) == []


class TestFormulas:
    def test_fn(self):
        assert B.gen_fn_formula(1) == And(Eventually(Atom("g1")), Globally(Not(Atom("bad"))))
        assert propositions(B.gen_fn_formula(3)) == ["g1", "g2", "g3", "bad"]
        with pytest.raises(ValueError):
            B.gen_fn_formula(18)

    def test_fn8_size(self):
        assert compile(B.gen_fn_formula(8)).num_states == 257

    def test_os(self):
        f = B.gen_os_formula()
        assert f == parse("F (g1 & F (g2 & F g3)) & G !bad")
        assert compile(f).num_states == 5
        assert language_equivalent_upto(compile(f), f, 6).equivalent

    def test_ol(self):
        f = B.gen_ol_formula()
        assert f == parse("F (g1 & F (g2 & F (g3 & F g4))) & (!g3 U g1) & G !bad")
        assert compile(f).num_states == 6
        assert language_equivalent_upto(compile(f), f, 4).equivalent


class TestNim:
    def test_structure(self):
        m, f = B.gen_nim(3, 3)
        assert validate(m) == []
        assert m.num_states == 8
        assert m.valuations[m.initial] == (3, 0)

    def test_immediate_win(self):
        m, _ = B.gen_nim(3, 3)
        assert synthesize(m, parse("F done")).optimal_value == 1.0

    def test_forced_pass(self):
        m, f = B.gen_nim(2, 1, targets=[1])
        assert synthesize(m, f).optimal_value == pytest.approx(1.0, abs=1e-9)

    def test_heap4_oracle(self):
        m, f = B.gen_nim(4, 2, targets=[2])
        assert oracle_max_probability(m, f) == pytest.approx(1.0, abs=1e-12)
        assert nim_value(4, 2, {2}, set()) == 1.0

    @pytest.mark.parametrize("heap, takes, targets, forbidden", [
        (8, 2, [3], [5]), (7, 3, [1], [2]), (9, 3, [4, 1], [6]), (6, 2, [1], [4]), (10, 3, [5], [2]),
        (5, 2, [0], [3]),
    ])
    def test_against_backward_induction(self, heap, takes, targets, forbidden):
        m, f = B.gen_nim(heap, takes, targets, forbidden)
        expected = nim_value(heap, takes, set(targets), set(forbidden))
        assert synthesize(m, f, epsilon=1e-9).optimal_value == pytest.approx(expected, abs=1e-6)

    def test_bad_parameters(self):
        with pytest.raises(ModelError):
            B.gen_nim(3, 4)
        with pytest.raises(ModelError):
            B.gen_nim(3, 2, targets=[5])


class TestCounter:
    def test_one_bit(self):
        m, f = B.gen_double_counter(1)
        assert m.num_states == 4 and validate(m) == []
        assert oracle_max_probability(m, f) == pytest.approx(1.0, abs=1e-12)

    def test_equal_start(self):
        m, f = B.gen_double_counter(2, sys_start=1, env_start=1)
        assert synthesize(m, f).optimal_value == 1.0

    def test_default_size(self):
        m, f = B.gen_double_counter()
        assert m.num_states == 256 and f == Eventually(Atom("match"))

    def test_bad_parameters(self):
        with pytest.raises(ModelError):
            B.gen_double_counter(0)
        with pytest.raises(ModelError):
            B.gen_double_counter(2, p_env=1.0)
