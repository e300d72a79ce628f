"""End-to-end acceptance checks. Each test prints one PASS/FAIL line (run with -s to see them)."""

import itertools
import random
import resource
import subprocess
import sys
import time

import pytest

from corpus import formula_corpus, random_formulas, random_mdp
from ltlf_synth import benchmarks
from ltlf_synth.automata import all_traces, compile, language_equivalent_upto, myhill_nerode_count
from ltlf_synth.formula import (
    FALSE, TRUE, And, Atom, Eventually, Globally, Implies, Next, Not, Or, Until, parse,
    propositions, satisfies,
)
from ltlf_synth.ltl_bridge import evaluate_ltl, lift_trace, translate_g
from ltlf_synth.mdp import augment, example_mdp, make_mdp
from ltlf_synth.synthesis import BudgetExceeded, oracle_max_probability, synthesize, verify_lemma1

# Reference counts for the 10x10 F8 native product and the F8 automaton.
REF_GRID_CSV = "24421,450468,97684"
REF_F8_STATES = 258


def report(n, ok, detail):
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")
    return ok


def test_1_worked_example():
    m = example_mdp()
    start = time.perf_counter()
    got = {}
    for text, expected in (("F (p1 & p2)", 1.0), ("X (p1 & p2)", 0.5)):
        f = parse(text)
        got[text] = (synthesize(m, f).optimal_value, oracle_max_probability(m, f), expected)
    elapsed = time.perf_counter() - start
    ok = elapsed < 1.0 and all(abs(v - e) < 1e-6 and abs(o - e) < 1e-6 for v, o, e in got.values())
    detail = "; ".join(f"{k}: vi={v:.9f} oracle={o:.9f}" for k, (v, o, _) in got.items())
    assert report(1, ok, f"{detail}; {elapsed:.3f}s")


def test_2_augmentation():
    expected = make_mdp(
        5, 0, ("p1", "p2", "alive"),
        [{"p1", "alive"}, {"p2", "alive"}, {"p1", "p2", "alive"}, {"alive"}, set()],
        {
            (0, "a0"): {0: 1.0}, (0, "a1"): {1: 0.5, 2: 0.5}, (0, "a_term"): {4: 1.0},
            (1, "a0"): {0: 1.0}, (1, "a1"): {3: 1.0}, (1, "a_term"): {4: 1.0},
            (2, "a0"): {0: 1.0}, (2, "a_term"): {4: 1.0},
            (3, "a0"): {3: 1.0}, (3, "a_term"): {4: 1.0},
            (4, "a_term"): {4: 1.0},
        },
        actions=("a0", "a1", "a_term"),
    )
    aug = augment(example_mdp())
    assert report(2, aug == expected, f"{aug.num_states} states, actions {aug.actions}")


def test_3_dfa_oracle_suite():
    corpus = formula_corpus()
    start = time.perf_counter()
    failures = []
    for f in corpus:
        r = language_equivalent_upto(compile(f), f, 6)
        if not (r.equivalent and r.exhaustive):
            failures.append((str(f), r.counterexample))
    elapsed = time.perf_counter() - start
    ok = not failures and len(corpus) >= 50 and elapsed < 300
    assert report(3, ok, f"{len(corpus)} formulas, {len(failures)} counterexamples, {elapsed:.1f}s"), failures


def test_4_minimality():
    corpus = formula_corpus()
    mismatched = [str(f) for f in corpus if compile(f).num_states != myhill_nerode_count(f)]
    sizes = {}
    for n in range(1, 9):
        start = time.perf_counter()
        sizes[n] = (compile(benchmarks.gen_fn_formula(n)).num_states, time.perf_counter() - start)
    f8_states, f8_time = sizes[8]
    ok = not mismatched and all(s == 2 ** n + 1 for n, (s, _) in sizes.items()) and f8_time < 30
    table = " ".join(f"F{n}={s}" for n, (s, _) in sizes.items())
    print(f"  reference F8={REF_F8_STATES}, ours F8={f8_states} (difference {REF_F8_STATES - f8_states})")
    assert report(4, ok, f"nerode mismatches={len(mismatched)}; {table}; F8 {f8_time:.2f}s"), mismatched


def depth_one_formulas(props):
    leaves = [TRUE, FALSE] + [Atom(p) for p in props]
    out = list(leaves)
    out += [op(x) for op in (Not, Next, Eventually, Globally) for x in leaves]
    out += [op(x, y) for op in (And, Or, Implies, Until) for x, y in itertools.product(leaves, repeat=2)]
    return out


def test_5_translation_correspondence():
    grid = [(f, 5) for f in depth_one_formulas(("p", "q", "r"))]
    grid += [(f, 4) for f in random_formulas(12, seed=55, max_depth=4, min_depth=2)]
    checked, failures = 0, []
    for f, max_len in grid:
        g = translate_g(f)
        props = propositions(f) or ["p"]
        for rho in all_traces(props, max_len):
            checked += 1
            if satisfies(f, rho) != evaluate_ltl(g, lift_trace(rho), 0):
                failures.append((str(f), rho))
    ok = not failures
    assert report(5, ok, f"{len(grid)} formulas, {checked} traces, {len(failures)} failures"), failures[:5]


def test_6_termination_reduction():
    rng = random.Random(6)
    done, worst, skipped = 0, 0.0, 0
    while done < 100:
        m = random_mdp(rng, max_states=5)
        f = random_formulas(1, rng.randrange(10**9), props=("p", "q"), max_depth=3, min_depth=0)[0]
        try:
            rep = verify_lemma1(m, f)
        except BudgetExceeded:
            skipped += 1
            continue
        worst = max(worst, rep.difference)
        done += 1
    assert report(6, worst < 1e-9, f"{done} instances, max diff {worst:.3e}, {skipped} over budget")


def test_7_vi_oracle_agreement():
    rng = random.Random(7)
    models = [random_mdp(rng, max_states=4, ap=("p", "q", "r")) for _ in range(3)]
    checked, skipped, worst, nonmonotone = 0, 0, 0.0, 0
    for m in models:
        for f in formula_corpus():
            try:
                expected = oracle_max_probability(m, f)
            except BudgetExceeded:
                skipped += 1
                continue
            r = synthesize(m, f)
            worst = max(worst, abs(r.optimal_value - expected))
            nonmonotone += r.stats.nonmonotone
            checked += 1
    ok = worst < 1e-6 and nonmonotone == 0 and checked > 0
    assert report(7, ok, f"{checked} instances, max |vi-oracle| {worst:.3e}, "
                         f"nonmonotone={nonmonotone}, {skipped} over budget")


def cli(*args, cwd):
    return subprocess.run([sys.executable, "-m", "ltlf_synth", *args], cwd=cwd,
                          capture_output=True, check=False)


def test_8_scale(tmp_path):
    assert cli("gen", "gridworld", "10", "10", "--goals", "8", "--avoid", "2", "--out", "grid",
               cwd=tmp_path).returncode == 0
    start = time.perf_counter()
    res = cli("synthesize", "--model", "grid", "--formula-file", "grid.ltlf", cwd=tmp_path)
    elapsed = time.perf_counter() - start
    peak_mb = resource.getrusage(resource.RUSAGE_CHILDREN).ru_maxrss / 1024
    lines = res.stdout.decode().splitlines()
    ok = res.returncode == 0 and elapsed < 60 and peak_mb < 2048
    print(f"  {lines[2] if len(lines) > 2 else ''}")
    print(f"  ours      {lines[3] if len(lines) > 3 else res.stderr.decode()}")
    print(f"  reference {REF_GRID_CSV}")
    assert report(8, ok, f"value {lines[0] if lines else '?'}, {elapsed:.1f}s, peak {peak_mb:.0f} MB")


ACCEPTANCE_COMMANDS = [
    ("compile", "-f", "F g1 & F g2 & F g3 & F g4 & F g5 & F g6 & F g7 & F g8 & G !bad",
     "--out", "f8.json"),
    ("compile", "-f", "F (p1 & p2)", "--format", "hoa", "--out", "fp.hoa"),
    ("translate", "-f", "F (p1 & p2)"),
    ("augment", "--model", "fig1", "--out", "fig1_aug"),
    ("synthesize", "--model", "fig1", "-f", "F (p1 & p2)", "--oracle", "--policy", "pol_f.json"),
    ("synthesize", "--model", "fig1", "-f", "X (p1 & p2)", "--oracle", "--policy", "pol_x.json"),
    ("verify", "--model", "fig1", "-f", "F (p1 & p2)"),
    ("gen", "gridworld", "10", "10", "--goals", "8", "--avoid", "2", "--out", "grid"),
    ("synthesize", "--model", "grid", "--formula-file", "grid.ltlf", "--policy", "pol_grid.json"),
    ("gen", "nim", "--heap", "8", "--takes", "2", "--targets", "3", "--out", "nim"),
    ("synthesize", "--model", "nim", "--formula-file", "nim.ltlf"),
]


def run_all(workdir):
    from ltlf_synth.mdp import write_explicit

    workdir.mkdir()
    write_explicit(example_mdp(), str(workdir / "fig1"))
    outputs = []
    for cmd in ACCEPTANCE_COMMANDS:
        res = cli(*cmd, cwd=workdir)
        outputs.append((cmd, res.returncode, res.stdout, res.stderr))
    files = {p.name: p.read_bytes() for p in sorted(workdir.iterdir())}
    return outputs, files


def test_9_determinism(tmp_path):
    first, files1 = run_all(tmp_path / "a")
    second, files2 = run_all(tmp_path / "b")
    diffs = [" ".join(a[0]) for a, b in zip(first, second) if a != b]
    diffs += [name for name in files1 if files1[name] != files2.get(name)]
    codes_ok = all(code == 0 for _, code, _, _ in first)
    ok = not diffs and codes_ok and files1.keys() == files2.keys()
    assert report(9, ok, f"{len(ACCEPTANCE_COMMANDS)} commands, {len(files1)} files, "
                         f"{len(diffs)} differences"), diffs


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-s", "-q"]))
