"""Command-line interface.

Exit codes: 0 success, 1 user/input error, 2 resource limit, 3 verification failure.
"""

from __future__ import annotations

import argparse
import sys
import time

from . import automata, benchmarks, ltl_bridge, mdp, synthesis
from .formula import Atom, Eventually, FormulaSyntaxError, conjunction, parse, to_string

EXIT_OK, EXIT_INPUT, EXIT_RESOURCE, EXIT_VERIFY = 0, 1, 2, 3


class UsageError(Exception):
    pass


def read_formula(args) -> str:
    if args.formula is not None and args.formula_file is not None:
        raise UsageError("give either -f or --formula-file, not both")
    if args.formula is not None:
        return args.formula
    if args.formula_file is None:
        raise UsageError("a formula is required (-f TEXT or --formula-file PATH)")
    with open(args.formula_file) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                return line
    raise UsageError(f"{args.formula_file}: no formula line found")


def _add_formula(p):
    p.add_argument("-f", "--formula", help="inline formula")
    p.add_argument("--formula-file", help="file whose first non-comment line is the formula")


def _add_model(p):
    p.add_argument("--model", required=True, metavar="STEM",
                   help="explicit-format model: reads STEM.tra, STEM.lab and optional STEM.sta")


def cmd_compile(args) -> int:
    f = parse(read_formula(args))
    a = automata.compile(f)
    fmt = args.format
    if fmt is None and args.out:
        fmt = args.out.rsplit(".", 1)[-1] if "." in args.out else "json"
    fmt = fmt or "json"
    writers = {"dot": automata.export_dot, "json": automata.export_json, "hoa": automata.export_hoa}
    if fmt not in writers:
        raise UsageError(f"unknown output format {fmt!r} (dot, json, hoa)")
    text = writers[fmt](a)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
    elif args.print:
        sys.stdout.write(text)
    print(f"states: {a.num_states}")
    return EXIT_OK


def cmd_translate(args) -> int:
    f = parse(read_formula(args))
    g = ltl_bridge.translate_g(f)
    print(to_string(g))
    print(ltl_bridge.export_prism_property(g, quote_all=args.quote_all))
    return EXIT_OK


def cmd_augment(args) -> int:
    m = mdp.read_explicit(args.model)
    aug = mdp.augment(m)
    mdp.write_explicit(aug, args.out)
    print(f"+1 state, +1 action ({m.num_states} -> {aug.num_states} states, "
          f"{len(m.actions)} -> {len(aug.actions)} actions)")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    if args.epsilon <= 0:
        raise UsageError("--epsilon must be positive")
    m = mdp.read_explicit(args.model)
    f = parse(read_formula(args))
    t0 = time.perf_counter()
    r = synthesis.synthesize(m, f, args.epsilon, args.max_iters, threads=args.threads)
    r.stats.seconds = time.perf_counter() - t0
    print(f"{r.optimal_value:.9f}")
    print(r.stats.human(args.timing))
    header = synthesis.Stats.CSV_HEADER + (",seconds" if args.timing else "")
    print(header)
    print(r.stats.csv(args.timing))
    if args.policy:
        with open(args.policy, "w") as fh:
            fh.write(synthesis.export_policy(r))
    if args.oracle:
        try:
            expected = synthesis.oracle_max_probability(m, f)
        except synthesis.BudgetExceeded as exc:
            print(f"oracle: SKIPPED: budget ({exc})")
            return EXIT_OK
        diff = abs(expected - r.optimal_value)
        ok = diff <= 1e-6
        print(f"oracle: {expected:.9f} ({'agrees' if ok else 'DISAGREES'}, diff {diff:.3e})")
        if not ok:
            return EXIT_VERIFY
    return EXIT_OK


def cmd_gen(args) -> int:
    if args.family == "gridworld":
        spec = benchmarks.make_grid_spec(args.width, args.height, args.goals, args.avoid,
                                         args.layout, args.seed)
        m = benchmarks.gen_gridworld(spec)
        f = benchmarks.gen_fn_formula(args.goals) if args.goals else None
        if f is not None and not spec.avoid:
            f = conjunction([Eventually(Atom(f"g{i}")) for i in range(1, args.goals + 1)])
    elif args.family == "nim":
        takes = args.takes if args.takes is not None else min(3, args.heap)
        m, f = benchmarks.gen_nim(args.heap, takes, _ints(args.targets), _ints(args.forbidden))
    else:
        m, f = benchmarks.gen_double_counter(args.bits, args.p_env)
    out = args.out or args.family
    mdp.write_explicit(m, out)
    if f is not None:
        with open(f"{out}.ltlf", "w") as fh:
            fh.write(to_string(f) + "\n")
    print(f"wrote {out}.tra/.sta/.lab ({m.num_states} states, {m.num_choices} choices, "
          f"{m.num_transitions} transitions)" + (f" and {out}.ltlf" if f is not None else ""))
    return EXIT_OK


def _ints(text):
    if not text:
        return []
    return [int(x) for x in text.split(",") if x.strip()]


def cmd_verify(args) -> int:
    m = mdp.read_explicit(args.model)
    f = parse(read_formula(args))
    failed = False

    a = automata.compile(f)
    if args.corrupt_dfa:
        a = automata.Dfa(a.props, a.initial,
                         frozenset(range(a.num_states)) - a.accepting, a.delta)
    eq = automata.language_equivalent_upto(a, f, args.max_len)
    kind = "exhaustive" if eq.exhaustive else "sampled, not exhaustive"
    if eq.equivalent:
        print(f"language check ({kind}, {eq.checked} traces up to length {args.max_len}): PASS")
    else:
        failed = True
        cex = " ".join("{" + ",".join(sorted(s)) + "}" for s in eq.counterexample.symbols)
        print(f"language check ({kind}): FAIL counterexample: {cex}")

    try:
        rep = synthesis.verify_lemma1(m, f)
    except synthesis.BudgetExceeded as exc:
        print(f"termination reduction: SKIPPED: budget ({exc})")
    else:
        status = "PASS" if rep.passed else "FAIL"
        failed |= not rep.passed
        print(f"termination reduction: native {rep.native:.12f}, augmented {rep.augmented:.12f}, "
              f"diff {rep.difference:.3e}: {status}")
    return EXIT_VERIFY if failed else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ltlf-synth", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("compile", help="compile a formula to its minimal DFA")
    _add_formula(p)
    p.add_argument("--out", help="output file (format from extension unless --format)")
    p.add_argument("--format", choices=("dot", "json", "hoa"))
    p.add_argument("--print", action="store_true", help="write the automaton to stdout when no --out")
    p.set_defaults(run=cmd_compile)

    p = sub.add_parser("translate", help="LTLf -> LTL over terminating runs (native and PRISM syntax)")
    _add_formula(p)
    p.add_argument("--quote-all", action="store_true", help="quote every atom as a PRISM label")
    p.set_defaults(run=cmd_translate)

    p = sub.add_parser("augment", help="add the terminal state/action and 'alive' label")
    _add_model(p)
    p.add_argument("--out", required=True, metavar="STEM")
    p.set_defaults(run=cmd_augment)

    p = sub.add_parser(
        "synthesize", help="maximal satisfaction probability and optimal policy",
        description="Value iteration from below stops when the max-norm change drops under "
                    "--epsilon; the reported value is a lower bound, not an interval guarantee.")
    _add_model(p)
    _add_formula(p)
    p.add_argument("--epsilon", type=float, default=synthesis.DEFAULT_EPSILON)
    p.add_argument("--max-iters", type=int, default=synthesis.DEFAULT_MAX_ITERS)
    p.add_argument("--policy", metavar="PATH", help="write the policy JSON here")
    p.add_argument("--oracle", action="store_true", help="cross-check with policy enumeration")
    p.add_argument("--threads", type=int, default=1, help="use the parallel solver with N threads")
    p.add_argument("--timing", action="store_true", help="include wall time in the stats")
    p.set_defaults(run=cmd_synthesize)

    p = sub.add_parser("gen", help="generate benchmark models")
    fam = p.add_subparsers(dest="family", required=True)
    g = fam.add_parser("gridworld", help="gridworld; row 0 is the bottom row, north is +y")
    g.add_argument("width", type=int)
    g.add_argument("height", type=int)
    g.add_argument("--goals", type=int, default=3)
    g.add_argument("--avoid", type=int, default=2, help="number of cells labelled 'bad'")
    g.add_argument("--layout", choices=("plain", "random", "hallways"), default="plain",
                   help="random: 20%% cells blocked (seeded); hallways: walls on rows 2,5,... with one gap")
    g.add_argument("--seed", type=int, default=0)
    n = fam.add_parser("nim", help="Nim against a uniformly random opponent")
    n.add_argument("--heap", type=int, required=True)
    n.add_argument("--takes", type=int)
    n.add_argument("--targets", default="", help="comma-separated heights to reach")
    n.add_argument("--forbidden", default="", help="comma-separated heights to avoid")
    c = fam.add_parser("counter", help="double counter")
    c.add_argument("--bits", type=int, default=4)
    c.add_argument("--p-env", type=float, default=0.5)
    for q in (g, n, c):
        q.add_argument("--out", metavar="STEM")
    p.set_defaults(run=cmd_gen)

    p = sub.add_parser("verify", help="desk-scale checks of the DFA and of the termination reduction")
    _add_model(p)
    _add_formula(p)
    p.add_argument("--max-len", type=int, default=6)
    p.add_argument("--corrupt-dfa", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(run=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.run(args)
    except FormulaSyntaxError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (automata.ResourceLimitError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (UsageError, mdp.ModelError, ltl_bridge.ReservedNameError, automata.AlphabetError,
            OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except synthesis.ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RESOURCE


if __name__ == "__main__":
    sys.exit(main())
