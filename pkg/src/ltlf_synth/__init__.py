"""Maximal-probability policy synthesis for LTLf specifications on MDPs."""

from .automata import Dfa, accepts, compile, language_equivalent_upto, minimize
from .formula import Formula, Trace, evaluate, parse, satisfies, to_nnf, trace
from .ltl_bridge import LassoWord, evaluate_ltl, lift_trace, translate_g, translate_t
from .mdp import Mdp, augment, example_mdp, import_explicit, export_explicit, validate
from .synthesis import (
    SynthesisResult, build_product, oracle_max_probability, synthesize, value_iteration,
    verify_lemma1,
)

__version__ = "0.1.0"
