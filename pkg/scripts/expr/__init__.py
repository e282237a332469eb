"""
Expression layer: parse scalar formulas over chart coordinates and evaluate
them with exact derivatives up to third order.
"""

from .nodes import Const, Var, Neg, Add, Sub, Mul, Div, Pow, Func, FUNCTIONS, to_text, substitute, variables_of
from .parser import ExprParser, parse, default_names
from .jet import JetValue, eval_jet, evaluate, compose_jet, reciprocal

__all__ = [
    'Const', 'Var', 'Neg', 'Add', 'Sub', 'Mul', 'Div', 'Pow', 'Func', 'FUNCTIONS',
    'to_text', 'substitute', 'variables_of',
    'ExprParser', 'parse', 'default_names',
    'JetValue', 'eval_jet', 'evaluate', 'compose_jet', 'reciprocal',
]
