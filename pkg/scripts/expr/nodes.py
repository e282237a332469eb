"""
Expression tree nodes

Nodes are frozen dataclasses, so parsed expressions are immutable and can be
shared between threads. `to_text` prints with the minimum parentheses needed
for the grammar in parser.py to read the same tree back.
"""

from dataclasses import dataclass
from typing import Dict, Sequence, Set, Union


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int
    name: str


@dataclass(frozen=True)
class Neg:
    operand: 'Expr'


@dataclass(frozen=True)
class Add:
    left: 'Expr'
    right: 'Expr'


@dataclass(frozen=True)
class Sub:
    left: 'Expr'
    right: 'Expr'


@dataclass(frozen=True)
class Mul:
    left: 'Expr'
    right: 'Expr'


@dataclass(frozen=True)
class Div:
    left: 'Expr'
    right: 'Expr'


@dataclass(frozen=True)
class Pow:
    base: 'Expr'
    exponent: int


@dataclass(frozen=True)
class Func:
    name: str
    arg: 'Expr'


Expr = Union[Const, Var, Neg, Add, Sub, Mul, Div, Pow, Func]

FUNCTIONS = ('sin', 'cos', 'exp', 'sqrt')

# binding strength used by the printer
_LEVEL = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4, Const: 5, Var: 5, Func: 5}
_SYMBOL = {Add: '+', Sub: '-', Mul: '*', Div: '/'}


def to_text(e: Expr) -> str:
    kind = type(e)
    if kind is Const:
        text = repr(float(e.value))
        return f'({text})' if e.value < 0 else text
    if kind is Var:
        return e.name
    if kind is Func:
        return f'{e.name}({to_text(e.arg)})'
    if kind is Neg:
        inner = to_text(e.operand)
        return '-' + (f'({inner})' if _LEVEL[type(e.operand)] < 3 else inner)
    if kind is Pow:
        base = to_text(e.base)
        if _LEVEL[type(e.base)] < 5 or (type(e.base) is Const and e.base.value < 0):
            base = f'({base})'
        return f'{base}^{e.exponent}'
    level = _LEVEL[kind]
    left = to_text(e.left)
    right = to_text(e.right)
    if _LEVEL[type(e.left)] < level:
        left = f'({left})'
    # left associative: an equal-level right operand needs parentheses
    if _LEVEL[type(e.right)] <= level:
        right = f'({right})'
    return f'{left} {_SYMBOL[kind]} {right}'


def variables_of(e: Expr) -> Set[int]:
    kind = type(e)
    if kind is Var:
        return {e.index}
    if kind is Const:
        return set()
    if kind is Neg:
        return variables_of(e.operand)
    if kind is Pow:
        return variables_of(e.base)
    if kind is Func:
        return variables_of(e.arg)
    return variables_of(e.left) | variables_of(e.right)


def substitute(e: Expr, replacements: Dict[int, Expr]) -> Expr:
    """Replace Var(index) nodes by the given expressions"""
    kind = type(e)
    if kind is Var:
        return replacements.get(e.index, e)
    if kind is Const:
        return e
    if kind is Neg:
        return Neg(substitute(e.operand, replacements))
    if kind is Pow:
        return Pow(substitute(e.base, replacements), e.exponent)
    if kind is Func:
        return Func(e.name, substitute(e.arg, replacements))
    return kind(substitute(e.left, replacements), substitute(e.right, replacements))


def reindex(e: Expr, names: Sequence[str]) -> Expr:
    """Rebind Var nodes to a new name table (same indices)"""
    return substitute(e, {i: Var(i, n) for i, n in enumerate(names)})
