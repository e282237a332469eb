"""
Expression parser

Grammar (PEG, highest binding first):

    power      := atom ('^' ['-'] INT)?
    unary      := '-' unary | power
    term       := unary (('*' | '/') unary)*
    expression := term (('+' | '-') term)*
    atom       := NUMBER | NAME '(' args ')' | NAME | '(' expression ')'

Binary operators are left associative. Names resolve against the variable
table the parser was built with (q1..q{n} by default) or the function set
sin, cos, exp, sqrt.

Usage:
    from expr.parser import ExprParser

    parser = ExprParser(['x', 'y', 'z'])
    e = parser.parse('x*y - sin(z)^2')
"""

import threading
from typing import List, Optional, Sequence

from arpeggio import (ParserPython, PTNodeVisitor, visit_parse_tree, ZeroOrMore,
                      Optional as Opt, EOF, NoMatch)
from arpeggio import RegExMatch as _

from .nodes import Const, Var, Neg, Add, Sub, Mul, Div, Pow, Func, FUNCTIONS

import os
import sys

current_dir = os.path.dirname(os.path.abspath(__file__))
scripts_dir = os.path.dirname(current_dir)
if scripts_dir not in sys.path:
    sys.path.insert(0, scripts_dir)

from shared.errors import ExprSyntaxError, ExprNameError, ExprArityError


# Grammar rules

def number():
    return _(r'(\d+\.?\d*|\.\d+)([eE][+-]?\d+)?')


def name():
    return _(r'[A-Za-z_][A-Za-z_0-9]*')


def integer_exponent():
    return _(r'-?\d+(?![.\deE])')


def neg():
    return _(r'-')


def mulop():
    return _(r'[*/]')


def addop():
    return _(r'[+\-]')


def call():
    return name, '(', Opt(expression, ZeroOrMore(',', expression)), ')'


def group():
    return '(', expression, ')'


def atom():
    return [number, call, name, group]


def power():
    return atom, Opt('^', integer_exponent)


def unary():
    return [(neg, unary), power]


def term():
    return unary, ZeroOrMore(mulop, unary)


def expression():
    return term, ZeroOrMore(addop, term)


def formula():
    return expression, EOF


class _Op:
    def __init__(self, symbol):
        self.symbol = symbol


class _Name:
    def __init__(self, text, position):
        self.text = text
        self.position = position


class _Exponent:
    def __init__(self, value):
        self.value = value


def _operands(children):
    # literal punctuation may or may not be reported by the visitor
    return [c for c in children if not isinstance(c, str)]


class ExprBuilder(PTNodeVisitor):
    """Turns the parse tree into expr.nodes"""

    def __init__(self, names: Sequence[str], source: str, **kwargs):
        super().__init__(**kwargs)
        self.index = {n: i for i, n in enumerate(names)}
        self.source = source

    def _offset(self, position):
        return len(self.source[:position].encode('utf-8'))

    def visit_number(self, node, children):
        return Const(float(node.value))

    def visit_name(self, node, children):
        return _Name(node.value, node.position)

    def visit_integer_exponent(self, node, children):
        return _Exponent(int(node.value))

    def visit_neg(self, node, children):
        return _Op('neg')

    def visit_mulop(self, node, children):
        return _Op(node.value)

    def visit_addop(self, node, children):
        return _Op(node.value)

    def visit_call(self, node, children):
        parts = _operands(children)
        head, args = parts[0], parts[1:]
        if head.text not in FUNCTIONS:
            raise ExprNameError(f'unknown function {head.text!r} at offset {self._offset(head.position)}')
        if len(args) != 1:
            raise ExprArityError(f'{head.text} takes 1 argument, got {len(args)}')
        return Func(head.text, args[0])

    def visit_group(self, node, children):
        return _operands(children)[0]

    def visit_atom(self, node, children):
        item = _operands(children)[0]
        if isinstance(item, _Name):
            if item.text in FUNCTIONS:
                raise ExprArityError(f'{item.text} takes 1 argument, got 0')
            if item.text not in self.index:
                raise ExprNameError(
                    f'unknown identifier {item.text!r} at offset {self._offset(item.position)}')
            return Var(self.index[item.text], item.text)
        return item

    def visit_power(self, node, children):
        parts = _operands(children)
        if len(parts) == 2:
            return Pow(parts[0], parts[1].value)
        return parts[0]

    def visit_unary(self, node, children):
        parts = _operands(children)
        if len(parts) == 2 and isinstance(parts[0], _Op):
            return Neg(parts[1])
        return parts[0]

    def _fold(self, children):
        parts = _operands(children)
        result = parts[0]
        for op, right in zip(parts[1::2], parts[2::2]):
            kind = {'+': Add, '-': Sub, '*': Mul, '/': Div}[op.symbol]
            result = kind(result, right)
        return result

    def visit_term(self, node, children):
        return self._fold(children)

    def visit_expression(self, node, children):
        return self._fold(children)

    def visit_formula(self, node, children):
        return _operands(children)[0]


def default_names(count: int) -> List[str]:
    return [f'q{i + 1}' for i in range(count)]


class ExprParser:
    """
    Parser bound to a variable table

    Arpeggio parsers keep state while parsing, so calls are serialized with
    a lock; the resulting trees are immutable.
    """

    def __init__(self, names: Optional[Sequence[str]] = None, dim: int = 3):
        self.names = list(names) if names is not None else default_names(dim)
        self._parser = ParserPython(formula, skipws=True)
        self._lock = threading.Lock()

    def parse(self, src: str):
        if src is None or not src.strip():
            raise ExprSyntaxError('empty expression', 0, src or '')
        with self._lock:
            try:
                tree = self._parser.parse(src)
            except NoMatch as e:
                offset = len(src[:e.position].encode('utf-8'))
                raise ExprSyntaxError('unexpected input', offset, src) from None
        return visit_parse_tree(tree, ExprBuilder(self.names, src))


def parse(src: str, names: Optional[Sequence[str]] = None, dim: int = 3):
    """Parse with a throwaway parser; prefer ExprParser for many expressions"""
    return ExprParser(names, dim).parse(src)
