"""Small expression language for functionals of occupation counts.

Variables ``n1 .. nk`` are the per-site counts (``n1`` is site 0 of the
intensity vector).  Supported syntax: ``+ - * /``, integer ``^``, ``exp``,
variadic ``min``/``max``, and ``ind(<comparison>)`` indicators.  The grammar
(EBNF) is documented in the README.

Division by zero raises :class:`DslEvaluationError`; no operation is allowed
to produce a silent NaN.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Union

from .errors import DslEvaluationError, DslSyntaxError

__all__ = [
    "Node",
    "Num",
    "Var",
    "Neg",
    "BinOp",
    "Pow",
    "Call",
    "Cmp",
    "Ind",
    "parse",
    "evaluate",
    "pretty",
]


# ---------------------------------------------------------------------------
# Syntax tree
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    index: int  # 0-based site index; source form is n{index+1}


@dataclass(frozen=True)
class Neg:
    operand: "Node"


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * /
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Pow:
    base: "Node"
    exponent: int  # nonnegative integer literal


@dataclass(frozen=True)
class Call:
    func: str  # exp | min | max
    args: tuple["Node", ...]


@dataclass(frozen=True)
class Cmp:
    op: str  # one of < <= > >= == !=
    left: "Node"
    right: "Node"


@dataclass(frozen=True)
class Ind:
    comparison: Cmp


Node = Union[Num, Var, Neg, BinOp, Pow, Call, Ind]

_FUNCTIONS = {"exp": (1, 1), "min": (2, None), "max": (2, None), "ind": (1, 1)}


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<cmp><=|>=|==|!=|<|>)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    pos: int


def _tokenize(source: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise DslSyntaxError(f"unexpected character {source[pos]!r}", pos)
        kind = m.lastgroup or ""
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("end", "", len(source)))
    return tokens


# ---------------------------------------------------------------------------
# Parser (recursive descent)
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, source: str, k: int):
        self.tokens = _tokenize(source)
        self.k = k
        self.i = 0

    def peek(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            raise DslSyntaxError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.pos)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        tok = self.peek()
        if tok.kind != "end":
            raise DslSyntaxError(f"unexpected trailing input {tok.text!r}", tok.pos)
        return node

    def expr(self) -> Node:
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Node:
        node = self.factor()
        while self.peek().text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Node:
        if self.peek().text == "-":
            self.advance()
            return Neg(self.factor())
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.peek().text == "^":
            self.advance()
            tok = self.peek()
            if tok.kind != "number" or not tok.text.isdigit():
                raise DslSyntaxError("exponent must be a nonnegative integer literal", tok.pos)
            self.advance()
            return Pow(base, int(tok.text))
        return base

    def atom(self) -> Node:
        tok = self.peek()
        if tok.kind == "number":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "ident":
            return self.ident()
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        raise DslSyntaxError(f"expected a value, found {tok.text or 'end of input'!r}", tok.pos)

    def ident(self) -> Node:
        tok = self.advance()
        name = tok.text
        if name in _FUNCTIONS:
            lo, hi = _FUNCTIONS[name]
            self.expect("(")
            if name == "ind":
                arg = self.comparison()
                self.expect(")")
                return Ind(arg)
            args = [self.expr()]
            while self.peek().text == ",":
                self.advance()
                args.append(self.expr())
            self.expect(")")
            if len(args) < lo or (hi is not None and len(args) > hi):
                raise DslSyntaxError(f"{name} takes {'exactly ' + str(lo) if hi == lo else 'at least ' + str(lo)} argument(s), got {len(args)}", tok.pos)
            return Call(name, tuple(args))
        m = re.fullmatch(r"n([1-9]\d*)", name)
        if m:
            index = int(m.group(1)) - 1
            if index >= self.k:
                raise DslSyntaxError(f"variable {name} out of range for k={self.k} sites", tok.pos)
            return Var(index)
        raise DslSyntaxError(f"unknown identifier {name!r}", tok.pos)

    def comparison(self) -> Cmp:
        left = self.expr()
        tok = self.peek()
        if tok.kind != "cmp":
            raise DslSyntaxError("ind(...) requires a comparison", tok.pos)
        self.advance()
        return Cmp(tok.text, left, self.expr())


def parse(source: str, k: int) -> Node:
    """Parse ``source`` over variables n1..nk into a syntax tree."""
    if not source or not source.strip():
        raise DslSyntaxError("empty expression", 0)
    if k < 1:
        raise ValueError("k must be >= 1")
    return _Parser(source, k).parse()


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate(node: Node, counts: tuple[int, ...]) -> float:
    """Evaluate the tree at a count vector.  Raises DslEvaluationError on
    division by zero or non-finite results."""
    if isinstance(node, Num):
        return node.value
    if isinstance(node, Var):
        return float(counts[node.index])
    if isinstance(node, Neg):
        return -evaluate(node.operand, counts)
    if isinstance(node, BinOp):
        a = evaluate(node.left, counts)
        b = evaluate(node.right, counts)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b == 0.0:
            raise DslEvaluationError(f"division by zero in {pretty(node)}")
        return a / b
    if isinstance(node, Pow):
        return evaluate(node.base, counts) ** node.exponent
    if isinstance(node, Call):
        args = [evaluate(a, counts) for a in node.args]
        if node.func == "exp":
            try:
                return math.exp(args[0])
            except OverflowError as exc:
                raise DslEvaluationError(f"overflow in {pretty(node)}") from exc
        if node.func == "min":
            return min(args)
        return max(args)
    if isinstance(node, Ind):
        cmp = node.comparison
        a = evaluate(cmp.left, counts)
        b = evaluate(cmp.right, counts)
        ok = {
            "<": a < b,
            "<=": a <= b,
            ">": a > b,
            ">=": a >= b,
            "==": a == b,
            "!=": a != b,
        }[cmp.op]
        return 1.0 if ok else 0.0
    raise TypeError(f"not a DSL node: {node!r}")


# ---------------------------------------------------------------------------
# Pretty printer (round-trips: parse(pretty(t)) == t)
# ---------------------------------------------------------------------------

_LEVEL_ADD, _LEVEL_MUL, _LEVEL_UNARY, _LEVEL_POW, _LEVEL_ATOM = 1, 2, 3, 4, 5


def _level(node: Node) -> int:
    if isinstance(node, BinOp):
        return _LEVEL_ADD if node.op in "+-" else _LEVEL_MUL
    if isinstance(node, Neg):
        return _LEVEL_UNARY
    if isinstance(node, Pow):
        return _LEVEL_POW
    return _LEVEL_ATOM


def _wrap(node: Node, parent_level: int, strict: bool) -> str:
    text = pretty(node)
    lvl = _level(node)
    if lvl < parent_level or (strict and lvl == parent_level):
        return f"({text})"
    return text


def pretty(node: Node) -> str:
    """Render a tree back to source with minimal parentheses."""
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return f"n{node.index + 1}"
    if isinstance(node, Neg):
        return "-" + _wrap(node.operand, _LEVEL_UNARY, strict=False)
    if isinstance(node, BinOp):
        lvl = _level(node)
        left = _wrap(node.left, lvl, strict=False)
        right = _wrap(node.right, lvl, strict=node.op in ("-", "/"))
        return f"{left} {node.op} {right}"
    if isinstance(node, Pow):
        # unary minus binds looser than ^, so a Neg base always needs parens
        return f"{_wrap(node.base, _LEVEL_POW, strict=True)}^{node.exponent}"
    if isinstance(node, Call):
        return f"{node.func}({', '.join(pretty(a) for a in node.args)})"
    if isinstance(node, Ind):
        c = node.comparison
        return f"ind({pretty(c.left)} {c.op} {pretty(c.right)})"
    raise TypeError(f"not a DSL node: {node!r}")
