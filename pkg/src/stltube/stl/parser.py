"""Recursive-descent parser for the STL surface syntax.

Grammar (lowest to highest precedence)::

    formula     := implication
    implication := disjunction [ "->" implication ]          (right assoc)
    disjunction := conjunction { "|" conjunction }
    conjunction := until { "&" until }
    until       := unary [ "U" interval unary ]               (non assoc)
    unary       := "!" unary
                 | ("G" | "F") interval unary
                 | atom
    atom        := "true" | "false" | NAME | "(" formula ")"
    interval    := "[" NUMBER "," NUMBER "]"

``a -> b`` is rewritten to ``!a | b`` and ``false`` to ``!true``.  ``G``,
``F`` and ``U`` are operators only when followed by ``[``; otherwise they are
ordinary predicate names, so a region may be called ``G``.
"""

import re

from . import formula as f


class STLSyntaxError(ValueError):
    def __init__(self, message, pos, text=""):
        self.pos = pos
        self.text = text
        super().__init__(f"{message} at position {pos}")


_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>[0-9]+(?:\.[0-9]*)?(?:[eE][+-]?[0-9]+)?|\.[0-9]+(?:[eE][+-]?[0-9]+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<arrow>->)
  | (?P<sym>[!&|()\[\],-])
    """,
    re.VERBOSE,
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise STLSyntaxError(f"unexpected character {text[pos]!r}", pos, text)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), pos))
        pos = m.end()
    tokens.append(("eof", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text, regions):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0
        self.regions = regions

    def peek(self, k=0):
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def next(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def error(self, message, tok=None):
        tok = tok or self.peek()
        return STLSyntaxError(message, tok[2], self.text)

    def expect(self, value):
        tok = self.next()
        if tok[1] != value:
            found = tok[1] or "end of input"
            raise self.error(f"expected {value!r}, found {found!r}", tok)
        return tok

    def is_op(self, letter):
        tok = self.peek()
        return tok[0] == "name" and tok[1] == letter and self.peek(1)[1] == "["

    def parse(self):
        phi = self.implication()
        if self.peek()[0] != "eof":
            raise self.error(f"unexpected token {self.peek()[1]!r}")
        return phi

    def implication(self):
        lhs = self.disjunction()
        if self.peek()[0] == "arrow":
            self.next()
            return f.implies(lhs, self.implication())
        return lhs

    def disjunction(self):
        out = self.conjunction()
        while self.peek()[1] == "|":
            self.next()
            out = f.Formula(f.OR, (out, self.conjunction()))
        return out

    def conjunction(self):
        out = self.until()
        while self.peek()[1] == "&":
            self.next()
            out = f.Formula(f.AND, (out, self.until()))
        return out

    def until(self):
        lhs = self.unary()
        if self.is_op("U"):
            self.next()
            a, b = self.interval()
            rhs = self.unary()
            if self.is_op("U"):
                raise self.error("until is not associative; add parentheses")
            return f.until(lhs, rhs, a, b)
        return lhs

    def unary(self):
        tok = self.peek()
        if tok[1] == "!":
            self.next()
            return f.neg(self.unary())
        if self.is_op("G") or self.is_op("F"):
            self.next()
            a, b = self.interval()
            child = self.unary()
            return f.always(child, a, b) if tok[1] == "G" else f.eventually(child, a, b)
        return self.atom()

    def atom(self):
        tok = self.next()
        if tok[1] == "(":
            phi = self.implication()
            self.expect(")")
            return phi
        if tok[0] == "name":
            if tok[1] == "true":
                return f.true()
            if tok[1] == "false":
                return f.neg(f.true())
            if tok[1] in ("U",) and self.peek()[1] == "[":
                raise self.error("until needs a left operand", tok)
            if tok[1] not in self.regions:
                raise self.error(f"unbound predicate {tok[1]!r}", tok)
            return f.pred(self.regions[tok[1]])
        found = tok[1] or "end of input"
        raise self.error(f"expected a formula, found {found!r}", tok)

    def interval(self):
        start = self.expect("[")
        a = self.number()
        self.expect(",")
        b = self.number()
        self.expect("]")
        if a > b:
            raise self.error(f"malformed interval [{a:g},{b:g}]: lower bound exceeds upper", start)
        return a, b

    def number(self):
        tok = self.next()
        if tok[1] == "-":
            raise self.error("interval endpoints must be nonnegative", tok)
        if tok[0] != "num":
            raise self.error(f"expected a number, found {tok[1] or 'end of input'!r}", tok)
        return float(tok[1])


def parse_formula(text, regions=None):
    """Parse ``text`` into a :class:`~stltube.stl.formula.Formula`.

    ``regions`` maps predicate names to :class:`Predicate` objects; names not
    in the table raise :class:`STLSyntaxError`.
    """
    return _Parser(text, dict(regions or {})).parse()
