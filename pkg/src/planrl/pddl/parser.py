"""Recursive-descent parser for the STRIPS subset used by the task domains.

Supported grammar, all s-expressions, ASCII, case-insensitive:

    (define (domain NAME)
      (:requirements :strips)            ; optional
      (:objects a b c)                   ; optional
      (:predicates (p ?x ?y) q ...)      ; bare names allowed for arity 0
      (:action NAME
        :parameters (?x ...)
        :precondition ()|atom|(not atom)|(and ...)
        :effect      ()|atom|(not atom)|(and ...)|(forall ?v [!= ?p]: (not atom) ...)))

The ``forall`` clause is only legal inside effects and its body may contain
only negated atoms; it grounds to a set of deletes.  Comments start with
``;`` and run to end of line.
"""
from __future__ import annotations

from dataclasses import dataclass

from .model import Domain, Literal, Operator, PddlError, QuantifiedDelete


class ParseError(PddlError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__("%s (line %d, column %d)" % (message, line, col))
        self.line = line
        self.col = col


@dataclass(frozen=True)
class Token:
    value: str
    line: int
    col: int


_PUNCT = "()"


def tokenize(text: str) -> list:
    tokens = []
    line, col = 1, 1
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        if ch == ";":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if ch in _PUNCT:
            tokens.append(Token(ch, line, col))
            i += 1
            col += 1
            continue
        start, start_col = i, col
        while i < n and text[i] not in " \t\r\n;()":
            i += 1
            col += 1
        word = text[start:i].lower()
        # a trailing colon terminates the symbol (quantifier syntax "?o:")
        if word.endswith(":") and len(word) > 1 and not word.startswith(":"):
            tokens.append(Token(word[:-1], line, start_col))
            tokens.append(Token(":", line, start_col + len(word) - 1))
        else:
            tokens.append(Token(word, line, start_col))
    return tokens


class _Stream:
    def __init__(self, tokens: list):
        self._tokens = tokens
        self._pos = 0

    def peek(self) -> Token | None:
        return self._tokens[self._pos] if self._pos < len(self._tokens) else None

    def next(self) -> Token:
        tok = self.peek()
        if tok is None:
            last = self._tokens[-1] if self._tokens else Token("", 1, 1)
            raise ParseError("unexpected end of input", last.line, last.col)
        self._pos += 1
        return tok

    def expect(self, value: str) -> Token:
        tok = self.next()
        if tok.value != value:
            raise ParseError("expected '%s', got '%s'" % (value, tok.value),
                             tok.line, tok.col)
        return tok


def _parse_sexpr(s: _Stream):
    """Read one s-expression into nested lists of Tokens."""
    tok = s.next()
    if tok.value == ")":
        raise ParseError("unexpected ')'", tok.line, tok.col)
    if tok.value != "(":
        return tok
    items = []
    while True:
        nxt = s.peek()
        if nxt is None:
            raise ParseError("unclosed '('", tok.line, tok.col)
        if nxt.value == ")":
            s.next()
            return items
        items.append(_parse_sexpr(s))


def _head(expr) -> str:
    if isinstance(expr, list) and expr and isinstance(expr[0], Token):
        return expr[0].value
    return ""


def _loc(expr) -> tuple[int, int]:
    node = expr
    while isinstance(node, list):
        if not node:
            return (0, 0)
        node = node[0]
    return (node.line, node.col)


class _DomainBuilder:
    def __init__(self):
        self.name = ""
        self.objects: list = []
        self.predicates: dict = {}
        self.operators: list = []

    def _check_atom(self, literal: Literal, line: int, col: int):
        if literal.pred not in self.predicates:
            raise ParseError("unknown predicate '%s'" % literal.pred, line, col)
        arity = self.predicates[literal.pred]
        if len(literal.args) != arity:
            raise ParseError(
                "predicate '%s' declared with arity %d, used with %d"
                % (literal.pred, arity, len(literal.args)), line, col)

    def _parse_atom(self, expr, negated=False) -> Literal:
        line, col = _loc(expr)
        if isinstance(expr, Token):
            literal = Literal(expr.value, (), not negated)
        else:
            if not expr or not all(isinstance(t, Token) for t in expr):
                raise ParseError("malformed atom", line, col)
            literal = Literal(expr[0].value,
                              tuple(t.value for t in expr[1:]), not negated)
        self._check_atom(literal, line, col)
        return literal

    def _parse_literals(self, expr, *, where: str,
                        quantifiers: list | None = None) -> list:
        """Flatten a formula into literals, collecting forall clauses."""
        line, col = _loc(expr)
        if isinstance(expr, list) and not expr:
            return []  # empty conjunction ()
        head = _head(expr)
        if head == "and":
            out = []
            for sub in expr[1:]:
                out.extend(self._parse_literals(sub, where=where,
                                                quantifiers=quantifiers))
            return out
        if head == "not":
            if len(expr) != 2:
                raise ParseError("'not' takes one atom", line, col)
            return [self._parse_atom(expr[1], negated=True)]
        if head == "forall":
            if quantifiers is None:
                raise ParseError("quantifier not supported in %s" % where,
                                 line, col)
            quantifiers.append(self._parse_forall(expr))
            return []
        return [self._parse_atom(expr)]

    def _parse_forall(self, expr) -> QuantifiedDelete:
        # (forall ?v [!= ?p] : body...)
        line, col = _loc(expr)
        items = expr[1:]
        if not items or not isinstance(items[0], Token):
            raise ParseError("forall needs a variable", line, col)
        var = items[0].value
        if not var.startswith("?"):
            raise ParseError("forall variable must start with '?'", line, col)
        items = items[1:]
        neq = None
        if items and isinstance(items[0], Token) and items[0].value == "!=":
            if len(items) < 2 or not isinstance(items[1], Token):
                raise ParseError("'!=' needs a variable", line, col)
            neq = items[1].value
            items = items[2:]
        if items and isinstance(items[0], Token) and items[0].value == ":":
            items = items[1:]
        templates = []
        for body in items:
            for literal in self._parse_literals(body, where="forall body"):
                if literal.positive:
                    raise ParseError(
                        "forall effects support only negated atoms", line, col)
                templates.append(literal.atom())
        return QuantifiedDelete(var, neq, tuple(templates))

    def add_predicates(self, exprs):
        for decl in exprs:
            if isinstance(decl, Token):
                self.predicates[decl.value] = 0
            else:
                line, col = _loc(decl)
                if not decl or not all(isinstance(t, Token) for t in decl):
                    raise ParseError("malformed predicate declaration", line, col)
                name = decl[0].value
                args = [t.value for t in decl[1:]]
                if not all(a.startswith("?") for a in args):
                    raise ParseError("predicate arguments must be variables",
                                     line, col)
                self.predicates[name] = len(args)

    def add_action(self, exprs):
        line, col = _loc(exprs) if exprs else (0, 0)
        if not exprs or not isinstance(exprs[0], Token):
            raise ParseError("action needs a name", line, col)
        name = exprs[0].value
        sections: dict = {}
        i = 1
        while i < len(exprs):
            key = exprs[i]
            if not isinstance(key, Token) or not key.value.startswith(":"):
                raise ParseError("expected :keyword in action '%s'" % name,
                                 *_loc(key))
            if i + 1 >= len(exprs):
                raise ParseError("missing value for %s" % key.value,
                                 key.line, key.col)
            sections[key.value] = exprs[i + 1]
            i += 2
        params_expr = sections.get(":parameters", [])
        if isinstance(params_expr, Token):
            raise ParseError(":parameters must be a list",
                             params_expr.line, params_expr.col)
        params = tuple(t.value for t in params_expr)
        for p in params:
            if not p.startswith("?"):
                raise ParseError("parameter '%s' must start with '?'" % p,
                                 line, col)
        precond = tuple(self._parse_literals(
            sections.get(":precondition", []), where="precondition"))
        quantified: list = []
        effects = self._parse_literals(
            sections.get(":effect", []), where="effect", quantifiers=quantified)
        adds = tuple(e for e in effects if e.positive)
        dels = tuple(e.atom() for e in effects if not e.positive)
        self.operators.append(Operator(name, params, precond, adds, dels,
                                       tuple(quantified)))

    def build(self) -> Domain:
        return Domain(self.name, tuple(self.objects), dict(self.predicates),
                      tuple(self.operators))


def parse_domain(text: str) -> Domain:
    """Parse a domain description, validating predicate arities."""
    stream = _Stream(tokenize(text))
    top = _parse_sexpr(stream)
    if _head(top) != "define":
        raise ParseError("expected (define ...)", *_loc(top))
    if len(top) < 2 or _head(top[1]) != "domain" or len(top[1]) != 2:
        raise ParseError("expected (domain NAME)", *_loc(top))
    builder = _DomainBuilder()
    builder.name = top[1][1].value

    # predicates must be known before actions, so collect sections first
    sections = top[2:]
    for section in sections:
        head = _head(section)
        if head == ":requirements":
            for req in section[1:]:
                if req.value != ":strips":
                    raise ParseError("unsupported requirement '%s'" % req.value,
                                     req.line, req.col)
        elif head == ":objects":
            builder.objects = [t.value for t in section[1:]]
        elif head == ":predicates":
            builder.add_predicates(section[1:])
        elif head == ":action":
            pass
        else:
            raise ParseError("unknown section '%s'" % head, *_loc(section))
    for section in sections:
        if _head(section) == ":action":
            builder.add_action(section[1:])

    trailing = stream.peek()
    if trailing is not None:
        raise ParseError("trailing input after domain",
                         trailing.line, trailing.col)
    return builder.build()


def parse_domain_file(path) -> Domain:
    with open(path, "r", encoding="ascii") as fh:
        return parse_domain(fh.read())
