"""The filter expression language used in query predicates.

Supports column arithmetic, comparisons, boolean and bitwise-& operators,
and the fPhotoFlags() flag-name function, e.g.:

    (r-g) > 1
    flags & fPhotoFlags('primary')
    objType = 'galaxy' AND petroRad_r > 2.5

Precedence, loosest first: OR, AND, NOT, comparisons, &, + -, * /, unary
minus.  Identifiers are case-insensitive; u/g/r/i/z alias the modelMag_*
columns; strings are single-quoted.  The top-level expression must be
boolean, except that a bare bitwise-& is accepted and read as "!= 0".

The full grammar is published in docs/filterql.ebnf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FilterSyntaxError, FilterTypeError
from .schema import MAG_ALIASES, PHOTO_FLAGS, TableSchema


def fPhotoFlags(name: str) -> int:
    """Bitmask for a named PhotoObj flag (case-insensitive)."""
    bit = PHOTO_FLAGS.get(str(name).upper())
    if bit is None:
        raise FilterTypeError(
            "unknown flag name '%s' (valid: %s)"
            % (name, ", ".join(sorted(PHOTO_FLAGS)))
        )
    return bit


FUNCTIONS = {"fphotoflags": "fPhotoFlags"}


# ---------------------------------------------------------------------------
# AST

@dataclass
class Expr:
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)
    type: str | None = field(default=None, compare=False)


@dataclass
class Literal(Expr):
    value: object = None
    kind: str = "int"  # int | float | str


@dataclass
class ColumnRef(Expr):
    name: str = ""
    resolved: str = field(default="", compare=False)
    enum_values: tuple | None = field(default=None, compare=False)


@dataclass
class Unary(Expr):
    op: str = ""
    operand: Expr | None = None


@dataclass
class Binary(Expr):
    op: str = ""
    lhs: Expr | None = None
    rhs: Expr | None = None


@dataclass
class Call(Expr):
    func: str = ""
    args: tuple = ()
    value: object = field(default=None, compare=False)  # folded at typecheck


# ---------------------------------------------------------------------------
# lexer

_KEYWORDS = {"and": "AND", "or": "OR", "not": "NOT"}
_TWO_CHAR = {"<=", ">=", "!=", "<>"}
_ONE_CHAR = set("+-*/&<>=(),")


@dataclass
class _Token:
    kind: str  # NUM STR IDENT AND OR NOT OP LPAREN RPAREN COMMA EOF
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Token]:
    toks = []
    i, line, col = 0, 1, 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            i += 1
            col += 1
            continue
        start_col = col
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            seen_dot = seen_exp = False
            while j < n:
                c = text[j]
                if c.isdigit():
                    j += 1
                elif c == "." and not seen_dot and not seen_exp:
                    seen_dot = True
                    j += 1
                elif c in "eE" and not seen_exp and j > i:
                    seen_exp = True
                    j += 1
                    if j < n and text[j] in "+-":
                        j += 1
                else:
                    break
            toks.append(_Token("NUM", text[i:j], line, start_col))
            col += j - i
            i = j
            continue
        if ch == "'":
            j = text.find("'", i + 1)
            if j < 0:
                raise FilterSyntaxError(
                    "unterminated string literal", line, start_col, ("'",)
                )
            toks.append(_Token("STR", text[i + 1 : j], line, start_col))
            col += j + 1 - i
            i = j + 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            word = text[i:j]
            kind = _KEYWORDS.get(word.lower(), "IDENT")
            toks.append(_Token(kind, word, line, start_col))
            col += j - i
            i = j
            continue
        two = text[i : i + 2]
        if two in _TWO_CHAR:
            toks.append(_Token("OP", "!=" if two == "<>" else two, line, start_col))
            i += 2
            col += 2
            continue
        if ch in _ONE_CHAR:
            kind = {"(": "LPAREN", ")": "RPAREN", ",": "COMMA"}.get(ch, "OP")
            toks.append(_Token(kind, ch, line, start_col))
            i += 1
            col += 1
            continue
        raise FilterSyntaxError("unexpected character %r" % ch, line, start_col, ())
    toks.append(_Token("EOF", "", line, col))
    return toks


# ---------------------------------------------------------------------------
# parser

_CMP_OPS = {"<", ">", "<=", ">=", "=", "!="}


class _Parser:
    def __init__(self, toks):
        self.toks = toks
        self.pos = 0

    def peek(self):
        return self.toks[self.pos]

    def next(self):
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def fail(self, expected):
        t = self.peek()
        got = "end of input" if t.kind == "EOF" else repr(t.text)
        raise FilterSyntaxError(
            "expected %s, got %s" % (" or ".join(expected), got),
            t.line,
            t.col,
            expected,
        )

    def expect(self, kind, expected):
        if self.peek().kind != kind:
            self.fail(expected)
        return self.next()

    def parse(self):
        e = self.or_expr()
        if self.peek().kind != "EOF":
            self.fail(("operator", "end of input"))
        return e

    def or_expr(self):
        e = self.and_expr()
        while self.peek().kind == "OR":
            t = self.next()
            e = Binary(t.line, t.col, None, "OR", e, self.and_expr())
        return e

    def and_expr(self):
        e = self.not_expr()
        while self.peek().kind == "AND":
            t = self.next()
            e = Binary(t.line, t.col, None, "AND", e, self.not_expr())
        return e

    def not_expr(self):
        if self.peek().kind == "NOT":
            t = self.next()
            return Unary(t.line, t.col, None, "NOT", self.not_expr())
        return self.comparison()

    def comparison(self):
        e = self.bitand()
        t = self.peek()
        if t.kind == "OP" and t.text in _CMP_OPS:
            self.next()
            e = Binary(t.line, t.col, None, t.text, e, self.bitand())
        return e

    def bitand(self):
        e = self.additive()
        while self.peek().kind == "OP" and self.peek().text == "&":
            t = self.next()
            e = Binary(t.line, t.col, None, "&", e, self.additive())
        return e

    def additive(self):
        e = self.multiplicative()
        while self.peek().kind == "OP" and self.peek().text in ("+", "-"):
            t = self.next()
            e = Binary(t.line, t.col, None, t.text, e, self.multiplicative())
        return e

    def multiplicative(self):
        e = self.unary()
        while self.peek().kind == "OP" and self.peek().text in ("*", "/"):
            t = self.next()
            e = Binary(t.line, t.col, None, t.text, e, self.unary())
        return e

    def unary(self):
        t = self.peek()
        if t.kind == "OP" and t.text == "-":
            self.next()
            return Unary(t.line, t.col, None, "-", self.unary())
        return self.atom()

    def atom(self):
        t = self.peek()
        if t.kind == "NUM":
            self.next()
            if "." in t.text or "e" in t.text or "E" in t.text:
                return Literal(t.line, t.col, None, float(t.text), "float")
            return Literal(t.line, t.col, None, int(t.text), "int")
        if t.kind == "STR":
            self.next()
            return Literal(t.line, t.col, None, t.text, "str")
        if t.kind == "IDENT":
            self.next()
            if self.peek().kind == "LPAREN":
                canonical = FUNCTIONS.get(t.text.lower())
                if canonical is None:
                    raise FilterSyntaxError(
                        "unknown function '%s'" % t.text, t.line, t.col, ()
                    )
                self.next()
                args = []
                if self.peek().kind != "RPAREN":
                    args.append(self.or_expr())
                    while self.peek().kind == "COMMA":
                        self.next()
                        args.append(self.or_expr())
                self.expect("RPAREN", ("')'",))
                return Call(t.line, t.col, None, canonical, tuple(args))
            return ColumnRef(t.line, t.col, None, t.text)
        if t.kind == "LPAREN":
            self.next()
            e = self.or_expr()
            self.expect("RPAREN", ("')'",))
            return e
        self.fail(("a number", "a string", "a column", "'('"))


def parse(text: str) -> Expr:
    """Parse filter text into an AST.  Raises FilterSyntaxError."""
    if not text.strip():
        raise FilterSyntaxError("empty expression", 1, 1, ("an expression",))
    return _Parser(_tokenize(text)).parse()


# ---------------------------------------------------------------------------
# typecheck

_NUMERIC = ("int", "float")


def _resolve_column(schema: TableSchema, name: str):
    lowered = name.lower()
    if lowered in MAG_ALIASES and any(
        c.name == MAG_ALIASES[lowered] for c in schema.columns
    ):
        return schema.column(MAG_ALIASES[lowered])
    for c in schema.columns:
        if c.name.lower() == lowered:
            return c
    return None


def typecheck(expr: Expr, schema: TableSchema) -> Expr:
    """Annotate the AST with types against a table schema.

    Returns the root expression, which may be wrapped: a top-level bare
    bitwise-& is rewritten as `expr != 0`.  Raises FilterTypeError.
    """
    _check(expr, schema)
    if expr.type == "int" and isinstance(expr, Binary) and expr.op == "&":
        zero = Literal(expr.line, expr.col, "int", 0, "int")
        wrapped = Binary(expr.line, expr.col, "bool", "!=", expr, zero)
        return wrapped
    if expr.type != "bool":
        raise FilterTypeError(
            "predicate must be boolean, not %s" % expr.type, expr.line, expr.col
        )
    return expr


def _check(e: Expr, schema: TableSchema) -> str:
    if isinstance(e, Literal):
        e.type = e.kind
    elif isinstance(e, ColumnRef):
        col = _resolve_column(schema, e.name)
        if col is None:
            raise FilterTypeError(
                "unknown column '%s' on %s" % (e.name, schema.name), e.line, e.col
            )
        e.resolved = col.name
        if col.kind == "enum":
            e.type = "enum:%s" % col.name
            e.enum_values = col.enum
        else:
            e.type = col.kind
    elif isinstance(e, Call):
        if e.func == "fPhotoFlags":
            if len(e.args) != 1 or not (
                isinstance(e.args[0], Literal) and e.args[0].kind == "str"
            ):
                raise FilterTypeError(
                    "fPhotoFlags takes one quoted flag name", e.line, e.col
                )
            e.args[0].type = "str"
            e.value = fPhotoFlags(e.args[0].value)
            e.type = "int"
        else:
            raise FilterTypeError("unknown function '%s'" % e.func, e.line, e.col)
    elif isinstance(e, Unary):
        t = _check(e.operand, schema)
        if e.op == "-":
            if t not in _NUMERIC:
                raise FilterTypeError(
                    "unary minus needs a numeric operand, not %s" % t, e.line, e.col
                )
            e.type = t
        else:  # NOT
            if t != "bool":
                raise FilterTypeError(
                    "NOT needs a boolean operand, not %s" % t, e.line, e.col
                )
            e.type = "bool"
    elif isinstance(e, Binary):
        lt = _check(e.lhs, schema)
        rt = _check(e.rhs, schema)
        op = e.op
        if op in ("AND", "OR"):
            if lt != "bool" or rt != "bool":
                raise FilterTypeError(
                    "%s needs boolean operands, not %s and %s" % (op, lt, rt),
                    e.line,
                    e.col,
                )
            e.type = "bool"
        elif op == "&":
            if lt != "int" or rt != "int":
                raise FilterTypeError(
                    "& needs integer operands, not %s and %s" % (lt, rt),
                    e.line,
                    e.col,
                )
            e.type = "int"
        elif op in ("+", "-", "*", "/"):
            if lt not in _NUMERIC or rt not in _NUMERIC:
                raise FilterTypeError(
                    "'%s' needs numeric operands, not %s and %s" % (op, lt, rt),
                    e.line,
                    e.col,
                )
            e.type = (
                "float" if op == "/" or "float" in (lt, rt) else "int"
            )
        elif op in _CMP_OPS:
            if lt in _NUMERIC and rt in _NUMERIC:
                e.type = "bool"
            elif lt.startswith("enum:") or rt.startswith("enum:"):
                e.type = _check_enum_cmp(e, schema, lt, rt)
            elif lt == "str" and rt == "str" and op in ("=", "!="):
                e.type = "bool"
            elif lt == "bool" and rt == "bool" and op in ("=", "!="):
                e.type = "bool"
            else:
                raise FilterTypeError(
                    "cannot compare %s with %s" % (lt, rt), e.line, e.col
                )
        else:
            raise FilterTypeError("unknown operator '%s'" % op, e.line, e.col)
    else:
        raise FilterTypeError("malformed expression node", e.line, e.col)
    return e.type


def _check_enum_cmp(e: Binary, schema: TableSchema, lt: str, rt: str) -> str:
    if e.op not in ("=", "!="):
        raise FilterTypeError(
            "enum columns support only = and != comparisons", e.line, e.col
        )
    enum_side, other, other_t = (
        (e.lhs, e.rhs, rt) if lt.startswith("enum:") else (e.rhs, e.lhs, lt)
    )
    col = schema.column(enum_side.resolved)
    if isinstance(other, Literal) and other.kind == "str":
        if other.value not in col.enum:
            raise FilterTypeError(
                "'%s' is not a valid %s value (valid: %s)"
                % (other.value, col.name, ", ".join(col.enum)),
                other.line,
                other.col,
            )
        return "bool"
    if other_t == lt == rt:  # same enum column on both sides
        return "bool"
    raise FilterTypeError(
        "enum column %s compares only against a quoted name" % col.name,
        e.line,
        e.col,
    )


def compile_predicate(text: str, schema: TableSchema) -> Expr:
    """parse + typecheck in one step."""
    return typecheck(parse(text), schema)


# ---------------------------------------------------------------------------
# evaluation

def _div(a, b):
    if b == 0:
        if a == 0:
            return math.nan
        return math.inf if a > 0 else -math.inf
    return a / b


def evaluate(e: Expr, row: dict):
    """Evaluate a typechecked expression against one row mapping.

    Enum columns may hold either the code or the name; comparisons against
    quoted names accept both.
    """
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, ColumnRef):
        return row[e.resolved]
    if isinstance(e, Call):
        return e.value
    if isinstance(e, Unary):
        v = evaluate(e.operand, row)
        return (not v) if e.op == "NOT" else -v
    op = e.op
    if op == "AND":
        return bool(evaluate(e.lhs, row)) and bool(evaluate(e.rhs, row))
    if op == "OR":
        return bool(evaluate(e.lhs, row)) or bool(evaluate(e.rhs, row))
    a = evaluate(e.lhs, row)
    b = evaluate(e.rhs, row)
    a, b = _coerce_enum_pair(e, a, b)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return _div(a, b)
    if op == "&":
        return int(a) & int(b)
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    if op == ">":
        return a > b
    if op == "<=":
        return a <= b
    return a >= b


def _coerce_enum_pair(e: Binary, a, b):
    # enum-vs-name comparisons: map codes onto names so rows may hold either
    lt = e.lhs.type or ""
    rt = e.rhs.type or ""
    if lt.startswith("enum:") and isinstance(b, str) and isinstance(a, (int, np.integer)):
        a = e.lhs.enum_values[int(a)]
    elif rt.startswith("enum:") and isinstance(a, str) and isinstance(b, (int, np.integer)):
        b = e.rhs.enum_values[int(b)]
    return a, b


def evaluate_block(e: Expr, cols: dict, n: int):
    """Evaluate over column arrays, returning an (n,) array.

    `cols` maps canonical column names to numpy arrays (enum columns as
    code arrays).  Must agree element-wise with row-at-a-time evaluate().
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(_eval_block(e, cols, n))
    if out.ndim == 0:
        out = np.broadcast_to(out, (n,))
    return out


def _eval_block(e: Expr, cols, n):
    if isinstance(e, Literal):
        return e.value
    if isinstance(e, ColumnRef):
        return cols[e.resolved]
    if isinstance(e, Call):
        return e.value
    if isinstance(e, Unary):
        v = _eval_block(e.operand, cols, n)
        if e.op == "NOT":
            return ~np.asarray(v, dtype=bool)
        return -v
    op = e.op
    if op in ("AND", "OR"):
        a = np.asarray(_eval_block(e.lhs, cols, n), dtype=bool)
        b = np.asarray(_eval_block(e.rhs, cols, n), dtype=bool)
        return (a & b) if op == "AND" else (a | b)
    a = _eval_block(e.lhs, cols, n)
    b = _eval_block(e.rhs, cols, n)
    lt = e.lhs.type or ""
    rt = e.rhs.type or ""
    if lt.startswith("enum:") and isinstance(b, str):
        b = e.lhs.enum_values.index(b)
    elif rt.startswith("enum:") and isinstance(a, str):
        a = e.rhs.enum_values.index(a)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op == "/":
        return np.true_divide(a, b)
    if op == "&":
        return np.bitwise_and(a, b)
    if op == "=":
        return np.equal(a, b)
    if op == "!=":
        return np.not_equal(a, b)
    if op == "<":
        return np.less(a, b)
    if op == ">":
        return np.greater(a, b)
    if op == "<=":
        return np.less_equal(a, b)
    return np.greater_equal(a, b)


# ---------------------------------------------------------------------------
# printing

_PREC = {
    "OR": 1,
    "AND": 2,
    "NOT": 3,
    "=": 4,
    "!=": 4,
    "<": 4,
    ">": 4,
    "<=": 4,
    ">=": 4,
    "&": 5,
    "+": 6,
    "-": 6,
    "*": 7,
    "/": 7,
    "neg": 8,
}


def _prec(e: Expr) -> int:
    if isinstance(e, Binary):
        return _PREC[e.op]
    if isinstance(e, Unary):
        return _PREC["NOT"] if e.op == "NOT" else _PREC["neg"]
    return 100


def to_text(e: Expr) -> str:
    """Render an AST back to source text that reparses identically."""
    if isinstance(e, Literal):
        if e.kind == "str":
            if "'" in str(e.value):
                raise ValueError("string literals cannot contain quotes")
            return "'%s'" % e.value
        return repr(e.value)
    if isinstance(e, ColumnRef):
        return e.name
    if isinstance(e, Call):
        return "%s(%s)" % (e.func, ", ".join(to_text(a) for a in e.args))
    if isinstance(e, Unary):
        inner = to_text(e.operand)
        need = _prec(e.operand) < _prec(e)
        if e.op == "NOT":
            return "NOT %s" % (("(%s)" % inner) if need else inner)
        return "-%s" % (("(%s)" % inner) if need else inner)
    p = _PREC[e.op]
    left = to_text(e.lhs)
    right = to_text(e.rhs)
    # comparisons are non-associative; other binaries are left-associative
    lmin = p + 1 if p == 4 else p
    rmin = p + 1
    if _prec(e.lhs) < lmin:
        left = "(%s)" % left
    if _prec(e.rhs) < rmin:
        right = "(%s)" % right
    return "%s %s %s" % (left, e.op, right)
