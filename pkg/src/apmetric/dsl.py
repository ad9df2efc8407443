"""Metric expression language: parsing and discrete evaluation.

A metric is defined in a small text format (conventionally a ``.apm`` file)::

    f1 { define: (2*tp) / (ap + pp) special_case_positive }

    prec_at_rec {
        define: tp / pp
        constraint: tp / ap >= 0.8
        special_case_positive
        cs_special_case_positive(1)
    }

The expression body is arithmetic over the confusion-matrix entities
``tp tn fp fn pp pn ap an all``, numeric literals, parameters declared in the
header (``fbeta(beta=2) { ... }``), ``+ - * /``, integer powers ``^``, and
``sqrt``.  Constraints compare an expression against a threshold with ``>=``
only.  Flags:

* ``special_case_positive`` / ``special_case_negative`` fix the metric value
  at the all-zeros / all-ones configurations: 1 when prediction and truth are
  both all-zeros (resp. all-ones), 0 when only one of them is.
* ``cs_special_case_positive(i)`` / ``cs_special_case_negative(i)`` apply the
  same override to the i-th constraint expression (1-based).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

ENTITY_NAMES = ("tp", "tn", "fp", "fn", "pp", "pn", "ap", "an", "all")

FLAG_POS = "special_case_positive"
FLAG_NEG = "special_case_negative"
FLAG_CS_POS = "cs_special_case_positive"
FLAG_CS_NEG = "cs_special_case_negative"


class MetricSyntaxError(ValueError):
    """Raised on malformed metric source, with line/column context."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} (line {line}, column {column})")
        self.line = line
        self.column = column


class MetricValueError(ValueError):
    """Raised when a structurally valid metric is numerically unusable.

    Carries the offending (k, l) cell when the failure is tied to a
    particular (predicted-positive count, actual-positive count) pair.
    """

    def __init__(self, message: str, cell: tuple[int, int] | None = None):
        if cell is not None:
            message = f"{message} at cell (k={cell[0]}, l={cell[1]})"
        super().__init__(message)
        self.cell = cell


@dataclass(frozen=True)
class ConfusionCounts:
    """Counts of a binary confusion matrix plus its marginal sums."""

    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def pp(self) -> int:
        return self.tp + self.fp

    @property
    def pn(self) -> int:
        return self.tn + self.fn

    @property
    def ap(self) -> int:
        return self.tp + self.fn

    @property
    def an(self) -> int:
        return self.tn + self.fp

    @property
    def all(self) -> int:
        return self.tp + self.tn + self.fp + self.fn

    @classmethod
    def from_vectors(cls, yhat, y) -> "ConfusionCounts":
        if len(yhat) != len(y):
            raise ValueError("prediction and label vectors differ in length")
        tp = tn = fp = fn = 0
        for a, b in zip(yhat, y):
            a = int(a)
            b = int(b)
            if a not in (0, 1) or b not in (0, 1):
                raise ValueError("vectors must be binary")
            if a and b:
                tp += 1
            elif a:
                fp += 1
            elif b:
                fn += 1
            else:
                tn += 1
        return cls(tp=tp, tn=tn, fp=fp, fn=fn)

    @classmethod
    def from_cell(cls, t: int, k: int, l: int, n: int) -> "ConfusionCounts":
        """Counts at TP=t when k samples are predicted positive and l are truly positive."""
        return cls(tp=t, fp=k - t, fn=l - t, tn=n - k - l + t)

    def as_dict(self) -> dict[str, float]:
        return {
            "tp": float(self.tp),
            "tn": float(self.tn),
            "fp": float(self.fp),
            "fn": float(self.fn),
            "pp": float(self.pp),
            "pn": float(self.pn),
            "ap": float(self.ap),
            "an": float(self.an),
            "all": float(self.all),
        }


# --- expression tree ---------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float

    def eval(self, env) -> float:
        return self.value


@dataclass(frozen=True)
class Entity:
    name: str

    def eval(self, env) -> float:
        return env[self.name]


@dataclass(frozen=True)
class BinOp:
    op: str
    left: "Expr"
    right: "Expr"

    def eval(self, env) -> float:
        a = self.left.eval(env)
        b = self.right.eval(env)
        if self.op == "+":
            return a + b
        if self.op == "-":
            return a - b
        if self.op == "*":
            return a * b
        return a / b


@dataclass(frozen=True)
class Pow:
    base: "Expr"
    exponent: int

    def eval(self, env) -> float:
        return self.base.eval(env) ** self.exponent


@dataclass(frozen=True)
class Sqrt:
    arg: "Expr"

    def eval(self, env) -> float:
        v = self.arg.eval(env)
        if v < 0:
            raise ValueError(f"sqrt of negative value {v}")
        return math.sqrt(v)


@dataclass(frozen=True)
class Neg:
    arg: "Expr"

    def eval(self, env) -> float:
        return -self.arg.eval(env)


Expr = Num | Entity | BinOp | Pow | Sqrt | Neg


@dataclass(frozen=True)
class MetricConstraint:
    """One ``constraint: expr >= tau`` clause with its own special-case flags."""

    body: Expr
    tau: float
    pos_special: bool = False
    neg_special: bool = False


@dataclass(frozen=True, eq=False)
class MetricExpr:
    name: str
    body: Expr
    params: dict[str, float] = field(default_factory=dict)
    pos_special: bool = False
    neg_special: bool = False
    constraints: tuple[MetricConstraint, ...] = ()
    source: str = ""

    def __eq__(self, other):
        if not isinstance(other, MetricExpr):
            return NotImplemented
        return self.name == other.name and self.source == other.source

    def __hash__(self):
        return hash((self.name, self.source))


# --- tokenizer ---------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+|\#[^\n]*)
  | (?P<num>\d+(\.\d*)?([eE][+-]?\d+)?|\.\d+([eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<cmp>>=|<=|==|=|>|<)
  | (?P<punct>[{}(),:^*/+-])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class _Token:
    kind: str
    text: str
    line: int
    column: int


def _tokenize(text: str) -> list[_Token]:
    tokens = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise MetricSyntaxError(
                f"unexpected character {text[pos]!r}", line, pos - line_start + 1
            )
        kind = m.lastgroup
        tok = m.group()
        if kind != "ws":
            tokens.append(_Token(kind, tok, line, m.start() - line_start + 1))
        line += tok.count("\n")
        if "\n" in tok:
            line_start = m.start() + tok.rindex("\n") + 1
        pos = m.end()
    tokens.append(_Token("eof", "<end of input>", line, pos - line_start + 1))
    return tokens


# --- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.idx = 0
        self.params: dict[str, float] = {}

    def peek(self) -> _Token:
        return self.tokens[self.idx]

    def advance(self) -> _Token:
        tok = self.tokens[self.idx]
        if tok.kind != "eof":
            self.idx += 1
        return tok

    def error(self, message: str, tok: _Token | None = None) -> MetricSyntaxError:
        tok = tok or self.peek()
        return MetricSyntaxError(message, tok.line, tok.column)

    def expect(self, text: str) -> _Token:
        tok = self.peek()
        if tok.text != text:
            raise self.error(f"expected {text!r}, found {tok.text!r}")
        return self.advance()

    def expect_name(self, what: str = "an identifier") -> _Token:
        tok = self.peek()
        if tok.kind != "name":
            raise self.error(f"expected {what}, found {tok.text!r}")
        return self.advance()

    def number(self) -> float:
        sign = 1.0
        if self.peek().text == "-":
            self.advance()
            sign = -1.0
        tok = self.peek()
        if tok.kind != "num":
            raise self.error(f"expected a number, found {tok.text!r}")
        self.advance()
        return sign * float(tok.text)

    def metric(self) -> MetricExpr:
        name = self.expect_name("a metric name").text
        if name in ENTITY_NAMES:
            raise self.error(f"metric name {name!r} shadows a confusion-matrix entity")
        if self.peek().text == "(":
            self.advance()
            while True:
                pname = self.expect_name("a parameter name").text
                self.expect("=")
                self.params[pname] = self.number()
                if self.peek().text == ",":
                    self.advance()
                    continue
                break
            self.expect(")")
        self.expect("{")
        self.expect("define")
        self.expect(":")
        body = self.expr()

        constraints: list[MetricConstraint] = []
        pos_special = False
        neg_special = False
        cs_flags: list[tuple[str, int, _Token]] = []
        while self.peek().text != "}":
            tok = self.expect_name("a flag or 'constraint'")
            if tok.text == "constraint":
                self.expect(":")
                cexpr = self.expr()
                cmp_tok = self.peek()
                if cmp_tok.text != ">=":
                    raise self.error(
                        f"constraints support only '>=', found {cmp_tok.text!r}"
                    )
                self.advance()
                tau = self.number()
                constraints.append(MetricConstraint(body=cexpr, tau=tau))
            elif tok.text == FLAG_POS:
                pos_special = True
            elif tok.text == FLAG_NEG:
                neg_special = True
            elif tok.text in (FLAG_CS_POS, FLAG_CS_NEG):
                self.expect("(")
                idx_tok = self.peek()
                idx = self.number()
                if idx != int(idx) or idx < 1:
                    raise self.error(
                        "constraint index must be a positive integer", idx_tok
                    )
                self.expect(")")
                cs_flags.append((tok.text, int(idx), idx_tok))
            else:
                raise self.error(f"unknown flag {tok.text!r}", tok)
        self.expect("}")
        if self.peek().kind != "eof":
            raise self.error("trailing input after metric definition")

        for flag, idx, tok in cs_flags:
            if idx > len(constraints):
                raise self.error(
                    f"{flag}({idx}) refers to a missing constraint "
                    f"(only {len(constraints)} defined)",
                    tok,
                )
            c = constraints[idx - 1]
            if flag == FLAG_CS_POS:
                c = MetricConstraint(c.body, c.tau, True, c.neg_special)
            else:
                c = MetricConstraint(c.body, c.tau, c.pos_special, True)
            constraints[idx - 1] = c

        return MetricExpr(
            name=name,
            body=body,
            params=dict(self.params),
            pos_special=pos_special,
            neg_special=neg_special,
            constraints=tuple(constraints),
            source=self.text,
        )

    def expr(self) -> Expr:
        node = self.term()
        while self.peek().text in ("+", "-"):
            op = self.advance().text
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expr:
        node = self.factor()
        while self.peek().text in ("*", "/"):
            op = self.advance().text
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expr:
        if self.peek().text == "-":
            self.advance()
            return Neg(self.factor())
        node = self.atom()
        if self.peek().text == "^":
            self.advance()
            exp_tok = self.peek()
            sign = 1
            if exp_tok.text == "-":
                self.advance()
                sign = -1
                exp_tok = self.peek()
            if exp_tok.kind != "num" or "." in exp_tok.text or "e" in exp_tok.text.lower():
                raise self.error("power must be an integer exponent")
            self.advance()
            node = Pow(node, sign * int(exp_tok.text))
        return node

    def atom(self) -> Expr:
        tok = self.peek()
        if tok.text == "(":
            self.advance()
            node = self.expr()
            self.expect(")")
            return node
        if tok.kind == "num":
            self.advance()
            return Num(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text == "sqrt":
                self.expect("(")
                node = Sqrt(self.expr())
                self.expect(")")
                return node
            if tok.text in ENTITY_NAMES:
                return Entity(tok.text)
            if tok.text in self.params:
                return Num(self.params[tok.text])
            raise self.error(
                f"unknown entity {tok.text!r} (not a confusion-matrix entity "
                "or declared parameter)",
                tok,
            )
        raise self.error(f"expected an expression, found {tok.text!r}")


def parse_metric(text: str) -> MetricExpr:
    """Parse a metric definition into a :class:`MetricExpr`.

    Raises :class:`MetricSyntaxError` on malformed input.
    """
    return _Parser(text).metric()


# --- discrete evaluation -----------------------------------------------------


def special_value(pos: bool, neg: bool, k: int, l: int, n: int) -> float | None:
    """Special-case override value at (k, l), or None when no flag applies.

    With the positive flag, the all-zeros prediction against the all-zeros
    label scores 1; either being all-zeros against anything else scores 0.
    The negative flag mirrors this at all-ones.  Flags take precedence over
    the formula, which is what makes otherwise-undefined cells usable.
    """
    if pos and (k == 0 or l == 0):
        return 1.0 if (k == 0 and l == 0) else 0.0
    if neg and (k == n or l == n):
        return 1.0 if (k == n and l == n) else 0.0
    return None


def evaluate_cell(
    body: Expr, pos: bool, neg: bool, t: int, k: int, l: int, n: int
) -> float:
    """Metric value at TP=t with k predicted positives and l actual positives."""
    v = special_value(pos, neg, k, l, n)
    if v is not None:
        return v
    counts = ConfusionCounts.from_cell(t, k, l, n)
    try:
        return body.eval(counts.as_dict())
    except ZeroDivisionError:
        raise MetricValueError(
            "division by zero not covered by a special-case flag", (k, l)
        ) from None
    except ValueError as exc:
        raise MetricValueError(str(exc), (k, l)) from None


def evaluate_discrete(expr: MetricExpr, yhat, y) -> float:
    """Evaluate the metric on one (prediction, label) pair of binary vectors."""
    counts = ConfusionCounts.from_vectors(yhat, y)
    if counts.all < 1:
        raise ValueError("empty vectors")
    return evaluate_cell(
        expr.body,
        expr.pos_special,
        expr.neg_special,
        counts.tp,
        counts.pp,
        counts.ap,
        counts.all,
    )


def evaluate_constraint_discrete(c: MetricConstraint, yhat, y) -> float:
    """Evaluate a constraint's metric expression on one (prediction, label) pair."""
    counts = ConfusionCounts.from_vectors(yhat, y)
    return evaluate_cell(
        c.body, c.pos_special, c.neg_special, counts.tp, counts.pp, counts.ap, counts.all
    )
