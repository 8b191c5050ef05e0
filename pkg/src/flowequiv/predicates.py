"""Boolean predicate trees over linear-ish arithmetic, with three-valued evaluation.

Predicates combine comparisons of arithmetic expressions (columns, constants,
+, -, scalar multiplication) with AND/OR/NOT. Evaluation follows the SQL
convention: any comparison involving null is unknown, and a Filter keeps a row
only when its predicate is definitely true.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

Value = Union[int, float, str, bool, None]


class PredError(Exception):
    pass


@dataclass(frozen=True)
class Col:
    name: str


@dataclass(frozen=True)
class Const:
    value: Value


@dataclass(frozen=True)
class Arith:
    op: str  # + - *
    left: "Expr"
    right: "Expr"


Expr = Union[Col, Const, Arith]


@dataclass(frozen=True)
class Cmp:
    op: str  # == != < <= > >=
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And:
    parts: tuple["Pred", ...]


@dataclass(frozen=True)
class Or:
    parts: tuple["Pred", ...]


@dataclass(frozen=True)
class Not:
    inner: "Pred"


Pred = Union[Cmp, And, Or, Not]

_CMP_OPS = ("==", "!=", "<", "<=", ">", ">=")
_NEGATE = {"==": "!=", "!=": "==", "<": ">=", "<=": ">", ">": "<=", ">=": "<"}
_FLIP = {"<": ">", "<=": ">=", ">": "<", ">=": "<=", "==": "==", "!=": "!="}


def col(name: str) -> Col:
    return Col(name)


def const(v: Value) -> Const:
    return Const(v)


def _expr(x) -> Expr:
    if isinstance(x, (Col, Const, Arith)):
        return x
    return Const(x)


def add(a, b) -> Arith:
    return Arith("+", _expr(a), _expr(b))


def sub(a, b) -> Arith:
    return Arith("-", _expr(a), _expr(b))


def mul(a, b) -> Arith:
    return Arith("*", _expr(a), _expr(b))


def cmp(op: str, a, b) -> Cmp:
    if op not in _CMP_OPS:
        raise PredError(f"unknown comparison {op!r}")
    return Cmp(op, _expr(a), _expr(b))


def eq(a, b) -> Cmp:
    return cmp("==", a, b)


def lt(a, b) -> Cmp:
    return cmp("<", a, b)


def gt(a, b) -> Cmp:
    return cmp(">", a, b)


def and_(*parts: Pred) -> Pred:
    return parts[0] if len(parts) == 1 else And(tuple(parts))


def or_(*parts: Pred) -> Pred:
    return parts[0] if len(parts) == 1 else Or(tuple(parts))


def not_(p: Pred) -> Not:
    return Not(p)


def expr_columns(e: Expr) -> set[str]:
    if isinstance(e, Col):
        return {e.name}
    if isinstance(e, Const):
        return set()
    return expr_columns(e.left) | expr_columns(e.right)


def pred_columns(p: Pred) -> set[str]:
    if isinstance(p, Cmp):
        return expr_columns(p.left) | expr_columns(p.right)
    if isinstance(p, Not):
        return pred_columns(p.inner)
    out: set[str] = set()
    for part in p.parts:
        out |= pred_columns(part)
    return out


def pred_constants(p: Pred) -> set[Value]:
    """Constants appearing anywhere in the predicate (used to seed oracle domains)."""

    def walk_expr(e: Expr, acc: set[Value]):
        if isinstance(e, Const):
            acc.add(e.value)
        elif isinstance(e, Arith):
            walk_expr(e.left, acc)
            walk_expr(e.right, acc)

    acc: set[Value] = set()

    def walk(q: Pred):
        if isinstance(q, Cmp):
            walk_expr(q.left, acc)
            walk_expr(q.right, acc)
        elif isinstance(q, Not):
            walk(q.inner)
        else:
            for part in q.parts:
                walk(part)

    walk(p)
    return acc


# Attach a columns() helper where predicate holders expect one.
for _cls in (Cmp, And, Or, Not):
    _cls.columns = lambda self: pred_columns(self)  # type: ignore[attr-defined]


# ---------------------------------------------------------------------------
# Evaluation (three-valued)


def eval_expr(e: Expr, row: dict[str, Value]) -> Value:
    if isinstance(e, Col):
        if e.name not in row:
            raise PredError(f"unknown column {e.name!r}")
        return row[e.name]
    if isinstance(e, Const):
        return e.value
    a = eval_expr(e.left, row)
    b = eval_expr(e.right, row)
    if a is None or b is None:
        return None
    if not isinstance(a, (int, float)) or not isinstance(b, (int, float)) \
            or isinstance(a, bool) or isinstance(b, bool):
        raise PredError(f"type error: arithmetic on {type(a).__name__}/{type(b).__name__}")
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    raise PredError(f"unknown arithmetic op {e.op!r}")


def _compare(op: str, a: Value, b: Value) -> Optional[bool]:
    if a is None or b is None:
        return None
    numeric = lambda x: isinstance(x, (int, float)) and not isinstance(x, bool)
    if numeric(a) and numeric(b):
        pass
    elif type(a) is not type(b):
        raise PredError(f"type error: comparing {type(a).__name__} with {type(b).__name__}")
    elif isinstance(a, (str, bool)) and op not in ("==", "!=", "<", "<=", ">", ">="):
        raise PredError(f"unsupported comparison {op} for {type(a).__name__}")
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    if isinstance(a, bool):
        a, b = int(a), int(b)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def eval_pred(p: Pred, row: dict[str, Value]) -> Optional[bool]:
    """True/False/None (unknown) under three-valued logic."""
    if isinstance(p, Cmp):
        return _compare(p.op, eval_expr(p.left, row), eval_expr(p.right, row))
    if isinstance(p, Not):
        v = eval_pred(p.inner, row)
        return None if v is None else (not v)
    if isinstance(p, And):
        saw_unknown = False
        for part in p.parts:
            v = eval_pred(part, row)
            if v is False:
                return False
            if v is None:
                saw_unknown = True
        return None if saw_unknown else True
    if isinstance(p, Or):
        saw_unknown = False
        for part in p.parts:
            v = eval_pred(part, row)
            if v is True:
                return True
            if v is None:
                saw_unknown = True
        return None if saw_unknown else False
    raise PredError(f"not a predicate: {p!r}")


# ---------------------------------------------------------------------------
# Linearity and canonical literals


def linear_form(e: Expr) -> Optional[tuple[dict[str, Fraction], Fraction]]:
    """(coefficients, constant) when the expression is linear over numeric terms, else None."""
    if isinstance(e, Col):
        return {e.name: Fraction(1)}, Fraction(0)
    if isinstance(e, Const):
        if isinstance(e.value, bool) or not isinstance(e.value, (int, float)):
            return None
        return {}, Fraction(e.value).limit_denominator(10**9) if isinstance(e.value, float) else Fraction(e.value)
    left = linear_form(e.left)
    right = linear_form(e.right)
    if left is None or right is None:
        return None
    (lc, lk), (rc, rk) = left, right
    if e.op in ("+", "-"):
        sign = 1 if e.op == "+" else -1
        coefs = dict(lc)
        for name, c in rc.items():
            coefs[name] = coefs.get(name, Fraction(0)) + sign * c
        return {n: c for n, c in coefs.items() if c != 0}, lk + sign * rk
    # product: linear only when one side is constant
    if lc and rc:
        return None
    if lc:
        return {n: c * rk for n, c in lc.items() if c * rk != 0}, lk * rk
    return {n: c * lk for n, c in rc.items() if c * lk != 0}, rk * lk


def expr_is_linear(e: Expr) -> bool:
    if isinstance(e, (Col, Const)):
        return True
    if not expr_is_linear(e.left) or not expr_is_linear(e.right):
        return False
    if e.op == "*":
        return not (expr_columns(e.left) and expr_columns(e.right))
    return True


def is_linear(p: Pred) -> bool:
    """True iff no product of two column terms appears anywhere in the predicate."""
    if isinstance(p, Cmp):
        return expr_is_linear(p.left) and expr_is_linear(p.right)
    if isinstance(p, Not):
        return is_linear(p.inner)
    return all(is_linear(part) for part in p.parts)


def _expr_repr(e: Expr) -> str:
    if isinstance(e, Col):
        return e.name
    if isinstance(e, Const):
        return repr(e.value)
    return f"({_expr_repr(e.left)}{e.op}{_expr_repr(e.right)})"


def canonical_literal(c: Cmp, rename: Optional[dict[str, str]] = None) -> str:
    """Stable string form of one comparison; linear forms get an algebraic normal form.

    ``rename`` maps column names into a namespace (window canonicalization
    qualifies them by their origin) before normalization.
    """

    def rn(e: Expr) -> Expr:
        if rename is None:
            return e
        if isinstance(e, Col):
            return Col(rename.get(e.name, e.name))
        if isinstance(e, Arith):
            return Arith(e.op, rn(e.left), rn(e.right))
        return e

    left, right = rn(c.left), rn(c.right)
    lf, rf = linear_form(left), linear_form(right)
    if lf is not None and rf is not None:
        coefs = dict(lf[0])
        for name, v in rf[0].items():
            coefs[name] = coefs.get(name, Fraction(0)) - v
        konst = rf[1] - lf[1]  # left - right OP 0  <=>  coefs . x OP konst
        coefs = {n: v for n, v in coefs.items() if v != 0}
        op = c.op
        if op in (">", ">="):
            op = _FLIP[op]
            coefs = {n: -v for n, v in coefs.items()}
            konst = -konst
        if op in ("==", "!=") and coefs:
            lead = min(coefs)
            if coefs[lead] < 0:
                coefs = {n: -v for n, v in coefs.items()}
                konst = -konst
        body = "+".join(f"{v}*{n}" for n, v in sorted(coefs.items()))
        return f"lin[{body}{op}{konst}]"
    return f"raw[{_expr_repr(left)}{c.op}{_expr_repr(right)}]"


def _nnf(p: Pred, neg: bool) -> Pred:
    if isinstance(p, Cmp):
        return Cmp(_NEGATE[p.op], p.left, p.right) if neg else p
    if isinstance(p, Not):
        return _nnf(p.inner, not neg)
    parts = tuple(_nnf(x, neg) for x in p.parts)
    if isinstance(p, And):
        return Or(parts) if neg else And(parts)
    return And(parts) if neg else Or(parts)


class CnfTooLarge(PredError):
    pass


def to_cnf(p: Pred, max_clauses: int = 128) -> tuple[tuple[Cmp, ...], ...]:
    """Conjunctive normal form as a tuple of clauses of comparisons.

    Raises CnfTooLarge when distribution would exceed ``max_clauses``.
    """
    q = _nnf(p, False)

    def conv(x: Pred) -> list[list[Cmp]]:
        if isinstance(x, Cmp):
            return [[x]]
        if isinstance(x, And):
            out: list[list[Cmp]] = []
            for part in x.parts:
                out.extend(conv(part))
                if len(out) > max_clauses:
                    raise CnfTooLarge("CNF clause budget exceeded")
            return out
        assert isinstance(x, Or)
        prod: list[list[Cmp]] = [[]]
        for part in x.parts:
            branch = conv(part)
            prod = [a + b for a in prod for b in branch]
            if len(prod) > max_clauses:
                raise CnfTooLarge("CNF clause budget exceeded")
        return prod

    return tuple(tuple(cl) for cl in conv(q))


def cnf_clause_keys(p: Pred, rename: Optional[dict[str, str]] = None) -> frozenset[frozenset[str]]:
    """CNF as a set of clauses of canonical literal strings."""
    return frozenset(frozenset(canonical_literal(c, rename) for c in clause) for clause in to_cnf(p))
