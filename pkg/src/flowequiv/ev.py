"""Pluggable equivalence verifiers and the built-in canonicalizing verifier.

A verifier (EV) answers True/False/Unknown for a completed window pair and
declares a restriction predicate describing which windows it can decide.
The built-in canonical verifier covers select/project/join, left outer join
and aggregation under set semantics: both sides are rewritten into a normal
form (filters fused into CNF over origin-qualified columns, inner joins
flattened, pass-through projections elided, group-key filters pushed below
aggregations) and compared structurally. It never claims inequivalence.
"""

from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

from .model import OpKind, Operator, OPAQUE_KINDS, Schema, Semantics, Workflow
from .predicates import (Cmp, Col, Const, Arith, Expr, Pred, is_linear, linear_form,
                         to_cnf, CnfTooLarge, _NEGATE)
from .windows import (PairingError, VersionPair, Window, WindowContext,
                      complete_window)


class Truth(enum.Enum):
    TRUE = "True"
    FALSE = "False"
    UNKNOWN = "Unknown"


@dataclass(frozen=True)
class Verdict:
    truth: Truth
    reason: str = ""
    witness: Optional[object] = None

    @property
    def is_true(self) -> bool:
        return self.truth is Truth.TRUE

    @property
    def is_false(self) -> bool:
        return self.truth is Truth.FALSE


TRUE = Verdict(Truth.TRUE)
UNKNOWN = Verdict(Truth.UNKNOWN)


@dataclass(frozen=True)
class RuleViolation:
    rule: str
    message: str
    repairable: bool  # can growing the window ever restore validity?


@dataclass(frozen=True)
class RestrictionResult:
    ok: bool
    violations: tuple[RuleViolation, ...] = ()

    @property
    def dead(self) -> bool:
        """No super-window can become valid (some violation is unrepairable)."""
        return any(not v.repairable for v in self.violations)


@dataclass(frozen=True)
class EvDescriptor:
    """A black-box equivalence verifier plus the metadata the search needs."""

    name: str
    semantics: frozenset[Semantics]
    restriction_monotonic: bool
    can_prove_inequivalence: bool
    relaxed_restrictions: bool
    check: Callable[[Window, VersionPair], RestrictionResult]
    verify_ctx: Callable[[WindowContext, VersionPair], Verdict]

    def is_valid_window(self, w: Window, pair: VersionPair) -> RestrictionResult:
        if pair.p.semantics is not pair.q.semantics or pair.p.semantics not in self.semantics:
            return RestrictionResult(False, (RuleViolation(
                "R1", f"{self.name} does not support {pair.p.semantics.value} semantics", False),))
        return self.check(w, pair)

    def verify_window(self, w: Window, pair: VersionPair) -> Verdict:
        try:
            ctx = complete_window(pair, w)
        except PairingError as e:
            return Verdict(Truth.UNKNOWN, f"boundary pairing failed: {e}")
        return self.verify_ctx(ctx, pair)


# ---------------------------------------------------------------------------
# Restriction profile of the canonical verifier

_WHITELIST = frozenset({OpKind.SOURCE, OpKind.SINK, OpKind.FILTER, OpKind.PROJECT,
                        OpKind.JOIN, OpKind.LEFT_OUTER_JOIN, OpKind.AGGREGATE})
_SPJ = frozenset({OpKind.SOURCE, OpKind.FILTER, OpKind.PROJECT, OpKind.JOIN})
CARDINALITY_SENSITIVE = frozenset({"count", "sum", "avg"})


def _side_ops(wf: Workflow, ops: frozenset[str]) -> list[Operator]:
    return [wf.ops_by_id[i] for i in sorted(ops)]


def _internal_ancestors(wf: Workflow, ops: frozenset[str], start: str) -> set[str]:
    seen: set[str] = set()
    stack = [start]
    while stack:
        cur = stack.pop()
        for l in wf.in_links.get(cur, ()):
            if l.src in ops and l.src not in seen:
                seen.add(l.src)
                stack.append(l.src)
    return seen


def spja_profile_check(w: Window, pair: VersionPair) -> RestrictionResult:
    """R2..R6 of the canonical verifier (R1, table semantics, is checked upstream)."""
    violations: list[RuleViolation] = []
    counts = {"loj": [0, 0], "agg": [0, 0]}
    for idx, (wf, ops) in enumerate(((pair.p, w.p_ops), (pair.q, w.q_ops))):
        for op in _side_ops(wf, ops):
            if op.kind not in _WHITELIST:
                violations.append(RuleViolation(
                    "R2", f"operator {op.id} of kind {op.kind.value} unsupported", False))
                continue
            if op.kind is OpKind.FILTER and not is_linear(op.props.predicate):
                violations.append(RuleViolation(
                    "R3", f"non-linear predicate at {op.id}", False))
            if op.kind is OpKind.LEFT_OUTER_JOIN:
                counts["loj"][idx] += 1
            if op.kind is OpKind.AGGREGATE:
                counts["agg"][idx] += 1
                sensitive = any(a.func in CARDINALITY_SENSITIVE for a in op.props.aggs or ())
                if sensitive:
                    for anc in _internal_ancestors(wf, ops, op.id):
                        if wf.ops_by_id[anc].kind not in _SPJ:
                            violations.append(RuleViolation(
                                "R6", f"cardinality-sensitive aggregate {op.id} fed by "
                                      f"non-SPJ operator {anc}", False))
    if counts["loj"][0] != counts["loj"][1]:
        violations.append(RuleViolation(
            "R4", f"outer join counts differ: {counts['loj'][0]} vs {counts['loj'][1]}", True))
    if counts["agg"][0] != counts["agg"][1]:
        violations.append(RuleViolation(
            "R5", f"aggregate counts differ: {counts['agg'][0]} vs {counts['agg'][1]}", True))
    return RestrictionResult(not violations, tuple(violations))


def no_opaque_check(w: Window, pair: VersionPair) -> RestrictionResult:
    violations = []
    for wf, ops in ((pair.p, w.p_ops), (pair.q, w.q_ops)):
        for op in _side_ops(wf, ops):
            if op.kind in OPAQUE_KINDS:
                violations.append(RuleViolation(
                    "opaque", f"operator {op.id} has opaque semantics", False))
    return RestrictionResult(not violations, tuple(violations))


# ---------------------------------------------------------------------------
# Canonical form

Origin = tuple[str, str]  # (root, column); roots are leaf symbols or aggregate digests
ColumnSig = tuple[str, str, Origin]  # (visible name, type, origin)


class Unsupported(Exception):
    pass


@dataclass(frozen=True)
class LinLit:
    op: str
    coeffs: tuple[tuple[Origin, Fraction], ...]
    const: Fraction

    def rename(self, roots: dict[str, str]) -> "LinLit":
        if not roots:
            return self
        return LinLit(self.op, tuple(((roots.get(r, r), c), v) for (r, c), v in self.coeffs),
                      self.const)

    def origins(self) -> frozenset[Origin]:
        return frozenset(o for o, _ in self.coeffs)

    def ser(self) -> str:
        body = "+".join(f"{v}*{r}.{c}" for (r, c), v in self.coeffs)
        return f"lin[{body}{self.op}{self.const}]"


@dataclass(frozen=True)
class RawLit:
    op: str
    left: Expr  # Col names hold "root\x00column" encoded origins
    right: Expr

    def rename(self, roots: dict[str, str]) -> "RawLit":
        if not roots:
            return self

        def walk(e: Expr) -> Expr:
            if isinstance(e, Col):
                r, c = e.name.split("\x00", 1)
                return Col(roots.get(r, r) + "\x00" + c)
            if isinstance(e, Arith):
                return Arith(e.op, walk(e.left), walk(e.right))
            return e

        return RawLit(self.op, walk(self.left), walk(self.right))

    def origins(self) -> frozenset[Origin]:
        out: set[Origin] = set()

        def walk(e: Expr):
            if isinstance(e, Col):
                r, c = e.name.split("\x00", 1)
                out.add((r, c))
            elif isinstance(e, Arith):
                walk(e.left)
                walk(e.right)

        walk(self.left)
        walk(self.right)
        return frozenset(out)

    def ser(self) -> str:
        def walk(e: Expr) -> str:
            if isinstance(e, Col):
                r, c = e.name.split("\x00", 1)
                return f"{r}.{c}"
            if isinstance(e, Const):
                return repr(e.value)
            return f"({walk(e.left)}{e.op}{walk(e.right)})"

        return f"raw[{walk(self.left)}{self.op}{walk(self.right)}]"


Lit = Union[LinLit, RawLit]
Clause = frozenset[Lit]


def make_literal(c: Cmp, scope: dict[str, Origin]) -> Lit:
    def subst(e: Expr) -> Expr:
        if isinstance(e, Col):
            if e.name not in scope:
                raise Unsupported(f"column {e.name!r} out of scope")
            r, cc = scope[e.name]
            return Col(r + "\x00" + cc)
        if isinstance(e, Arith):
            return Arith(e.op, subst(e.left), subst(e.right))
        return e

    left, right = subst(c.left), subst(c.right)
    lf, rf = linear_form(left), linear_form(right)
    if lf is None or rf is None:
        return RawLit(c.op, left, right)
    coeffs: dict[str, Fraction] = dict(lf[0])
    for name, v in rf[0].items():
        coeffs[name] = coeffs.get(name, Fraction(0)) - v
    konst = rf[1] - lf[1]
    coeffs = {n: v for n, v in coeffs.items() if v != 0}
    op = c.op
    if op in (">", ">="):
        op = {"<": ">", ">": "<", "<=": ">=", ">=": "<="}[op]
        coeffs = {n: -v for n, v in coeffs.items()}
        konst = -konst
    if op in ("==", "!=") and coeffs:
        lead = min(coeffs)
        if coeffs[lead] < 0:
            coeffs = {n: -v for n, v in coeffs.items()}
            konst = -konst
    pairs = tuple(sorted(((tuple(n.split("\x00", 1)), v) for n, v in coeffs.items()),
                         key=lambda kv: kv[0]))
    return LinLit(op, pairs, konst)


def eq_literal(a: Origin, b: Origin) -> Lit:
    coeffs = sorted([(a, Fraction(1)), (b, Fraction(-1))])
    first = coeffs[0]
    if first[1] < 0:
        coeffs = [(o, -v) for o, v in coeffs]
    return LinLit("==", tuple(coeffs), Fraction(0))


def pred_clauses(p: Pred, scope: dict[str, Origin]) -> frozenset[Clause]:
    try:
        cnf = to_cnf(p)
    except CnfTooLarge as e:
        raise Unsupported(str(e)) from e
    return frozenset(frozenset(make_literal(c, scope) for c in clause) for clause in cnf)


@dataclass(frozen=True)
class Leaf:
    symbol: str
    columns: tuple[ColumnSig, ...]


@dataclass(frozen=True)
class AggNode:
    child: "Block"
    keys: tuple[tuple[str, Origin], ...]
    aggs: tuple[tuple[str, Optional[Origin], str], ...]
    columns: tuple[ColumnSig, ...]


@dataclass(frozen=True)
class LojNode:
    left: "Block"
    right: "Block"
    keys: tuple[Lit, ...]
    columns: tuple[ColumnSig, ...]


Node = Union[Leaf, AggNode, LojNode]


@dataclass(frozen=True)
class Block:
    children: tuple[Node, ...]
    preds: frozenset[Clause]
    columns: tuple[ColumnSig, ...]


def _ser_columns(cols: tuple[ColumnSig, ...]) -> str:
    return ";".join(f"{n}:{t}:{r}.{c}" for n, t, (r, c) in cols)


def serialize(node: Union[Node, Block]) -> str:
    if isinstance(node, Leaf):
        return f"leaf({node.symbol}|{_ser_columns(node.columns)})"
    if isinstance(node, Block):
        kids = ",".join(sorted(serialize(k) for k in node.children))
        clauses = sorted("|".join(sorted(l.ser() for l in cl)) for cl in node.preds)
        return f"block([{kids}]&[{';'.join(clauses)}]->{_ser_columns(node.columns)})"
    if isinstance(node, AggNode):
        keys = ",".join(f"{n}={r}.{c}" for n, (r, c) in node.keys)
        aggs = ",".join(f"{f}({'' if o is None else f'{o[0]}.{o[1]}'})->{out}"
                        for f, o, out in node.aggs)
        return f"agg({serialize(node.child)}|{keys}|{aggs}->{_ser_columns(node.columns)})"
    if isinstance(node, LojNode):
        keys = ",".join(sorted(l.ser() for l in node.keys))
        return (f"loj({serialize(node.left)}|{serialize(node.right)}|{keys}"
                f"->{_ser_columns(node.columns)})")
    raise Unsupported(f"cannot serialize {node!r}")  # pragma: no cover


def _digest(s: str) -> str:
    return "a" + hashlib.sha1(s.encode()).hexdigest()[:16]


def agg_digest(node: AggNode) -> str:
    # Digest over child/keys/aggs only: output-column origins embed this
    # digest, so including them would be circular.
    keys = ",".join(f"{n}={r}.{c}" for n, (r, c) in node.keys)
    aggs = ",".join(f"{f}({'' if o is None else f'{o[0]}.{o[1]}'})->{out}"
                    for f, o, out in node.aggs)
    return _digest(f"agg({serialize(node.child)}|{keys}|{aggs})")


def as_block(node: Union[Node, Block]) -> Block:
    if isinstance(node, Block):
        return node
    return Block((node,), frozenset(), node.columns)


def _scope(cols: tuple[ColumnSig, ...]) -> dict[str, Origin]:
    return {n: o for n, _, o in cols}


def _rename_cols(cols: tuple[ColumnSig, ...], roots: dict[str, str]) -> tuple[ColumnSig, ...]:
    return tuple((n, t, (roots.get(r, r), c)) for n, t, (r, c) in cols)


def _rename_clauses(preds: frozenset[Clause], roots: dict[str, str]) -> frozenset[Clause]:
    if not roots:
        return preds
    return frozenset(frozenset(l.rename(roots) for l in cl) for cl in preds)


def normalize(node: Union[Node, Block]) -> tuple[Union[Node, Block], dict[str, str]]:
    """Bottom-up normal form; returns the rewritten node plus any origin-root
    renames caused by pushing group-key filters below aggregations."""
    if isinstance(node, Leaf):
        return node, {}
    if isinstance(node, LojNode):
        left, rl = normalize(node.left)
        right, rr = normalize(node.right)
        renames = {**rl, **rr}
        return LojNode(left, right,
                       tuple(l.rename(renames) for l in node.keys),
                       _rename_cols(node.columns, renames)), renames
    if isinstance(node, AggNode):
        old = agg_digest(node)
        child, renames = normalize(node.child)
        keys = tuple((n, (renames.get(r, r), c)) for n, (r, c) in node.keys)
        aggs = tuple((f, None if o is None else (renames.get(o[0], o[0]), o[1]), out)
                     for f, o, out in node.aggs)
        new = agg_digest(AggNode(as_block(child), keys, aggs, ()))
        if new != old:
            renames = {**renames, old: new}
        return AggNode(as_block(child), keys, aggs, _rename_cols(node.columns, renames)), renames

    assert isinstance(node, Block)
    renames: dict[str, str] = {}
    children: list[Node] = []
    for ch in node.children:
        nch, r = normalize(ch)
        renames.update(r)
        if isinstance(nch, Block):
            raise Unsupported("nested bare block")  # pragma: no cover
        children.append(nch)
    preds = _rename_clauses(node.preds, renames)
    cols = _rename_cols(node.columns, renames)

    # Push group-key-only clauses below aggregate children.
    changed = True
    while changed:
        changed = False
        for i, ch in enumerate(children):
            if not isinstance(ch, AggNode):
                continue
            key_origins = {o for _, o in ch.keys}
            for clause in sorted(preds, key=lambda cl: sorted(l.ser() for l in cl)):
                origins = frozenset().union(*(l.origins() for l in clause)) if clause else frozenset()
                if not origins or not origins <= key_origins:
                    continue
                old = agg_digest(ch)
                sunk = AggNode(Block(ch.child.children, ch.child.preds | {clause},
                                     ch.child.columns),
                               ch.keys, ch.aggs, ch.columns)
                sunk, extra = normalize(sunk)
                new = agg_digest(sunk)
                rename = {**extra, old: new}
                sunk = AggNode(sunk.child, sunk.keys, sunk.aggs,
                               _rename_cols(sunk.columns, rename))
                renames.update(rename)
                preds = _rename_clauses(preds - {clause}, rename)
                cols = _rename_cols(cols, rename)
                children = [c if j != i else sunk for j, c in enumerate(children)]
                changed = True
                break
            if changed:
                break

    children.sort(key=serialize)
    if len(children) == 1 and not preds and cols == children[0].columns:
        # Pass-through wrapper (elided projection or fully sunk filter).
        return children[0], renames
    return Block(tuple(children), preds, cols), renames


# ---------------------------------------------------------------------------
# DAG -> canonical form


def _columns_from_schema(schema: Schema, origin_root: str) -> tuple[ColumnSig, ...]:
    return tuple((n, t, (origin_root, n)) for n, t in schema)


def canonicalize_side(wf: Workflow, symbols: dict[str, str]) -> dict[str, Union[Node, Block]]:
    """Canonical form per sink of one completed window side.

    ``symbols`` names every Source operator; paired boundary sources on the
    two sides share a symbol. Raises Unsupported outside the SPJ-A fragment.
    """
    memo: dict[tuple[str, int], Union[Node, Block]] = {}

    def run(op_id: str, port: int) -> Union[Node, Block]:
        key = (op_id, port)
        if key in memo:
            return memo[key]
        op = wf.ops_by_id[op_id]
        result = build(op)
        memo[key] = result
        return result

    def input_of(op: Operator, port: int) -> Union[Node, Block]:
        link = next(l for l in wf.in_links[op.id] if l.dst_port == port)
        return run(link.src, link.src_port)

    def build(op: Operator) -> Union[Node, Block]:
        if op.kind is OpKind.SOURCE:
            sym = symbols.get(op.id)
            if sym is None:
                raise Unsupported(f"source {op.id} has no symbol")
            if op.props.schema is None:
                raise Unsupported(f"source {op.id} has no schema")
            return Leaf(sym, _columns_from_schema(op.props.schema, sym))
        if op.kind is OpKind.FILTER:
            block = as_block(input_of(op, 0))
            clauses = pred_clauses(op.props.predicate, _scope(block.columns))
            return Block(block.children, block.preds | clauses, block.columns)
        if op.kind is OpKind.PROJECT:
            block = as_block(input_of(op, 0))
            if op.props.columns is None:
                return block
            scope = {n: (t, o) for n, t, o in block.columns}
            cols = tuple((n, *scope[n]) for n in op.props.columns)
            return Block(block.children, block.preds, cols)
        if op.kind is OpKind.JOIN:
            lb, rb = as_block(input_of(op, 0)), as_block(input_of(op, 1))
            ls, rs = _scope(lb.columns), _scope(rb.columns)
            keys = [eq_literal(ls[lk], rs[rk]) for lk, rk in op.props.join_keys]
            right_keys = {rk for _, rk in op.props.join_keys}
            cols = lb.columns + tuple(c for c in rb.columns if c[0] not in right_keys)
            return Block(lb.children + rb.children,
                         lb.preds | rb.preds | {frozenset({k}) for k in keys}, cols)
        if op.kind is OpKind.LEFT_OUTER_JOIN:
            lb, rb = as_block(input_of(op, 0)), as_block(input_of(op, 1))
            ls, rs = _scope(lb.columns), _scope(rb.columns)
            keys = tuple(sorted((eq_literal(ls[lk], rs[rk]) for lk, rk in op.props.join_keys),
                                key=lambda l: l.ser()))
            right_keys = {rk for _, rk in op.props.join_keys}
            cols = lb.columns + tuple(c for c in rb.columns if c[0] not in right_keys)
            return LojNode(lb, rb, keys, cols)
        if op.kind is OpKind.AGGREGATE:
            block = as_block(input_of(op, 0))
            scope = {n: (t, o) for n, t, o in block.columns}
            keys = tuple((k, scope[k][1]) for k in op.props.group_keys)
            aggs = tuple((a.func, None if a.column is None else scope[a.column][1], a.out)
                         for a in op.props.aggs)
            root = agg_digest(AggNode(block, keys, aggs, ()))
            cols = [(k, scope[k][0], scope[k][1]) for k in op.props.group_keys]
            for a in op.props.aggs:
                if a.func == "count":
                    t = "int"
                elif a.func == "avg":
                    t = "float"
                else:
                    t = scope[a.column][0]
                cols.append((a.out, t, (root, a.out)))
            return AggNode(block, keys, aggs, tuple(cols))
        raise Unsupported(f"operator kind {op.kind.value} has no canonical form")

    out: dict[str, Union[Node, Block]] = {}
    for sink_id in wf.sinks:
        link = next(l for l in wf.in_links[sink_id] if l.dst_port == 0)
        out[sink_id] = run(link.src, link.src_port)
    return out


def canonical_sink_keys(wf: Workflow, symbols: dict[str, str]) -> dict[str, str]:
    forms = canonicalize_side(wf, symbols)
    out = {}
    for sink_id, node in forms.items():
        normal, _ = normalize(node)
        out[sink_id] = serialize(normal)
    return out


def canonical_verify(ctx: WindowContext, pair: VersionPair) -> Verdict:
    """True when every paired sink has the same canonical form, else Unknown."""
    q_symbols = {q: ctx.symbols[p] for p, q in ctx.source_pairs}
    try:
        p_keys = canonical_sink_keys(ctx.p_side, dict(ctx.symbols))
        q_keys = canonical_sink_keys(ctx.q_side, q_symbols)
    except Unsupported as e:
        return Verdict(Truth.UNKNOWN, f"outside canonical fragment: {e}")
    for p_sink, q_sink in ctx.sink_pairs:
        if p_keys.get(p_sink) != q_keys.get(q_sink):
            return Verdict(Truth.UNKNOWN, f"canonical forms differ at {p_sink}/{q_sink}")
    return Verdict(Truth.TRUE, "canonical forms equal")


def canonical_ev(*, relaxed: bool = False) -> EvDescriptor:
    """The built-in canonicalizing verifier.

    Declared restriction-non-monotonic: its equal-count rules (outer joins,
    aggregates) can be restored by growing a window. With ``relaxed=True`` the
    restriction only rejects opaque operators and verification is attempted on
    anything, falling back to Unknown outside the supported fragment.
    """
    return EvDescriptor(
        name="canonical-relaxed" if relaxed else "canonical",
        semantics=frozenset({Semantics.SET}),
        restriction_monotonic=False,
        can_prove_inequivalence=False,
        relaxed_restrictions=relaxed,
        check=no_opaque_check if relaxed else spja_profile_check,
        verify_ctx=canonical_verify,
    )


# ---------------------------------------------------------------------------
# Structural identity (used by the oracle for its True verdicts)


def structural_sink_keys(wf: Workflow, symbols: dict[str, str]) -> dict[str, str]:
    memo: dict[tuple[str, int], str] = {}

    def run(op_id: str, port: int) -> str:
        key = (op_id, port)
        if key not in memo:
            op = wf.ops_by_id[op_id]
            if op.kind is OpKind.SOURCE:
                memo[key] = f"src({symbols.get(op.id, op.id)})"
            else:
                ins = []
                for p in range(op.n_in):
                    link = next(l for l in wf.in_links[op_id] if l.dst_port == p)
                    ins.append(run(link.src, link.src_port))
                memo[key] = f"{op.kind.value}{_props_key(op)}[{','.join(ins)}]"
        return memo[key]

    out = {}
    for sink_id in wf.sinks:
        link = next(l for l in wf.in_links[sink_id] if l.dst_port == 0)
        out[sink_id] = run(link.src, link.src_port)
    return out


def _props_key(op: Operator) -> str:
    p = op.props
    parts = []
    if p.predicate is not None:
        parts.append(f"pred={p.predicate!r}")
    for name in ("schema", "columns", "join_keys", "group_keys", "aggs", "sort_keys",
                 "unnest_column", "token"):
        v = getattr(p, name)
        if v is not None:
            parts.append(f"{name}={v!r}")
    return "{" + ";".join(parts) + "}"


def structurally_identical(ctx: WindowContext) -> bool:
    q_symbols = {q: ctx.symbols[p] for p, q in ctx.source_pairs}
    pk = structural_sink_keys(ctx.p_side, dict(ctx.symbols))
    qk = structural_sink_keys(ctx.q_side, q_symbols)
    return all(pk.get(ps) == qk.get(qs) for ps, qs in ctx.sink_pairs)
