"""Reference interpreter: executes a workflow over concrete input tables.

This is the deterministic execution engine behind the testing oracle. Opaque
operators (Udf, Classifier, DictionaryMatcher) are not executable. Under Set
semantics every operator output is deduplicated in encounter order; under
OrderedBag, Sort defines order and all other operators preserve encounter
order.
"""

from __future__ import annotations

from .model import OpKind, Operator, Schema, Semantics, Workflow, _topo_sort
from .predicates import PredError, Value, eval_pred
from .tables import Row, Table


class NotExecutableError(Exception):
    pass


class ExecutionError(Exception):
    pass


def _filter(t: Table, op: Operator) -> Table:
    pred = op.props.predicate
    cols = t.columns
    keep = tuple(r for r in t.rows if eval_pred(pred, dict(zip(cols, r))) is True)
    return Table(t.schema, keep)


def _project(t: Table, op: Operator) -> Table:
    if op.props.columns is None:
        return t
    idx = [t.columns.index(c) for c in op.props.columns]
    schema = tuple((t.schema[i]) for i in idx)
    return Table(schema, tuple(tuple(r[i] for i in idx) for r in t.rows))


def _join_rows(left: Table, right: Table, keys, outer: bool):
    li = [left.columns.index(lk) for lk, _ in keys]
    ri = [right.columns.index(rk) for _, rk in keys]
    drop = set(ri)
    keep_r = [i for i in range(len(right.columns)) if i not in drop]
    for lrow in left.rows:
        lkey = tuple(lrow[i] for i in li)
        matched = False
        if all(v is not None for v in lkey):
            for rrow in right.rows:
                if tuple(rrow[i] for i in ri) == lkey:
                    matched = True
                    yield lrow + tuple(rrow[i] for i in keep_r)
        if outer and not matched:
            yield lrow + tuple(None for _ in keep_r)


def _join(left: Table, right: Table, op: Operator, schema: Schema) -> Table:
    outer = op.kind is OpKind.LEFT_OUTER_JOIN
    rows = tuple(_join_rows(left, right, op.props.join_keys, outer))
    return Table(schema, rows)


def _aggregate(t: Table, op: Operator, schema: Schema) -> Table:
    keys = op.props.group_keys
    ki = [t.columns.index(k) for k in keys]
    groups: dict[tuple, list[Row]] = {}
    order: list[tuple] = []
    for r in t.rows:
        g = tuple(r[i] for i in ki)
        if g not in groups:
            groups[g] = []
            order.append(g)
        groups[g].append(r)
    out = []
    for g in order:
        vals = list(g)
        for spec in op.props.aggs:
            members = groups[g]
            if spec.func == "count" and spec.column is None:
                vals.append(len(members))
                continue
            ci = t.columns.index(spec.column)
            xs = [m[ci] for m in members if m[ci] is not None]
            if spec.func == "count":
                vals.append(len(xs))
            elif not xs:
                vals.append(None)
            elif spec.func == "sum":
                vals.append(sum(xs))
            elif spec.func == "min":
                vals.append(min(xs))
            elif spec.func == "max":
                vals.append(max(xs))
            elif spec.func == "avg":
                vals.append(sum(xs) / len(xs))
            else:
                raise ExecutionError(f"unknown aggregate {spec.func!r}")
        out.append(tuple(vals))
    return Table(schema, tuple(out))


def _sort(t: Table, op: Operator) -> Table:
    rows = list(t.rows)
    for colname, asc in reversed(op.props.sort_keys):
        i = t.columns.index(colname)
        rows.sort(key=lambda r: (r[i] is not None, r[i] if r[i] is not None else 0), reverse=not asc)
    return Table(t.schema, tuple(rows))


def _unnest(t: Table, op: Operator) -> Table:
    i = t.columns.index(op.props.unnest_column)
    out = []
    for r in t.rows:
        v = r[i]
        if v is None:
            out.append(r)
        elif isinstance(v, str):
            for part in v.split(","):
                out.append(r[:i] + (part,) + r[i + 1:])
        else:
            raise ExecutionError("type error: Unnest expects a string column")
    return Table(t.schema, tuple(out))


def evaluate(wf: Workflow, inputs: dict[str, Table], *,
             reverse_ties: bool = False,
             replicate_preserves_order: bool = True) -> dict[str, Table]:
    """Run ``wf`` over one table per Source; returns the table at each Sink.

    ``reverse_ties`` flips topological tie-breaking; the result must not change
    (determinism check). ``replicate_preserves_order`` is the ordering policy
    for Replicate fan-out under OrderedBag semantics.
    """
    dedupe = wf.semantics is Semantics.SET
    port_out: dict[tuple[str, int], Table] = {}
    order = _topo_sort(wf.op_ids, wf.links, reverse_ties=reverse_ties)
    if order is None:
        raise ExecutionError("cyclic workflow")
    results: dict[str, Table] = {}

    for op_id in order:
        op = wf.ops_by_id[op_id]
        if op.opaque:
            raise NotExecutableError(f"not executable: opaque operator {op_id}")
        ins: list[Table] = []
        for port in range(op.n_in):
            link = next((l for l in wf.in_links[op_id] if l.dst_port == port), None)
            if link is None:
                raise ExecutionError(f"operator {op_id} in-port {port} unconnected")
            ins.append(port_out[(link.src, link.src_port)])

        if op.kind is OpKind.SOURCE:
            if op_id not in inputs:
                raise ExecutionError(f"missing input table for source {op_id}")
            t = inputs[op_id]
            if tuple(t.schema) != tuple(op.props.schema):
                raise ExecutionError(f"type error: input schema mismatch at {op_id}")
        elif op.kind is OpKind.SINK:
            results[op_id] = ins[0]
            continue
        elif op.kind is OpKind.FILTER:
            try:
                t = _filter(ins[0], op)
            except PredError as e:
                raise ExecutionError(str(e)) from e
        elif op.kind is OpKind.PROJECT:
            t = _project(ins[0], op)
        elif op.kind in (OpKind.JOIN, OpKind.LEFT_OUTER_JOIN):
            schema = wf.schemas[(op_id, 0)]
            if schema is None:
                raise ExecutionError(f"type error: join schema unresolved at {op_id}")
            t = _join(ins[0], ins[1], op, schema)
        elif op.kind is OpKind.AGGREGATE:
            schema = wf.schemas[(op_id, 0)]
            if schema is None:
                raise ExecutionError(f"type error: aggregate schema unresolved at {op_id}")
            t = _aggregate(ins[0], op, schema)
        elif op.kind is OpKind.UNION:
            if ins[0].schema != ins[1].schema:
                raise ExecutionError(f"type error: union schema mismatch at {op_id}")
            t = Table(ins[0].schema, ins[0].rows + ins[1].rows)
        elif op.kind is OpKind.SORT:
            t = _sort(ins[0], op)
        elif op.kind is OpKind.REPLICATE:
            t = ins[0]
            if not replicate_preserves_order and wf.semantics is Semantics.ORDERED_BAG:
                t = Table(t.schema, tuple(reversed(t.rows)))
        elif op.kind is OpKind.UNNEST:
            t = _unnest(ins[0], op)
        else:  # pragma: no cover
            raise ExecutionError(f"unhandled kind {op.kind}")

        if dedupe:
            t = t.distinct()
        for port in range(op.n_out):
            port_out[(op_id, port)] = t

    return results
