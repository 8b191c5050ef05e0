"""Immutable dataflow DAG model: operators, links, workflows, schemas.

A workflow is a DAG of typed operators connected through ordered ports.
Each operator carries a kind-specific property payload (predicate, projected
columns, join keys, ...). Workflows are immutable after construction and are
safe to share across threads; derived structures (adjacency, schemas) are
cached lazily.
"""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Optional

from .predicates import Pred


class Semantics(enum.Enum):
    SET = "set"
    BAG = "bag"
    ORDERED_BAG = "orderedbag"


class OpKind(enum.Enum):
    SOURCE = "Source"
    SINK = "Sink"
    FILTER = "Filter"
    PROJECT = "Project"
    JOIN = "Join"
    LEFT_OUTER_JOIN = "LeftOuterJoin"
    AGGREGATE = "Aggregate"
    UNION = "Union"
    REPLICATE = "Replicate"
    SORT = "Sort"
    UNNEST = "Unnest"
    UDF = "Udf"
    CLASSIFIER = "Classifier"
    DICTIONARY_MATCHER = "DictionaryMatcher"


#: Kinds whose semantics are known only by an opaque token; never executable.
OPAQUE_KINDS = frozenset({OpKind.UDF, OpKind.CLASSIFIER, OpKind.DICTIONARY_MATCHER})

#: Default input arity per kind (output arity is 1 except Sink=0, Replicate>=2).
_N_IN = {
    OpKind.SOURCE: 0,
    OpKind.SINK: 1,
    OpKind.FILTER: 1,
    OpKind.PROJECT: 1,
    OpKind.JOIN: 2,
    OpKind.LEFT_OUTER_JOIN: 2,
    OpKind.AGGREGATE: 1,
    OpKind.UNION: 2,
    OpKind.REPLICATE: 1,
    OpKind.SORT: 1,
    OpKind.UNNEST: 1,
    OpKind.UDF: 1,
    OpKind.CLASSIFIER: 1,
    OpKind.DICTIONARY_MATCHER: 1,
}

#: (column name, type name) pairs; type names: int, float, string, bool.
Schema = tuple[tuple[str, str], ...]


@dataclass(frozen=True)
class AggSpec:
    """One aggregation: function, input column (None = whole row), output name."""

    func: str  # count | sum | min | max | avg
    column: Optional[str]
    out: str


@dataclass(frozen=True)
class OpProps:
    """Kind-specific operator payload; unused fields stay None.

    Project with ``columns=None`` is a pass-through projection keeping the
    whole upstream schema.
    """

    schema: Optional[Schema] = None
    predicate: Optional[Pred] = None
    columns: Optional[tuple[str, ...]] = None
    join_keys: Optional[tuple[tuple[str, str], ...]] = None
    group_keys: Optional[tuple[str, ...]] = None
    aggs: Optional[tuple[AggSpec, ...]] = None
    sort_keys: Optional[tuple[tuple[str, bool], ...]] = None
    unnest_column: Optional[str] = None
    token: Optional[str] = None


@dataclass(frozen=True)
class Operator:
    id: str
    kind: OpKind
    props: OpProps = field(default_factory=OpProps)
    n_in: int = -1  # -1: use the kind default
    n_out: int = -1

    def __post_init__(self):
        if self.n_in < 0:
            object.__setattr__(self, "n_in", _N_IN[self.kind])
        if self.n_out < 0:
            default_out = 0 if self.kind is OpKind.SINK else (2 if self.kind is OpKind.REPLICATE else 1)
            object.__setattr__(self, "n_out", default_out)

    @property
    def opaque(self) -> bool:
        return self.kind in OPAQUE_KINDS


@dataclass(frozen=True, order=True)
class Link:
    src: str
    src_port: int
    dst: str
    dst_port: int


@dataclass(frozen=True)
class Violation:
    rule: str
    subject: str
    message: str

    def __str__(self) -> str:
        return f"{self.rule}[{self.subject}]: {self.message}"


class WorkflowError(Exception):
    pass


class SchemaUnknownError(WorkflowError):
    """Raised when a port schema cannot be derived (opaque op without a declared schema)."""


@dataclass(frozen=True)
class Workflow:
    id: str
    operators: tuple[Operator, ...]
    links: tuple[Link, ...]
    semantics: Semantics = Semantics.SET

    @staticmethod
    def build(id: str, operators: Iterable[Operator], links: Iterable[Link],
              semantics: Semantics = Semantics.SET) -> "Workflow":
        ops = tuple(sorted(operators, key=lambda o: o.id))
        lks = tuple(sorted(links))
        return Workflow(id, ops, lks, semantics)

    @cached_property
    def ops_by_id(self) -> dict[str, Operator]:
        return {o.id: o for o in self.operators}

    @cached_property
    def op_ids(self) -> frozenset[str]:
        return frozenset(o.id for o in self.operators)

    @cached_property
    def out_links(self) -> dict[str, tuple[Link, ...]]:
        d: dict[str, list[Link]] = {o.id: [] for o in self.operators}
        for l in self.links:
            if l.src in d:
                d[l.src].append(l)
        return {k: tuple(v) for k, v in d.items()}

    @cached_property
    def in_links(self) -> dict[str, tuple[Link, ...]]:
        d: dict[str, list[Link]] = {o.id: [] for o in self.operators}
        for l in self.links:
            if l.dst in d:
                d[l.dst].append(l)
        return {k: tuple(v) for k, v in d.items()}

    @cached_property
    def sources(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.operators if o.kind is OpKind.SOURCE)

    @cached_property
    def sinks(self) -> tuple[str, ...]:
        return tuple(o.id for o in self.operators if o.kind is OpKind.SINK)

    def neighbors_undirected(self, op_id: str) -> set[str]:
        out = {l.dst for l in self.out_links.get(op_id, ())}
        out |= {l.src for l in self.in_links.get(op_id, ())}
        return out

    @cached_property
    def topo_order(self) -> tuple[str, ...]:
        order = _topo_sort(self.op_ids, self.links)
        if order is None:
            raise WorkflowError(f"workflow {self.id} has a cycle")
        return order

    @cached_property
    def schemas(self) -> dict[tuple[str, int], Optional[Schema]]:
        """Schema produced at every (operator id, out port); None when underivable."""
        return _propagate_schemas(self)

    def input_schema(self, op_id: str, in_port: int) -> Optional[Schema]:
        for l in self.in_links[op_id]:
            if l.dst_port == in_port:
                return self.schemas.get((l.src, l.src_port))
        return None


def _topo_sort(op_ids: frozenset[str], links: Iterable[Link],
               reverse_ties: bool = False) -> Optional[tuple[str, ...]]:
    indeg = {op: 0 for op in op_ids}
    succ: dict[str, list[str]] = {op: [] for op in op_ids}
    for l in links:
        if l.src in indeg and l.dst in indeg:
            indeg[l.dst] += 1
            succ[l.src].append(l.dst)
    ready = sorted((op for op, d in indeg.items() if d == 0), reverse=reverse_ties)
    out: list[str] = []
    while ready:
        op = ready.pop(0 if not reverse_ties else -1)
        out.append(op)
        changed = False
        for nxt in succ[op]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
                changed = True
        if changed:
            ready.sort(reverse=reverse_ties)
    if len(out) != len(op_ids):
        return None
    return tuple(out)


def _project_schema(upstream: Schema, columns: Optional[tuple[str, ...]]) -> Optional[Schema]:
    if columns is None:
        return upstream
    types = dict(upstream)
    if any(c not in types for c in columns):
        return None
    return tuple((c, types[c]) for c in columns)


def _join_schema(left: Schema, right: Schema, keys: tuple[tuple[str, str], ...]) -> Optional[Schema]:
    right_keys = {rk for _, rk in keys}
    kept_right = tuple((c, t) for c, t in right if c not in right_keys)
    names = [c for c, _ in left] + [c for c, _ in kept_right]
    if len(names) != len(set(names)):
        return None
    return tuple(left) + kept_right


def _agg_schema(upstream: Schema, group_keys: tuple[str, ...], aggs: tuple[AggSpec, ...]) -> Optional[Schema]:
    types = dict(upstream)
    cols: list[tuple[str, str]] = []
    for k in group_keys:
        if k not in types:
            return None
        cols.append((k, types[k]))
    for a in aggs:
        if a.func == "count":
            t = "int"
        elif a.func == "avg":
            t = "float"
        else:
            if a.column is None or a.column not in types:
                return None
            t = types[a.column]
        cols.append((a.out, t))
    names = [c for c, _ in cols]
    if len(names) != len(set(names)):
        return None
    return tuple(cols)


def _propagate_schemas(wf: Workflow) -> dict[tuple[str, int], Optional[Schema]]:
    out: dict[tuple[str, int], Optional[Schema]] = {}
    for op_id in wf.topo_order:
        op = wf.ops_by_id[op_id]
        ins: list[Optional[Schema]] = []
        for port in range(op.n_in):
            found = None
            for l in wf.in_links[op_id]:
                if l.dst_port == port:
                    found = out.get((l.src, l.src_port))
                    break
            ins.append(found)
        produced: Optional[Schema]
        if op.kind is OpKind.SOURCE:
            produced = op.props.schema
        elif op.kind in OPAQUE_KINDS:
            produced = op.props.schema  # None when undeclared: unknown downstream
        elif op.kind is OpKind.SINK:
            produced = None
        elif op.kind in (OpKind.FILTER, OpKind.SORT, OpKind.REPLICATE, OpKind.UNNEST):
            produced = ins[0]
        elif op.kind is OpKind.PROJECT:
            produced = _project_schema(ins[0], op.props.columns) if ins[0] is not None else None
        elif op.kind in (OpKind.JOIN, OpKind.LEFT_OUTER_JOIN):
            if ins[0] is not None and ins[1] is not None and op.props.join_keys is not None:
                produced = _join_schema(ins[0], ins[1], op.props.join_keys)
            else:
                produced = None
        elif op.kind is OpKind.AGGREGATE:
            if ins[0] is not None and op.props.group_keys is not None and op.props.aggs is not None:
                produced = _agg_schema(ins[0], op.props.group_keys, op.props.aggs)
            else:
                produced = None
        elif op.kind is OpKind.UNION:
            produced = ins[0] if ins[0] == ins[1] else None
        else:  # pragma: no cover
            produced = None
        for port in range(op.n_out):
            out[(op_id, port)] = produced
    return out


# ---------------------------------------------------------------------------
# Validation


def _props_violations(wf: Workflow, op: Operator) -> list[Violation]:
    v: list[Violation] = []
    p = op.props

    def need(cond: bool, rule: str, msg: str):
        if not cond:
            v.append(Violation(rule, op.id, msg))

    if op.kind is OpKind.SOURCE:
        need(p.schema is not None, "missing property", "Source requires a schema")
    elif op.kind is OpKind.FILTER:
        need(p.predicate is not None, "missing property", "Filter requires a predicate")
    elif op.kind in (OpKind.JOIN, OpKind.LEFT_OUTER_JOIN):
        need(bool(p.join_keys), "missing property", "join requires key pairs")
    elif op.kind is OpKind.AGGREGATE:
        need(p.group_keys is not None and p.aggs is not None and len(p.aggs) > 0,
             "missing property", "Aggregate requires group keys and functions")
        for a in p.aggs or ():
            need(a.func in ("count", "sum", "min", "max", "avg"),
                 "bad property", f"unknown aggregate function {a.func!r}")
            if a.func != "count":
                need(a.column is not None, "bad property", f"{a.func} requires a column")
    elif op.kind is OpKind.SORT:
        need(bool(p.sort_keys), "missing property", "Sort requires sort keys")
    elif op.kind is OpKind.UNNEST:
        need(p.unnest_column is not None, "missing property", "Unnest requires a column")
    elif op.kind in OPAQUE_KINDS:
        need(p.token is not None, "missing property", f"{op.kind.value} requires a semantic token")
    return v


def _column_violations(wf: Workflow) -> list[Violation]:
    v: list[Violation] = []
    for op in wf.operators:
        upstream = wf.input_schema(op.id, 0) if op.n_in else None
        cols = None if upstream is None else {c for c, _ in upstream}

        def check(names: Iterable[str], what: str, against: Optional[set[str]] = None):
            pool = cols if against is None else against
            if pool is None:
                return  # upstream schema unknown: not checkable
            for name in names:
                if name not in pool:
                    v.append(Violation("unknown column", op.id, f"{what} references absent column {name!r}"))

        p = op.props
        if op.kind is OpKind.FILTER and p.predicate is not None:
            check(sorted(p.predicate.columns()), "predicate")
        elif op.kind is OpKind.PROJECT and p.columns is not None:
            check(p.columns, "projection")
        elif op.kind in (OpKind.JOIN, OpKind.LEFT_OUTER_JOIN) and p.join_keys:
            right = wf.input_schema(op.id, 1)
            rcols = None if right is None else {c for c, _ in right}
            check([lk for lk, _ in p.join_keys], "left join key")
            check([rk for _, rk in p.join_keys], "right join key", rcols)
        elif op.kind is OpKind.AGGREGATE and p.group_keys is not None:
            check(p.group_keys, "group key")
            check([a.column for a in p.aggs or () if a.column is not None], "aggregate input")
        elif op.kind is OpKind.SORT and p.sort_keys:
            check([c for c, _ in p.sort_keys], "sort key")
        elif op.kind is OpKind.UNNEST and p.unnest_column is not None:
            check([p.unnest_column], "unnest")
    return v


def validate_workflow(wf: Workflow) -> list[Violation]:
    """Check all workflow invariants; an empty list means the workflow is well formed."""
    v: list[Violation] = []
    seen: set[str] = set()
    for op in wf.operators:
        if op.id in seen:
            v.append(Violation("duplicate id", op.id, "operator id is not unique"))
        seen.add(op.id)
        v.extend(_props_violations(wf, op))

    for l in wf.links:
        for end, port, n in ((l.src, l.src_port, "out"), (l.dst, l.dst_port, "in")):
            if end not in wf.ops_by_id:
                v.append(Violation("dangling link", f"{l.src}->{l.dst}", f"unknown operator {end!r}"))
            else:
                op = wf.ops_by_id[end]
                limit = op.n_out if n == "out" else op.n_in
                if not (0 <= port < limit):
                    v.append(Violation("bad port", f"{l.src}->{l.dst}", f"{n}-port {port} out of range for {end}"))
    taken: set[tuple[str, int]] = set()
    for l in wf.links:
        key = (l.dst, l.dst_port)
        if key in taken:
            v.append(Violation("port conflict", l.dst, f"in-port {l.dst_port} fed by multiple links"))
        taken.add(key)

    if _topo_sort(wf.op_ids, wf.links) is None:
        v.append(Violation("cycle", wf.id, "link graph contains a cycle"))
        return v  # schema propagation needs acyclicity

    for op in wf.operators:
        if op.kind is not OpKind.SOURCE and not wf.in_links[op.id]:
            v.append(Violation("missing input", op.id, "non-Source operator has no incoming link"))
        if op.kind is not OpKind.SINK and not wf.out_links[op.id]:
            v.append(Violation("missing output", op.id, "non-Sink operator has no outgoing link"))
        for port in range(op.n_in):
            if not any(l.dst_port == port for l in wf.in_links[op.id]):
                v.append(Violation("missing input", op.id, f"in-port {port} not connected"))

    v.extend(_column_violations(wf))
    return v


# ---------------------------------------------------------------------------
# Sub-DAG extraction and boundary completion


@dataclass(frozen=True)
class SubDag:
    parent_id: str
    op_ids: frozenset[str]
    links: tuple[Link, ...]
    connected: bool


def induced_subdag(wf: Workflow, op_ids: Iterable[str]) -> SubDag:
    """Sub-DAG of exactly the named operators plus every link between them."""
    ids = frozenset(op_ids)
    unknown = ids - wf.op_ids
    if unknown:
        raise WorkflowError(f"unknown operator ids: {sorted(unknown)}")
    links = tuple(l for l in wf.links if l.src in ids and l.dst in ids)
    return SubDag(wf.id, ids, links, is_weakly_connected(ids, links))


def is_weakly_connected(op_ids: frozenset[str], links: Iterable[Link]) -> bool:
    if not op_ids:
        return True
    adj: dict[str, set[str]] = {op: set() for op in op_ids}
    for l in links:
        adj[l.src].add(l.dst)
        adj[l.dst].add(l.src)
    start = next(iter(sorted(op_ids)))
    seen = {start}
    queue = deque([start])
    while queue:
        cur = queue.popleft()
        for nxt in adj[cur]:
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return len(seen) == len(op_ids)


def virtual_source_id(producer: str, port: int) -> str:
    return f"__vsrc__{producer}__{port}"


def virtual_sink_id(producer: str, port: int) -> str:
    return f"__vsnk__{producer}__{port}"


def is_virtual(op_id: str) -> bool:
    return op_id.startswith("__vsrc__") or op_id.startswith("__vsnk__")


@dataclass(frozen=True)
class Completed:
    """A sub-DAG lifted to a stand-alone workflow.

    ``source_anchor``/``sink_anchor`` name the parent-side (operator, port)
    each virtual boundary stands in for, which is what lets two completed
    sides of a window be paired up.
    """

    workflow: Workflow
    source_anchor: dict[str, tuple[str, int]]
    sink_anchor: dict[str, tuple[str, int]]


def attach_virtual_boundaries(sd: SubDag, parent: Workflow) -> Completed:
    """Complete a sub-DAG with virtual Sources/Sinks at every dangling port.

    Virtual source schemas come from the parent's propagated schemas; raises
    SchemaUnknownError when an upstream opaque operator leaves them underivable.
    """
    ops: list[Operator] = [parent.ops_by_id[i] for i in sorted(sd.op_ids)]
    links: list[Link] = list(sd.links)
    src_anchor: dict[str, tuple[str, int]] = {}
    snk_anchor: dict[str, tuple[str, int]] = {}
    inside_in: set[tuple[str, int]] = {(l.dst, l.dst_port) for l in sd.links}
    added: set[str] = set()

    for op_id in sorted(sd.op_ids):
        op = parent.ops_by_id[op_id]
        for port in range(op.n_in):
            if (op_id, port) in inside_in:
                continue
            feeder = next((l for l in parent.in_links[op_id] if l.dst_port == port), None)
            if feeder is None:
                continue
            anchor = (feeder.src, feeder.src_port)
            schema = parent.schemas.get(anchor)
            if schema is None:
                raise SchemaUnknownError(f"schema unknown at {anchor[0]}:{anchor[1]}")
            vid = virtual_source_id(*anchor)
            if vid not in added:
                added.add(vid)
                ops.append(Operator(vid, OpKind.SOURCE, OpProps(schema=schema)))
                src_anchor[vid] = anchor
            links.append(Link(vid, 0, op_id, port))
        for port in range(op.n_out):
            crossing = [l for l in parent.out_links[op_id]
                        if l.src_port == port and l.dst not in sd.op_ids]
            if not crossing:
                continue
            vid = virtual_sink_id(op_id, port)
            ops.append(Operator(vid, OpKind.SINK, OpProps()))
            snk_anchor[vid] = (op_id, port)
            links.append(Link(op_id, port, vid, 0))

    wf = Workflow.build(f"{parent.id}/sub", ops, links, parent.semantics)
    return Completed(wf, src_anchor, snk_anchor)
