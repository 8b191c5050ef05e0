"""Edit operations, transformations, and edit mappings between two versions.

An edit mapping is a partial injective correspondence between the operators of
two versions. The transformation it induces consists of operator edits (add,
delete, modify) plus the link rewiring needed to reproduce the second version.
Operator edits carry the edit distance; link edits ride along and are absorbed
into the operator edit that explains them, so that the units a decomposition
must cover match the paper-and-pencil edit counts.
"""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Optional, Union

from .model import (Link, OpKind, Operator, OPAQUE_KINDS, OpProps, Workflow,
                    validate_workflow)


class EditError(Exception):
    pass


@dataclass(frozen=True)
class AddOperator:
    op: Operator


@dataclass(frozen=True)
class DeleteOperator:
    op_id: str


@dataclass(frozen=True)
class ModifyOperator:
    op_id: str
    props: OpProps
    kind: Optional[OpKind] = None  # set only for mapping-derived cross-kind rewrites


@dataclass(frozen=True)
class AddLink:
    link: Link


@dataclass(frozen=True)
class RemoveLink:
    link: Link


EditOp = Union[AddOperator, DeleteOperator, ModifyOperator, AddLink, RemoveLink]


@dataclass(frozen=True)
class Transformation:
    edits: tuple[EditOp, ...]

    def __iter__(self):
        return iter(self.edits)

    def __len__(self):
        return len(self.edits)

    @property
    def operator_edits(self) -> tuple[EditOp, ...]:
        return tuple(e for e in self.edits
                     if isinstance(e, (AddOperator, DeleteOperator, ModifyOperator)))

    @property
    def distance(self) -> int:
        """Edit distance: operator edits only, link rewiring excluded."""
        return len(self.operator_edits)


def apply_transformation(v: Workflow, delta: Transformation, *, new_id: Optional[str] = None) -> Workflow:
    """Apply edits in sequence; the result must be a valid workflow."""
    ops = {o.id: o for o in v.operators}
    links = set(v.links)
    for e in delta:
        if isinstance(e, AddOperator):
            if e.op.id in ops:
                raise EditError(f"operator {e.op.id} already exists")
            ops[e.op.id] = e.op
        elif isinstance(e, DeleteOperator):
            if e.op_id not in ops:
                raise EditError(f"unknown operator {e.op_id}")
            if any(l.src == e.op_id or l.dst == e.op_id for l in links):
                raise EditError(f"operator {e.op_id} still linked")
            del ops[e.op_id]
        elif isinstance(e, ModifyOperator):
            if e.op_id not in ops:
                raise EditError(f"unknown operator {e.op_id}")
            old = ops[e.op_id]
            kind = e.kind if e.kind is not None else old.kind
            if e.kind is None and kind is not old.kind:
                raise EditError("modify cannot change the operator kind")
            ops[e.op_id] = Operator(old.id, kind, e.props)
        elif isinstance(e, AddLink):
            if e.link.src not in ops or e.link.dst not in ops:
                raise EditError(f"dangling link {e.link}")
            links.add(e.link)
        elif isinstance(e, RemoveLink):
            if e.link not in links:
                raise EditError(f"unknown link {e.link}")
            links.remove(e.link)
        else:  # pragma: no cover
            raise EditError(f"unknown edit {e!r}")
    out = Workflow.build(new_id or v.id, ops.values(), links, v.semantics)
    violations = validate_workflow(out)
    if violations:
        raise EditError("transformation yields invalid workflow: "
                        + "; ".join(str(x) for x in violations[:3]))
    return out


# ---------------------------------------------------------------------------
# Edit mappings


@dataclass(frozen=True)
class EditMapping:
    """Partial injective operator correspondence from P ops to Q ops."""

    pairs: tuple[tuple[str, str], ...]

    @staticmethod
    def of(pairs) -> "EditMapping":
        return EditMapping(tuple(sorted(pairs)))

    @cached_property
    def p2q(self) -> dict[str, str]:
        return {p: q for p, q in self.pairs}

    @cached_property
    def q2p(self) -> dict[str, str]:
        return {q: p for p, q in self.pairs}

    def partner_in_q(self, p_id: str) -> Optional[str]:
        return self.p2q.get(p_id)

    def partner_in_p(self, q_id: str) -> Optional[str]:
        return self.q2p.get(q_id)


def mapping_violations(P: Workflow, Q: Workflow, m: EditMapping) -> list[str]:
    bad: list[str] = []
    seen_p: set[str] = set()
    seen_q: set[str] = set()
    for p, q in m.pairs:
        if p not in P.op_ids:
            bad.append(f"unknown P operator {p!r}")
            continue
        if q not in Q.op_ids:
            bad.append(f"unknown Q operator {q!r}")
            continue
        if p in seen_p or q in seen_q:
            bad.append(f"mapping not injective at ({p},{q})")
        seen_p.add(p)
        seen_q.add(q)
        if not kinds_compatible(P.ops_by_id[p], Q.ops_by_id[q]):
            bad.append(f"incompatible kinds {p}:{P.ops_by_id[p].kind.value} -> "
                       f"{q}:{Q.ops_by_id[q].kind.value}")
    return bad


_RELATIONAL = frozenset({OpKind.FILTER, OpKind.PROJECT, OpKind.JOIN, OpKind.LEFT_OUTER_JOIN,
                         OpKind.AGGREGATE, OpKind.UNION, OpKind.SORT, OpKind.UNNEST})


def kinds_compatible(a: Operator, b: Operator) -> bool:
    """Mappable operator pair: same kind, or relational kinds of matching arity."""
    if a.kind is b.kind:
        return a.n_in == b.n_in
    if a.kind in _RELATIONAL and b.kind in _RELATIONAL:
        return a.n_in == b.n_in and a.n_out == b.n_out
    return False


def mapped_links(P: Workflow, Q: Workflow, m: EditMapping) -> dict[Link, Link]:
    """P link -> Q link for links whose endpoints are mapped and which exist in Q."""
    q_links = set(Q.links)
    out: dict[Link, Link] = {}
    for l in P.links:
        qs, qd = m.partner_in_q(l.src), m.partner_in_q(l.dst)
        if qs is None or qd is None:
            continue
        candidate = Link(qs, l.src_port, qd, l.dst_port)
        if candidate in q_links:
            out[l] = candidate
    return out


def derive_edits_from_mapping(P: Workflow, Q: Workflow, m: EditMapping) -> Transformation:
    """Transformation (deletes, adds, modifies, link rewires) induced by a mapping.

    Applying the result to P reproduces Q up to renaming of the mapped ids.
    """
    bad = mapping_violations(P, Q, m)
    if bad:
        raise EditError("invalid mapping: " + "; ".join(bad[:3]))
    link_map = mapped_links(P, Q, m)
    removed = [RemoveLink(l) for l in P.links if l not in link_map]
    deleted = [DeleteOperator(o.id) for o in P.operators if m.partner_in_q(o.id) is None]

    # Surviving P ids can collide with added Q ids under id-crossing mappings;
    # alias collisions so the transformation stays applicable (the result is
    # then Q up to renaming of those operators).
    surviving = {o.id for o in P.operators if m.partner_in_q(o.id) is not None}
    alias: dict[str, str] = {}
    added: list[AddOperator] = []
    for o in Q.operators:
        if m.partner_in_p(o.id) is not None:
            continue
        new_id = o.id
        while new_id in surviving or new_id in alias.values():
            new_id += "+"
        if new_id != o.id:
            alias[o.id] = new_id
        added.append(AddOperator(Operator(new_id, o.kind, o.props, o.n_in, o.n_out)))
    modified: list[ModifyOperator] = []
    for p_id, q_id in m.pairs:
        po, qo = P.ops_by_id[p_id], Q.ops_by_id[q_id]
        if po.kind is not qo.kind:
            modified.append(ModifyOperator(p_id, qo.props, kind=qo.kind))
        elif po.props != qo.props:
            modified.append(ModifyOperator(p_id, qo.props))

    # New Q links, expressed over P ids for mapped endpoints.
    q_mapped = set(link_map.values())

    def to_p_space(op_id: str) -> str:
        p_id = m.partner_in_p(op_id)
        if p_id is not None:
            return p_id
        return alias.get(op_id, op_id)

    new_links = [AddLink(Link(to_p_space(l.src), l.src_port, to_p_space(l.dst), l.dst_port))
                 for l in Q.links if l not in q_mapped]
    edits: list[EditOp] = [*removed, *deleted, *added, *new_links, *modified]
    return Transformation(tuple(edits))


# ---------------------------------------------------------------------------
# Edit units: what a covering window actually has to contain


@dataclass(frozen=True)
class EditUnit:
    """One coverable change: the operator ids it touches on each side."""

    label: str
    p_ops: frozenset[str]
    q_ops: frozenset[str]
    edits: tuple[EditOp, ...]


def edit_units(P: Workflow, Q: Workflow, m: EditMapping) -> tuple[EditUnit, ...]:
    """The coverable changes a decomposition must account for.

    One unit per operator edit (delete, add, modify). A link edit is absorbed
    into the operator edit that explains it: links incident to an added or
    deleted operator, and links replaced by an insertion (or restored by a
    deletion) chain. Only pure rewires remain as stand-alone units covered by
    their endpoint pairs. Unit operator ids live in the real P/Q id spaces.
    """
    bad = mapping_violations(P, Q, m)
    if bad:
        raise EditError("invalid mapping: " + "; ".join(bad[:3]))
    link_map = mapped_links(P, Q, m)
    deleted_ids = {o.id for o in P.operators if m.partner_in_q(o.id) is None}
    added_ids = {o.id for o in Q.operators if m.partner_in_p(o.id) is None}

    units: dict[str, list[EditOp]] = {}
    order: list[tuple[str, str, frozenset[str], frozenset[str]]] = []

    def new_unit(key: str, label: str, p_ops: frozenset[str], q_ops: frozenset[str], edit: EditOp):
        units[key] = [edit]
        order.append((key, label, p_ops, q_ops))

    for op_id in sorted(deleted_ids):
        new_unit(f"del:{op_id}", f"delete {op_id}", frozenset({op_id}), frozenset(),
                 DeleteOperator(op_id))
    for op_id in sorted(added_ids):
        new_unit(f"add:{op_id}", f"add {op_id}", frozenset(), frozenset({op_id}),
                 AddOperator(Q.ops_by_id[op_id]))
    for p_id, q_id in m.pairs:
        po, qo = P.ops_by_id[p_id], Q.ops_by_id[q_id]
        if po.kind is not qo.kind or po.props != qo.props:
            kind = qo.kind if po.kind is not qo.kind else None
            new_unit(f"mod:{p_id}", f"modify {p_id}", frozenset({p_id}), frozenset({q_id}),
                     ModifyOperator(p_id, qo.props, kind=kind))

    def path_through(wf: Workflow, start: str, goal: str, allowed: set[str]) -> Optional[list[str]]:
        # Directed path start -> goal whose interior ops all lie in `allowed`.
        queue = deque([(start, [])])
        seen = {start}
        while queue:
            cur, interior = queue.popleft()
            for l in wf.out_links.get(cur, ()):
                nxt = l.dst
                if nxt == goal:
                    return interior
                if nxt in allowed and nxt not in seen:
                    seen.add(nxt)
                    queue.append((nxt, interior + [nxt]))
        return None

    for l in P.links:
        if l in link_map:
            continue
        owner = None
        if l.src in deleted_ids:
            owner = f"del:{l.src}"
        elif l.dst in deleted_ids:
            owner = f"del:{l.dst}"
        else:
            qs, qd = m.partner_in_q(l.src), m.partner_in_q(l.dst)
            if qs is not None and qd is not None:
                interior = path_through(Q, qs, qd, added_ids)
                if interior:
                    owner = f"add:{interior[0]}"
        if owner is not None and owner in units:
            units[owner].append(RemoveLink(l))
        else:
            key = f"unlink:{l.src}:{l.src_port}:{l.dst}:{l.dst_port}"
            p_ops = frozenset({l.src, l.dst})
            q_ops = frozenset(x for x in (m.partner_in_q(l.src), m.partner_in_q(l.dst)) if x)
            new_unit(key, f"remove link {l.src}->{l.dst}", p_ops, q_ops, RemoveLink(l))

    q_mapped = set(link_map.values())
    for l in Q.links:
        if l in q_mapped:
            continue
        owner = None
        if l.src in added_ids:
            owner = f"add:{l.src}"
        elif l.dst in added_ids:
            owner = f"add:{l.dst}"
        else:
            ps, pd = m.partner_in_p(l.src), m.partner_in_p(l.dst)
            if ps is not None and pd is not None:
                interior = path_through(P, ps, pd, deleted_ids)
                if interior:
                    owner = f"del:{interior[0]}"
        if owner is not None and owner in units:
            units[owner].append(AddLink(l))
        else:
            key = f"link:{l.src}:{l.src_port}:{l.dst}:{l.dst_port}"
            q_ops = frozenset({l.src, l.dst})
            p_ops = frozenset(x for x in (m.partner_in_p(l.src), m.partner_in_p(l.dst)) if x)
            new_unit(key, f"add link {l.src}->{l.dst}", p_ops, q_ops, AddLink(l))

    return tuple(EditUnit(label, p_ops, q_ops, tuple(units[key]))
                 for key, label, p_ops, q_ops in order)


# ---------------------------------------------------------------------------
# Mapping enumeration


def _pair_cost(a: Operator, b: Operator) -> int:
    return 0 if (a.kind is b.kind and a.props == b.props) else 1


def enumerate_mappings(P: Workflow, Q: Workflow, cap: int = 16,
                       tracked: Optional[EditMapping] = None) -> Iterator[EditMapping]:
    """Candidate edit mappings in ascending operator-edit-distance order.

    A tracked mapping, when given, is emitted first. Ties break on the
    lexicographic pair list, so the stream is deterministic. At most ``cap``
    mappings are produced; only kind-compatible operators are ever paired.
    """
    if cap < 1:
        raise EditError("cap must be >= 1")
    emitted = 0
    seen: set[tuple[tuple[str, str], ...]] = set()
    if tracked is not None:
        seen.add(tracked.pairs)
        yield tracked
        emitted += 1
        if emitted >= cap:
            return

    p_ops = sorted(P.operators, key=lambda o: o.id)
    q_ops = sorted(Q.operators, key=lambda o: o.id)
    q_index = {o.id: i for i, o in enumerate(q_ops)}

    compat: list[list[tuple[int, str]]] = []
    for po in p_ops:
        options = [(_pair_cost(po, qo), qo.id) for qo in q_ops if kinds_compatible(po, qo)]
        options.sort()
        compat.append(options)

    def heuristic(i: int, used: frozenset[str]) -> int:
        remaining_p = len(p_ops) - i
        remaining_q = len(q_ops) - len(used)
        return abs(remaining_p - remaining_q)

    # Best-first over partial assignments of P operators (in id order) to a
    # Q operator or to deletion.
    counter = itertools.count()
    start = (heuristic(0, frozenset()), 0, next(counter), 0, frozenset(), ())
    heap = [start]
    visited: set[tuple[int, frozenset[str], tuple[tuple[str, str], ...]]] = set()
    while heap and emitted < cap:
        est, cost, _, i, used, pairs = heapq.heappop(heap)
        state = (i, used, pairs)
        if state in visited:
            continue
        visited.add(state)
        if i == len(p_ops):
            total_pairs = tuple(sorted(pairs))
            if total_pairs not in seen:
                seen.add(total_pairs)
                yield EditMapping(total_pairs)
                emitted += 1
            continue
        po = p_ops[i]
        # Option: leave po unmapped (deleted).
        nc = cost + 1
        heapq.heappush(heap, (nc + heuristic(i + 1, used), nc, next(counter),
                              i + 1, used, pairs))
        for c, q_id in compat[i]:
            if q_id in used:
                continue
            nc = cost + c
            heapq.heappush(heap, (nc + heuristic(i + 1, used | {q_id}), nc, next(counter),
                                  i + 1, used | {q_id}, pairs + ((po.id, q_id),)))
    _ = q_index  # kept for symmetry/debugging
