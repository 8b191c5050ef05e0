"""Windows: mapping-closed pairs of connected induced sub-DAGs of two versions.

A window is the unit handed to an equivalence verifier. Both sides are
completed with virtual boundaries and their sources/sinks are paired through
the edit mapping so the two stand-alone DAGs can be compared.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional

from .edits import EditMapping, EditUnit
from .model import (Completed, Link, OpKind, Operator, OpProps, Workflow,
                    attach_virtual_boundaries, induced_subdag, is_weakly_connected,
                    virtual_sink_id, virtual_source_id)


class WindowError(Exception):
    pass


class PairingError(WindowError):
    """Window boundaries cannot be matched across the two sides."""


WindowKey = tuple[tuple[str, ...], tuple[str, ...]]


@dataclass(frozen=True)
class VersionPair:
    """Two versions plus the mapping and edit units under consideration."""

    p: Workflow
    q: Workflow
    mapping: EditMapping
    units: tuple[EditUnit, ...]

    @cached_property
    def all_pairs_window(self) -> "Window":
        return Window(frozenset(self.p.op_ids), frozenset(self.q.op_ids), self.mapping)

    @cached_property
    def unmapped_p(self) -> frozenset[str]:
        return frozenset(self.p.op_ids) - set(self.mapping.p2q)

    @cached_property
    def unmapped_q(self) -> frozenset[str]:
        return frozenset(self.q.op_ids) - set(self.mapping.q2p)


@dataclass(frozen=True)
class Window:
    p_ops: frozenset[str]
    q_ops: frozenset[str]
    mapping: EditMapping

    @cached_property
    def key(self) -> WindowKey:
        return (tuple(sorted(self.p_ops)), tuple(sorted(self.q_ops)))

    @property
    def empty_side(self) -> bool:
        return not self.p_ops or not self.q_ops

    def size(self) -> int:
        """Operator count with each mapped pair counted once."""
        mapped_q = {self.mapping.p2q[p] for p in self.p_ops if p in self.mapping.p2q}
        return len(self.p_ops) + len(self.q_ops - mapped_q)

    def side_sizes(self) -> tuple[int, int]:
        return len(self.p_ops), len(self.q_ops)


def closure_violations(p_ops: frozenset[str], q_ops: frozenset[str], m: EditMapping) -> list[str]:
    bad = []
    for p in sorted(p_ops):
        q = m.partner_in_q(p)
        if q is not None and q not in q_ops:
            bad.append(f"{p} inside without its image {q}")
    for q in sorted(q_ops):
        p = m.partner_in_p(q)
        if p is not None and p not in p_ops:
            bad.append(f"{q} inside without its preimage {p}")
    return bad


def make_window(pair: VersionPair, p_ops: Iterable[str], q_ops: Iterable[str],
                *, allow_empty_side: bool = False) -> Window:
    """Construct a window, enforcing mapping closure and per-side connectivity."""
    ps, qs = frozenset(p_ops), frozenset(q_ops)
    if not ps and not qs:
        raise WindowError("window has no operators")
    unknown = (ps - pair.p.op_ids) | (qs - pair.q.op_ids)
    if unknown:
        raise WindowError(f"unknown operators {sorted(unknown)}")
    bad = closure_violations(ps, qs, pair.mapping)
    if bad:
        raise WindowError("mapping-closure violated: " + "; ".join(bad[:3]))
    if not allow_empty_side and (not ps or not qs):
        raise WindowError("window side is empty")
    for ops, wf, side in ((ps, pair.p, "P"), (qs, pair.q, "Q")):
        if ops and not induced_subdag(wf, ops).connected:
            raise WindowError(f"disconnected side {side}")
    return Window(ps, qs, pair.mapping)


def contains(w: Window, w2: Window) -> bool:
    """True iff ``w`` is a sub-window of ``w2``."""
    return w.p_ops <= w2.p_ops and w.q_ops <= w2.q_ops


def overlaps(w1: Window, w2: Window) -> bool:
    return bool(w1.p_ops & w2.p_ops) or bool(w1.q_ops & w2.q_ops)


@dataclass(frozen=True)
class Candidate:
    """A single boundary-adjacent growth step: an operator with its mapped partner."""

    p_add: frozenset[str]
    q_add: frozenset[str]

    @property
    def mapped_pair(self) -> bool:
        return bool(self.p_add) and bool(self.q_add)

    def sort_key(self):
        return (tuple(sorted(self.p_add)), tuple(sorted(self.q_add)))


def _adjacent(wf: Workflow, ops: frozenset[str]) -> set[str]:
    out: set[str] = set()
    for op in ops:
        out |= wf.neighbors_undirected(op)
    return out - ops


def neighbors(pair: VersionPair, w: Window) -> list[Candidate]:
    """Closure-preserving single-operator expansion candidates.

    Every candidate is adjacent to the window boundary in at least one version
    and, when added together with its mapped partner, keeps both sides
    connected induced sub-DAGs.
    """
    m = pair.mapping
    cands: dict[tuple, Candidate] = {}
    for p_id in sorted(_adjacent(pair.p, w.p_ops)):
        q_id = m.partner_in_q(p_id)
        c = Candidate(frozenset({p_id}), frozenset({q_id} if q_id else ()))
        cands[c.sort_key()] = c
    for q_id in sorted(_adjacent(pair.q, w.q_ops)):
        p_id = m.partner_in_p(q_id)
        c = Candidate(frozenset({p_id} if p_id else ()), frozenset({q_id}))
        cands[c.sort_key()] = c
    ok: list[Candidate] = []
    for _, c in sorted(cands.items()):
        try:
            expand(pair, w, c)
        except WindowError:
            continue
        ok.append(c)
    return ok


def expand(pair: VersionPair, w: Window, c: Candidate) -> Window:
    if w.empty_side and not c.mapped_pair:
        # An empty-side window (pure add/delete edit) must first gain a mapped
        # pair so both sides exist before any verifier sees it.
        raise WindowError("empty-side window must first add a mapped pair")
    return make_window(pair, w.p_ops | c.p_add, w.q_ops | c.q_add)


def close_over_mapping(pair: VersionPair, p_ops: set[str], q_ops: set[str]) -> tuple[set[str], set[str]]:
    m = pair.mapping
    p_ops, q_ops = set(p_ops), set(q_ops)
    for p in list(p_ops):
        q = m.partner_in_q(p)
        if q:
            q_ops.add(q)
    for q in list(q_ops):
        p = m.partner_in_p(q)
        if p:
            p_ops.add(p)
    return p_ops, q_ops


def _connect_side(wf: Workflow, ops: set[str], universe: Optional[frozenset[str]] = None) -> set[str]:
    """Grow ``ops`` with shortest undirected paths until weakly connected.

    Connecting operators are drawn from ``universe`` when given (segment-local
    searches must not route through boundary operators).
    """
    while True:
        sub = induced_subdag(wf, ops)
        if sub.connected or len(ops) <= 1:
            return ops
        comps = _components(wf, ops)
        base = comps[0]
        best: Optional[list[str]] = None
        for other in comps[1:]:
            path = _shortest_between(wf, base, other, universe)
            if path is not None and (best is None or len(path) < len(best)):
                best = path
        if best is None:
            raise WindowError("side cannot be connected within the version")
        ops |= set(best)


def _components(wf: Workflow, ops: set[str]) -> list[set[str]]:
    remaining = set(ops)
    comps = []
    while remaining:
        start = min(remaining)
        comp = {start}
        stack = [start]
        while stack:
            cur = stack.pop()
            for nxt in wf.neighbors_undirected(cur):
                if nxt in remaining and nxt not in comp:
                    comp.add(nxt)
                    stack.append(nxt)
        comps.append(comp)
        remaining -= comp
    return sorted(comps, key=lambda c: min(c))


def _shortest_between(wf: Workflow, a: set[str], b: set[str],
                      universe: Optional[frozenset[str]] = None) -> Optional[list[str]]:
    from collections import deque
    queue = deque([(x, []) for x in sorted(a)])
    seen = set(a)
    while queue:
        cur, path = queue.popleft()
        for nxt in sorted(wf.neighbors_undirected(cur)):
            if nxt in b:
                return path
            if nxt not in seen and (universe is None or nxt in universe):
                seen.add(nxt)
                queue.append((nxt, path + [nxt]))
    return None


def minimal_covering_window(pair: VersionPair, unit: EditUnit,
                            universe: Optional[tuple[frozenset[str], frozenset[str]]] = None
                            ) -> Window:
    """Smallest closure-closed window containing a unit's touched operators.

    Pure add/delete units start with one empty side; multi-operator units are
    connected up within each version first.
    """
    p_uni = universe[0] if universe else None
    q_uni = universe[1] if universe else None
    p_ops, q_ops = close_over_mapping(pair, set(unit.p_ops), set(unit.q_ops))
    for _ in range(len(pair.p.operators) + len(pair.q.operators)):
        if p_ops:
            p_ops = _connect_side(pair.p, p_ops, p_uni)
        if q_ops:
            q_ops = _connect_side(pair.q, q_ops, q_uni)
        p2, q2 = close_over_mapping(pair, p_ops, q_ops)
        if p2 == p_ops and q2 == q_ops \
                and (not p2 or induced_subdag(pair.p, p2).connected) \
                and (not q2 or induced_subdag(pair.q, q2).connected):
            break
        p_ops, q_ops = p2, q2
    return make_window(pair, p_ops, q_ops, allow_empty_side=True)


def initial_covering_window(pair: VersionPair, unit: EditUnit) -> Window:
    return minimal_covering_window(pair, unit)


def window_covers(w: Window, unit: EditUnit) -> bool:
    return unit.p_ops <= w.p_ops and unit.q_ops <= w.q_ops


# ---------------------------------------------------------------------------
# Completion and boundary pairing


@dataclass(frozen=True)
class WindowContext:
    """Both sides of a window completed into stand-alone workflows.

    ``source_pairs``/``sink_pairs`` align boundary operators across the sides;
    ``symbols`` names each P-side boundary source so verifiers can treat paired
    sources as the same input.
    """

    window: Window
    p_side: Workflow
    q_side: Workflow
    source_pairs: tuple[tuple[str, str], ...]
    sink_pairs: tuple[tuple[str, str], ...]
    symbols: dict[str, str]


def _empty_side_completion(done: Completed, pair: VersionPair, from_p: bool) -> Completed:
    """Stand-in for an empty window side: one pass-through virtual pipe."""
    if len(done.source_anchor) != 1 or len(done.sink_anchor) != 1:
        raise PairingError("empty window side needs exactly one boundary in and out")
    m = pair.mapping
    (src_anchor,) = done.source_anchor.values()
    translate = m.partner_in_q if from_p else m.partner_in_p
    twin = translate(src_anchor[0])
    if twin is None:
        raise PairingError(f"boundary producer {src_anchor[0]} has no mapped partner")
    other = pair.q if from_p else pair.p
    schema = other.schemas.get((twin, src_anchor[1]))
    if schema is None:
        raise PairingError("schema unknown at empty-side boundary")
    vsrc = virtual_source_id(twin, src_anchor[1])
    vsnk = virtual_sink_id(twin, src_anchor[1])
    wf = Workflow.build("empty-side", [
        Operator(vsrc, OpKind.SOURCE, OpProps(schema=schema)),
        Operator(vsnk, OpKind.SINK, OpProps()),
    ], [Link(vsrc, 0, vsnk, 0)], other.semantics)
    return Completed(wf, {vsrc: (twin, src_anchor[1])}, {vsnk: (twin, src_anchor[1])})


def complete_window(pair: VersionPair, w: Window) -> WindowContext:
    """Attach boundaries to both sides and pair sources/sinks via the mapping.

    Raises PairingError when a boundary anchor has no counterpart; such a
    window cannot be meaningfully submitted to a verifier.
    """
    m = pair.mapping
    if w.p_ops:
        cp = attach_virtual_boundaries(induced_subdag(pair.p, w.p_ops), pair.p)
    else:
        cp = None
    if w.q_ops:
        cq = attach_virtual_boundaries(induced_subdag(pair.q, w.q_ops), pair.q)
    else:
        cq = None
    if cp is None and cq is None:
        raise WindowError("window has no operators")
    if cp is None:
        cp = _empty_side_completion(cq, pair, from_p=False)
    if cq is None:
        cq = _empty_side_completion(cp, pair, from_p=True)

    def to_p_anchor(q_anchor: tuple[str, int]) -> tuple[str, int]:
        p_id = m.partner_in_p(q_anchor[0])
        if p_id is None:
            # Namespaced so an unmapped Q producer never collides with a
            # P operator that happens to share its id.
            return ("\x00q:" + q_anchor[0], q_anchor[1])
        return (p_id, q_anchor[1])

    def match(p_by_anchor: dict[tuple[str, int], str], q_by_anchor: dict[tuple[str, int], str],
              what: str) -> list[tuple[str, str]]:
        pairs = [(p_by_anchor[a], q_by_anchor[a])
                 for a in sorted(set(p_by_anchor) & set(q_by_anchor))]
        left_p = [p_by_anchor[a] for a in sorted(set(p_by_anchor) - set(q_by_anchor))]
        left_q = [q_by_anchor[a] for a in sorted(set(q_by_anchor) - set(p_by_anchor))]
        if left_p or left_q:
            # Anchors at unmapped producers cannot be matched through the
            # mapping; a single dangling port per side still pairs up
            # unambiguously (the windows are stand-alone DAGs).
            if len(left_p) == 1 and len(left_q) == 1:
                pairs.append((left_p[0], left_q[0]))
            else:
                raise PairingError(f"boundary {what} differ between the sides")
        return pairs

    # Virtual sources pair by the producing parent port, translated to P space.
    p_src_by_anchor = {a: vid for vid, a in cp.source_anchor.items()}
    q_src_by_anchor = {to_p_anchor(a): vid for vid, a in cq.source_anchor.items()}
    source_pairs = match(p_src_by_anchor, q_src_by_anchor, "sources")
    symbols = {p: f"in:{i}" for i, (p, _) in enumerate(source_pairs)}

    # Real sources inside the window pair through the mapping.
    for sid in cp.workflow.sources:
        if sid in cp.source_anchor:
            continue
        partner = m.partner_in_q(sid)
        if partner is None or partner not in cq.workflow.op_ids:
            raise PairingError(f"unpaired real source {sid}")
        source_pairs.append((sid, partner))
        symbols[sid] = f"src:{sid}"
    for sid in cq.workflow.sources:
        if sid in cq.source_anchor:
            continue
        if m.partner_in_p(sid) is None:
            raise PairingError(f"unpaired real source {sid}")

    # Virtual sinks pair by their producing port (P space); real sinks by mapping.
    p_snk_by_anchor = {a: vid for vid, a in cp.sink_anchor.items()}
    q_snk_by_anchor = {to_p_anchor(a): vid for vid, a in cq.sink_anchor.items()}
    sink_pairs = match(p_snk_by_anchor, q_snk_by_anchor, "sinks")
    real_p = [s for s in cp.workflow.sinks if s not in cp.sink_anchor]
    real_q = [s for s in cq.workflow.sinks if s not in cq.sink_anchor]
    for sid in real_p:
        partner = m.partner_in_q(sid)
        if partner is not None and partner in cq.workflow.op_ids:
            sink_pairs.append((sid, partner))
        elif len(real_p) == 1 and len(real_q) == 1:
            sink_pairs.append((sid, real_q[0]))
        else:
            raise PairingError(f"unpaired real sink {sid}")
    if len({q for _, q in sink_pairs}) != len(sink_pairs):
        raise PairingError("ambiguous sink pairing")

    return WindowContext(w, cp.workflow, cq.workflow,
                         tuple(source_pairs), tuple(sink_pairs), symbols)


def full_pair_context(pair: VersionPair) -> WindowContext:
    """The whole version pair as a window context (used by the oracle sweeps)."""
    return complete_window(pair, pair.all_pairs_window)
