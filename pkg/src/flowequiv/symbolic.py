"""Symbolic sink summaries: a cheap inequivalence check before any search.

Each version is summarized by the ordered column list its sink produces plus
the columns the result is sorted on. Exact summaries that disagree prove the
versions inequivalent without a single verifier call. Any operator without a
transfer rule makes the summary abstain.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

from .model import OpKind, Semantics, Workflow


class Confidence(enum.Enum):
    EXACT = "exact"
    ABSTAIN = "abstain"


@dataclass(frozen=True)
class SymbolicSummary:
    projected: tuple[str, ...]
    sorted_by: tuple[str, ...]
    confidence: Confidence

    @property
    def exact(self) -> bool:
        return self.confidence is Confidence.EXACT


ABSTAIN = SymbolicSummary((), (), Confidence.ABSTAIN)

#: Kinds with a transfer rule; everything else abstains.
_RULED = frozenset({OpKind.SOURCE, OpKind.SINK, OpKind.FILTER, OpKind.PROJECT,
                    OpKind.SORT, OpKind.JOIN, OpKind.AGGREGATE})


def summarize_version(wf: Workflow) -> SymbolicSummary:
    if len(wf.sinks) != 1:
        return ABSTAIN
    state: dict[tuple[str, int], Optional[tuple[tuple[str, ...], tuple[str, ...]]]] = {}

    def feed(op_id: str, port: int):
        link = next((l for l in wf.in_links[op_id] if l.dst_port == port), None)
        return None if link is None else state.get((link.src, link.src_port))

    for op_id in wf.topo_order:
        op = wf.ops_by_id[op_id]
        if op.kind not in _RULED:
            out = None
        elif op.kind is OpKind.SOURCE:
            out = (tuple(c for c, _ in op.props.schema), ())
        elif op.kind is OpKind.SINK:
            continue
        else:
            up = feed(op_id, 0)
            if up is None:
                out = None
            elif op.kind is OpKind.FILTER:
                out = up
            elif op.kind is OpKind.PROJECT:
                cols = up[0] if op.props.columns is None else op.props.columns
                out = (tuple(cols), tuple(c for c in up[1] if c in cols))
            elif op.kind is OpKind.SORT:
                out = (up[0], tuple(c for c, _ in op.props.sort_keys))
            elif op.kind is OpKind.JOIN:
                right = feed(op_id, 1)
                if right is None:
                    out = None
                else:
                    dropped = {rk for _, rk in op.props.join_keys}
                    out = (up[0] + tuple(c for c in right[0] if c not in dropped), ())
            elif op.kind is OpKind.AGGREGATE:
                out = (tuple(op.props.group_keys) + tuple(a.out for a in op.props.aggs), ())
            else:  # pragma: no cover
                out = None
        for port in range(op.n_out):
            state[(op_id, port)] = out

    sink = wf.sinks[0]
    result = feed(sink, 0)
    if result is None:
        return ABSTAIN
    return SymbolicSummary(result[0], result[1], Confidence.EXACT)


@dataclass(frozen=True)
class SymbolicDifference:
    """Witness for a symbolic inequivalence verdict."""

    p_summary: SymbolicSummary
    q_summary: SymbolicSummary
    field: str  # "projected" | "sorted_by"


def quick_inequivalence(P: Workflow, Q: Workflow) -> Optional[SymbolicDifference]:
    """A difference proves inequivalence; None proves nothing."""
    sp, sq = summarize_version(P), summarize_version(Q)
    if not sp.exact or not sq.exact:
        return None
    if sp.projected != sq.projected:
        return SymbolicDifference(sp, sq, "projected")
    if P.semantics is Semantics.ORDERED_BAG and sp.sorted_by != sq.sorted_by:
        return SymbolicDifference(sp, sq, "sorted_by")
    return None
