"""Scoring functions steering the search order.

Segments are visited smallest first (ascending score), so a failing segment is
hit early. Decompositions are explored closest-to-maximal first (descending
score), so an equivalent decomposition is reached with few merges.
"""

from __future__ import annotations


def segment_score(op_count: int, edit_count: int) -> int:
    """Operator count plus edit count; smaller segments get verified first."""
    if op_count <= 0:
        raise ValueError("segments are non-empty")
    return op_count + edit_count


def decomposition_score(avg_covering_ops: float, unmerged_singletons: int) -> float:
    """Average covering-window size minus the number of unmerged singleton windows."""
    return avg_covering_ops - unmerged_singletons
