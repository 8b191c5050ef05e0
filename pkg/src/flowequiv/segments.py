"""Segmentation: carving the version pair into independently verifiable regions.

A segmentation is a set of disjoint windows that contain all edits such that no
valid covering window spans two of them. Two constructions are provided: the
cheap one cuts at mapped operator pairs no verifier supports; the expensive one
unions each edit's valid covering windows and merges overlapping unions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .decompose import (Counters, Decomposition, EvSuite, SearchSettings,
                        union_of_valid_covering_windows, verify_pair_baseline)
from .ev import Truth, Verdict
from .ranking import segment_score
from .windows import VersionPair, Window, close_over_mapping

Segment = Window


@dataclass(frozen=True)
class Segmentation:
    segments: tuple[Segment, ...]
    unverifiable: tuple[Segment, ...] = ()  # edits with no valid window at all

    def __iter__(self):
        return iter(self.segments)


def _joint_components(pair: VersionPair, p_uni: set[str], q_uni: set[str]) -> list[tuple[set[str], set[str]]]:
    """Connected components over both versions at once, honoring the mapping."""
    m = pair.mapping
    nodes = [("p", x) for x in sorted(p_uni)] + [("q", x) for x in sorted(q_uni)]
    seen: set[tuple[str, str]] = set()
    comps = []
    for node in nodes:
        if node in seen:
            continue
        comp_p: set[str] = set()
        comp_q: set[str] = set()
        stack = [node]
        seen.add(node)
        while stack:
            side, op = stack.pop()
            nxt: list[tuple[str, str]] = []
            if side == "p":
                comp_p.add(op)
                nxt.extend(("p", x) for x in pair.p.neighbors_undirected(op) if x in p_uni)
                partner = m.partner_in_q(op)
                if partner and partner in q_uni:
                    nxt.append(("q", partner))
            else:
                comp_q.add(op)
                nxt.extend(("q", x) for x in pair.q.neighbors_undirected(op) if x in q_uni)
                partner = m.partner_in_p(op)
                if partner and partner in p_uni:
                    nxt.append(("p", partner))
            for n in nxt:
                if n not in seen:
                    seen.add(n)
                    stack.append(n)
        comps.append((comp_p, comp_q))
    return comps


def segmentation_by_unsupported_ops(pair: VersionPair, suite: EvSuite) -> Segmentation:
    """Mapped operator pairs rejected by every verifier become segment cuts."""
    m = pair.mapping
    boundary_p: set[str] = set()
    boundary_q: set[str] = set()
    for p_id, q_id in m.pairs:
        probe = Window(frozenset({p_id}), frozenset({q_id}), m)
        if suite.dead(probe):
            boundary_p.add(p_id)
            boundary_q.add(q_id)
    p_uni = set(pair.p.op_ids) - boundary_p
    q_uni = set(pair.q.op_ids) - boundary_q

    segments = []
    for comp_p, comp_q in _joint_components(pair, p_uni, q_uni):
        cp, cq = close_over_mapping(pair, comp_p, comp_q)
        if cp != comp_p or cq != comp_q:
            # A mapped pair straddles the cut; fall back to one segment.
            return Segmentation((pair.all_pairs_window,))
        has_units = any(u.p_ops <= cp and u.q_ops <= cq and (u.p_ops or u.q_ops)
                        for u in pair.units)
        if has_units:
            segments.append(Window(frozenset(comp_p), frozenset(comp_q), m))
    for u in pair.units:
        if not any(u.p_ops <= s.p_ops and u.q_ops <= s.q_ops for s in segments):
            # Unit straddles a boundary (edit on an unsupported operator).
            return Segmentation((pair.all_pairs_window,))
    if not segments:
        return Segmentation((pair.all_pairs_window,))
    return Segmentation(tuple(sorted(segments, key=lambda w: w.key)))


def segmentation_by_mcw_union(pair: VersionPair, suite: EvSuite,
                              settings: SearchSettings = SearchSettings()) -> Segmentation:
    """Union the valid covering windows of each edit; overlapping unions merge."""
    regions: list[Window] = []
    unverifiable: list[Window] = []
    from .windows import minimal_covering_window
    for unit in pair.units:
        u = union_of_valid_covering_windows(pair, unit, suite, settings)
        if u is None:
            unverifiable.append(minimal_covering_window(pair, unit))
        else:
            regions.append(u)
    changed = True
    while changed:
        changed = False
        for i in range(len(regions)):
            for j in range(i + 1, len(regions)):
                a, b = regions[i], regions[j]
                if a.p_ops & b.p_ops or a.q_ops & b.q_ops:
                    merged = Window(a.p_ops | b.p_ops, a.q_ops | b.q_ops, pair.mapping)
                    regions = [r for k, r in enumerate(regions) if k not in (i, j)]
                    regions.append(merged)
                    changed = True
                    break
            if changed:
                break
    return Segmentation(tuple(sorted(regions, key=lambda w: w.key)),
                        tuple(sorted(unverifiable, key=lambda w: w.key)))


def rank_segment(pair: VersionPair, s: Segment) -> int:
    ops = max(len(s.p_ops), len(s.q_ops))
    edits = sum(1 for u in pair.units if u.p_ops <= s.p_ops and u.q_ops <= s.q_ops)
    return segment_score(ops, edits)


def verify_with_segments(pair: VersionPair, suite: EvSuite, segmentation: Segmentation,
                         settings: SearchSettings = SearchSettings(),
                         counters: Optional[Counters] = None
                         ) -> tuple[Verdict, Optional[Decomposition]]:
    """Verify segments smallest first, stopping at the first non-True segment."""
    counters = counters or suite.counters
    if segmentation.unverifiable:
        return Verdict(Truth.UNKNOWN, "an edit admits no valid covering window"), None
    ordered = sorted(segmentation.segments, key=lambda s: (rank_segment(pair, s), s.key))
    witness_windows: list[Window] = []
    witness_cover: set = set()
    last: Optional[tuple[Verdict, Optional[Decomposition]]] = None
    whole = pair.all_pairs_window
    for seg in ordered:
        region = None if seg.key == whole.key else seg
        verdict, d = verify_pair_baseline(pair, suite, settings, counters, region=region)
        last = (verdict, d)
        if verdict.truth is not Truth.TRUE:
            break
        if d is not None:
            witness_windows.extend(d.windows)
            witness_cover |= set(d.cover_keys)
    assert last is not None
    verdict, d = last
    if verdict.is_true:
        witness = Decomposition(tuple(sorted(witness_windows, key=lambda w: w.key)),
                                frozenset(witness_cover)) if witness_windows else None
        return verdict, witness
    if verdict.is_false and len(segmentation.segments) == 1 \
            and segmentation.segments[0].key == whole.key:
        return verdict, d
    if verdict.is_false:
        return Verdict(Truth.UNKNOWN, "inequivalent segment short of the whole pair",
                       verdict.witness), None
    return verdict, None
