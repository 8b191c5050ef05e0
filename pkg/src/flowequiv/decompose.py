"""Decomposition search: proving version-pair equivalence window by window.

The baseline search starts from the decomposition with every operator as its
own window and repeatedly merges a covering window with a neighbor window when
the union is acceptable, verifying each fully-maximized decomposition with the
given verifier(s). Windows are explored once; verdicts and restriction checks
are cached per window.

Expansion policy: with a restriction-monotonic verifier a merge is attempted
only when the union is valid. Verifiers whose restrictions are not monotonic
(equal-count rules can be healed by growing) get a different treatment:
merging continues through invalid-but-repairable unions and a window counts as
maximal when no single merge yields a valid window, while unions containing an
unrepairable violation are dropped outright.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from functools import cached_property
from heapq import heappop, heappush
from typing import Optional, Sequence

from .ev import EvDescriptor, RestrictionResult, RuleViolation, Truth, Verdict
from .ranking import decomposition_score
from .windows import (VersionPair, Window, WindowError, WindowKey, make_window,
                      minimal_covering_window, neighbors, expand, window_covers)
from .edits import EditUnit


@dataclass(frozen=True)
class SearchSettings:
    ranking: bool = False
    pruning: bool = False
    memoize: bool = True
    non_monotonic_expansion: bool = True
    backtrack: bool = False
    deadline: Optional[float] = None  # time.monotonic() timestamp


class Counters:
    def __init__(self):
        self.decompositions_explored = 0
        self.ev_calls = 0
        self.windows_pruned = 0
        self.mappings_tried = 0

    def snapshot(self) -> dict[str, int]:
        return {
            "decompositions_explored": self.decompositions_explored,
            "ev_calls": self.ev_calls,
            "windows_pruned": self.windows_pruned,
            "mappings_tried": self.mappings_tried,
        }


@dataclass(frozen=True)
class SearchReport:
    verdict: Verdict
    decompositions_explored: int
    ev_calls: int
    windows_pruned: int
    mappings_tried: int
    timed_out: bool = False
    witness: Optional[object] = None


class EvSuite:
    """Ordered verifiers sharing restriction and verdict caches.

    A window is verified by the first verifier whose restrictions it satisfies
    and that answers something other than Unknown.
    """

    def __init__(self, evs: Sequence[EvDescriptor], pair: VersionPair, counters: Counters):
        if not evs:
            raise ValueError("at least one verifier required")
        self.evs = tuple(evs)
        self.pair = pair
        self.counters = counters
        self._checks: dict[WindowKey, tuple[RestrictionResult, ...]] = {}
        self._verdicts: dict[WindowKey, Verdict] = {}

    @property
    def monotonic(self) -> bool:
        return all(ev.restriction_monotonic for ev in self.evs)

    @property
    def can_prove_inequivalence(self) -> bool:
        return any(ev.can_prove_inequivalence for ev in self.evs)

    def check(self, w: Window) -> tuple[RestrictionResult, ...]:
        got = self._checks.get(w.key)
        if got is None:
            if w.empty_side:
                empty = RestrictionResult(False, (RuleViolation(
                    "empty-side", "a window side is empty", True),))
                got = tuple(empty for _ in self.evs)
            else:
                got = tuple(ev.is_valid_window(w, self.pair) for ev in self.evs)
            self._checks[w.key] = got
        return got

    def any_valid(self, w: Window) -> bool:
        return any(r.ok for r in self.check(w))

    def dead(self, w: Window) -> bool:
        """No verifier can ever accept this window or any super-window."""
        return all((not r.ok) and r.dead for r in self.check(w))

    def verify(self, w: Window) -> Verdict:
        got = self._verdicts.get(w.key)
        if got is not None:
            return got
        verdict = Verdict(Truth.UNKNOWN, "no verifier accepts this window")
        for ev, res in zip(self.evs, self.check(w)):
            if not res.ok:
                continue
            self.counters.ev_calls += 1
            v = ev.verify_window(w, self.pair)
            if v.truth is not Truth.UNKNOWN:
                verdict = v
                break
            verdict = v
        self._verdicts[w.key] = verdict
        return verdict


def dispatch_multi_ev(suite: EvSuite, w: Window) -> Verdict:
    """Verify ``w`` with the first satisfying verifier (first non-Unknown wins)."""
    return suite.verify(w)


def may_expand_into(suite: EvSuite, settings: SearchSettings, union: Window) -> bool:
    """Whether the search may keep growing into ``union``."""
    if suite.any_valid(union):
        return True
    if settings.non_monotonic_expansion and not suite.monotonic:
        return not suite.dead(union)
    return False


def backtrack_verify(chain: Sequence[Window], suite: EvSuite) -> Verdict:
    """Re-verify recorded sub-windows, largest first; first non-Unknown wins."""
    for w in chain:
        if w.empty_side or not suite.any_valid(w):
            continue
        v = suite.verify(w)
        if v.truth is not Truth.UNKNOWN:
            return v
    return Verdict(Truth.UNKNOWN, "all backtracked windows unknown")


def _timed_out(settings: SearchSettings) -> bool:
    return settings.deadline is not None and time.monotonic() > settings.deadline


# ---------------------------------------------------------------------------
# Algorithm for a single edit: grow covering windows, verify maximal ones.


def verify_single_edit(pair: VersionPair, unit: EditUnit, suite: EvSuite,
                       settings: SearchSettings = SearchSettings()) -> Verdict:
    whole = pair.all_pairs_window
    start = minimal_covering_window(pair, unit)
    frontier = [start]
    seen: set[WindowKey] = {start.key}
    parent: dict[WindowKey, Window] = {}

    def chain_of(w: Window) -> list[Window]:
        out = []
        cur = parent.get(w.key)
        while cur is not None:
            out.append(cur)
            cur = parent.get(cur.key)
        return out

    while frontier:
        if _timed_out(settings):
            return Verdict(Truth.UNKNOWN, "timeout")
        w = frontier.pop(0)
        grew_valid = False
        for cand in neighbors(pair, w):
            try:
                nxt = expand(pair, w, cand)
            except WindowError:
                continue
            if not may_expand_into(suite, settings, nxt):
                continue
            if suite.any_valid(nxt):
                grew_valid = True
            if nxt.key not in seen:
                seen.add(nxt.key)
                parent[nxt.key] = w
                frontier.append(nxt)
        # Maximal: no single growth step yields another valid window. Under a
        # monotonic policy nothing invalid was enqueued anyway.
        if not grew_valid and not w.empty_side and suite.any_valid(w):
            v = suite.verify(w)
            if v.truth is Truth.UNKNOWN and settings.backtrack \
                    and any(ev.relaxed_restrictions for ev in suite.evs):
                v = backtrack_verify(chain_of(w), suite)
            if v.is_true:
                return Verdict(Truth.TRUE, f"window {w.key} equivalent", v.witness)
            if v.is_false and w.key == whole.key:
                return v
    return Verdict(Truth.UNKNOWN, "no covering window could be verified")


def find_mcws(pair: VersionPair, unit: EditUnit, suite: EvSuite,
              settings: SearchSettings = SearchSettings()) -> list[Window]:
    """All maximal valid covering windows of one edit (duplicates removed)."""
    start = minimal_covering_window(pair, unit)
    frontier = [start]
    seen: set[WindowKey] = {start.key}
    maximal: dict[WindowKey, Window] = {}
    while frontier:
        w = frontier.pop(0)
        grew_valid = False
        for cand in neighbors(pair, w):
            try:
                nxt = expand(pair, w, cand)
            except WindowError:
                continue
            if not may_expand_into(suite, settings, nxt):
                continue
            if suite.any_valid(nxt):
                grew_valid = True
            if nxt.key not in seen:
                seen.add(nxt.key)
                frontier.append(nxt)
        if not grew_valid and not w.empty_side and suite.any_valid(w):
            maximal[w.key] = w
    # Drop any window properly contained in another collected window.
    out = []
    wins = list(maximal.values())
    for w in wins:
        if any(w is not o and w.p_ops <= o.p_ops and w.q_ops <= o.q_ops for o in wins):
            continue
        out.append(w)
    return sorted(out, key=lambda w: w.key)


def union_of_valid_covering_windows(pair: VersionPair, unit: EditUnit, suite: EvSuite,
                                    settings: SearchSettings = SearchSettings()
                                    ) -> Optional[Window]:
    """Union of every valid covering window of the unit (None when there is none)."""
    start = minimal_covering_window(pair, unit)
    frontier = [start]
    seen: set[WindowKey] = {start.key}
    p_all: set[str] = set()
    q_all: set[str] = set()
    found = False
    while frontier:
        w = frontier.pop(0)
        if suite.any_valid(w):
            found = True
            p_all |= w.p_ops
            q_all |= w.q_ops
        for cand in neighbors(pair, w):
            try:
                nxt = expand(pair, w, cand)
            except WindowError:
                continue
            if not may_expand_into(suite, settings, nxt):
                continue
            if nxt.key not in seen:
                seen.add(nxt.key)
                frontier.append(nxt)
    if not found:
        return None
    return Window(frozenset(p_all), frozenset(q_all), pair.mapping)


# ---------------------------------------------------------------------------
# Decompositions


@dataclass(frozen=True)
class Decomposition:
    windows: tuple[Window, ...]
    cover_keys: frozenset[WindowKey]

    @cached_property
    def key(self) -> frozenset[WindowKey]:
        return frozenset(w.key for w in self.windows)

    def covering(self) -> list[Window]:
        return [w for w in self.windows if w.key in self.cover_keys]

    def non_covering_singletons(self) -> int:
        return sum(1 for w in self.windows
                   if w.key not in self.cover_keys and w.size() == 1)


class DecompositionError(Exception):
    pass


def _universe(pair: VersionPair, region: Optional[Window]) -> tuple[frozenset[str], frozenset[str]]:
    if region is None:
        return frozenset(pair.p.op_ids), frozenset(pair.q.op_ids)
    return region.p_ops, region.q_ops


def units_in_region(pair: VersionPair, region: Optional[Window]) -> list[EditUnit]:
    p_uni, q_uni = _universe(pair, region)
    out = []
    for u in pair.units:
        if u.p_ops <= p_uni and u.q_ops <= q_uni:
            out.append(u)
        elif u.p_ops & p_uni or u.q_ops & q_uni:
            raise DecompositionError(f"unit {u.label} straddles the region boundary")
    return out


def initial_decomposition(pair: VersionPair, region: Optional[Window] = None) -> Decomposition:
    """One singleton window per mapped pair / unmapped operator, with the
    windows touched by a multi-operator edit unit pre-merged."""
    p_uni, q_uni = _universe(pair, region)
    if not p_uni and not q_uni:
        raise DecompositionError("empty pair")
    m = pair.mapping
    windows: list[Window] = []
    for p_id in sorted(p_uni):
        q_id = m.partner_in_q(p_id)
        windows.append(Window(frozenset({p_id}), frozenset({q_id} if q_id else ()), m))
    for q_id in sorted(q_uni):
        if m.partner_in_p(q_id) is None:
            windows.append(Window(frozenset(), frozenset({q_id}), m))

    for unit in units_in_region(pair, region):
        seed = minimal_covering_window(pair, unit, universe=(p_uni, q_uni))
        merged_p, merged_q = set(seed.p_ops), set(seed.q_ops)
        rest: list[Window] = []
        for w in windows:
            if w.p_ops & merged_p or w.q_ops & merged_q:
                merged_p |= w.p_ops
                merged_q |= w.q_ops
            else:
                rest.append(w)
        windows = rest + [Window(frozenset(merged_p), frozenset(merged_q), m)]

    windows.sort(key=lambda w: w.key)
    cover = frozenset(w.key for w in windows
                      if any(window_covers(w, u) for u in units_in_region(pair, region)))
    return Decomposition(tuple(windows), cover)


def decomposition_is_valid(pair: VersionPair, d: Decomposition,
                           region: Optional[Window] = None) -> list[str]:
    """Structural checks used by tests: disjointness, unit coverage, full union."""
    bad: list[str] = []
    seen_p: set[str] = set()
    seen_q: set[str] = set()
    for w in d.windows:
        if w.p_ops & seen_p or w.q_ops & seen_q:
            bad.append(f"windows overlap at {w.key}")
        seen_p |= w.p_ops
        seen_q |= w.q_ops
    p_uni, q_uni = _universe(pair, region)
    if seen_p != p_uni or seen_q != q_uni:
        bad.append("union of windows is not the whole pair")
    for u in units_in_region(pair, region):
        holders = [w for w in d.windows if window_covers(w, u)]
        touched = [w for w in d.windows if (w.p_ops & u.p_ops) or (w.q_ops & u.q_ops)]
        if len(holders) != 1 or len(touched) != 1:
            bad.append(f"unit {u.label} not covered by exactly one window")
    return bad


def _adjacent_windows(pair: VersionPair, d: Decomposition, w: Window) -> list[Window]:
    out = []
    p_adj: set[str] = set()
    q_adj: set[str] = set()
    for op in w.p_ops:
        p_adj |= pair.p.neighbors_undirected(op)
    for op in w.q_ops:
        q_adj |= pair.q.neighbors_undirected(op)
    for other in d.windows:
        if other.key == w.key:
            continue
        if other.p_ops & p_adj or other.q_ops & q_adj:
            out.append(other)
    return out


def _merge_windows(pair: VersionPair, a: Window, b: Window) -> Optional[Window]:
    try:
        return make_window(pair, a.p_ops | b.p_ops, a.q_ops | b.q_ops, allow_empty_side=True)
    except WindowError:
        return None


def rank_decomposition(d: Decomposition) -> float:
    cover = d.covering()
    # A decomposition can transiently hold zero covering windows; score it by
    # the singleton count alone.
    avg = sum(w.size() for w in cover) / len(cover) if cover else 0.0
    return decomposition_score(avg, d.non_covering_singletons())


def verify_pair_baseline(pair: VersionPair, suite: EvSuite,
                         settings: SearchSettings = SearchSettings(),
                         counters: Optional[Counters] = None,
                         region: Optional[Window] = None) -> tuple[Verdict, Optional[Decomposition]]:
    """Multi-edit search over decompositions within ``region`` (default whole pair).

    Returns the verdict plus the witness decomposition on True. False requires
    a decomposition that is a single window spanning the entire version pair,
    proven inequivalent by a verifier capable of that.
    """
    counters = counters or suite.counters
    units = units_in_region(pair, region)
    if not units:
        return Verdict(Truth.TRUE, "no edits inside the region"), None
    whole = pair.all_pairs_window

    d0 = initial_decomposition(pair, region)
    seq = itertools.count()
    heap: list[tuple[float, int, Decomposition]] = []

    def push(d: Decomposition):
        prio = -rank_decomposition(d) if settings.ranking else float(next(seq))
        heappush(heap, (prio, next(seq), d))

    push(d0)
    explored: set[frozenset[WindowKey]] = {d0.key}
    poisoned: set[WindowKey] = set()
    parent: dict[WindowKey, Window] = {}
    non_mono = settings.non_monotonic_expansion and not suite.monotonic

    def chain_of(w: Window) -> list[Window]:
        out = []
        cur = parent.get(w.key)
        while cur is not None:
            out.append(cur)
            cur = parent.get(cur.key)
        return out

    while heap:
        if _timed_out(settings):
            return Verdict(Truth.UNKNOWN, "timeout"), None
        _, _, d = heappop(heap)
        if settings.pruning and any(k in poisoned for k in d.cover_keys):
            counters.windows_pruned += 1
            continue
        counters.decompositions_explored += 1

        all_maximal = True
        for w in d.covering():
            merged_valid = False
            for other in _adjacent_windows(pair, d, w):
                union = _merge_windows(pair, w, other)
                if union is None:
                    continue
                if not may_expand_into(suite, settings, union):
                    continue
                if suite.any_valid(union):
                    merged_valid = True
                rest = [x for x in d.windows if x.key not in (w.key, other.key)]
                cover = (d.cover_keys - {w.key, other.key}) | {union.key}
                nd = Decomposition(tuple(sorted(rest + [union], key=lambda x: x.key)), cover)
                if settings.memoize and nd.key in explored:
                    continue
                explored.add(nd.key)
                parent.setdefault(union.key, w)
                push(nd)
            if merged_valid:
                all_maximal = False
            elif settings.pruning and suite.can_prove_inequivalence \
                    and not w.empty_side and suite.any_valid(w):
                # Window just found maximal: test it right away so provably
                # inequivalent lines of descent can be dropped.
                if suite.verify(w).is_false:
                    poisoned.add(w.key)

        if all_maximal:
            ok = True
            for w in d.covering():
                if w.empty_side or not suite.any_valid(w):
                    ok = False
                    break
                v = suite.verify(w)
                if v.truth is Truth.UNKNOWN and settings.backtrack \
                        and any(ev.relaxed_restrictions for ev in suite.evs):
                    v = backtrack_verify(chain_of(w), suite)
                if v.is_true:
                    continue
                ok = False
                if v.is_false and len(d.windows) == 1 and d.windows[0].key == whole.key:
                    return v, d
                break
            if ok:
                return Verdict(Truth.TRUE, "all covering windows equivalent"), d

    return Verdict(Truth.UNKNOWN, "decompositions exhausted"), None
