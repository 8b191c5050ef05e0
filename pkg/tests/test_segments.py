from __future__ import annotations

import itertools

import pytest

from flowequiv.build import chain_workflow, filter_, project, sink, sort, source
from flowequiv.corpus import fx_run, segmented_pair
from flowequiv.decompose import Counters, EvSuite, SearchSettings, verify_pair_baseline
from flowequiv.edits import EditMapping, edit_units
from flowequiv.ev import Truth, canonical_ev
from flowequiv.oracle import oracle_ev
from flowequiv.predicates import col, gt, lt
from flowequiv.ranking import segment_score
from flowequiv.segments import (rank_segment, segmentation_by_mcw_union,
                                segmentation_by_unsupported_ops,
                                verify_with_segments)
from flowequiv.windows import (VersionPair, WindowError, make_window,
                               window_covers)

SCHEMA = [("a", "int"), ("b", "int")]


def pair_of(p, q, mapping=None):
    m = mapping or EditMapping.of((i, i) for i in sorted(p.op_ids & q.op_ids))
    return VersionPair(p, q, m, edit_units(p, q, m))


def suite_for(pair, evs=None):
    return EvSuite(evs or [canonical_ev()], pair, Counters())


def insert_project(wf, after, name):
    from flowequiv.corpus import _only_consumer, _replace_links
    from flowequiv.model import Link
    target = _only_consumer(wf, after)
    return _replace_links(wf, [target],
                          [Link(after, 0, name, 0), Link(name, 0, target.dst, target.dst_port)],
                          add_ops=[project(name)], new_id=wf.id + "'")


class TestBoundarySegmentation:
    def test_one_sort_two_segments(self):
        f = segmented_pair()
        pair = f.version_pair()
        seg = segmentation_by_unsupported_ops(pair, suite_for(pair))
        assert len(seg.segments) == 2
        assert all("st" not in s.p_ops for s in seg.segments)

    def test_no_unsupported_single_segment(self):
        p = chain_workflow("p", [source("s", SCHEMA), filter_("f", gt(col("a"), 1)), sink("k")])
        q = insert_project(p, "f", "e1")
        pair = pair_of(p, q)
        seg = segmentation_by_unsupported_ops(pair, suite_for(pair))
        assert len(seg.segments) == 1
        assert seg.segments[0].key == pair.all_pairs_window.key

    def two_sort_pair(self):
        ops = [source("s", SCHEMA),
               filter_("f1", gt(col("a"), 0)),
               sort("o1", [("a", True)]),
               filter_("f2", lt(col("b"), 9)),
               sort("o2", [("b", True)]),
               filter_("f3", gt(col("b"), -9)),
               sink("k")]
        p = chain_workflow("p2", ops)
        q = insert_project(insert_project(insert_project(p, "f1", "e1"), "f2", "e2"), "f3", "e3")
        return pair_of(p, q)

    def test_two_sorts_three_segments(self):
        pair = self.two_sort_pair()
        seg = segmentation_by_unsupported_ops(pair, suite_for(pair))
        assert len(seg.segments) == 3

    def test_no_valid_covering_window_crosses_segments(self):
        # Exhaustive check of the segmentation contract on a small pair:
        # every verifier-valid covering window stays within one segment.
        pair = self.two_sort_pair()
        suite = suite_for(pair)
        seg = segmentation_by_unsupported_ops(pair, suite)
        mapped = [(p, q) for p, q in pair.mapping.pairs]
        adds = sorted(pair.unmapped_q)
        atoms = [({p}, {q}) for p, q in mapped] + [(set(), {a}) for a in adds]
        for r in range(1, len(atoms) + 1):
            for combo in itertools.combinations(atoms, r):
                p_ops = set().union(*(c[0] for c in combo))
                q_ops = set().union(*(c[1] for c in combo))
                try:
                    w = make_window(pair, p_ops, q_ops)
                except WindowError:
                    continue
                if not suite.any_valid(w):
                    continue
                if not any(window_covers(w, u) for u in pair.units):
                    continue
                inside = [s for s in seg.segments
                          if w.p_ops <= s.p_ops and w.q_ops <= s.q_ops]
                assert inside, f"valid covering window {w.key} crosses a segment boundary"


class TestMcwUnionSegmentation:
    def test_disjoint_unions_stay_apart(self):
        pair = segmented_pair().version_pair()
        seg = segmentation_by_mcw_union(pair, suite_for(pair))
        assert len(seg.segments) == 2

    def test_adjacent_edits_merge(self):
        p = chain_workflow("p", [source("s", SCHEMA),
                                 filter_("f1", gt(col("a"), 1)),
                                 filter_("f2", lt(col("b"), 9)),
                                 sink("k")])
        q = insert_project(insert_project(p, "f1", "e1"), "f2", "e2")
        pair = pair_of(p, q)
        seg = segmentation_by_mcw_union(pair, suite_for(pair))
        assert len(seg.segments) == 1

    def test_single_edit_single_segment(self):
        pair = fx_run().version_pair()
        from flowequiv.corpus import fx_run_single_edit
        pair = fx_run_single_edit("fh").version_pair()
        seg = segmentation_by_mcw_union(pair, suite_for(pair))
        assert len(seg.segments) == 1
        s = seg.segments[0]
        assert {"ag", "fk", "oj"} <= set(s.p_ops)

    def test_unverifiable_edit_flagged(self):
        from flowequiv.corpus import fx_udf_edit
        pair = fx_udf_edit().version_pair()
        seg = segmentation_by_mcw_union(pair, suite_for(pair))
        assert seg.unverifiable


class TestRanking:
    def test_paper_arithmetic(self):
        assert segment_score(4, 1) == 5
        assert segment_score(3, 2) == 5

    def test_segment_rank_uses_larger_side_plus_edits(self):
        f = segmented_pair()
        pair = f.version_pair()
        seg = segmentation_by_unsupported_ops(pair, suite_for(pair))
        scores = sorted(rank_segment(pair, s) for s in seg.segments)
        # Each segment: 3 operators on the larger side plus 1 edit.
        assert scores == [4, 4]

    def test_nonpositive_opcount_rejected(self):
        with pytest.raises(ValueError):
            segment_score(0, 1)


class TestVerifyWithSegments:
    def test_all_segments_true(self):
        f = segmented_pair()
        pair = f.version_pair()
        suite = suite_for(pair)
        seg = segmentation_by_unsupported_ops(pair, suite)
        v, d = verify_with_segments(pair, suite, seg)
        assert v.is_true and d is not None

    def test_early_exit_on_unknown(self):
        # First (smallest) segment fails: the second must not be explored.
        p = chain_workflow("p", [source("s", SCHEMA),
                                 filter_("f1", gt(col("a"), 1)),
                                 sort("st", [("a", True)]),
                                 filter_("f2", lt(col("b"), 9)),
                                 filter_("f3", gt(col("b"), -9)),
                                 sink("k")])
        # Left edit: constant change (never verifiable); right edit: benign.
        q1 = chain_workflow("p", [source("s", SCHEMA),
                                  filter_("f1", gt(col("a"), 2)),
                                  sort("st", [("a", True)]),
                                  filter_("f2", lt(col("b"), 9)),
                                  filter_("f3", gt(col("b"), -9)),
                                  sink("k")])
        q = insert_project(q1, "f2", "e2")
        pair = pair_of(p, q)
        suite = suite_for(pair)
        seg = segmentation_by_unsupported_ops(pair, suite)
        assert len(seg.segments) == 2
        small_first = sorted(seg.segments, key=lambda s: (rank_segment(pair, s), s.key))
        v, _ = verify_with_segments(pair, suite, seg)
        assert v.truth is Truth.UNKNOWN
        # The failing segment is ranked first, so only it was searched.
        failing = small_first[0]
        assert "f1" in failing.p_ops

    def test_single_whole_pair_segment_false_with_oracle(self):
        p = chain_workflow("p", [source("s", SCHEMA), filter_("f", gt(col("a"), 5)), sink("k")])
        q = chain_workflow("q", [source("s", SCHEMA), filter_("f", gt(col("a"), 6)), sink("k")])
        pair = pair_of(p, q)
        suite = suite_for(pair, [oracle_ev(instances=40, seed=1)])
        seg = segmentation_by_unsupported_ops(pair, suite)
        assert len(seg.segments) == 1
        v, _ = verify_with_segments(pair, suite, seg)
        assert v.is_false


def test_segmentation_reduces_exploration():
    f = segmented_pair()
    pair = f.version_pair()
    with_seg = Counters()
    suite = EvSuite([canonical_ev()], pair, with_seg)
    seg = segmentation_by_unsupported_ops(pair, suite)
    v1, _ = verify_with_segments(pair, suite, seg, SearchSettings(), with_seg)
    without = Counters()
    suite2 = EvSuite([canonical_ev()], pair, without)
    v2, _ = verify_pair_baseline(pair, suite2, SearchSettings(), without)
    assert v1.is_true and v2.is_true
    assert with_seg.decompositions_explored < without.decompositions_explored
