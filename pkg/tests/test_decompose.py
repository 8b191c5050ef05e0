from __future__ import annotations

import pytest

from flowequiv.build import chain_workflow, filter_, project, sink, sort, source
from flowequiv.corpus import (fx_run, fx_run_single_edit, fx_swap, fx_taxi,
                              fx_udf_edit)
from flowequiv.decompose import (Counters, DecompositionError, EvSuite,
                                 SearchSettings, backtrack_verify,
                                 decomposition_is_valid, initial_decomposition,
                                 may_expand_into, verify_pair_baseline,
                                 verify_single_edit)
from flowequiv.edits import EditMapping, edit_units
from flowequiv.ev import Truth, canonical_ev
from flowequiv.oracle import oracle_ev
from flowequiv.predicates import col, gt, lt
from flowequiv.windows import VersionPair, Window, make_window

SCHEMA = [("x", "int"), ("y", "int")]


def pair_of(p, q, mapping=None):
    m = mapping or EditMapping.of((i, i) for i in sorted(p.op_ids & q.op_ids))
    return VersionPair(p, q, m, edit_units(p, q, m))


def suite_for(pair, evs=None):
    return EvSuite(evs or [canonical_ev()], pair, Counters())


class TestSingleEdit:
    def test_fx_run_single_add_verifies(self):
        pair = fx_run_single_edit("fh").version_pair()
        suite = suite_for(pair)
        v = verify_single_edit(pair, pair.units[0], suite)
        assert v.is_true

    def test_udf_edit_unknown_without_ev_calls(self):
        pair = fx_udf_edit().version_pair()
        suite = suite_for(pair)
        v = verify_single_edit(pair, pair.units[0], suite)
        assert v.truth is Truth.UNKNOWN
        assert suite.counters.ev_calls == 0

    def test_oracle_proves_inequivalence_on_whole_pair(self):
        p = chain_workflow("p", [source("s", SCHEMA), filter_("f", gt(col("x"), 5)), sink("k")])
        q = chain_workflow("q", [source("s", SCHEMA), filter_("f", gt(col("x"), 6)), sink("k")])
        pair = pair_of(p, q)
        suite = suite_for(pair, [oracle_ev(instances=40, seed=1)])
        v = verify_single_edit(pair, pair.units[0], suite)
        assert v.is_false and v.witness is not None


class TestInitialDecomposition:
    def test_one_window_per_operator(self):
        pair = fx_run().version_pair()
        d = initial_decomposition(pair)
        # 10 mapped pairs, 1 delete singleton, 2 add singletons.
        assert len(d.windows) == 13
        assert decomposition_is_valid(pair, d) == []
        assert len(d.cover_keys) == 3

    def test_added_op_is_q_only_singleton(self):
        pair = fx_run_single_edit("fh").version_pair()
        d = initial_decomposition(pair)
        q_only = [w for w in d.windows if not w.p_ops]
        assert len(q_only) == 1 and q_only[0].q_ops == frozenset({"fh"})

    def test_empty_pair_rejected(self):
        pair = fx_run().version_pair()
        empty = Window(frozenset(), frozenset(), pair.mapping)
        with pytest.raises(DecompositionError):
            initial_decomposition(pair, region=empty)


class TestBaseline:
    def test_empty_delta_is_immediately_true(self):
        wf = chain_workflow("w", [source("s", SCHEMA), filter_("f", gt(col("x"), 1)), sink("k")])
        pair = pair_of(wf, wf)
        suite = suite_for(pair)
        v, _ = verify_pair_baseline(pair, suite)
        assert v.is_true
        assert suite.counters.decompositions_explored == 0
        assert suite.counters.ev_calls == 0

    def test_fx_run_two_covering_windows(self):
        pair = fx_run().version_pair()
        suite = suite_for(pair)
        v, d = verify_pair_baseline(pair, suite)
        assert v.is_true
        assert d is not None and len(d.cover_keys) == 2
        assert decomposition_is_valid(pair, d) == []

    def test_fx_taxi_never_true(self):
        pair = fx_taxi().version_pair()
        v, _ = verify_pair_baseline(pair, suite_for(pair))
        assert v.truth is Truth.UNKNOWN

    def test_memoization_changes_counters_not_verdict(self):
        pair = fx_run_single_edit("fh").version_pair()
        runs = {}
        for memo in (True, False):
            suite = suite_for(pair)
            v, _ = verify_pair_baseline(pair, suite, SearchSettings(memoize=memo))
            runs[memo] = (v.truth, suite.counters.decompositions_explored)
        assert runs[True][0] == runs[False][0]
        assert runs[True][1] <= runs[False][1]


class TestNonMonotonicExpansion:
    def test_swap_example_needs_expansion_through_invalid(self):
        pair = fx_swap().version_pair()
        on = SearchSettings(non_monotonic_expansion=True)
        off = SearchSettings(non_monotonic_expansion=False)
        v_on, _ = verify_pair_baseline(pair, suite_for(pair), on)
        v_off, _ = verify_pair_baseline(pair, suite_for(pair), off)
        assert v_on.is_true
        assert v_off.truth is Truth.UNKNOWN

    def test_policy_degenerates_for_monotonic_ev(self):
        pair = fx_swap().version_pair()
        suite = suite_for(pair, [oracle_ev(instances=10, seed=0)])
        w = make_window(pair, {"proj"}, {"agg2"})
        grown = make_window(pair, {"proj", "filt"}, {"agg2", "filt2"})
        assert not may_expand_into(suite, SearchSettings(non_monotonic_expansion=True), grown) \
            or suite.any_valid(grown)

    def test_dead_windows_stop_expansion(self):
        pair = fx_udf_edit().version_pair()
        suite = suite_for(pair)
        w = make_window(pair, {"u"}, {"u"})
        assert suite.dead(w)
        assert not may_expand_into(suite, SearchSettings(), w)


class TestBacktracking:
    def make_pair(self):
        # The maximal window swallows a Sort only the relaxed verifier accepts
        # structurally; its recorded sub-window is plain SPJ and verifies.
        p = chain_workflow("p", [source("s", SCHEMA),
                                 filter_("a", gt(col("x"), 1)),
                                 filter_("b", lt(col("y"), 7)),
                                 sort("o", [("x", True)]), sink("k")])
        q = chain_workflow("q", [source("s", SCHEMA),
                                 filter_("a", lt(col("y"), 7)),
                                 filter_("b", gt(col("x"), 1)),
                                 sort("o", [("x", True)]), sink("k")])
        return pair_of(p, q)

    def test_backtrack_recovers_true(self):
        pair = self.make_pair()
        suite = suite_for(pair, [canonical_ev(relaxed=True)])
        v, _ = verify_pair_baseline(pair, suite, SearchSettings(backtrack=True))
        assert v.is_true

    def test_without_backtracking_unknown(self):
        pair = self.make_pair()
        suite = suite_for(pair, [canonical_ev(relaxed=True)])
        v, _ = verify_pair_baseline(pair, suite, SearchSettings(backtrack=False))
        assert v.truth is Truth.UNKNOWN

    def test_backtrack_all_unknown(self):
        pair = self.make_pair()
        suite = suite_for(pair, [canonical_ev(relaxed=True)])
        chain = [make_window(pair, {"o"}, {"o"})]
        assert backtrack_verify(chain, suite).truth is Truth.UNKNOWN


def test_verdict_true_survives_oracle(small_corpus):
    from flowequiv.oracle import find_mismatch
    from flowequiv.windows import full_pair_context
    checked = 0
    for f in small_corpus[:12]:
        pair = f.version_pair()
        suite = suite_for(pair)
        v, _ = verify_pair_baseline(pair, suite, SearchSettings(ranking=True))
        if v.is_true:
            ctx = full_pair_context(pair)
            assert find_mismatch(ctx, f.p.semantics, 20, seed=11) is None
            checked += 1
    assert checked >= 5
