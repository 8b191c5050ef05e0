"""Cross-module properties: containment monotonicity, pruning safety, counter
dominance, and the 100-seed soundness sweep of the canonical verifier."""

from __future__ import annotations

from flowequiv.build import chain_workflow, filter_, sink, source
from flowequiv.corpus import corpus, fx_run
from flowequiv.decompose import (Counters, Decomposition, EvSuite, SearchSettings,
                                 rank_decomposition, verify_pair_baseline)
from flowequiv.edits import EditMapping, edit_units
from flowequiv.ev import canonical_ev
from flowequiv.model import Semantics
from flowequiv.oracle import find_mismatch
from flowequiv.orchestrate import VerifyConfig, verify
from flowequiv.predicates import col, gt, lt
from flowequiv.windows import (VersionPair, complete_window, expand, make_window,
                               neighbors)


def pair_of(p, q, mapping=None):
    m = mapping or EditMapping.of((i, i) for i in sorted(p.op_ids & q.op_ids))
    return VersionPair(p, q, m, edit_units(p, q, m))


def test_equivalent_window_stays_equivalent_when_grown():
    # Containment monotonicity, restated executably: where the oracle certifies
    # a window equivalent on sampled instances, no super-window shows a
    # counterexample either.
    p = chain_workflow("p", [source("s", [("x", "int"), ("y", "int")]),
                             filter_("a", gt(col("x"), 5)),
                             filter_("b", lt(col("y"), 2)), sink("k")])
    q = chain_workflow("q", [source("s", [("x", "int"), ("y", "int")]),
                             filter_("a", lt(col("y"), 2)),
                             filter_("b", gt(col("x"), 5)), sink("k")])
    pair = pair_of(p, q)
    w = make_window(pair, {"a", "b"}, {"a", "b"})
    assert find_mismatch(complete_window(pair, w), Semantics.SET, 30, 3) is None
    frontier = [w]
    seen = {w.key}
    while frontier:
        cur = frontier.pop()
        for cand in neighbors(pair, cur):
            try:
                nxt = expand(pair, cur, cand)
            except Exception:
                continue
            if nxt.key in seen:
                continue
            seen.add(nxt.key)
            assert find_mismatch(complete_window(pair, nxt), Semantics.SET, 30, 3) is None
            frontier.append(nxt)
    assert len(seen) > 1


def test_containing_decomposition_also_equivalent():
    # Pruning safety, restated executably: coarsen the witness decomposition by
    # one merge; its covering windows still show no counterexample.
    pair = fx_run().version_pair()
    suite = EvSuite([canonical_ev()], pair, Counters())
    verdict, d = verify_pair_baseline(pair, suite, SearchSettings(ranking=True))
    assert verdict.is_true and d is not None
    from flowequiv.decompose import _adjacent_windows, _merge_windows
    merged = None
    for w in d.covering():
        for other in _adjacent_windows(pair, d, w):
            union = _merge_windows(pair, w, other)
            if union is not None:
                rest = [x for x in d.windows if x.key not in (w.key, other.key)]
                cover = (d.cover_keys - {w.key, other.key}) | {union.key}
                merged = Decomposition(tuple(sorted(rest + [union], key=lambda x: x.key)), cover)
                break
        if merged:
            break
    assert merged is not None
    for w in merged.covering():
        if w.empty_side:
            continue
        try:
            ctx = complete_window(pair, w)
        except Exception:
            continue
        assert find_mismatch(ctx, Semantics.SET, 20, 13) is None


def test_ranking_counter_dominance():
    for f in corpus(seeds=range(1, 3), max_edits=2):
        if max(len(f.p.operators), len(f.q.operators)) > 10:
            continue
        kw = dict(segmentation="off", pruning=False, symbolic=False, budget_seconds=30)
        on = verify(f.p, f.q, tracked=f.tracked, cfg=VerifyConfig(ranking=True, **kw))
        off = verify(f.p, f.q, tracked=f.tracked, cfg=VerifyConfig(ranking=False, **kw))
        assert on.decompositions_explored <= off.decompositions_explored, f.name
        assert on.verdict.truth == off.verdict.truth, f.name


def test_canonical_true_100_seed_sweep():
    p = chain_workflow("p", [source("s", [("x", "int"), ("y", "int")]),
                             filter_("a", gt(col("x"), 5)),
                             filter_("b", lt(col("y"), 2)), sink("k")])
    q = chain_workflow("q", [source("s", [("x", "int"), ("y", "int")]),
                             filter_("a", lt(col("y"), 2)),
                             filter_("b", gt(col("x"), 5)), sink("k")])
    pair = pair_of(p, q)
    w = pair.all_pairs_window
    ev = canonical_ev()
    assert ev.verify_window(w, pair).is_true
    ctx = complete_window(pair, w)
    for seed in range(100):
        assert find_mismatch(ctx, Semantics.SET, 3, seed) is None


def test_rank_decomposition_derivation():
    pair = fx_run().version_pair()
    from flowequiv.decompose import initial_decomposition
    d = initial_decomposition(pair)
    # All covering windows are minimal at the start: sizes 1 (delete fo, add
    # fg, add fh); every other singleton counts as unmerged.
    cover_sizes = [w.size() for w in d.covering()]
    expected = sum(cover_sizes) / len(cover_sizes) - d.non_covering_singletons()
    assert rank_decomposition(d) == expected
    assert d.non_covering_singletons() == 10
