from __future__ import annotations

from flowequiv.build import chain_workflow, filter_, sink, source, udf
from flowequiv.corpus import fx_agefilter
from flowequiv.edits import EditMapping, edit_units
from flowequiv.ev import Truth
from flowequiv.oracle import oracle_ev, replay_witness
from flowequiv.predicates import col, gt, lt
from flowequiv.windows import VersionPair, Window, complete_window, make_window

SCHEMA = [("x", "int")]


def pair_of(p, q, mapping=None):
    m = mapping or EditMapping.of((i, i) for i in sorted(p.op_ids & q.op_ids))
    return VersionPair(p, q, m, edit_units(p, q, m))


def test_shifted_constant_yields_witness_row_six():
    p = chain_workflow("p", [source("s", SCHEMA), filter_("f", gt(col("x"), 5)), sink("k")])
    q = chain_workflow("q", [source("s", SCHEMA), filter_("f", gt(col("x"), 6)), sink("k")])
    pair = pair_of(p, q)
    w = pair.all_pairs_window
    ev = oracle_ev(instances=40, seed=1)
    v = ev.verify_window(w, pair)
    assert v.is_false
    # Brute force over the boundary-inclusive domain: x=6 is the only value
    # on which the two predicates disagree, so the witness must contain it.
    witness = v.witness
    assert any(6 in row for t in witness.inputs.values() for row in t.rows)
    ctx = complete_window(pair, w)
    assert replay_witness(ctx, witness, p.semantics)


def test_structural_identity_gives_true():
    p = chain_workflow("p", [source("s", SCHEMA), filter_("f", gt(col("x"), 5)), sink("k")])
    pair = pair_of(p, p)
    v = oracle_ev().verify_window(pair.all_pairs_window, pair)
    assert v.is_true


def test_agefilter_window_standalone_is_false():
    f = fx_agefilter()
    pair = f.version_pair()
    # The deleted filter alone against the empty side: as stand-alone DAGs a
    # row with 50 <= age < 55 tells them apart, even though the full pair is
    # equivalent thanks to the upstream bound.
    w = Window(frozenset({"f55"}), frozenset(), pair.mapping)
    ev = oracle_ev(instances=60, seed=5)
    v = ev.verify_window(w, pair)
    assert v.is_false
    witness = v.witness
    ages = {row[0] for t in witness.inputs.values() for row in t.rows}
    assert any(a is not None and 50 <= a < 55 for a in ages if isinstance(a, int))


def test_sampling_agreement_is_only_unknown():
    p = chain_workflow("p", [source("s", [("age", "int")]),
                             filter_("a", lt(col("age"), 50)),
                             filter_("b", lt(col("age"), 55)), sink("k")])
    q = chain_workflow("q", [source("s", [("age", "int")]),
                             filter_("a", lt(col("age"), 50)), sink("k")])
    m = EditMapping.of([("s", "s"), ("a", "a"), ("k", "k")])
    pair = pair_of(p, q, m)
    v = oracle_ev(instances=50, seed=2).verify_window(pair.all_pairs_window, pair)
    assert v.truth is Truth.UNKNOWN  # equivalent but not structurally identical


def test_monotonic_restriction_on_opaque():
    p = chain_workflow("p", [source("s", SCHEMA), udf("u", "t1", tuple(SCHEMA)),
                             filter_("f", gt(col("x"), 0)), sink("k")])
    pair = pair_of(p, p)
    ev = oracle_ev()
    assert ev.restriction_monotonic
    small = make_window(pair, {"u"}, {"u"})
    assert not ev.is_valid_window(small, pair).ok
    for bigger in ({"u", "f"}, {"s", "u", "f", "k"}):
        w = make_window(pair, bigger, bigger)
        assert not ev.is_valid_window(w, pair).ok


def test_verdicts_deterministic_per_seed():
    p = chain_workflow("p", [source("s", SCHEMA), filter_("f", gt(col("x"), 5)), sink("k")])
    q = chain_workflow("q", [source("s", SCHEMA), filter_("f", gt(col("x"), 6)), sink("k")])
    pair = pair_of(p, q)
    ev = oracle_ev(instances=40, seed=9)
    a = ev.verify_window(pair.all_pairs_window, pair)
    b = ev.verify_window(pair.all_pairs_window, pair)
    assert a.truth == b.truth and a.witness.inputs == b.witness.inputs
