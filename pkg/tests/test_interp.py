from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from flowequiv.build import (aggregate, chain_workflow, filter_, join, link,
                             left_outer_join, project, sink, sort, source, udf,
                             union, unnest, workflow)
from flowequiv.interp import NotExecutableError, evaluate
from flowequiv.model import Semantics
from flowequiv.predicates import col, gt
from flowequiv.tables import Table, table, tables_equal

AGE = [("age", "int")]


def run_chain(ops, inputs, semantics=Semantics.SET, **kw):
    wf = chain_workflow("w", ops, semantics)
    return evaluate(wf, inputs, **kw)


def test_filter_drops_rows():
    out = run_chain([source("s", AGE), filter_("f", gt(col("age"), 24)), sink("k")],
                    {"s": table(AGE, [(20,), (30,)])})
    assert out["k"].rows == ((30,),)


def test_passthrough_project_is_identity():
    t = table([("a", "int"), ("b", "string")], [(1, "x"), (2, "y")])
    out = run_chain([source("s", t.schema), project("p"), sink("k")], {"s": t})
    assert out["k"] == t


def test_count_by_group():
    out = run_chain([source("s", AGE),
                     aggregate("g", ["age"], [("count", None, "cnt")]),
                     sink("k")],
                    {"s": table(AGE, [(25,), (25,), (30,)])}, semantics=Semantics.BAG)
    assert set(out["k"].rows) == {(25, 2), (30, 1)}


def test_set_semantics_dedupes_counts():
    out = run_chain([source("s", AGE),
                     aggregate("g", ["age"], [("count", None, "cnt")]),
                     sink("k")],
                    {"s": table(AGE, [(25,), (25,), (30,)])}, semantics=Semantics.SET)
    assert set(out["k"].rows) == {(25, 1), (30, 1)}


def test_join_drops_right_key_and_pads_outer():
    left = table([("k", "int"), ("v", "int")], [(1, 10), (2, 20)])
    right = table([("k2", "int"), ("u", "int")], [(1, 7)])
    for kind, expect in ((join, {(1, 10, 7)}),
                         (left_outer_join, {(1, 10, 7), (2, 20, None)})):
        wf = workflow("w", [
            source("a", left.schema), source("b", right.schema),
            kind("j", [("k", "k2")]), sink("snk"),
        ], [link("a", "j", 0, 0), link("b", "j", 0, 1), link("j", "snk")])
        out = evaluate(wf, {"a": left, "b": right})
        assert set(out["snk"].rows) == expect


def test_null_join_keys_never_match():
    left = table([("k", "int")], [(None,)])
    right = table([("k2", "int")], [(None,)])
    wf = workflow("w", [
        source("a", left.schema), source("b", right.schema),
        join("j", [("k", "k2")]), sink("snk"),
    ], [link("a", "j", 0, 0), link("b", "j", 0, 1), link("j", "snk")])
    assert evaluate(wf, {"a": left, "b": right})["snk"].rows == ()


def test_union_and_sort_and_unnest():
    t1 = table([("s", "string")], [("b,a",)])
    wf = chain_workflow("w", [source("x", t1.schema), unnest("u", "s"), sink("k")],
                        Semantics.ORDERED_BAG)
    assert evaluate(wf, {"x": t1})["k"].rows == (("b",), ("a",))

    t = table(AGE, [(3,), (1,), (2,)])
    out = run_chain([source("s", AGE), sort("o", [("age", True)]), sink("k")],
                    {"s": t}, semantics=Semantics.ORDERED_BAG)
    assert out["k"].rows == ((1,), (2,), (3,))


def test_opaque_not_executable():
    wf = chain_workflow("w", [source("s", AGE), udf("u", "tok", tuple(AGE)), sink("k")])
    with pytest.raises(NotExecutableError):
        evaluate(wf, {"s": table(AGE, [(1,)])})


def test_aggregates_ignore_nulls():
    t = table([("g", "int"), ("v", "int")], [(1, None), (1, 4), (1, 6)])
    out = run_chain([source("s", t.schema),
                     aggregate("a", ["g"], [("sum", "v", "sv"), ("count", "v", "cv"),
                                            ("avg", "v", "av")]),
                     sink("k")], {"s": t}, semantics=Semantics.BAG)
    assert out["k"].rows == ((1, 10, 2, 5.0),)


rows_strategy = st.lists(
    st.tuples(st.one_of(st.integers(min_value=-5, max_value=5), st.none()),
              st.integers(min_value=0, max_value=3)),
    max_size=8)


@given(rows_strategy)
@settings(max_examples=40, deadline=None)
def test_topological_tie_break_invariance(rows):
    schema = [("a", "int"), ("g", "int")]
    wf = workflow("w", [
        source("s", schema),
        filter_("f", gt(col("a"), 0)),
        aggregate("agg", ["g"], [("count", None, "cnt")]),
        sink("k"),
    ], [link("s", "f"), link("f", "agg"), link("agg", "k")])
    t = table(schema, rows)
    fwd = evaluate(wf, {"s": t})
    rev = evaluate(wf, {"s": t}, reverse_ties=True)
    assert fwd == rev


@given(rows_strategy)
@settings(max_examples=40, deadline=None)
def test_set_semantics_idempotent(rows):
    schema = [("a", "int"), ("g", "int")]
    t = table(schema, rows)
    once = run_chain([source("s", schema), project("p"), sink("k")], {"s": t})
    twice = run_chain([source("s", schema), project("p"), sink("k")], {"s": once["k"]})
    assert tables_equal(once["k"], twice["k"], Semantics.SET)
    assert once["k"] == twice["k"]
