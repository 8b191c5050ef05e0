from __future__ import annotations

import pytest

from flowequiv.build import chain_workflow, filter_, link, project, sink, source
from flowequiv.corpus import fx_run, fx_swap, fx_swap_mapping_by_kind
from flowequiv.edits import (AddLink, AddOperator, DeleteOperator, EditError,
                             EditMapping, ModifyOperator, RemoveLink,
                             Transformation, apply_transformation,
                             derive_edits_from_mapping, edit_units,
                             enumerate_mappings)
from flowequiv.model import Link, OpKind
from flowequiv.predicates import col, gt

SCHEMA = [("age", "int"), ("x", "int")]


def two_op_chain():
    return chain_workflow("c", [source("a", SCHEMA), sink("b")])


def test_apply_empty_delta_is_identity():
    wf = two_op_chain()
    assert apply_transformation(wf, Transformation(())) == wf


def test_apply_insert_operator():
    wf = two_op_chain()
    delta = Transformation((
        RemoveLink(Link("a", 0, "b", 0)),
        AddOperator(filter_("f", gt(col("age"), 1))),
        AddLink(Link("a", 0, "f", 0)),
        AddLink(Link("f", 0, "b", 0)),
    ))
    out = apply_transformation(wf, delta)
    assert sorted(out.op_ids) == ["a", "b", "f"]


def test_modify_cannot_change_kind_unless_derived():
    wf = chain_workflow("c", [source("a", SCHEMA), filter_("f", gt(col("age"), 1)), sink("b")])
    bad = Transformation((ModifyOperator("f", project("x").props, kind=None),))
    ok = apply_transformation(wf, Transformation((
        ModifyOperator("f", filter_("f", gt(col("age"), 7)).props),)))
    assert ok.ops_by_id["f"].props.predicate == gt(col("age"), 7)
    with pytest.raises(EditError):
        # A plain modify with mismatched properties leaves the Filter without
        # its predicate, which cannot validate.
        apply_transformation(wf, bad)


def test_fx_run_delta_reproduces_v2():
    f = fx_run()
    delta = derive_edits_from_mapping(f.p, f.q, f.tracked)
    assert delta.distance == 3
    rebuilt = apply_transformation(f.p, delta, new_id=f.q.id)
    assert rebuilt.op_ids == f.q.op_ids
    assert set(rebuilt.links) == set(f.q.links)
    assert {o.id: (o.kind, o.props) for o in rebuilt.operators} == \
           {o.id: (o.kind, o.props) for o in f.q.operators}


def test_identity_mapping_yields_empty_delta():
    wf = two_op_chain()
    m = EditMapping.of([("a", "a"), ("b", "b")])
    assert len(derive_edits_from_mapping(wf, wf, m)) == 0


class TestSwapMappings:
    def test_positional_mapping_has_two_modifies(self):
        f = fx_swap()
        delta = derive_edits_from_mapping(f.p, f.q, f.tracked)
        mods = [e for e in delta if isinstance(e, ModifyOperator)]
        assert len(mods) == 2 and delta.distance == 2
        assert {e.kind for e in mods} == {OpKind.AGGREGATE, OpKind.PROJECT}

    def test_kind_preserving_mapping_has_distance_four(self):
        f = fx_swap()
        delta = derive_edits_from_mapping(f.p, f.q, fx_swap_mapping_by_kind())
        assert delta.distance == 4
        assert sum(isinstance(e, DeleteOperator) for e in delta) == 2
        assert sum(isinstance(e, AddOperator) for e in delta) == 2

    def test_enumeration_orders_by_distance(self):
        f = fx_swap()
        stream = list(enumerate_mappings(f.p, f.q, cap=40))
        distances = [derive_edits_from_mapping(f.p, f.q, m).distance for m in stream]
        assert distances == sorted(distances)
        assert f.tracked in stream
        assert fx_swap_mapping_by_kind() in stream
        assert stream.index(f.tracked) < stream.index(fx_swap_mapping_by_kind())


def test_enumeration_identity_first():
    wf = two_op_chain()
    first = next(iter(enumerate_mappings(wf, wf, cap=4)))
    assert first == EditMapping.of([("a", "a"), ("b", "b")])


def test_enumeration_cap():
    f = fx_swap()
    assert len(list(enumerate_mappings(f.p, f.q, cap=1))) == 1
    tracked_only = list(enumerate_mappings(f.p, f.q, cap=1, tracked=f.tracked))
    assert tracked_only == [f.tracked]


def test_units_for_pure_link_rewire():
    p = chain_workflow("p", [
        source("s", SCHEMA),
        filter_("f1", gt(col("age"), 1)),
        filter_("f2", gt(col("x"), 2)),
        sink("k"),
    ])
    q = chain_workflow("q", [
        source("s", SCHEMA),
        filter_("f2", gt(col("x"), 2)),
        filter_("f1", gt(col("age"), 1)),
        sink("k"),
    ])
    m = EditMapping.of([(x, x) for x in ("s", "f1", "f2", "k")])
    units = edit_units(p, q, m)
    # Pure rewires: every unit is a link unit naming its endpoint pairs.
    assert units and all(u.label.startswith(("add link", "remove link")) for u in units)
    for u in units:
        assert u.p_ops and u.q_ops


def test_roundtrip_over_corpus(small_corpus):
    for f in small_corpus[:20]:
        delta = derive_edits_from_mapping(f.p, f.q, f.tracked)
        rebuilt = apply_transformation(f.p, delta, new_id="check")
        # Isomorphic up to renaming: mapped operators keep their P ids, added
        # operators keep Q ids (aliased only on collision).
        assert len(rebuilt.operators) == len(f.q.operators)
        assert len(rebuilt.links) == len(f.q.links)
        kinds = lambda wf: sorted(o.kind.value for o in wf.operators)
        assert kinds(rebuilt) == kinds(f.q)
