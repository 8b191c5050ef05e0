from __future__ import annotations

import pytest

from flowequiv.build import (aggregate, chain_links, chain_workflow, filter_, link,
                             project, replicate, sink, source, udf, workflow)
from flowequiv.model import (Link, OpKind, SchemaUnknownError, Workflow,
                             attach_virtual_boundaries, induced_subdag,
                             validate_workflow)
from flowequiv.predicates import col, gt

SCHEMA = [("age", "int"), ("name", "string")]


def simple_chain() -> Workflow:
    return chain_workflow("w", [
        source("src", SCHEMA),
        filter_("f", gt(col("age"), 24)),
        sink("snk"),
    ])


def test_valid_three_op_chain():
    assert validate_workflow(simple_chain()) == []


def test_cycle_is_reported():
    wf = workflow("cyc", [
        source("src", SCHEMA),
        filter_("a", gt(col("age"), 1)),
        filter_("b", gt(col("age"), 2)),
        sink("snk"),
    ], [link("src", "a"), link("a", "b"), link("b", "a"), link("b", "snk")])
    rules = {v.rule for v in validate_workflow(wf)}
    assert "cycle" in rules or "port conflict" in rules


def test_unknown_column_reported():
    wf = chain_workflow("w", [
        source("src", [("name", "string")]),
        filter_("f", gt(col("age"), 24)),
        sink("snk"),
    ])
    assert any(v.rule == "unknown column" for v in validate_workflow(wf))


def test_missing_links_reported():
    wf = workflow("w", [source("src", SCHEMA), sink("snk")], [])
    rules = {v.rule for v in validate_workflow(wf)}
    assert "missing input" in rules and "missing output" in rules


class TestInducedSubdag:
    def test_single_node(self):
        sd = induced_subdag(simple_chain(), {"f"})
        assert sd.op_ids == {"f"} and sd.links == () and sd.connected

    def test_whole_dag(self):
        wf = simple_chain()
        sd = induced_subdag(wf, wf.op_ids)
        assert sd.op_ids == wf.op_ids
        assert set(sd.links) == set(wf.links)
        assert sd.connected

    def test_disconnected_pair(self):
        sd = induced_subdag(simple_chain(), {"src", "snk"})
        assert not sd.connected

    def test_unknown_id(self):
        with pytest.raises(Exception):
            induced_subdag(simple_chain(), {"nope"})


class TestVirtualBoundaries:
    def test_middle_operator_gains_source_and_sink(self):
        wf = chain_workflow("w", [
            source("src", SCHEMA),
            aggregate("ag", ["age"], [("count", None, "cnt")]),
            sink("snk"),
        ])
        done = attach_virtual_boundaries(induced_subdag(wf, {"ag"}), wf)
        assert validate_workflow(done.workflow) == []
        assert len(done.source_anchor) == 1 and len(done.sink_anchor) == 1
        (vsrc,) = done.source_anchor
        # The virtual source advertises the schema produced upstream.
        assert done.workflow.ops_by_id[vsrc].props.schema == tuple(SCHEMA)

    def test_full_workflow_is_unchanged(self):
        wf = simple_chain()
        done = attach_virtual_boundaries(induced_subdag(wf, wf.op_ids), wf)
        assert done.workflow.op_ids == wf.op_ids
        assert done.source_anchor == {} and done.sink_anchor == {}

    def test_two_dangling_outputs_get_two_sinks(self):
        wf = workflow("w", [
            source("src", SCHEMA),
            replicate("rep"),
            filter_("fa", gt(col("age"), 1)),
            filter_("fb", gt(col("age"), 2)),
            sink("ka"),
            sink("kb"),
        ], [link("src", "rep"),
            link("rep", "fa", 0, 0), link("rep", "fb", 1, 0),
            link("fa", "ka"), link("fb", "kb")])
        done = attach_virtual_boundaries(induced_subdag(wf, {"rep"}), wf)
        assert len(done.sink_anchor) == 2

    def test_unknown_schema_raises(self):
        wf = chain_workflow("w", [
            source("src", SCHEMA),
            udf("u", "tok"),  # no declared output schema
            filter_("f", gt(col("age"), 1)),
            sink("snk"),
        ])
        with pytest.raises(SchemaUnknownError):
            attach_virtual_boundaries(induced_subdag(wf, {"f"}), wf)


def test_schema_propagation_is_stable():
    wf = chain_workflow("w", [
        source("src", SCHEMA),
        project("p", ["age"]),
        aggregate("ag", ["age"], [("count", None, "cnt")]),
        sink("snk"),
    ])
    first = dict(wf.schemas)
    again = Workflow.build(wf.id, wf.operators, wf.links, wf.semantics).schemas
    assert first == again
    assert wf.schemas[("ag", 0)] == (("age", "int"), ("cnt", "int"))
