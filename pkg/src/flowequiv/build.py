"""Shorthand constructors for operators and workflows used by fixtures and tests."""

from __future__ import annotations

from typing import Iterable, Optional

from .model import AggSpec, Link, OpKind, Operator, OpProps, Schema, Semantics, Workflow
from .predicates import Pred


def source(id: str, schema: Iterable[tuple[str, str]]) -> Operator:
    return Operator(id, OpKind.SOURCE, OpProps(schema=tuple(schema)))


def sink(id: str) -> Operator:
    return Operator(id, OpKind.SINK)


def filter_(id: str, predicate: Pred) -> Operator:
    return Operator(id, OpKind.FILTER, OpProps(predicate=predicate))


def project(id: str, columns: Optional[Iterable[str]] = None) -> Operator:
    cols = None if columns is None else tuple(columns)
    return Operator(id, OpKind.PROJECT, OpProps(columns=cols))


def join(id: str, keys: Iterable[tuple[str, str]]) -> Operator:
    return Operator(id, OpKind.JOIN, OpProps(join_keys=tuple(keys)))


def left_outer_join(id: str, keys: Iterable[tuple[str, str]]) -> Operator:
    return Operator(id, OpKind.LEFT_OUTER_JOIN, OpProps(join_keys=tuple(keys)))


def aggregate(id: str, group_keys: Iterable[str],
              aggs: Iterable[tuple[str, Optional[str], str]]) -> Operator:
    return Operator(id, OpKind.AGGREGATE, OpProps(
        group_keys=tuple(group_keys),
        aggs=tuple(AggSpec(f, c, o) for f, c, o in aggs)))


def union(id: str) -> Operator:
    return Operator(id, OpKind.UNION)


def replicate(id: str, n_out: int = 2) -> Operator:
    return Operator(id, OpKind.REPLICATE, n_out=n_out)


def sort(id: str, keys: Iterable[tuple[str, bool]]) -> Operator:
    return Operator(id, OpKind.SORT, OpProps(sort_keys=tuple(keys)))


def unnest(id: str, column: str) -> Operator:
    return Operator(id, OpKind.UNNEST, OpProps(unnest_column=column))


def udf(id: str, token: str, schema: Optional[Schema] = None) -> Operator:
    return Operator(id, OpKind.UDF, OpProps(token=token, schema=schema))


def classifier(id: str, token: str, schema: Optional[Schema] = None) -> Operator:
    return Operator(id, OpKind.CLASSIFIER, OpProps(token=token, schema=schema))


def dictionary_matcher(id: str, token: str, schema: Optional[Schema] = None) -> Operator:
    return Operator(id, OpKind.DICTIONARY_MATCHER, OpProps(token=token, schema=schema))


def link(src: str, dst: str, src_port: int = 0, dst_port: int = 0) -> Link:
    return Link(src, src_port, dst, dst_port)


def chain_links(*op_ids: str) -> list[Link]:
    return [Link(a, 0, b, 0) for a, b in zip(op_ids, op_ids[1:])]


def workflow(id: str, operators: Iterable[Operator], links: Iterable[Link],
             semantics: Semantics = Semantics.SET) -> Workflow:
    return Workflow.build(id, operators, links, semantics)


def chain_workflow(id: str, operators: list[Operator],
                   semantics: Semantics = Semantics.SET) -> Workflow:
    """Linear workflow wiring the given operators in order."""
    return workflow(id, operators, chain_links(*[o.id for o in operators]), semantics)
