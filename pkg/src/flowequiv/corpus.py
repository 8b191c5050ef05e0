"""Version-pair corpus: named fixtures, rewrite rules, and a seeded generator.

Equivalence-preserving rules mirror classic relational rewrites (pass-through
projection, filter pushdown/commutation, split/merge); semantic edits produce
deliberately inequivalent pairs together with an execution witness. Every
generated pair is checked against the execution oracle at generation time, so
corpus labels are trustworthy ground truth for the test suites.
"""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass
from typing import Callable, Optional

from .build import (aggregate, chain_links, chain_workflow, classifier,
                    dictionary_matcher, filter_, join, left_outer_join, link,
                    project, sink, sort, source, udf, union, unnest, workflow)
from .edits import EditMapping, Transformation, edit_units
from .ev import Truth
from .interp import evaluate
from .model import Link, OpKind, Operator, OpProps, Semantics, Workflow
from .oracle import Witness, find_mismatch
from .predicates import (And, Cmp, and_, col, const, eq, gt, lt, Pred,
                         pred_columns)
from .windows import VersionPair, full_pair_context


class GenerationError(Exception):
    pass


@dataclass(frozen=True)
class FixturePair:
    name: str
    p: Workflow
    q: Workflow
    tracked: EditMapping
    expected: Truth
    notes: str = ""

    def version_pair(self) -> VersionPair:
        return VersionPair(self.p, self.q, self.tracked,
                           edit_units(self.p, self.q, self.tracked))


def _ids(wf: Workflow) -> EditMapping:
    return EditMapping.of((x, x) for x in sorted(wf.op_ids))


def _mapping_common(p: Workflow, q: Workflow) -> EditMapping:
    return EditMapping.of((x, x) for x in sorted(p.op_ids & q.op_ids))


# ---------------------------------------------------------------------------
# Named fixtures


def fx_run() -> FixturePair:
    """The running two-source dataflow: three edits, all result-preserving.

    The first version filters users after an age filter and aggregates tweet
    counts per user; the second pushes the verified-filter up, and inserts a
    user-id filter before the aggregation that a matching filter after the
    aggregation already implies.
    """
    tweets = [("uid", "int"), ("txt", "string"), ("topic", "string")]
    users = [("uid2", "int"), ("age", "int"), ("verified", "bool")]
    enriched = tuple(tweets + [("matched", "bool")])
    labeled = tuple(tweets + [("matched", "bool"), ("label", "string")])

    def common():
        return [
            source("src_t", tweets),
            dictionary_matcher("dm", "dict-v1", enriched),
            classifier("cl", "cls-v1", labeled),
            source("src_u", users),
            filter_("fy", gt(col("age"), 18)),
            left_outer_join("oj", [("uid", "uid2")]),
            aggregate("ag", ["uid"], [("count", None, "cnt")]),
            filter_("fk", lt(col("uid"), 1000)),
            sort("so", [("cnt", False)]),
            sink("sk"),
        ]

    def wiring(user_chain: list[str], mid: list[str]) -> list[Link]:
        links = chain_links("src_t", "dm", "cl")
        links.append(link("cl", "oj", 0, 0))
        links.extend(chain_links("src_u", *user_chain))
        links.append(link(user_chain[-1], "oj", 0, 1))
        links.extend(chain_links("oj", *mid, "ag", "fk", "so", "sk"))
        return links

    p_ops = common() + [filter_("fo", eq(col("verified"), True))]
    p = workflow("fx-run-v1", p_ops, wiring(["fy", "fo"], []))
    q_ops = common() + [
        filter_("fg", eq(col("verified"), True)),
        filter_("fh", lt(col("uid"), 1000)),
    ]
    q = workflow("fx-run-v2", q_ops, wiring(["fg", "fy"], ["fh"]))
    tracked = _mapping_common(p, q)
    return FixturePair("FX-RUN", p, q, tracked, Truth.TRUE,
                       "delete fo, add fg, add fh; sink result unchanged")


def fx_run_single_edit(which: str = "fh") -> FixturePair:
    """FX-RUN reduced to one edit (``fh`` added, or ``fo`` deleted)."""
    base = fx_run()
    if which == "fh":
        p_ops = [o for o in base.q.operators if o.id != "fh"]
        links = [l for l in base.q.links if "fh" not in (l.src, l.dst)]
        links.append(link("oj", "ag"))
        p = workflow("fx-run-h-v1", p_ops, links)
        pair = FixturePair("FX-RUN-H", p, base.q, _mapping_common(p, base.q), Truth.TRUE,
                           "single edit: add fh")
        return pair
    raise GenerationError(f"unknown single-edit variant {which!r}")


def fx_swap() -> FixturePair:
    """Projection and aggregation trade places around a group-key filter."""
    schema = [("age", "int"), ("x", "int")]
    p = chain_workflow("fx-swap-v1", [
        source("s", schema),
        project("proj"),
        filter_("filt", gt(col("age"), 24)),
        aggregate("agg", ["age"], [("count", None, "cnt")]),
        sink("k"),
    ])
    q = chain_workflow("fx-swap-v2", [
        source("s", schema),
        aggregate("agg2", ["age"], [("count", None, "cnt")]),
        filter_("filt2", gt(col("age"), 24)),
        project("proj2"),
        sink("k"),
    ])
    # The tracked mapping aligns by position, crossing operator kinds: two
    # kind-changing modifies (edit distance 2).
    tracked = EditMapping.of([("s", "s"), ("proj", "agg2"), ("filt", "filt2"),
                              ("agg", "proj2"), ("k", "k")])
    return FixturePair("FX-SWAP", p, q, tracked, Truth.TRUE,
                       "positional mapping has distance 2; id mapping has distance 4")


def fx_swap_mapping_by_kind() -> EditMapping:
    """The conservative alternative: only the aggregates (and endpoints) align."""
    return EditMapping.of([("s", "s"), ("agg", "agg2"), ("k", "k")])


def fx_agefilter() -> FixturePair:
    """A downstream filter made redundant only by its upstream context."""
    schema = [("age", "int"), ("name", "string")]
    p = chain_workflow("fx-age-v1", [
        source("s", schema),
        filter_("f50", lt(col("age"), 50)),
        filter_("f55", lt(col("age"), 55)),
        sink("k"),
    ])
    q = chain_workflow("fx-age-v2", [
        source("s", schema),
        filter_("f50", lt(col("age"), 50)),
        sink("k"),
    ])
    return FixturePair("FX-AGEFILTER", p, q, _mapping_common(p, q), Truth.UNKNOWN,
                       "pair is equivalent, but no window can see the upstream bound")


def fx_taxi() -> FixturePair:
    """Stacked duplicate aggregations: local windows look equivalent, pair is not."""
    schema = [("uid", "int"), ("dur", "int")]
    agg_props = (["uid"], [("count", None, "cnt")])
    p = chain_workflow("fx-taxi-v1", [
        source("s", schema),
        aggregate("selx", *agg_props),
        aggregate("selz", *agg_props),
        sink("k"),
    ])
    q = chain_workflow("fx-taxi-v2", [
        source("s", schema),
        aggregate("sely", *agg_props),
        sink("k"),
    ])
    tracked = EditMapping.of([("s", "s"), ("k", "k")])
    return FixturePair("FX-TAXI", p, q, tracked, Truth.UNKNOWN,
                       "overlapping windows would each verify; disjointness forbids it")


def fx_proj() -> FixturePair:
    """Projection lists differ at the sink: symbolically inequivalent."""
    schema = [("trip_time", "int"), ("tip", "int"), ("dur", "int")]
    p = chain_workflow("fx-proj-v1", [
        source("s", schema),
        project("pr", ["trip_time"]),
        sink("k"),
    ])
    q = chain_workflow("fx-proj-v2", [
        source("s", schema),
        project("pr", ["trip_time", "tip"]),
        sink("k"),
    ])
    return FixturePair("FX-PROJ", p, q, _mapping_common(p, q), Truth.FALSE,
                       "projected columns differ")


def fx_udf_edit() -> FixturePair:
    """The only change hides inside an opaque operator: no valid window exists."""
    schema = [("uid", "int"), ("txt", "string")]
    out_schema = tuple(schema + [("score", "float")])
    p = chain_workflow("fx-udf-v1", [
        source("s", schema),
        udf("u", "model-v1", out_schema),
        filter_("f", gt(col("score"), 0.5)),
        sink("k"),
    ])
    q = chain_workflow("fx-udf-v2", [
        source("s", schema),
        udf("u", "model-v2", out_schema),
        filter_("f", gt(col("score"), 0.5)),
        sink("k"),
    ])
    return FixturePair("FX-UDF", p, q, _mapping_common(p, q), Truth.UNKNOWN,
                       "modified token on an opaque operator")


def fixtures() -> dict[str, FixturePair]:
    out = [fx_run(), fx_swap(), fx_agefilter(), fx_taxi(), fx_proj(), fx_udf_edit()]
    return {f.name: f for f in out}


# ---------------------------------------------------------------------------
# Rewrite rules


@dataclass(frozen=True)
class RewriteRule:
    """A local transformation producing (Q, tracked mapping, transformation)."""

    name: str
    equivalence_preserving: bool
    locations: Callable[[Workflow], list[object]]
    apply: Callable[[Workflow, object, random.Random, int], tuple[Workflow, EditMapping]]


def _fresh(wf: Workflow, base: str, salt: int) -> str:
    cand = f"{base}{salt}"
    while cand in wf.op_ids:
        cand += "x"
    return cand


def _replace_links(wf: Workflow, drop: list[Link], add: list[Link],
                   add_ops: list[Operator] = (), drop_ops: list[str] = (),
                   mod_ops: dict[str, Operator] = None, new_id: str = "") -> Workflow:
    ops = {o.id: o for o in wf.operators}
    for o in add_ops:
        ops[o.id] = o
    for oid in drop_ops:
        del ops[oid]
    for oid, o in (mod_ops or {}).items():
        ops[oid] = o
    links = (set(wf.links) - set(drop)) | set(add)
    return Workflow.build(new_id or wf.id, ops.values(), links, wf.semantics)


def _single_link_locations(wf: Workflow) -> list[Link]:
    # Links whose producer feeds exactly that link (keeps rewiring local).
    return sorted(l for l in wf.links
                  if sum(1 for x in wf.out_links[l.src] if x.src_port == l.src_port) == 1)


def rule_empty_project() -> RewriteRule:
    def locations(wf: Workflow) -> list[Link]:
        return _single_link_locations(wf)

    def apply(wf: Workflow, loc: Link, rng: random.Random, salt: int):
        new = _fresh(wf, "prj", salt)
        q = _replace_links(wf, [loc],
                           [Link(loc.src, loc.src_port, new, 0), Link(new, 0, loc.dst, loc.dst_port)],
                           add_ops=[project(new)], new_id=wf.id + "'")
        return q, _mapping_common(wf, q)

    return RewriteRule("emptyProject", True, locations, apply)


def _filters(wf: Workflow) -> list[Operator]:
    return sorted((o for o in wf.operators if o.kind is OpKind.FILTER), key=lambda o: o.id)


def _only_consumer(wf: Workflow, op_id: str) -> Optional[Link]:
    outs = wf.out_links[op_id]
    return outs[0] if len(outs) == 1 else None


def rule_swap_adjacent_filters() -> RewriteRule:
    def locations(wf: Workflow) -> list[tuple[str, str]]:
        out = []
        for f in _filters(wf):
            nxt = _only_consumer(wf, f.id)
            if nxt and wf.ops_by_id[nxt.dst].kind is OpKind.FILTER:
                out.append((f.id, nxt.dst))
        return out

    def apply(wf: Workflow, loc: tuple[str, str], rng: random.Random, salt: int):
        a, b = loc
        pa, pb = wf.ops_by_id[a].props, wf.ops_by_id[b].props
        q = _replace_links(wf, [], [], mod_ops={
            a: Operator(a, OpKind.FILTER, pb),
            b: Operator(b, OpKind.FILTER, pa),
        }, new_id=wf.id + "'")
        return q, _ids(wf)

    return RewriteRule("swapAdjacentFilters", True, locations, apply)


def rule_push_filter_past_join() -> RewriteRule:
    """Move a filter sitting after an inner join below the input it reads from."""

    def locations(wf: Workflow) -> list[tuple[str, str, int]]:
        out = []
        for f in _filters(wf):
            feeder = next((l for l in wf.in_links[f.id]), None)
            if feeder is None or wf.ops_by_id[feeder.src].kind is not OpKind.JOIN:
                continue
            j = wf.ops_by_id[feeder.src]
            cols = pred_columns(f.props.predicate)
            left = wf.input_schema(j.id, 0)
            right = wf.input_schema(j.id, 1)
            if left is None or right is None:
                continue
            if cols <= {c for c, _ in left}:
                out.append((f.id, j.id, 0))
            elif cols <= {c for c, _ in right} and not (cols & {rk for _, rk in j.props.join_keys}):
                out.append((f.id, j.id, 1))
        return out

    def apply(wf: Workflow, loc: tuple[str, str, int], rng: random.Random, salt: int):
        f_id, j_id, side = loc
        f_op = wf.ops_by_id[f_id]
        new = _fresh(wf, "pf", salt)
        into_join = next(l for l in wf.in_links[j_id] if l.dst_port == side)
        f_in = next(l for l in wf.in_links[f_id])
        f_out = _only_consumer(wf, f_id)
        q = _replace_links(
            wf,
            drop=[into_join, f_in, f_out],
            add=[Link(into_join.src, into_join.src_port, new, 0),
                 Link(new, 0, j_id, side),
                 Link(f_in.src, f_in.src_port, f_out.dst, f_out.dst_port)],
            add_ops=[filter_(new, f_op.props.predicate)],
            drop_ops=[f_id],
            new_id=wf.id + "'")
        return q, _mapping_common(wf, q)

    return RewriteRule("pushFilterPastJoin", True, locations, apply)


def rule_push_filter_past_agg() -> RewriteRule:
    """Move a group-key-only filter from above an aggregation to below it."""

    def locations(wf: Workflow) -> list[tuple[str, str]]:
        out = []
        for f in _filters(wf):
            feeder = next((l for l in wf.in_links[f.id]), None)
            if feeder is None:
                continue
            up = wf.ops_by_id[feeder.src]
            if up.kind is OpKind.AGGREGATE and \
                    pred_columns(f.props.predicate) <= set(up.props.group_keys):
                out.append((f.id, up.id))
        return out

    def apply(wf: Workflow, loc: tuple[str, str], rng: random.Random, salt: int):
        f_id, a_id = loc
        f_op = wf.ops_by_id[f_id]
        new = _fresh(wf, "pf", salt)
        into_agg = next(l for l in wf.in_links[a_id])
        f_in = next(l for l in wf.in_links[f_id])
        f_out = _only_consumer(wf, f_id)
        q = _replace_links(
            wf,
            drop=[into_agg, f_in, f_out],
            add=[Link(into_agg.src, into_agg.src_port, new, 0),
                 Link(new, 0, a_id, into_agg.dst_port),
                 Link(f_in.src, f_in.src_port, f_out.dst, f_out.dst_port)],
            add_ops=[filter_(new, f_op.props.predicate)],
            drop_ops=[f_id],
            new_id=wf.id + "'")
        return q, _mapping_common(wf, q)

    return RewriteRule("pushFilterPastAgg", True, locations, apply)


def rule_push_project_past_filter() -> RewriteRule:
    """Swap a projection with the filter right below it when columns allow."""

    def locations(wf: Workflow) -> list[tuple[str, str]]:
        out = []
        for o in sorted(wf.operators, key=lambda o: o.id):
            if o.kind is not OpKind.PROJECT or o.props.columns is None:
                continue
            nxt = _only_consumer(wf, o.id)
            if nxt is None:
                continue
            down = wf.ops_by_id[nxt.dst]
            if down.kind is OpKind.FILTER and \
                    pred_columns(down.props.predicate) <= set(o.props.columns):
                out.append((o.id, down.id))
        return out

    def apply(wf: Workflow, loc: tuple[str, str], rng: random.Random, salt: int):
        p_id, f_id = loc
        pp, fp = wf.ops_by_id[p_id].props, wf.ops_by_id[f_id].props
        q = _replace_links(wf, [], [], mod_ops={
            p_id: Operator(p_id, OpKind.FILTER, fp),
            f_id: Operator(f_id, OpKind.PROJECT, pp),
        }, new_id=wf.id + "'")
        return q, _ids(wf)

    return RewriteRule("pushProjectPastFilter", True, locations, apply)


def rule_filter_split_merge() -> RewriteRule:
    """Split a conjunctive filter into two stacked filters."""

    def locations(wf: Workflow) -> list[str]:
        return [f.id for f in _filters(wf)
                if isinstance(f.props.predicate, And) and len(f.props.predicate.parts) >= 2]

    def apply(wf: Workflow, loc: str, rng: random.Random, salt: int):
        f_op = wf.ops_by_id[loc]
        parts = f_op.props.predicate.parts
        cut = max(1, len(parts) // 2)
        first = parts[:cut] if len(parts[:cut]) > 1 else parts[0]
        rest = parts[cut:] if len(parts[cut:]) > 1 else parts[cut]
        head = and_(*parts[:cut]) if cut > 1 else parts[0]
        tail = and_(*parts[cut:]) if len(parts) - cut > 1 else parts[cut]
        new = _fresh(wf, "fs", salt)
        out_link = _only_consumer(wf, loc)
        q = _replace_links(
            wf,
            drop=[out_link],
            add=[Link(loc, 0, new, 0), Link(new, 0, out_link.dst, out_link.dst_port)],
            add_ops=[filter_(new, tail)],
            mod_ops={loc: filter_(loc, head)},
            new_id=wf.id + "'")
        _ = (first, rest)
        return q, _mapping_common(wf, q)

    return RewriteRule("filterSplitMerge", True, locations, apply)


def rule_tighten_filter_constant() -> RewriteRule:
    def locations(wf: Workflow) -> list[str]:
        out = []
        for f in _filters(wf):
            p = f.props.predicate
            if isinstance(p, Cmp) and p.op in ("<", "<=", ">", ">="):
                out.append(f.id)
        return out

    def apply(wf: Workflow, loc: str, rng: random.Random, salt: int):
        f_op = wf.ops_by_id[loc]
        p = f_op.props.predicate
        shift = rng.choice([1, 2])
        bump = lambda e: const(e.value + shift) if hasattr(e, "value") and isinstance(e.value, (int, float)) and not isinstance(e.value, bool) else e
        newp = Cmp(p.op, bump(p.left), bump(p.right))
        if newp == p:
            raise GenerationError("no constant to tighten")
        q = _replace_links(wf, [], [], mod_ops={loc: filter_(loc, newp)}, new_id=wf.id + "'")
        return q, _ids(wf)

    return RewriteRule("tightenFilterConstant", False, locations, apply)


def rule_change_agg_function() -> RewriteRule:
    def locations(wf: Workflow) -> list[str]:
        return [o.id for o in sorted(wf.operators, key=lambda o: o.id)
                if o.kind is OpKind.AGGREGATE
                and any(a.func in ("sum", "min", "max") and a.column for a in o.props.aggs)]

    def apply(wf: Workflow, loc: str, rng: random.Random, salt: int):
        op = wf.ops_by_id[loc]
        swaps = {"sum": "max", "min": "max", "max": "min"}
        new_aggs = []
        done = False
        for a in op.props.aggs:
            if not done and a.func in swaps and a.column:
                new_aggs.append((swaps[a.func], a.column, a.out))
                done = True
            else:
                new_aggs.append((a.func, a.column, a.out))
        q = _replace_links(wf, [], [], mod_ops={
            loc: aggregate(loc, op.props.group_keys, new_aggs)}, new_id=wf.id + "'")
        return q, _ids(wf)

    return RewriteRule("changeAggFunction", False, locations, apply)


def rule_narrow_projection() -> RewriteRule:
    def locations(wf: Workflow) -> list[str]:
        return [o.id for o in sorted(wf.operators, key=lambda o: o.id)
                if o.kind is OpKind.PROJECT and o.props.columns is not None
                and len(o.props.columns) >= 2]

    def apply(wf: Workflow, loc: str, rng: random.Random, salt: int):
        op = wf.ops_by_id[loc]
        kept = op.props.columns[:-1]
        # Downstream consumers may reference the dropped column; only the
        # sink-adjacent projection is safe to narrow.
        q = _replace_links(wf, [], [], mod_ops={loc: project(loc, kept)},
                           new_id=wf.id + "'")
        return q, _ids(wf)

    return RewriteRule("narrowProjection", False, locations, apply)


def rule_add_filter_condition() -> RewriteRule:
    def locations(wf: Workflow) -> list[Link]:
        out = []
        for l in _single_link_locations(wf):
            schema = wf.schemas.get((l.src, l.src_port))
            if schema and any(t == "int" for _, t in schema):
                out.append(l)
        return out

    def apply(wf: Workflow, loc: Link, rng: random.Random, salt: int):
        schema = wf.schemas[(loc.src, loc.src_port)]
        column = rng.choice(sorted(c for c, t in schema if t == "int"))
        new = _fresh(wf, "fc", salt)
        q = _replace_links(
            wf, [loc],
            [Link(loc.src, loc.src_port, new, 0), Link(new, 0, loc.dst, loc.dst_port)],
            add_ops=[filter_(new, lt(col(column), rng.choice([1, 2, 5])))],
            new_id=wf.id + "'")
        return q, _mapping_common(wf, q)

    return RewriteRule("addFilterCondition", False, locations, apply)


EQUIVALENCE_RULES = {
    r.name: r for r in (
        rule_empty_project(), rule_swap_adjacent_filters(), rule_push_filter_past_join(),
        rule_push_filter_past_agg(), rule_push_project_past_filter(), rule_filter_split_merge(),
    )
}
SEMANTIC_RULES = {
    r.name: r for r in (
        rule_tighten_filter_constant(), rule_change_agg_function(),
        rule_add_filter_condition(), rule_narrow_projection(),
    )
}
ALL_RULES = {**EQUIVALENCE_RULES, **SEMANTIC_RULES}


# ---------------------------------------------------------------------------
# Base workflows and the generator


def base_spj(seed: int = 0, width: int = 2) -> Workflow:
    """A small select-project-join workflow over two sources."""
    rng = random.Random(seed)
    a = [("k", "int"), ("v", "int"), ("w", "int")]
    b = [("k2", "int"), ("u", "int")]
    c1, c2 = rng.choice([3, 5, 7]), rng.choice([2, 4])
    ops = [
        source("sa", a),
        source("sb", b),
        filter_("f1", lt(col("v"), c1)),
        filter_("f2", gt(col("u"), c2)),
        join("j1", [("k", "k2")]),
        project("pr", ["k", "v", "u"]),
        sink("snk"),
    ]
    links = [link("sa", "f1"), link("sb", "f2"),
             link("f1", "j1", 0, 0), link("f2", "j1", 0, 1),
             link("j1", "pr"), link("pr", "snk")]
    if width >= 3:
        ops.insert(5, filter_("f3", gt(col("w"), 0)))
        links = [l for l in links if not (l.src == "j1" and l.dst == "pr")]
        links += [link("j1", "f3"), link("f3", "pr")]
    return workflow(f"spj-{seed}-{width}", ops, links)


def base_wlike(kind: str, seed: int = 0) -> Workflow:
    """Chains shaped like the experiment dataflows: joins feeding one aggregate.

    ``w1``: 17 operators with 4 joins and 1 aggregate. ``w2``: 20 operators
    with 5 joins and 1 aggregate.
    """
    joins = {"w1": 4, "w2": 5}[kind]
    ops: list[Operator] = []
    links: list[Link] = []
    tables = []
    for i in range(joins + 1):
        cols = [(f"k{i}", "int"), (f"c{i}", "int")]
        if i == 0:
            cols.append(("m", "int"))
        tables.append(source(f"s{i}", cols))
    ops.extend(tables)
    prev = "s0"
    for i in range(1, joins + 1):
        f = filter_(f"f{i}", gt(col(f"c{i}"), i))
        j = join(f"j{i}", [(f"k0", f"k{i}")]) if i == 1 else join(f"j{i}", [("k0", f"k{i}")])
        ops.extend([f, j])
        links.append(link(f"s{i}", f.id))
        links.append(link(prev, j.id, 0, 0))
        links.append(link(f.id, j.id, 0, 1))
        prev = j.id
    ops.append(filter_("fm", lt(col("m"), 9)))
    links.append(link(prev, "fm"))
    ops.append(aggregate("agg", ["k0"], [("sum", "m", "total"), ("count", None, "cnt")]))
    links.append(link("fm", "agg"))
    ops.append(project("top", ["k0", "total"]))
    links.append(link("agg", "top"))
    ops.append(sink("snk"))
    links.append(link("top", "snk"))
    wf = workflow(f"{kind}-{seed}", ops, links)
    return wf


def hop_chain_pair(hops: int, chain: int = 8) -> FixturePair:
    """Two pass-through-project insertions separated by ``hops`` one-to-one ops."""
    if hops < 0 or hops > chain - 2:
        raise GenerationError("hops out of range")
    schema = [("a", "int"), ("b", "int")]
    mids = [filter_(f"m{i}", gt(col("a"), -10 - i)) for i in range(chain)]
    ops = [source("s", schema)] + mids + [sink("k")]
    p = chain_workflow(f"hop-{hops}-v1", ops)
    first = 0
    second = first + hops + 1
    q = p
    for idx, name in ((first, "e1"), (second, "e2")):
        target = _only_consumer(q, f"m{idx}")
        q = _replace_links(q, [target],
                           [Link(f"m{idx}", 0, name, 0), Link(name, 0, target.dst, target.dst_port)],
                           add_ops=[project(name)], new_id=f"hop-{hops}-v2")
    return FixturePair(f"HOP-{hops}", p, q, _mapping_common(p, q), Truth.TRUE,
                       f"two pass-through projections {hops} hops apart")


def hop_wlike_pair(hops: int) -> FixturePair:
    """A 20-operator join/aggregate dataflow with two pass-through insertions
    separated by ``hops`` one-to-one operators along the tail chain."""
    if not 0 <= hops <= 4:
        raise GenerationError("hops out of range")
    ops: list[Operator] = []
    links: list[Link] = []
    for i in range(5):
        cols = [(f"k{i}", "int"), (f"c{i}", "int")]
        if i == 0:
            cols.append(("m", "int"))
        ops.append(source(f"s{i}", cols))
    prev = "s0"
    for i in range(1, 5):
        f = filter_(f"f{i}", gt(col(f"c{i}"), i))
        j = join(f"j{i}", [("k0", f"k{i}")])
        ops.extend([f, j])
        links.append(link(f"s{i}", f.id))
        links.append(link(prev, j.id, 0, 0))
        links.append(link(f.id, j.id, 0, 1))
        prev = j.id
    ops.append(aggregate("agg", ["k0"], [("sum", "m", "total")]))
    links.append(link(prev, "agg"))
    tail = [filter_(f"t{i}", gt(col("total"), -100 - i)) for i in range(1, 6)]
    ops.extend(tail)
    links.extend(chain_links("agg", *[t.id for t in tail]))
    ops.append(sink("snk"))
    links.append(link("t5", "snk"))
    p = workflow(f"w2hop-{hops}-v1", ops, links)

    q = p
    target = _only_consumer(q, "agg")
    q = _replace_links(q, [target],
                       [Link("agg", 0, "e1", 0), Link("e1", 0, target.dst, target.dst_port)],
                       add_ops=[project("e1")], new_id=f"w2hop-{hops}-v2")
    anchor = "e1" if hops == 0 else f"t{hops}"
    target = _only_consumer(q, anchor)
    q = _replace_links(q, [target],
                       [Link(anchor, 0, "e2", 0), Link("e2", 0, target.dst, target.dst_port)],
                       add_ops=[project("e2")], new_id=f"w2hop-{hops}-v2")
    return FixturePair(f"W2HOP-{hops}", p, q, _mapping_common(p, q), Truth.TRUE,
                       f"two insertions {hops} hops apart on a 20-op dataflow")


def edit_count_pair(edits: int) -> FixturePair:
    """The 17-operator join/aggregate dataflow with 1..4 pass-through insertions."""
    if not 1 <= edits <= 4:
        raise GenerationError("edit count out of range")
    p = base_wlike("w1")
    sites = ["f1", "f2", "f3", "f4"][:edits]
    q = p
    for i, site in enumerate(sites):
        target = _only_consumer(q, site)
        name = f"e{i + 1}"
        q = _replace_links(q, [target],
                           [Link(site, 0, name, 0), Link(name, 0, target.dst, target.dst_port)],
                           add_ops=[project(name)], new_id=f"w1edits-{edits}-v2")
    return FixturePair(f"W1EDITS-{edits}", p, q, _mapping_common(p, q), Truth.TRUE,
                       f"{edits} pass-through insertions")


def segmented_pair() -> FixturePair:
    """A Sort separates two pass-through insertions; the edited version has
    seven operators forming two three-operator segments around the cut."""
    schema = [("a", "int"), ("b", "int")]
    ops = [
        source("s", schema),
        filter_("f1", gt(col("a"), 0)),
        sort("st", [("a", True)]),
        filter_("f2", lt(col("b"), 9)),
        sink("k"),
    ]
    p = chain_workflow("seg-v1", ops)
    q = p
    for src_op, name in (("s", "e1"), ("f2", "e2")):
        target = _only_consumer(q, src_op)
        q = _replace_links(q, [target],
                           [Link(src_op, 0, name, 0), Link(name, 0, target.dst, target.dst_port)],
                           add_ops=[project(name)], new_id="seg-v2")
    return FixturePair("SEGMENTED", p, q, _mapping_common(p, q), Truth.TRUE,
                       "one unsupported operator separates the two edits")


def _compose_mappings(m1: EditMapping, m2: EditMapping) -> EditMapping:
    pairs = []
    for a, b in m1.pairs:
        c = m2.partner_in_q(b)
        if c is not None:
            pairs.append((a, c))
    return EditMapping.of(pairs)


def generate_pair(base: Workflow, rules: list[RewriteRule], seed: int,
                  oracle_instances: int = 20) -> FixturePair:
    """Apply each rule once at a seeded random location and label the result.

    Equivalence-preserving sequences are certified by the oracle sweep (no
    mismatch allowed); semantic sequences must yield a reproducible witness.
    """
    rng = random.Random(seed)
    current = base
    mapping = _ids(base)
    preserving = all(r.equivalence_preserving for r in rules)
    for salt, rule in enumerate(rules):
        locs = rule.locations(current)
        if not locs:
            raise GenerationError(f"rule {rule.name} not applicable to {current.id}")
        loc = locs[rng.randrange(len(locs))]
        nxt, step_mapping = rule.apply(current, loc, rng, salt)
        mapping = _compose_mappings(mapping, step_mapping)
        current = nxt

    name = f"{base.id}/{'+'.join(r.name for r in rules)}/{seed}"
    fixture = FixturePair(name, base, current, mapping,
                          Truth.TRUE if preserving else Truth.FALSE)
    ctx = full_pair_context(fixture.version_pair())
    mismatch = find_mismatch(ctx, base.semantics, oracle_instances, seed)
    if preserving and mismatch is not None:
        raise GenerationError(f"rule sequence broke equivalence: {mismatch.notes}")
    if not preserving and mismatch is None:
        raise GenerationError("semantic edit produced no witness")
    return fixture


def corpus(seeds=range(1, 11), max_edits: int = 4) -> list[FixturePair]:
    """Deterministic labeled corpus over the SPJ and experiment-shaped bases."""
    bases = [base_spj(0), base_spj(1, width=3), base_spj(2), base_spj(3, width=3),
             base_wlike("w1"), base_wlike("w2")]
    eq_rules = list(EQUIVALENCE_RULES.values())
    sem_rules = list(SEMANTIC_RULES.values())
    out: list[FixturePair] = []
    for base in bases:
        for seed in seeds:
            rng = random.Random((zlib.crc32(base.id.encode()) & 0xFFFF) * 1000 + seed)
            for n_edits in range(1, max_edits + 1):
                chosen = []
                wf = base
                ok = True
                for _ in range(n_edits):
                    usable = [r for r in eq_rules if r.locations(wf)]
                    if not usable:
                        ok = False
                        break
                    r = usable[rng.randrange(len(usable))]
                    chosen.append(r)
                    try:
                        wf, _ = r.apply(wf, r.locations(wf)[0], rng, len(chosen))
                    except GenerationError:
                        ok = False
                        break
                if not ok:
                    continue
                try:
                    out.append(generate_pair(base, chosen, seed))
                except GenerationError:
                    continue
            for r in sem_rules:
                if not r.locations(base):
                    continue
                try:
                    out.append(generate_pair(base, [r], seed))
                except GenerationError:
                    pass
    return out
