"""Canonical JSON formats for workflows, mappings, transformations, and reports.

All emitters sort keys and arrays so that documents diff cleanly under version
control; parse -> serialize -> parse is the identity on this canonical form.
"""

from __future__ import annotations

import json
from typing import Any, Optional

from .decompose import Decomposition
from .edits import (AddLink, AddOperator, DeleteOperator, EditMapping, EditOp,
                    ModifyOperator, RemoveLink, Transformation)
from .model import (AggSpec, Link, OpKind, Operator, OpProps, Semantics, Workflow,
                    _N_IN)
from .oracle import Witness
from .orchestrate import VerifyResult
from .predicates import (And, Arith, Cmp, Col, Const, Expr, Not, Or, Pred)
from .symbolic import SymbolicDifference
from .tables import Table


class FormatError(Exception):
    def __init__(self, message: str, where: str = "$"):
        super().__init__(f"{where}: {message}")
        self.where = where


# ---------------------------------------------------------------------------
# Predicates


def expr_to_json(e: Expr) -> Any:
    if isinstance(e, Col):
        return {"col": e.name}
    if isinstance(e, Const):
        return {"const": e.value}
    return {"arith": {"op": e.op, "left": expr_to_json(e.left), "right": expr_to_json(e.right)}}


def expr_from_json(d: Any, where: str) -> Expr:
    if not isinstance(d, dict):
        raise FormatError("expression must be an object", where)
    if "col" in d:
        return Col(d["col"])
    if "const" in d:
        return Const(d["const"])
    if "arith" in d:
        a = d["arith"]
        return Arith(a["op"], expr_from_json(a["left"], where + ".left"),
                     expr_from_json(a["right"], where + ".right"))
    raise FormatError(f"unknown expression {sorted(d)}", where)


def pred_to_json(p: Pred) -> Any:
    if isinstance(p, Cmp):
        return {"cmp": {"op": p.op, "left": expr_to_json(p.left), "right": expr_to_json(p.right)}}
    if isinstance(p, And):
        return {"and": [pred_to_json(x) for x in p.parts]}
    if isinstance(p, Or):
        return {"or": [pred_to_json(x) for x in p.parts]}
    return {"not": pred_to_json(p.inner)}


def pred_from_json(d: Any, where: str = "$") -> Pred:
    if not isinstance(d, dict):
        raise FormatError("predicate must be an object", where)
    if "cmp" in d:
        c = d["cmp"]
        return Cmp(c["op"], expr_from_json(c["left"], where + ".left"),
                   expr_from_json(c["right"], where + ".right"))
    if "and" in d:
        return And(tuple(pred_from_json(x, f"{where}.and[{i}]") for i, x in enumerate(d["and"])))
    if "or" in d:
        return Or(tuple(pred_from_json(x, f"{where}.or[{i}]") for i, x in enumerate(d["or"])))
    if "not" in d:
        return Not(pred_from_json(d["not"], where + ".not"))
    raise FormatError(f"unknown predicate {sorted(d)}", where)


# ---------------------------------------------------------------------------
# Workflows


def props_to_json(p: OpProps) -> dict:
    out: dict[str, Any] = {}
    if p.schema is not None:
        out["schema"] = [[n, t] for n, t in p.schema]
    if p.predicate is not None:
        out["predicate"] = pred_to_json(p.predicate)
    if p.columns is not None:
        out["columns"] = list(p.columns)
    if p.join_keys is not None:
        out["join_keys"] = [[l, r] for l, r in p.join_keys]
    if p.group_keys is not None:
        out["group_keys"] = list(p.group_keys)
    if p.aggs is not None:
        out["aggs"] = [[a.func, a.column, a.out] for a in p.aggs]
    if p.sort_keys is not None:
        out["sort_keys"] = [[c, bool(asc)] for c, asc in p.sort_keys]
    if p.unnest_column is not None:
        out["unnest_column"] = p.unnest_column
    if p.token is not None:
        out["token"] = p.token
    return out


def props_from_json(d: dict, where: str) -> OpProps:
    known = {"schema", "predicate", "columns", "join_keys", "group_keys", "aggs",
             "sort_keys", "unnest_column", "token"}
    unknown = set(d) - known
    if unknown:
        raise FormatError(f"unknown properties {sorted(unknown)}", where)
    return OpProps(
        schema=tuple((n, t) for n, t in d["schema"]) if "schema" in d else None,
        predicate=pred_from_json(d["predicate"], where + ".predicate") if "predicate" in d else None,
        columns=tuple(d["columns"]) if "columns" in d else None,
        join_keys=tuple((l, r) for l, r in d["join_keys"]) if "join_keys" in d else None,
        group_keys=tuple(d["group_keys"]) if "group_keys" in d else None,
        aggs=tuple(AggSpec(f, c, o) for f, c, o in d["aggs"]) if "aggs" in d else None,
        sort_keys=tuple((c, bool(a)) for c, a in d["sort_keys"]) if "sort_keys" in d else None,
        unnest_column=d.get("unnest_column"),
        token=d.get("token"),
    )


def workflow_to_doc(wf: Workflow) -> dict:
    return {
        "id": wf.id,
        "semantics": wf.semantics.value,
        "operators": [
            {
                "id": o.id,
                "kind": o.kind.value,
                "properties": props_to_json(o.props),
                "out_ports": list(range(o.n_out)),
            }
            for o in sorted(wf.operators, key=lambda o: o.id)
        ],
        "links": [
            {"from": {"op": l.src, "port": l.src_port}, "to": {"op": l.dst, "port": l.dst_port}}
            for l in sorted(wf.links)
        ],
    }


def workflow_from_doc(doc: dict, where: str = "$") -> Workflow:
    if not isinstance(doc, dict):
        raise FormatError("workflow document must be an object", where)
    for key in ("id", "semantics", "operators", "links"):
        if key not in doc:
            raise FormatError(f"missing key {key!r}", where)
    try:
        semantics = Semantics(doc["semantics"])
    except ValueError:
        raise FormatError(f"unknown semantics {doc['semantics']!r}", where + ".semantics")
    links = []
    for i, l in enumerate(doc["links"]):
        try:
            links.append(Link(l["from"]["op"], int(l["from"]["port"]),
                              l["to"]["op"], int(l["to"]["port"])))
        except (KeyError, TypeError) as e:
            raise FormatError(f"malformed link: {e}", f"{where}.links[{i}]")
    max_in: dict[str, int] = {}
    for l in links:
        max_in[l.dst] = max(max_in.get(l.dst, 0), l.dst_port + 1)
    ops = []
    for i, o in enumerate(doc["operators"]):
        w = f"{where}.operators[{i}]"
        try:
            kind = OpKind(o["kind"])
        except (ValueError, KeyError):
            raise FormatError(f"unknown operator kind {o.get('kind')!r}", w)
        props = props_from_json(o.get("properties", {}), w + ".properties")
        n_out = len(o.get("out_ports", [])) or -1
        if kind is OpKind.SINK:
            n_out = 0
        n_in = max(_N_IN[kind], max_in.get(o["id"], 0))
        ops.append(Operator(o["id"], kind, props, n_in=n_in, n_out=n_out))
    return Workflow.build(doc["id"], ops, links, semantics)


def dumps_canonical(doc: Any) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# Mappings and transformations


def mapping_to_json(m: EditMapping) -> list[dict]:
    return [{"p": p, "q": q} for p, q in m.pairs]


def mapping_from_json(d: Any, where: str = "$") -> EditMapping:
    if not isinstance(d, list):
        raise FormatError("mapping must be an array of {p, q}", where)
    pairs = []
    for i, entry in enumerate(d):
        try:
            pairs.append((entry["p"], entry["q"]))
        except (KeyError, TypeError):
            raise FormatError("mapping entry needs p and q", f"{where}[{i}]")
    return EditMapping.of(pairs)


def edit_to_json(e: EditOp) -> dict:
    if isinstance(e, AddOperator):
        return {"add_operator": {"id": e.op.id, "kind": e.op.kind.value,
                                 "properties": props_to_json(e.op.props),
                                 "out_ports": list(range(e.op.n_out))}}
    if isinstance(e, DeleteOperator):
        return {"delete_operator": {"id": e.op_id}}
    if isinstance(e, ModifyOperator):
        body: dict[str, Any] = {"id": e.op_id, "properties": props_to_json(e.props)}
        if e.kind is not None:
            body["kind"] = e.kind.value
        return {"modify_operator": body}
    link = e.link
    body = {"from": {"op": link.src, "port": link.src_port},
            "to": {"op": link.dst, "port": link.dst_port}}
    return {"add_link" if isinstance(e, AddLink) else "remove_link": body}


def edit_from_json(d: dict, where: str) -> EditOp:
    if "add_operator" in d:
        o = d["add_operator"]
        kind = OpKind(o["kind"])
        n_out = len(o.get("out_ports", [])) or -1
        return AddOperator(Operator(o["id"], kind, props_from_json(o.get("properties", {}), where),
                                    n_out=(0 if kind is OpKind.SINK else n_out)))
    if "delete_operator" in d:
        return DeleteOperator(d["delete_operator"]["id"])
    if "modify_operator" in d:
        o = d["modify_operator"]
        kind = OpKind(o["kind"]) if "kind" in o else None
        return ModifyOperator(o["id"], props_from_json(o.get("properties", {}), where), kind)
    for key, ctor in (("add_link", AddLink), ("remove_link", RemoveLink)):
        if key in d:
            o = d[key]
            return ctor(Link(o["from"]["op"], int(o["from"]["port"]),
                             o["to"]["op"], int(o["to"]["port"])))
    raise FormatError(f"unknown edit {sorted(d)}", where)


def delta_to_json(t: Transformation) -> list[dict]:
    return [edit_to_json(e) for e in t]


def delta_from_json(d: Any, where: str = "$") -> Transformation:
    if not isinstance(d, list):
        raise FormatError("transformation must be an array", where)
    return Transformation(tuple(edit_from_json(e, f"{where}[{i}]") for i, e in enumerate(d)))


# ---------------------------------------------------------------------------
# Reports


def _table_to_json(t: Table) -> dict:
    return {"schema": [[n, ty] for n, ty in t.schema], "rows": [list(r) for r in t.rows]}


def _witness_to_json(w: object) -> Optional[dict]:
    if isinstance(w, Witness):
        return {
            "kind": "instance",
            "inputs": {k: _table_to_json(t) for k, t in sorted(w.inputs.items())},
            "sink_pair": list(w.sink_pair),
            "p_result": _table_to_json(w.p_result),
            "q_result": _table_to_json(w.q_result),
            "notes": list(w.notes),
        }
    if isinstance(w, SymbolicDifference):
        return {
            "kind": "symbolic",
            "field": w.field,
            "p": {"projected": list(w.p_summary.projected), "sorted_by": list(w.p_summary.sorted_by)},
            "q": {"projected": list(w.q_summary.projected), "sorted_by": list(w.q_summary.sorted_by)},
        }
    return None


def decomposition_to_json(d: Decomposition) -> list[dict]:
    return [
        {"p_ops": sorted(w.p_ops), "q_ops": sorted(w.q_ops), "covering": w.key in d.cover_keys}
        for w in d.windows
    ]


def result_to_json(r: VerifyResult, *, include_timing: bool = True) -> dict:
    doc: dict[str, Any] = {
        "verdict": r.verdict.truth.value,
        "reason": r.reason,
        "mappings_tried": r.mappings_tried,
        "decompositions_explored": r.decompositions_explored,
        "ev_calls": r.ev_calls,
        "reports": [
            {
                "mapping": mapping_to_json(rep.mapping),
                "verdict": rep.verdict.truth.value,
                "decompositions_explored": rep.decompositions_explored,
                "ev_calls": rep.ev_calls,
                "windows_pruned": rep.windows_pruned,
                "timed_out": rep.timed_out,
            }
            for rep in r.reports
        ],
        "witness": _witness_to_json(r.verdict.witness),
        "witness_decomposition": (decomposition_to_json(r.witness_decomposition)
                                  if r.witness_decomposition is not None else None),
    }
    if include_timing:
        doc["wall_ms"] = r.wall_ms
    return doc


def _load_report_schema() -> dict:
    import importlib.resources
    text = importlib.resources.files("flowequiv").joinpath("report.schema.json").read_text()
    return json.loads(text)


REPORT_SCHEMA: dict = _load_report_schema()
