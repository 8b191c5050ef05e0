"""Execution-oracle verifier: sampled evaluation over seeded random instances.

Paired sources receive identical random tables whose value domains include the
boundary constants extracted from the predicates (shifted by one in each
direction), so tiny instances exercise decision boundaries. A sink mismatch on
any instance proves inequivalence and the instance is kept as a witness; True
is claimed only when the two sides are structurally identical.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from .ev import (EvDescriptor, RestrictionResult, Truth, Verdict, no_opaque_check,
                 structurally_identical)
from .interp import ExecutionError, NotExecutableError, evaluate
from .model import OpKind, Schema, Semantics, Workflow
from .predicates import pred_constants
from .tables import Table, table_diff, tables_equal
from .windows import VersionPair, WindowContext


@dataclass(frozen=True)
class Witness:
    """One distinguishing instance: the inputs plus the first differing sinks."""

    inputs: dict[str, Table]  # keyed by P-side source id
    sink_pair: tuple[str, str]
    p_result: Table
    q_result: Table
    notes: tuple[str, ...]


def _boundary_values(wf: Workflow) -> dict[str, set]:
    ints, floats, strings = set(), set(), set()
    for op in wf.operators:
        if op.props.predicate is None:
            continue
        for v in pred_constants(op.props.predicate):
            if isinstance(v, bool) or v is None:
                continue
            if isinstance(v, int):
                ints.update({v - 1, v, v + 1})
            elif isinstance(v, float):
                floats.update({v - 1.0, v, v + 1.0})
            elif isinstance(v, str):
                strings.add(v)
    return {"int": ints, "float": floats, "string": strings}


def _domains(pairs: list[Workflow]) -> dict[str, list]:
    pools = {"int": {0, 1, 2, 5}, "float": {0.0, 1.5}, "string": {"a", "b", "c"},
             "bool": {True, False}}
    for wf in pairs:
        extra = _boundary_values(wf)
        for k in ("int", "float", "string"):
            pools[k] |= extra[k]
    return {k: sorted(v, key=repr) for k, v in pools.items()}


def random_table(schema: Schema, rng: random.Random, domains: dict[str, list],
                 max_rows: int = 8, null_rate: float = 0.1) -> Table:
    n = rng.randint(0, max_rows)
    rows = []
    for _ in range(n):
        row = []
        for _, t in schema:
            pool = domains.get(t, domains["int"])
            if rng.random() < null_rate:
                row.append(None)
            else:
                row.append(rng.choice(pool))
        rows.append(tuple(row))
    return Table(tuple(schema), tuple(rows))


def sample_instances(ctx: WindowContext, instances: int, seed: int):
    """Yield (inputs keyed by P source, inputs keyed by Q source) per instance."""
    rng = random.Random(seed)
    domains = _domains([ctx.p_side, ctx.q_side])
    schemas = {}
    for p_id, q_id in ctx.source_pairs:
        schema = ctx.p_side.ops_by_id[p_id].props.schema
        schemas[(p_id, q_id)] = schema
    for _ in range(instances):
        p_inputs: dict[str, Table] = {}
        q_inputs: dict[str, Table] = {}
        for (p_id, q_id), schema in sorted(schemas.items()):
            t = random_table(schema, rng, domains)
            p_inputs[p_id] = t
            q_inputs[q_id] = t
        yield p_inputs, q_inputs


def find_mismatch(ctx: WindowContext, semantics: Semantics, instances: int,
                  seed: int) -> Optional[Witness]:
    for p_inputs, q_inputs in sample_instances(ctx, instances, seed):
        try:
            p_out = evaluate(ctx.p_side, p_inputs)
            q_out = evaluate(ctx.q_side, q_inputs)
        except (NotExecutableError, ExecutionError):
            return None
        for p_sink, q_sink in ctx.sink_pairs:
            if not tables_equal(p_out[p_sink], q_out[q_sink], semantics):
                notes = table_diff(p_out[p_sink], q_out[q_sink], semantics)
                return Witness(p_inputs, (p_sink, q_sink),
                               p_out[p_sink], q_out[q_sink], tuple(notes))
    return None


def replay_witness(ctx: WindowContext, w: Witness, semantics: Semantics) -> bool:
    """Re-execute a witness instance; True when the mismatch reproduces."""
    q_inputs = {q: w.inputs[p] for p, q in ctx.source_pairs}
    p_out = evaluate(ctx.p_side, w.inputs)
    q_out = evaluate(ctx.q_side, q_inputs)
    ps, qs = w.sink_pair
    return not tables_equal(p_out[ps], q_out[qs], semantics)


def oracle_verify_ctx(ctx: WindowContext, pair: VersionPair, *,
                      instances: int, seed: int) -> Verdict:
    witness = find_mismatch(ctx, pair.p.semantics, instances, seed)
    if witness is not None:
        return Verdict(Truth.FALSE, "sampled instance distinguishes the sides", witness)
    if structurally_identical(ctx):
        return Verdict(Truth.TRUE, "sides structurally identical")
    return Verdict(Truth.UNKNOWN, f"no mismatch in {instances} sampled instances")


def oracle_ev(instances: int = 20, seed: int = 0) -> EvDescriptor:
    """Sampling oracle as a pluggable verifier.

    Restriction: every operator must be executable (no opaque kinds); this is
    monotonic since growing a window can never remove an opaque operator.
    """

    def verify_ctx(ctx: WindowContext, pair: VersionPair) -> Verdict:
        return oracle_verify_ctx(ctx, pair, instances=instances, seed=seed)

    def check(w, pair) -> RestrictionResult:
        return no_opaque_check(w, pair)

    return EvDescriptor(
        name="oracle",
        semantics=frozenset({Semantics.SET, Semantics.BAG, Semantics.ORDERED_BAG}),
        restriction_monotonic=True,
        can_prove_inequivalence=True,
        relaxed_restrictions=False,
        check=check,
        verify_ctx=verify_ctx,
    )
