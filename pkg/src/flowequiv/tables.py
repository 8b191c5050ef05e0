"""Concrete tables and semantics-aware result comparison."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass

from .model import Schema, Semantics
from .predicates import Value

Row = tuple[Value, ...]


@dataclass(frozen=True)
class Table:
    schema: Schema
    rows: tuple[Row, ...]

    def __post_init__(self):
        arity = len(self.schema)
        for r in self.rows:
            if len(r) != arity:
                raise ValueError(f"row arity {len(r)} != schema arity {arity}")

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(c for c, _ in self.schema)

    def env(self, row: Row) -> dict[str, Value]:
        return dict(zip(self.columns, row))

    def distinct(self) -> "Table":
        seen: set[Row] = set()
        out = []
        for r in self.rows:
            if r not in seen:
                seen.add(r)
                out.append(r)
        return Table(self.schema, tuple(out))


def table(schema: Schema, rows) -> Table:
    return Table(tuple(schema), tuple(tuple(r) for r in rows))


def _sort_key(row: Row):
    # Total order for canonical presentation: group by type name so mixed
    # null/typed cells never raise.
    return tuple((v is None, type(v).__name__, v if v is not None else 0) for v in row)


def tables_equal(a: Table, b: Table, semantics: Semantics) -> bool:
    if a.schema != b.schema:
        return False
    if semantics is Semantics.SET:
        return set(a.rows) == set(b.rows)
    if semantics is Semantics.BAG:
        return Counter(a.rows) == Counter(b.rows)
    return a.rows == b.rows


def table_diff(a: Table, b: Table, semantics: Semantics) -> list[str]:
    """Human-readable mismatch notes; empty when tables agree."""
    if a.schema != b.schema:
        return [f"schema mismatch: {a.schema} vs {b.schema}"]
    notes: list[str] = []
    if semantics is Semantics.SET:
        only_a = set(a.rows) - set(b.rows)
        only_b = set(b.rows) - set(a.rows)
        if only_a:
            notes.append(f"rows only in first: {sorted(only_a, key=_sort_key)[:3]}")
        if only_b:
            notes.append(f"rows only in second: {sorted(only_b, key=_sort_key)[:3]}")
    elif semantics is Semantics.BAG:
        ca, cb = Counter(a.rows), Counter(b.rows)
        delta = {r: ca[r] - cb[r] for r in set(ca) | set(cb) if ca[r] != cb[r]}
        if delta:
            sample = sorted(delta.items(), key=lambda kv: _sort_key(kv[0]))[:3]
            notes.append(f"multiplicity differences: {sample}")
    else:
        if a.rows != b.rows:
            notes.append(f"ordered rows differ: {a.rows[:3]} vs {b.rows[:3]}")
    return notes
