"""Top-level verification pipeline.

Order of business for a version pair: validate, try the symbolic fast path,
then for each candidate edit mapping (tracked one first) run the segmented or
baseline decomposition search, short-circuiting on the first True or False.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

from .decompose import Counters, Decomposition, EvSuite, SearchSettings, verify_pair_baseline
from .edits import (EditMapping, Transformation, apply_transformation, edit_units,
                    enumerate_mappings, mapping_violations)
from .ev import EvDescriptor, Truth, Verdict, canonical_ev
from .model import Semantics, Workflow, validate_workflow
from .oracle import oracle_ev
from .segments import (Segmentation, segmentation_by_mcw_union,
                       segmentation_by_unsupported_ops, verify_with_segments)
from .symbolic import quick_inequivalence
from .windows import VersionPair


class VerifyInputError(Exception):
    pass


@dataclass(frozen=True)
class VerifyConfig:
    evs: tuple[str, ...] = ("canonical",)
    mapping_cap: int = 16
    segmentation: str = "boundary"  # off | boundary | mcw-union
    pruning: bool = True
    ranking: bool = True
    symbolic: bool = True
    non_monotonic_expansion: bool = True
    backtrack: bool = False
    oracle_instances: int = 20
    seed: int = 0
    budget_seconds: float = 60.0

    def __post_init__(self):
        if not self.evs:
            raise VerifyInputError("at least one verifier is required")
        if self.budget_seconds <= 0:
            raise VerifyInputError("budget must be positive")
        if self.segmentation not in ("off", "boundary", "mcw-union"):
            raise VerifyInputError(f"unknown segmentation mode {self.segmentation!r}")


BASELINE_CONFIG = VerifyConfig(segmentation="off", pruning=False, ranking=False,
                               symbolic=False)


def make_ev(name: str, cfg: VerifyConfig) -> EvDescriptor:
    if name == "canonical":
        return canonical_ev()
    if name == "canonical-relaxed":
        return canonical_ev(relaxed=True)
    if name == "oracle":
        return oracle_ev(instances=cfg.oracle_instances, seed=cfg.seed)
    raise VerifyInputError(f"unknown verifier {name!r}")


@dataclass(frozen=True)
class MappingReport:
    mapping: EditMapping
    verdict: Verdict
    decompositions_explored: int
    ev_calls: int
    windows_pruned: int
    timed_out: bool


@dataclass(frozen=True)
class VerifyResult:
    verdict: Verdict
    reports: tuple[MappingReport, ...]
    mappings_tried: int
    decompositions_explored: int
    ev_calls: int
    reason: str
    wall_ms: float
    witness_decomposition: Optional[Decomposition] = None

    @property
    def truth(self) -> Truth:
        return self.verdict.truth


def _check_inputs(P: Workflow, Q: Workflow):
    for wf, name in ((P, "P"), (Q, "Q")):
        violations = validate_workflow(wf)
        if violations:
            raise VerifyInputError(f"{name} invalid: " + "; ".join(str(v) for v in violations[:3]))
        if len(wf.sinks) != 1:
            raise VerifyInputError(f"{name} must have exactly one sink, found {len(wf.sinks)}")
    if P.semantics is not Q.semantics:
        raise VerifyInputError("the versions use different table semantics")


def tracked_mapping_from_delta(P: Workflow, delta: Transformation) -> EditMapping:
    """Mapping induced by a tracked transformation: surviving operators keep their ids."""
    applied = apply_transformation(P, delta, new_id="__check__")
    keep = P.op_ids & applied.op_ids
    return EditMapping.of((x, x) for x in sorted(keep))


def _settings(cfg: VerifyConfig, deadline: float) -> SearchSettings:
    return SearchSettings(ranking=cfg.ranking, pruning=cfg.pruning, memoize=True,
                          non_monotonic_expansion=cfg.non_monotonic_expansion,
                          backtrack=cfg.backtrack, deadline=deadline)


def verify(P: Workflow, Q: Workflow,
           tracked: Optional[Union[EditMapping, Transformation]] = None,
           cfg: VerifyConfig = VerifyConfig()) -> VerifyResult:
    """Decide whether the two single-sink versions produce the same sink result."""
    t0 = time.perf_counter()
    _check_inputs(P, Q)
    deadline = time.monotonic() + cfg.budget_seconds

    tracked_mapping: Optional[EditMapping] = None
    if isinstance(tracked, Transformation):
        tracked_mapping = tracked_mapping_from_delta(P, tracked)
    elif isinstance(tracked, EditMapping):
        bad = mapping_violations(P, Q, tracked)
        if bad:
            raise VerifyInputError("tracked mapping invalid: " + "; ".join(bad[:3]))
        tracked_mapping = tracked

    def result(verdict: Verdict, reports: list[MappingReport], reason: str,
               witness: Optional[Decomposition] = None) -> VerifyResult:
        return VerifyResult(
            verdict=verdict,
            reports=tuple(reports),
            mappings_tried=len(reports),
            decompositions_explored=sum(r.decompositions_explored for r in reports),
            ev_calls=sum(r.ev_calls for r in reports),
            reason=reason,
            wall_ms=(time.perf_counter() - t0) * 1000.0,
            witness_decomposition=witness,
        )

    if cfg.symbolic:
        diff = quick_inequivalence(P, Q)
        if diff is not None:
            return result(Verdict(Truth.FALSE, f"sink {diff.field} differ", diff),
                          [], "symbolic fast path")

    evs = tuple(make_ev(name, cfg) for name in cfg.evs)
    reports: list[MappingReport] = []
    timed_out = False
    for mapping in enumerate_mappings(P, Q, cap=cfg.mapping_cap, tracked=tracked_mapping):
        if time.monotonic() > deadline:
            timed_out = True
            break
        units = edit_units(P, Q, mapping)
        pair = VersionPair(P, Q, mapping, units)
        counters = Counters()
        suite = EvSuite(evs, pair, counters)
        settings = _settings(cfg, deadline)
        if cfg.segmentation == "off" or not units:
            verdict, witness = verify_pair_baseline(pair, suite, settings, counters)
        else:
            if cfg.segmentation == "boundary":
                segmentation = segmentation_by_unsupported_ops(pair, suite)
            else:
                segmentation = segmentation_by_mcw_union(pair, suite, settings)
            verdict, witness = verify_with_segments(pair, suite, segmentation,
                                                    settings, counters)
        ran_out = verdict.truth is Truth.UNKNOWN and verdict.reason == "timeout"
        reports.append(MappingReport(mapping, verdict,
                                     counters.decompositions_explored,
                                     counters.ev_calls,
                                     counters.windows_pruned,
                                     ran_out))
        timed_out = timed_out or ran_out
        if verdict.is_true:
            return result(verdict, reports, "equivalent decomposition found", witness)
        if verdict.is_false:
            return result(verdict, reports, "whole-pair window proven inequivalent")
        if ran_out:
            break
    reason = "timeout" if timed_out else "mappings exhausted"
    return result(Verdict(Truth.UNKNOWN, reason), reports, reason)
