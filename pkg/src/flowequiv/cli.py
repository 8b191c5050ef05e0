"""Command-line interface: verify a version pair, benchmark a corpus directory,
or emit a generated corpus as JSON bundles.

Exit codes for ``verify``: 0 the pair is equivalent, 1 proven inequivalent,
2 undetermined, 3 input error. Scripts must treat 1 and 2 differently: 1 is a
positive claim backed by a witness.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import time
from pathlib import Path

from . import io as fio
from .corpus import corpus as generate_corpus
from .edits import EditMapping
from .ev import Truth
from .model import Semantics, Workflow
from .orchestrate import (BASELINE_CONFIG, VerifyConfig, VerifyInputError, verify)

EXIT_BY_TRUTH = {Truth.TRUE: 0, Truth.FALSE: 1, Truth.UNKNOWN: 2}
SEED_ENV = "FLOWEQUIV_SEED"


class CliError(Exception):
    pass


def _load_json(path: str):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise CliError(f"{path}: {e}")
    try:
        return json.loads(text)
    except json.JSONDecodeError as e:
        raise CliError(f"{path}: malformed JSON at line {e.lineno} column {e.colno}: {e.msg}")


def _load_workflow(path: str, semantics: str | None) -> Workflow:
    try:
        wf = fio.workflow_from_doc(_load_json(path))
    except fio.FormatError as e:
        raise CliError(f"{path}: {e}")
    if semantics is not None:
        wf = Workflow(wf.id, wf.operators, wf.links, Semantics(semantics))
    return wf


def _onoff(value: str) -> bool:
    if value not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected on|off")
    return value == "on"


def _add_verify_flags(sp: argparse.ArgumentParser):
    sp.add_argument("--p", required=True, help="first version (JSON file)")
    sp.add_argument("--q", required=True, help="second version (JSON file)")
    group = sp.add_mutually_exclusive_group()
    group.add_argument("--mapping", help="tracked edit mapping (JSON file)")
    group.add_argument("--delta", help="tracked transformation (JSON file)")
    sp.add_argument("--ev", default="canonical",
                    help="comma-separated verifier names (canonical, canonical-relaxed, oracle)")
    sp.add_argument("--seg", default="boundary", choices=["boundary", "mcw-union", "off"])
    sp.add_argument("--prune", type=_onoff, default=True, metavar="on|off")
    sp.add_argument("--rank", type=_onoff, default=True, metavar="on|off")
    sp.add_argument("--symbolic", type=_onoff, default=True, metavar="on|off")
    sp.add_argument("--mapping-cap", type=int, default=16)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--budget", type=float, default=60.0, metavar="SECONDS")
    sp.add_argument("--semantics", choices=["set", "bag", "orderedbag"], default=None)


def _config_from_args(args) -> VerifyConfig:
    seed = args.seed
    if os.environ.get(SEED_ENV):
        try:
            seed = int(os.environ[SEED_ENV])
        except ValueError:
            raise CliError(f"{SEED_ENV} must be an integer")
    return VerifyConfig(
        evs=tuple(x.strip() for x in args.ev.split(",") if x.strip()),
        mapping_cap=args.mapping_cap,
        segmentation=args.seg,
        pruning=args.prune,
        ranking=args.rank,
        symbolic=args.symbolic,
        seed=seed,
        budget_seconds=args.budget,
    )


def cmd_verify(args) -> int:
    P = _load_workflow(args.p, args.semantics)
    Q = _load_workflow(args.q, args.semantics)
    tracked = None
    if args.mapping:
        tracked = fio.mapping_from_json(_load_json(args.mapping))
    elif args.delta:
        tracked = fio.delta_from_json(_load_json(args.delta))
    cfg = _config_from_args(args)
    try:
        result = verify(P, Q, tracked=tracked, cfg=cfg)
    except VerifyInputError as e:
        raise CliError(str(e))
    sys.stdout.write(fio.dumps_canonical(fio.result_to_json(result)))
    return EXIT_BY_TRUTH[result.verdict.truth]


def _mode_config(mode: str, budget: float, seed: int) -> VerifyConfig:
    if mode == "baseline":
        return VerifyConfig(segmentation="off", pruning=False, ranking=False,
                            symbolic=False, seed=seed, budget_seconds=budget)
    if mode == "plus":
        return VerifyConfig(seed=seed, budget_seconds=budget)
    raise CliError(f"unknown mode {mode!r}")


def cmd_bench(args) -> int:
    modes = [m.strip() for m in args.modes.split(",") if m.strip()]
    for m in modes:
        _mode_config(m, args.budget, 0)  # validate names early
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else [0]
    rows = []
    bundle_paths = sorted(Path(args.corpus).glob("*.json"))
    for path in bundle_paths:
        bundle = _load_json(str(path))
        try:
            P = fio.workflow_from_doc(bundle["p"])
            Q = fio.workflow_from_doc(bundle["q"])
            mapping = fio.mapping_from_json(bundle.get("mapping", []))
        except (KeyError, fio.FormatError) as e:
            raise CliError(f"{path}: {e}")
        for mode in modes:
            for seed in seeds:
                cfg = _mode_config(mode, args.budget, seed)
                t0 = time.perf_counter()
                result = verify(P, Q, tracked=mapping, cfg=cfg)
                rows.append({
                    "pair_id": bundle.get("pair_id", path.stem),
                    "mode": mode,
                    "verdict": result.verdict.truth.value,
                    "decompositions_explored": result.decompositions_explored,
                    "ev_calls": result.ev_calls,
                    "ms": round((time.perf_counter() - t0) * 1000.0, 3),
                })
    writer = csv.DictWriter(sys.stdout, fieldnames=[
        "pair_id", "mode", "verdict", "decompositions_explored", "ev_calls", "ms"])
    writer.writeheader()
    writer.writerows(rows)
    return 0


def cmd_corpus(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    seeds = [int(s) for s in args.seeds.split(",")] if args.seeds else list(range(1, 11))
    pairs = generate_corpus(seeds=seeds, max_edits=args.max_edits)
    for i, f in enumerate(pairs):
        bundle = {
            "pair_id": f.name,
            "expected": f.expected.value,
            "p": fio.workflow_to_doc(f.p),
            "q": fio.workflow_to_doc(f.q),
            "mapping": fio.mapping_to_json(f.tracked),
        }
        (out / f"pair{i:04d}.json").write_text(fio.dumps_canonical(bundle), encoding="utf-8")
    sys.stdout.write(f"wrote {len(pairs)} pairs to {out}\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="flowequiv",
        description="Decide whether two versions of a dataflow DAG produce the same sink result.")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("verify", help="verify one version pair")
    _add_verify_flags(sp)
    sp.set_defaults(func=cmd_verify)

    sb = sub.add_parser("bench", help="run corpus bundles in one or more modes")
    sb.add_argument("--corpus", required=True, help="directory of pair bundles (*.json)")
    sb.add_argument("--modes", default="baseline,plus")
    sb.add_argument("--seeds", default="")
    sb.add_argument("--budget", type=float, default=60.0)
    sb.set_defaults(func=cmd_bench)

    sc = sub.add_parser("corpus", help="emit generated pair bundles")
    sc.add_argument("--out", required=True)
    sc.add_argument("--seeds", default="")
    sc.add_argument("--max-edits", type=int, default=4)
    sc.set_defaults(func=cmd_corpus)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CliError as e:
        sys.stderr.write(f"error: {e}\n")
        return 3
    except fio.FormatError as e:
        sys.stderr.write(f"error: {e}\n")
        return 3


if __name__ == "__main__":
    sys.exit(main())
