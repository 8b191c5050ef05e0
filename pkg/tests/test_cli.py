from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import pytest

from flowequiv import io as fio
from flowequiv.cli import main
from flowequiv.corpus import fx_proj, fx_run, fx_udf_edit, generate_pair, base_spj, EQUIVALENCE_RULES
from flowequiv.orchestrate import VerifyConfig, verify


def write_pair(tmp_path: Path, f, tag: str):
    p = tmp_path / f"{tag}_p.json"
    q = tmp_path / f"{tag}_q.json"
    m = tmp_path / f"{tag}_m.json"
    p.write_text(fio.dumps_canonical(fio.workflow_to_doc(f.p)))
    q.write_text(fio.dumps_canonical(fio.workflow_to_doc(f.q)))
    m.write_text(fio.dumps_canonical(fio.mapping_to_json(f.tracked)))
    return str(p), str(q), str(m)


def test_identical_files_exit_zero(tmp_path, capsys):
    f = fx_run()
    p, q, m = write_pair(tmp_path, f, "run")
    assert main(["verify", "--p", p, "--q", p, "--mapping", m]) != 3  # same file twice
    capsys.readouterr()
    code = main(["verify", "--p", p, "--q", q, "--mapping", m])
    out = capsys.readouterr().out
    assert code == 0
    assert json.loads(out)["verdict"] == "True"


def test_projection_difference_exits_one_with_no_ev_calls(tmp_path, capsys):
    f = fx_proj()
    p, q, m = write_pair(tmp_path, f, "proj")
    code = main(["verify", "--p", p, "--q", q, "--mapping", m, "--symbolic", "on"])
    report = json.loads(capsys.readouterr().out)
    assert code == 1
    assert report["ev_calls"] == 0
    assert report["witness"]["kind"] == "symbolic"


def test_udf_edit_exits_two(tmp_path, capsys):
    f = fx_udf_edit()
    p, q, m = write_pair(tmp_path, f, "udf")
    code = main(["verify", "--p", p, "--q", q, "--mapping", m])
    capsys.readouterr()
    assert code == 2


def test_malformed_json_exits_three(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{nope")
    f = fx_run()
    _, q, _ = write_pair(tmp_path, f, "run")
    code = main(["verify", "--p", str(bad), "--q", q])
    err = capsys.readouterr().err
    assert code == 3
    assert "line 1" in err


def test_report_matches_schema(tmp_path, capsys):
    f = fx_run()
    p, q, m = write_pair(tmp_path, f, "run")
    main(["verify", "--p", p, "--q", q, "--mapping", m])
    report = json.loads(capsys.readouterr().out)
    jsonschema.validate(report, fio.REPORT_SCHEMA)


def test_cli_library_parity(tmp_path, capsys):
    f = fx_run()
    p, q, m = write_pair(tmp_path, f, "run")
    code = main(["verify", "--p", p, "--q", q, "--mapping", m])
    capsys.readouterr()
    lib = verify(f.p, f.q, tracked=f.tracked, cfg=VerifyConfig())
    assert {0: "True", 1: "False", 2: "Unknown"}[code] == lib.verdict.truth.value


def make_corpus_dir(tmp_path: Path) -> Path:
    out = tmp_path / "corpus"
    out.mkdir()
    f = generate_pair(base_spj(0), [EQUIVALENCE_RULES["emptyProject"],
                                    EQUIVALENCE_RULES["emptyProject"]], seed=4)
    bundle = {"pair_id": "two-edit", "expected": f.expected.value,
              "p": fio.workflow_to_doc(f.p), "q": fio.workflow_to_doc(f.q),
              "mapping": fio.mapping_to_json(f.tracked)}
    (out / "pair0.json").write_text(fio.dumps_canonical(bundle))
    return out


def test_bench_plus_explores_no_more_than_baseline(tmp_path, capsys):
    out = make_corpus_dir(tmp_path)
    code = main(["bench", "--corpus", str(out), "--modes", "baseline,plus"])
    got = capsys.readouterr().out.strip().splitlines()
    assert code == 0
    header, *rows = got
    assert header == "pair_id,mode,verdict,decompositions_explored,ev_calls,ms"
    cells = [r.split(",") for r in rows]
    by_mode = {c[1]: int(c[3]) for c in cells}
    assert by_mode["plus"] <= by_mode["baseline"]
    assert {c[2] for c in cells} == {"True"}


def test_bench_empty_corpus_outputs_header(tmp_path, capsys):
    empty = tmp_path / "none"
    empty.mkdir()
    code = main(["bench", "--corpus", str(empty)])
    out = capsys.readouterr().out.strip()
    assert code == 0
    assert out == "pair_id,mode,verdict,decompositions_explored,ev_calls,ms"


def test_bench_unknown_mode_exits_three(tmp_path, capsys):
    out = make_corpus_dir(tmp_path)
    code = main(["bench", "--corpus", str(out), "--modes", "warp"])
    capsys.readouterr()
    assert code == 3


def test_seed_env_override(tmp_path, capsys, monkeypatch):
    f = fx_run()
    p, q, m = write_pair(tmp_path, f, "run")
    monkeypatch.setenv("FLOWEQUIV_SEED", "not-a-number")
    code = main(["verify", "--p", p, "--q", q, "--mapping", m])
    capsys.readouterr()
    assert code == 3
    monkeypatch.setenv("FLOWEQUIV_SEED", "7")
    code = main(["verify", "--p", p, "--q", q, "--mapping", m])
    capsys.readouterr()
    assert code == 0


def test_canonical_roundtrip_on_documents(tmp_path):
    f = fx_run()
    doc = fio.workflow_to_doc(f.p)
    text = fio.dumps_canonical(doc)
    again = fio.workflow_from_doc(json.loads(text))
    assert fio.dumps_canonical(fio.workflow_to_doc(again)) == text


def test_corpus_command_emits_bundles_bench_consumes(tmp_path, capsys):
    out = tmp_path / "generated"
    code = main(["corpus", "--out", str(out), "--seeds", "1", "--max-edits", "1"])
    capsys.readouterr()
    assert code == 0
    bundles = sorted(out.glob("*.json"))
    assert bundles
    first = json.loads(bundles[0].read_text())
    assert {"pair_id", "expected", "p", "q", "mapping"} <= set(first)
    # Byte-identical on regeneration (seed determinism).
    again = tmp_path / "again"
    main(["corpus", "--out", str(again), "--seeds", "1", "--max-edits", "1"])
    capsys.readouterr()
    assert bundles[0].read_text() == (again / bundles[0].name).read_text()
