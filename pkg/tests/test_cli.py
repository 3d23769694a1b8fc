"""End-to-end command-line behavior: output shapes and exit codes."""

from __future__ import annotations

import json

import pytest

from ctlab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    cap = capsys.readouterr()
    return code, cap.out, cap.err


def test_analyze_clean_exits_zero(capsys):
    code, out, err = run(capsys, "analyze", "fig1c_ctselect",
                         "--preset", "baseline-off")
    assert code == 0
    assert "constant-time: no divergence found" in out
    assert err == ""


def test_analyze_leak_exits_two(capsys):
    code, out, _ = run(capsys, "analyze", "fig1a_branch",
                       "--preset", "baseline-off")
    assert code == 2
    assert "NOT constant-time" in out
    assert "fig1a.c:3" in out


def test_analyze_json_schema(capsys):
    code, out, _ = run(capsys, "analyze", "fig1b_load",
                       "--preset", "baseline-off", "--json",
                       "--inputs", "8", "--seed", "3")
    assert code == 2
    doc = json.loads(out)
    assert set(doc) == {"program", "preset", "seed", "inputs", "findings",
                        "counts"}
    assert doc["program"] == "fig1b_load"
    assert doc["preset"] == "baseline-off"
    assert doc["seed"] == 3 and doc["inputs"] == 8
    assert set(doc["counts"]) == {"instructions", "lines"}
    for f in doc["findings"]:
        assert set(f) == {"instr", "kind", "file", "line"}
    assert doc["counts"]["instructions"] == len(
        {f["instr"] for f in doc["findings"]})


def test_analyze_accepts_ir_paths(tmp_path, capsys):
    from ctlab.corpus import get
    p = tmp_path / "x.ir"
    p.write_text(get("fig1c_ctselect").source, encoding="utf-8")
    code, out, _ = run(capsys, "analyze", str(p), "--preset", "baseline-off")
    assert code == 0


def test_out_writes_file(tmp_path, capsys):
    target = tmp_path / "report.json"
    code, out, _ = run(capsys, "analyze", "fig1a_branch", "--preset",
                       "baseline-off", "--json", "--out", str(target))
    assert code == 2
    assert out == ""
    doc = json.loads(target.read_text(encoding="utf-8"))
    assert doc["program"] == "fig1a_branch"


def test_matrix_canonical_rows(capsys):
    code, out, _ = run(capsys, "matrix", "ecdsa_bearssl_lookup", "--json",
                       "--preset", "llvm18-O3")
    assert code == 2
    doc = json.loads(out)
    assert doc["vary"] == ["loop_unswitch", "loop_unroll", "loop_vectorize",
                           "cmov_conversion"]
    assert len(doc["rows"]) == 7
    assert [r["clean"] for r in doc["rows"]] == [
        False, True, False, False, True, True, True]
    first = doc["rows"][0]["toggles"]
    assert all(first.values())               # row 1 is everything-on


def test_matrix_custom_vary_uses_product(capsys):
    code, out, _ = run(capsys, "matrix", "fig1c_ctselect", "--json",
                       "--preset", "llvm18-O3", "--vary",
                       "instcombine,loop_unswitch")
    doc = json.loads(out)
    assert doc["vary"] == ["instcombine", "loop_unswitch"]
    assert len(doc["rows"]) == 4
    combos = {(r["toggles"]["instcombine"], r["toggles"]["loop_unswitch"])
              for r in doc["rows"]}
    assert len(combos) == 4


def test_matrix_text_table(capsys):
    code, out, _ = run(capsys, "matrix", "fig1a_branch",
                       "--preset", "baseline-off", "--vary", "instcombine")
    assert code == 2
    lines = out.rstrip("\n").split("\n")
    assert lines[0].split() == ["instcombine", "ct", "instrs", "lines"]
    assert len(lines) == 3                    # header + on + off
    assert all("NO" in l for l in lines[1:])


def test_diff_reports_change(capsys):
    code, out, _ = run(capsys, "diff", "loop_unswitch_toy",
                       "baseline-off", "gcc13-O3")
    assert code == 2
    assert "▲" in out
    code2, out2, _ = run(capsys, "diff", "loop_unswitch_toy",
                         "baseline-off", "gcc13-O3-mitig")
    assert code2 == 0
    assert "no change" in out2


def test_diff_json(capsys):
    code, out, _ = run(capsys, "diff", "loop_unswitch_toy",
                       "baseline-off", "gcc13-O3", "--json")
    doc = json.loads(out)
    assert set(doc) == {"program", "from", "to", "added_lines",
                        "removed_lines", "unchanged_lines"}
    assert doc["added_lines"] == ["unsw.c:6"]
    assert doc["removed_lines"] == []


def test_corpus_list(capsys):
    code, out, _ = run(capsys, "corpus", "list")
    assert code == 0
    lines = out.rstrip("\n").split("\n")
    assert len(lines) == 10
    assert lines[0].startswith("fig1a_branch")
    assert "not-ct" in lines[0]
    assert any("rsa_bearssl_lookup" in l for l in lines)


def test_flags_output(capsys):
    code, out, _ = run(capsys, "flags", "--compiler", "gcc")
    assert code == 0
    assert out.strip() == "-fno-unswitch-loops -fno-thread-jumps -fno-split-paths"
    code, out, _ = run(capsys, "flags", "--compiler", "llvm", "--json",
                       "--keep-vectorize")
    assert json.loads(out) == [
        "-mllvm", "--x86-cmov-converter=false",
        "-mllvm", "--disable-cgp-select2branch=true",
        "-mllvm", "--unswitch-threshold=1",
    ]
    code, out, _ = run(capsys, "flags", "--compiler", "llvm", "--no-mitig")
    assert code == 0 and out.strip() == ""


def test_usage_errors_exit_one(capsys):
    assert run(capsys, "analyze")[0] == 1              # missing program
    assert run(capsys, "frobnicate")[0] == 1           # unknown subcommand
    assert run(capsys, "flags")[0] == 1                # missing --compiler
    code, _, err = run(capsys, "analyze", "missing_entry")
    assert code == 1
    assert "error:" in err
    code, _, err = run(capsys, "analyze", "fig1a_branch",
                       "--preset", "nope")
    assert code == 1 and "unknown preset" in err


def test_help_exits_zero(capsys):
    assert run(capsys, "--help")[0] == 0
    assert run(capsys, "analyze", "--help")[0] == 0
