"""Differential trace comparison and leak attribution."""

from __future__ import annotations

import pytest

from ctlab.ir import SourceLoc, parse_ir
from ctlab.leaks import (
    CONTROL_FLOW,
    MEMORY_ACCESS,
    LeakError,
    LeakReport,
    LeakFinding,
    compare_traces,
    diff_reports,
    first_divergence,
)
from ctlab.tracer import execute

SECRET_BRANCH = """
func f(secret s: u1) {
bb0:
  condbr s, bbT, bbF   !loc src.c:3
bbT:
  store out, 0, 1      !loc src.c:4
  br bbJ               !loc src.c:4
bbF:
  store out, 0, 2      !loc src.c:6
  br bbJ               !loc src.c:6
bbJ:
  v = load out, 0      !loc src.c:8
  ret v                !loc src.c:8
}
global out: arr<u32,1> = zeros
"""

SECRET_INDEX = """
func f(secret s: u8) {
bb0:
  v = load table, s    !loc src.c:2
  ret v                !loc src.c:3
}
global table: arr<u32,256> = counting
"""


def traces_for(src: str, rows: list[dict]):
    prog = parse_ir(src)
    return prog, [execute(prog, r) for r in rows]


def test_first_divergence():
    prog, (t0, t1) = traces_for(SECRET_BRANCH, [{"s": 0}, {"s": 1}])
    pos, instr = first_divergence(t0, t1)
    assert pos == 0 and instr == 0
    same0 = execute(prog, {"s": 0})
    assert first_divergence(t0, same0) is None


def test_first_divergence_prefix_case():
    # one trace strictly longer: position is the shorter length
    prog, (t0, t1) = traces_for(SECRET_INDEX, [{"s": 1}, {"s": 2}])
    t_short = execute(prog, {"s": 1})
    t_short.events = t_short.events[:0]
    pos, instr = first_divergence(t_short, t1)
    assert pos == 0 and instr == t1.events[0].instr


def test_control_flow_finding():
    prog, traces = traces_for(SECRET_BRANCH, [{"s": 0}, {"s": 1}])
    rep = compare_traces(traces, prog.function().id_to_loc())
    kinds = {(f.instr, f.kind) for f in rep.findings}
    assert (0, CONTROL_FLOW) in kinds
    cf = next(f for f in rep.findings if f.kind == CONTROL_FLOW)
    assert (cf.loc.file, cf.loc.line) == ("src.c", 3)
    assert cf.witness == (0, 1)
    assert not rep.is_clean


def test_memory_finding_and_dedup():
    prog, traces = traces_for(SECRET_INDEX, [{"s": 3}, {"s": 5}, {"s": 9}])
    rep = compare_traces(traces, prog.function().id_to_loc())
    assert [(f.instr, f.kind) for f in rep.findings] == [(0, MEMORY_ACCESS)]
    assert rep.findings[0].witness == (0, 1)   # first diverging pair wins
    assert rep.vulnerable_instructions == 1
    assert rep.vulnerable_lines == 1
    assert rep.lines() == {("src.c", 2)}


def test_memory_offsets_after_cf_divergence_not_blamed():
    # after a control-flow split the store offsets differ positionally, but
    # only events inside the aligned prefix may produce memory findings
    prog, traces = traces_for(SECRET_BRANCH, [{"s": 0}, {"s": 1}])
    rep = compare_traces(traces, prog.function().id_to_loc())
    assert all(f.kind == CONTROL_FLOW for f in rep.findings)


def test_identical_traces_are_clean():
    src = """
func f(secret s: u8) {
bb0:
  r = select s, 1, 2   !loc src.c:1
  ret r                !loc src.c:2
}
"""
    prog, traces = traces_for(src, [{"s": 0}, {"s": 1}, {"s": 7}])
    rep = compare_traces(traces, prog.function().id_to_loc())
    assert rep.is_clean
    assert rep.findings == []


def test_all_pairs_not_just_first():
    # s=0 and s=1 diverge; s=1 and s=3 also diverge at a later branch.
    src = """
func f(secret s: u2) {
bb0:
  b0 = and s, 1         !loc src.c:1
  condbr b0, bbA, bbB   !loc src.c:2
bbA:
  b1 = lshr s, 1        !loc src.c:3
  condbr b1, bbC, bbD   !loc src.c:4
bbB:
  br bbD                !loc src.c:5
bbC:
  br bbD                !loc src.c:6
bbD:
  ret 0                 !loc src.c:7
}
"""
    prog, traces = traces_for(src, [{"s": 0}, {"s": 1}, {"s": 3}])
    rep = compare_traces(traces, prog.function().id_to_loc())
    instrs = {f.instr for f in rep.findings}
    assert instrs == {1, 3}   # pair (0,1) hits id 1, pair (1,2) hits id 3


def test_compare_traces_errors():
    prog, traces = traces_for(SECRET_INDEX, [{"s": 1}, {"s": 2}])
    with pytest.raises(LeakError):
        compare_traces(traces[:1], prog.function().id_to_loc())
    other = execute(parse_ir(SECRET_BRANCH.replace("func f", "func g")), {"s": 0})
    with pytest.raises(LeakError):
        compare_traces([traces[0], other], prog.function().id_to_loc())


def mk_report(lines: list[int]) -> LeakReport:
    findings = [
        LeakFinding(i, CONTROL_FLOW, SourceLoc("a.c", ln), (0, 1))
        for i, ln in enumerate(lines)
    ]
    return LeakReport("p", "d", findings)


def test_diff_reports_line_level():
    d = diff_reports(mk_report([3, 5]), mk_report([5, 9]))
    assert d.added_lines == {("a.c", 9)}
    assert d.removed_lines == {("a.c", 3)}
    assert d.unchanged == {("a.c", 5)}
    assert not d.is_empty
    assert diff_reports(mk_report([4]), mk_report([4])).is_empty
    with pytest.raises(LeakError):
        diff_reports(mk_report([1]), LeakReport("other", "d"))


def test_duplicated_instructions_same_line_count_once():
    findings = [
        LeakFinding(10, CONTROL_FLOW, SourceLoc("a.c", 6), (0, 1)),
        LeakFinding(22, CONTROL_FLOW, SourceLoc("a.c", 6), (0, 2)),
    ]
    rep = LeakReport("p", "d", findings)
    assert rep.vulnerable_instructions == 2
    assert rep.vulnerable_lines == 1
