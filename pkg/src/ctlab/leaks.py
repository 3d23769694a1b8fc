"""Trace comparison, leak classification, and report diffing.

Two traces of the same function on the same public inputs should be
identical when the code is constant-time.  Divergences are classified:

* control-flow: the first aligned position where a conditional branch went
  different ways.  Scanning for that pair stops there; later events are
  unaligned and would only produce noise.
* memory-access: for each load/store id, the ordered offset sequences over
  the common control-flow prefix differ.

Findings are attributed to instruction ids and source locations, and
deduplicated by (instr, kind) so each culprit appears once per report.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import SourceLoc
from .tracer import BranchDir, MemAccess, Trace

CONTROL_FLOW = "control-flow"
MEMORY_ACCESS = "memory-access"


class LeakError(Exception):
    pass


@dataclass(frozen=True)
class LeakFinding:
    instr: int
    kind: str                    # CONTROL_FLOW or MEMORY_ACCESS
    loc: SourceLoc
    witness: tuple[int, int]     # indices of the diverging input pair


@dataclass
class LeakReport:
    program: str
    pipeline: str                # PipelineSpec digest
    findings: list[LeakFinding] = field(default_factory=list)
    preset: str = ""
    seed: int = 0
    inputs: int = 0

    @property
    def vulnerable_instructions(self) -> int:
        return len({f.instr for f in self.findings})

    @property
    def vulnerable_lines(self) -> int:
        return len(self.lines())

    @property
    def is_clean(self) -> bool:
        return not self.findings

    def lines(self) -> set[tuple[str, int]]:
        return {(f.loc.file, f.loc.line) for f in self.findings}


@dataclass
class ReportDiff:
    added_lines: set[tuple[str, int]]
    removed_lines: set[tuple[str, int]]
    unchanged: set[tuple[str, int]]

    @property
    def is_empty(self) -> bool:
        return not self.added_lines and not self.removed_lines


def first_divergence(a: Trace, b: Trace) -> tuple[int, int] | None:
    """Earliest event index where the traces differ, with a's instruction id
    there.  If one trace is a strict prefix of the other, the position is the
    shorter length and the id comes from the longer trace's next event.
    Identical traces give None.
    """
    n = min(len(a.events), len(b.events))
    for pos in range(n):
        if a.events[pos] != b.events[pos]:
            return pos, a.events[pos].instr
    if len(a.events) == len(b.events):
        return None
    longer = b if len(b.events) > len(a.events) else a
    return n, longer.events[n].instr


def _aligned(ea, eb) -> bool:
    if type(ea) is not type(eb) or ea.instr != eb.instr:
        return False
    if isinstance(ea, MemAccess):
        return ea.kind == eb.kind and ea.region == eb.region
    return True


def _cf_prefix(a: Trace, b: Trace) -> tuple[int, int | None]:
    """(prefix length, diverging condbr id or None).

    The prefix ends at the first aligned branch pair with opposite
    directions (a control-flow leak) or at the first structurally
    misaligned event (defensive; deterministic programs only reach this
    through an earlier divergence).  Offset-only differences on aligned
    memory events do not end the prefix.
    """
    n = min(len(a.events), len(b.events))
    for pos in range(n):
        ea, eb = a.events[pos], b.events[pos]
        if not _aligned(ea, eb):
            return pos, None
        if isinstance(ea, BranchDir) and ea.taken != eb.taken:
            return pos, ea.instr
    return n, None


def compare_traces(traces: list[Trace], id_to_loc: dict[int, SourceLoc],
                   pipeline: str = "") -> LeakReport:
    """Pairwise-compare traces and attribute every divergence.

    All pairs (i < j) are scanned; findings are deduplicated by
    (instr, kind), keeping the witness from the first pair in index order.
    The finding set is independent of trace order.
    """
    if len(traces) < 2:
        raise LeakError("need at least 2 traces to compare")
    names = {t.function for t in traces}
    if len(names) != 1:
        raise LeakError(f"traces from different functions: {sorted(names)}")

    found: dict[tuple[int, str], LeakFinding] = {}

    def add(instr: int, kind: str, witness: tuple[int, int]):
        key = (instr, kind)
        if key in found:
            return
        loc = id_to_loc.get(instr)
        if loc is None:
            raise LeakError(f"no source location for instruction id {instr}")
        found[key] = LeakFinding(instr, kind, loc, witness)

    for i in range(len(traces)):
        for j in range(i + 1, len(traces)):
            a, b = traces[i], traces[j]
            prefix, cf_id = _cf_prefix(a, b)
            if cf_id is not None:
                add(cf_id, CONTROL_FLOW, (i, j))

            seq_a: dict[int, list[int]] = {}
            for e in a.events[:prefix]:
                if isinstance(e, MemAccess):
                    seq_a.setdefault(e.instr, []).append(e.offset)
            seq_b: dict[int, list[int]] = {}
            for e in b.events[:prefix]:
                if isinstance(e, MemAccess):
                    seq_b.setdefault(e.instr, []).append(e.offset)
            for iid in sorted(set(seq_a) | set(seq_b)):
                if seq_a.get(iid) != seq_b.get(iid):
                    add(iid, MEMORY_ACCESS, (i, j))

    findings = [found[k] for k in sorted(found)]
    return LeakReport(next(iter(names)), pipeline, findings)


def diff_reports(old: LeakReport, new: LeakReport) -> ReportDiff:
    """Line-level difference; a line in both reports is unchanged even when
    its instruction ids moved (unrolling duplicates instructions, not lines).
    """
    if old.program != new.program:
        raise LeakError(
            f"cannot diff reports for {old.program!r} vs {new.program!r}")
    a, b = old.lines(), new.lines()
    return ReportDiff(added_lines=b - a, removed_lines=a - b, unchanged=a & b)
