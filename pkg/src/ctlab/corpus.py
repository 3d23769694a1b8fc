"""Bundled benchmark programs with constant-time ground truth.

Each entry ships as an ``.ir`` file under ``corpus_ir/`` plus a flag saying
whether the source is constant-time as written.  ``get``/``load_program``
parse a fresh copy every call, so callers may mutate freely.  The first
access to an entry also self-checks the ground truth: with every pass
disabled and branchless lowering, the leak checker must agree with the
stored flag, otherwise the corpus itself is broken and ``CorpusError``
is raised.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from importlib import resources

from .backend import PROFILES, lower
from .ir import Program, parse_ir
from .leaks import compare_traces
from .passes import PipelineSpec, run_pipeline
from .tracer import execute, gen_inputs

__all__ = ["CorpusEntry", "CorpusError", "entries", "get", "load_program",
           "names"]


class CorpusError(Exception):
    pass


@dataclass(frozen=True)
class CorpusEntry:
    name: str
    ct_expected: bool            # constant-time as written?
    description: str

    @property
    def source(self) -> str:
        return _read_ir(self.name)

    def load(self) -> Program:
        return parse_ir(self.source)


_ENTRIES: list[CorpusEntry] = [
    CorpusEntry(
        "fig1a_branch", False,
        "Secret-dependent branch writing one of two public values; the "
        "textbook non-constant-time pattern."),
    CorpusEntry(
        "fig1b_load", False,
        "Table lookup indexed directly by the secret; leaks through the "
        "access address."),
    CorpusEntry(
        "fig1c_ctselect", True,
        "Branchless select built from xor/neg/and masking, as used in "
        "constant-time crypto code."),
    CorpusEntry(
        "fig1d_ctlookup", True,
        "Constant-time table scan: every entry is read and the wanted one "
        "is masked in."),
    CorpusEntry(
        "rsa_bearssl_lookup", True,
        "Masked window lookup in the style of BearSSL's br_i31_modpow: "
        "scans all window entries, masking in the selected one; the word "
        "count per entry is a runtime value."),
    CorpusEntry(
        "ecdsa_bearssl_lookup", True,
        "The same masked window scan with a compile-time-constant word "
        "count, as in fixed-width ECDSA point tables."),
    CorpusEntry(
        "poly_frommsg", True,
        "Kyber-style poly_frommsg: expands each message bit into a "
        "coefficient through mask arithmetic (pq-crystals reference code)."),
    CorpusEntry(
        "loop_unswitch_toy", True,
        "Loop-invariant secret select inside a loop; bait for unswitching."),
    CorpusEntry(
        "jump_threading_toy", True,
        "Two selects on mutually exclusive range checks of the secret; "
        "bait for jump threading."),
    CorpusEntry(
        "path_splitting_toy", True,
        "Secret-dependent select at a loop latch; bait for path splitting "
        "(cf. GCC bug 112402)."),
]

_BY_NAME = {e.name: e for e in _ENTRIES}
_CHECKED: set[str] = set()


def _read_ir(name: str) -> str:
    path = resources.files(__package__) / "corpus_ir" / f"{name}.ir"
    return path.read_text(encoding="utf-8")


def _baseline_check(entry: CorpusEntry) -> None:
    """With all passes off, the checker verdict must match ct_expected."""
    prog = entry.load()
    mid, _ = run_pipeline(prog, PipelineSpec(toggles={}))
    low, _ = lower(mid, PROFILES["x86-64"], cmov_conversion=False)
    func = low.function()
    inputs = gen_inputs(low, count=16, seed=0)
    traces = [execute(low, args) for args in inputs.arg_dicts()]
    report = compare_traces(traces, func.id_to_loc())
    if report.is_clean != entry.ct_expected:
        verdict = "clean" if report.is_clean else "leaky"
        raise CorpusError(
            f"corpus entry {entry.name!r} is {verdict} under the do-nothing "
            f"pipeline but is registered ct_expected={entry.ct_expected}")


def entries() -> list[CorpusEntry]:
    return list(_ENTRIES)


def names() -> list[str]:
    return [e.name for e in _ENTRIES]


def get(name: str) -> CorpusEntry:
    entry = _BY_NAME.get(name)
    if entry is None:
        known = ", ".join(names())
        raise CorpusError(f"unknown corpus entry {name!r} (have: {known})")
    if name not in _CHECKED:
        _baseline_check(entry)
        _CHECKED.add(name)
    return entry


def load_program(name_or_path: str) -> Program:
    """A corpus entry by name, or any ``.ir`` file by path."""
    if name_or_path in _BY_NAME:
        return get(name_or_path).load()
    if os.path.exists(name_or_path):
        with open(name_or_path, encoding="utf-8") as fh:
            return parse_ir(fh.read())
    raise CorpusError(
        f"{name_or_path!r} is neither a corpus entry nor an existing file")
