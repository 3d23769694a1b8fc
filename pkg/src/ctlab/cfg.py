"""Control-flow analysis: natural loops, nesting, counted-loop recognition.

Loop transforms only handle the shape the toolchain's own frontends produce:
a header block that tests the bound and conditionally exits, a body that
eventually branches back to the header, and a step-1 induction variable
defined by a header phi.  Anything else is left alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .ir import Function, Instruction, dominators, predecessors, successors


@dataclass
class Loop:
    header: str
    latches: list[str]
    blocks: set[str] = field(default_factory=set)
    parent: "Loop | None" = None

    @property
    def depth(self) -> int:
        d = 1
        p = self.parent
        while p is not None:
            d += 1
            p = p.parent
        return d


def natural_loops(func: Function) -> list[Loop]:
    """All natural loops, via back edges (tail dominated by head).

    Loops sharing a header are merged.  Result is sorted outermost-first
    (by block-set size, descending) with parent links filled in.
    """
    dom = dominators(func)
    by_header: dict[str, Loop] = {}
    preds = predecessors(func)

    for block in func.blocks:
        if block.label not in dom:
            continue
        for succ in successors(block):
            if succ in dom.get(block.label, set()):
                # back edge block -> succ
                loop = by_header.setdefault(succ, Loop(succ, []))
                loop.latches.append(block.label)
                loop.blocks.add(succ)
                stack = [block.label]
                while stack:
                    l = stack.pop()
                    if l in loop.blocks:
                        continue
                    loop.blocks.add(l)
                    stack.extend(p for p in preds.get(l, []) if p in dom)

    loops = sorted(by_header.values(), key=lambda l: -len(l.blocks))
    for i, inner in enumerate(loops):
        for outer in loops[:i]:
            if inner.header in outer.blocks and outer is not inner:
                if inner.parent is None or len(outer.blocks) < len(inner.parent.blocks):
                    inner.parent = outer
    return loops


def innermost_loop_map(func: Function) -> dict[str, Loop]:
    """Map each block label to the smallest loop containing it, if any."""
    out: dict[str, Loop] = {}
    for loop in sorted(natural_loops(func), key=lambda l: -len(l.blocks)):
        for label in loop.blocks:
            out[label] = loop  # smaller loops overwrite larger ones
    return out


@dataclass
class CountedLoop:
    """A header-tested loop `for (iv = init; iv <pred> bound; iv += 1)`.

    * header holds the iv phi, the bound compare, and a condbr whose taken
      edge enters the body and whose other edge exits.
    * body_labels lists the in-loop blocks other than the header, in
      function order; the latch ends with `br header`.
    * bound is an int when it could be resolved through const definitions,
      else the operand name.
    """

    loop: Loop
    header: str
    body_labels: list[str]
    latch: str
    exit: str
    iv_phi: Instruction
    init: object
    step_instr: Instruction
    cmp_instr: Instruction
    cond_br: Instruction
    bound: object

    @property
    def trip_count(self) -> int | None:
        if isinstance(self.init, int) and isinstance(self.bound, int):
            if self.cmp_instr.pred == "lt":
                return max(0, self.bound - self.init)
        return None


def _resolve_const(func: Function, op: object) -> object:
    """Follow const definitions and foldable shl/add over consts."""
    if isinstance(op, int):
        return op
    defs = func.defs()
    seen = set()
    while isinstance(op, str) and op in defs and op not in seen:
        seen.add(op)
        ins = defs[op]
        if ins.opcode == "const":
            return ins.operands[0]
        if ins.opcode in ("shl", "add", "sub"):
            a = _resolve_const(func, ins.operands[0])
            b = _resolve_const(func, ins.operands[1])
            if isinstance(a, int) and isinstance(b, int):
                mask = (1 << ins.width) - 1
                if ins.opcode == "shl":
                    return (a << (b & (ins.width - 1))) & mask
                if ins.opcode == "add":
                    return (a + b) & mask
                return (a - b) & mask
        break
    return op


def counted_loop_info(func: Function, loop: Loop) -> CountedLoop | None:
    """Recognize the canonical counted-loop shape, else None."""
    header = func.block(loop.header)
    term = header.terminator
    if term is None or term.opcode != "condbr":
        return None
    taken, not_taken = term.labels
    if taken not in loop.blocks or not_taken in loop.blocks:
        return None

    # bound compare: icmp.lt iv, bound feeding the condbr
    defs = func.defs()
    cond = term.operands[0]
    if not isinstance(cond, str) or cond not in defs:
        return None
    cmp_ins = defs[cond]
    if cmp_ins.opcode != "icmp" or cmp_ins.pred != "lt":
        return None

    # induction phi in the header with a +1 step from a latch
    if len(loop.latches) != 1:
        return None
    latch = loop.latches[0]
    iv_phi = None
    for phi in header.phis():
        if cmp_ins.operands[0] == phi.result:
            iv_phi = phi
            break
    if iv_phi is None:
        return None

    init = None
    step_name = None
    preds = predecessors(func)
    outside = [p for p in preds[loop.header] if p not in loop.blocks]
    if len(outside) != 1:
        return None
    for label, op in zip(iv_phi.labels, iv_phi.operands):
        if label == latch:
            step_name = op
        else:
            init = op
    if step_name is None or not isinstance(step_name, str) or step_name not in defs:
        return None
    step = defs[step_name]
    if step.opcode != "add" or step.operands[0] != iv_phi.result or step.operands[1] != 1:
        return None

    body_labels = [b.label for b in func.blocks
                   if b.label in loop.blocks and b.label != loop.header]
    latch_term = func.block(latch).terminator
    if latch_term is None or latch_term.opcode != "br":
        return None

    bound = _resolve_const(func, cmp_ins.operands[1])
    init_res = _resolve_const(func, init)
    return CountedLoop(loop, loop.header, body_labels, latch, not_taken,
                       iv_phi, init_res, step, cmp_ins, term, bound)
