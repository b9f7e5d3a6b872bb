"""Optimization passes for the small IR.

Six deterministic passes, each a function Function -> None mutating in
place. The ``-Oz`` meta-flag expands to the fixed size pipeline
[mem2reg, constfold, instcombine, gvn, dce, simplifycfg] applied twice.
"""

from __future__ import annotations

from typing import Callable

from passtune.backend.mini_ir import (
    BINOPS,
    TYPE_BITS,
    Function,
    Instr,
    Lit,
    Operand,
    Reg,
    clone_function,
    dominators,
    predecessors,
    reachable_labels,
)


def wrap(value: int, bits: int) -> int:
    """Two's-complement signed representative of ``value`` at ``bits``."""
    mask = (1 << bits) - 1
    value &= mask
    if value >= 1 << (bits - 1):
        value -= 1 << bits
    return value


def _replace_uses(fn: Function, old: str, new: Operand) -> None:
    for instr in fn.instructions():
        if any(isinstance(op, Reg) and op.name == old for op in instr.operands):
            instr.operands = tuple(
                new if isinstance(op, Reg) and op.name == old else op
                for op in instr.operands
            )


def _count_uses(fn: Function, name: str) -> int:
    return sum(
        1
        for instr in fn.instructions()
        for op in instr.operands
        if isinstance(op, Reg) and op.name == name
    )


def _fold_binop(opcode: str, ty: str, a: int, b: int) -> int:
    bits = TYPE_BITS[ty]
    if opcode == "add":
        return wrap(a + b, bits)
    if opcode == "sub":
        return wrap(a - b, bits)
    if opcode == "mul":
        return wrap(a * b, bits)
    raise ValueError(opcode)


def _fold_icmp(pred: str, ty: str, a: int, b: int) -> int:
    bits = TYPE_BITS[ty]
    a, b = wrap(a, bits), wrap(b, bits)
    if pred == "eq":
        return int(a == b)
    if pred == "ne":
        return int(a != b)
    if pred == "slt":
        return int(a < b)
    raise ValueError(pred)


def constfold(fn: Function) -> None:
    """Fold literal-only binops/icmps and literal-condition branches.

    Folded results propagate into uses, which can expose further folds;
    runs to a fixed point.
    """
    changed = True
    while changed:
        changed = False
        for block in fn.blocks:
            kept: list[Instr] = []
            for instr in block.instrs:
                ops = instr.operands
                if (
                    instr.opcode in BINOPS
                    and isinstance(ops[0], Lit)
                    and isinstance(ops[1], Lit)
                ):
                    folded = _fold_binop(instr.opcode, instr.ty, ops[0].value, ops[1].value)
                    _replace_uses(fn, instr.result, Lit(folded))
                    changed = True
                    continue
                if (
                    instr.opcode == "icmp"
                    and isinstance(ops[0], Lit)
                    and isinstance(ops[1], Lit)
                ):
                    folded = _fold_icmp(instr.pred, instr.ty, ops[0].value, ops[1].value)
                    _replace_uses(fn, instr.result, Lit(folded))
                    changed = True
                    continue
                if (
                    instr.opcode == "br"
                    and instr.operands
                    and isinstance(instr.operands[0], Lit)
                ):
                    taken = instr.labels[0] if instr.operands[0].value else instr.labels[1]
                    kept.append(Instr("br", labels=(taken,)))
                    changed = True
                    continue
                kept.append(instr)
            block.instrs = kept


def dce(fn: Function) -> None:
    """Delete value-producing instructions whose results are unused.

    Stores, branches, and rets are roots and never removed. Runs to a
    fixed point, so chains of dead definitions disappear together.
    """
    changed = True
    while changed:
        changed = False
        used = {
            op.name
            for instr in fn.instructions()
            for op in instr.operands
            if isinstance(op, Reg)
        }
        for block in fn.blocks:
            kept = [
                i
                for i in block.instrs
                if i.result is None or i.result in used
            ]
            if len(kept) != len(block.instrs):
                block.instrs = kept
                changed = True


def mem2reg(fn: Function) -> None:
    """Promote stack cells with exactly one store that dominates all loads.

    Loads become the stored value; the store and the alloca disappear.
    Cells with zero or multiple stores, or a load the store does not
    dominate, are left alone.
    """
    dom = dominators(fn)
    reach = reachable_labels(fn)
    allocas = [i for i in fn.instructions() if i.opcode == "alloca"]
    for alloca in allocas:
        ptr = alloca.result
        stores: list[Instr] = []
        loads: list[Instr] = []
        promotable = True
        for instr in fn.instructions():
            uses_ptr = any(
                isinstance(op, Reg) and op.name == ptr for op in instr.operands
            )
            if not uses_ptr:
                continue
            if instr.opcode == "store" and instr.operands[1] == Reg(ptr):
                if isinstance(instr.operands[0], Reg) and instr.operands[0].name == ptr:
                    promotable = False  # cell address stored as a value
                    break
                stores.append(instr)
            elif instr.opcode == "load":
                loads.append(instr)
            else:
                promotable = False
                break
        if not promotable or len(stores) != 1:
            continue
        store = stores[0]
        sblock, sidx = _find_instr(fn, store)
        for load in loads:
            lblock, lidx = _find_instr(fn, load)
            if lblock not in reach:
                promotable = False  # cannot order against unreachable code
                break
            if lblock == sblock:
                if not sidx < lidx:
                    promotable = False
                    break
            elif sblock not in dom.get(lblock, set()):
                promotable = False
                break
        if not promotable:
            continue
        value = store.operands[0]
        for load in loads:
            _replace_uses(fn, load.result, value)
        dead = {id(store), id(alloca)} | {id(l) for l in loads}
        for block in fn.blocks:
            block.instrs = [i for i in block.instrs if id(i) not in dead]


def _find_instr(fn: Function, target: Instr) -> tuple[str, int]:
    for block in fn.blocks:
        for idx, instr in enumerate(block.instrs):
            if instr is target:
                return block.label, idx
    raise ValueError("instruction not in function")


def instcombine(fn: Function) -> None:
    """Peephole identities: x+0, 0+x, x-0, x*1, 1*x, and -(-x).

    Rewritten instructions are deleted once their uses are redirected;
    the double-negation rewrite also drops the inner sub when the outer
    use was its last. Runs to a fixed point.
    """
    changed = True
    while changed:
        changed = False
        defs = {
            i.result: i for i in fn.instructions() if i.result is not None
        }
        for block in fn.blocks:
            for instr in list(block.instrs):
                simplified = _simplify(instr, defs)
                if simplified is None:
                    continue
                _replace_uses(fn, instr.result, simplified)
                block.instrs.remove(instr)
                changed = True
                if (
                    instr.opcode == "sub"
                    and isinstance(instr.operands[1], Reg)
                ):
                    inner_name = instr.operands[1].name
                    inner = defs.get(inner_name)
                    if (
                        inner is not None
                        and inner.opcode == "sub"
                        and _count_uses(fn, inner_name) == 0
                    ):
                        for b in fn.blocks:
                            if inner in b.instrs:
                                b.instrs.remove(inner)
                                break


def _simplify(instr: Instr, defs: dict[str, Instr]) -> Operand | None:
    if instr.opcode not in BINOPS:
        return None
    a, b = instr.operands
    if instr.opcode == "add":
        if isinstance(b, Lit) and b.value == 0:
            return a
        if isinstance(a, Lit) and a.value == 0:
            return b
    elif instr.opcode == "sub":
        if isinstance(b, Lit) and b.value == 0:
            return a
        if isinstance(a, Lit) and a.value == 0 and isinstance(b, Reg):
            inner = defs.get(b.name)
            if (
                inner is not None
                and inner.opcode == "sub"
                and inner.ty == instr.ty
                and isinstance(inner.operands[0], Lit)
                and inner.operands[0].value == 0
            ):
                return inner.operands[1]
    elif instr.opcode == "mul":
        if isinstance(b, Lit) and b.value == 1:
            return a
        if isinstance(a, Lit) and a.value == 1:
            return b
    return None


_COMMUTATIVE_PREDS = ("eq", "ne")


def gvn(fn: Function) -> None:
    """Per-block value numbering over pure binops and icmps.

    A repeated computation inside one block is replaced by the first
    occurrence's result. Commutative keys (add, mul, icmp eq/ne) ignore
    operand order.
    """
    for block in fn.blocks:
        table: dict[tuple, str] = {}
        kept: list[Instr] = []
        for instr in block.instrs:
            if instr.opcode in BINOPS or instr.opcode == "icmp":
                key = _value_key(instr)
                prior = table.get(key)
                if prior is not None:
                    _replace_uses(fn, instr.result, Reg(prior))
                    continue
                table[key] = instr.result
            kept.append(instr)
        block.instrs = kept


def _operand_key(op: Operand) -> tuple:
    if isinstance(op, Reg):
        return ("r", op.name)
    return ("l", op.value)


def _value_key(instr: Instr) -> tuple:
    ops = [_operand_key(op) for op in instr.operands]
    commutative = instr.opcode in ("add", "mul") or (
        instr.opcode == "icmp" and instr.pred in _COMMUTATIVE_PREDS
    )
    if commutative:
        ops.sort()
    return (instr.opcode, instr.pred, instr.ty, tuple(ops))


def simplifycfg(fn: Function) -> None:
    """Drop unreachable blocks, then merge straight-line block pairs.

    A pair merges when the first ends in an unconditional branch to the
    second and the second has no other predecessor.
    """
    reach = reachable_labels(fn)
    fn.blocks = [b for b in fn.blocks if b.label in reach]
    merged = True
    while merged:
        merged = False
        preds = predecessors(fn)
        bmap = fn.block_map()
        for block in fn.blocks:
            term = block.instrs[-1]
            if term.opcode != "br" or term.operands or not term.labels:
                continue
            succ = bmap[term.labels[0]]
            if succ is block or succ is fn.entry:
                continue
            if preds[succ.label] != {block.label}:
                continue
            block.instrs = block.instrs[:-1] + succ.instrs
            fn.blocks.remove(succ)
            merged = True
            break


PASSES: dict[str, Callable[[Function], None]] = {
    "-mem2reg": mem2reg,
    "-constfold": constfold,
    "-instcombine": instcombine,
    "-gvn": gvn,
    "-dce": dce,
    "-simplifycfg": simplifycfg,
}

OZ_ROUND = (
    "-mem2reg",
    "-constfold",
    "-instcombine",
    "-gvn",
    "-dce",
    "-simplifycfg",
)
OZ_PIPELINE = OZ_ROUND * 2

META_PIPELINES: dict[str, tuple[str, ...]] = {"-Oz": OZ_PIPELINE}


def expand_flags(flags: list[str] | tuple[str, ...]) -> list[str]:
    out: list[str] = []
    for flag in flags:
        out.extend(META_PIPELINES.get(flag, (flag,)))
    return out


def run_pipeline(fn: Function, flags: list[str] | tuple[str, ...]) -> Function:
    """Apply flags (meta-flags expanded) to a copy of ``fn``."""
    result = clone_function(fn)
    for flag in expand_flags(flags):
        PASSES[flag](result)
    return result
