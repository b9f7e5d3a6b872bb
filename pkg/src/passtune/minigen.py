"""Deterministic generator of small IR functions for tests and demos.

Each function is built from one of six templates with seeded random
constants, so corpora are reproducible and every function verifies.
The templates plant known optimization opportunities:

- ``arith``: straight-line code with constant subexpressions, identity
  operations, duplicate computations, dead values, and a promotable
  stack cell;
- ``constbranch``: a diamond on a literal condition whose arms store to
  one cell, so collapsing the branch unlocks promotion a round later;
- ``dynbranch``: a data-dependent diamond with removable identities in
  both arms;
- ``deadheavy``: a chain of unused computations;
- ``phaseorder``: two chained constant diamonds; the default pipeline's
  two rounds cannot finish the enable chain, so a short pass list beats
  the meta-flag (phase ordering matters);
- ``loop``: a memory-carried counter loop the pipeline cannot shrink.
"""

from __future__ import annotations

import random
from typing import Callable

from passtune.ircore import IrFunction
from passtune.util import stable_seed

_KINDS: list[tuple[str, float]] = [
    ("arith", 0.25),
    ("constbranch", 0.20),
    ("dynbranch", 0.15),
    ("deadheavy", 0.15),
    ("phaseorder", 0.15),
    ("loop", 0.10),
]


class _Names:
    def __init__(self) -> None:
        self.n = 0

    def fresh(self) -> str:
        self.n += 1
        return f"%v{self.n}"


def _lit(rng: random.Random, lo: int = 1, hi: int = 99) -> int:
    return rng.randint(lo, hi)


def _gen_arith(rng: random.Random, name: str) -> str:
    names = _Names()
    lines = [f"define i32 @{name}(i32 %a, i32 %b) {{", "entry:"]
    vals = ["%a", "%b"]

    p = names.fresh()
    lines.append(f"{p} = alloca i32")
    lines.append(f"store i32 {rng.choice(vals)}, i32* {p}")
    loaded = names.fresh()
    lines.append(f"{loaded} = load i32, i32* {p}")
    vals.append(loaded)

    for _ in range(rng.randint(1, 2)):
        v = names.fresh()
        lines.append(f"{v} = add i32 {_lit(rng)}, {_lit(rng)}")
        vals.append(v)
    for _ in range(rng.randint(1, 2)):
        v = names.fresh()
        op, unit = rng.choice([("add", 0), ("sub", 0), ("mul", 1)])
        lines.append(f"{v} = {op} i32 {rng.choice(vals)}, {unit}")
        vals.append(v)
    x, y = rng.choice(vals), rng.choice(vals)
    d1, d2 = names.fresh(), names.fresh()
    lines.append(f"{d1} = add i32 {x}, {y}")
    lines.append(f"{d2} = add i32 {x}, {y}")
    vals.extend([d1, d2])
    n1, n2 = names.fresh(), names.fresh()
    src = rng.choice(vals)
    lines.append(f"{n1} = sub i32 0, {src}")
    lines.append(f"{n2} = sub i32 0, {n1}")
    vals.append(n2)
    dead = names.fresh()
    lines.append(f"{dead} = mul i32 {rng.choice(vals)}, {_lit(rng, 2, 9)}")

    r = names.fresh()
    lines.append(f"{r} = add i32 {rng.choice(vals)}, {vals[-1]}")
    lines.append(f"ret i32 {r}")
    lines.append("}")
    return "\n".join(lines)


def _gen_constbranch(rng: random.Random, name: str) -> str:
    k1, k2 = _lit(rng), _lit(rng)
    kt, kf = _lit(rng), _lit(rng)
    return "\n".join(
        [
            f"define i32 @{name}(i32 %a) {{",
            "entry:",
            "%m = alloca i32",
            f"%c = icmp slt i32 {k1}, {k2}",
            "br i1 %c, label %then, label %else",
            "then:",
            f"store i32 {kt}, i32* %m",
            "br label %join",
            "else:",
            f"store i32 {kf}, i32* %m",
            "br label %join",
            "join:",
            "%v = load i32, i32* %m",
            "%r = add i32 %v, %a",
            "ret i32 %r",
            "}",
        ]
    )


def _gen_dynbranch(rng: random.Random, name: str) -> str:
    k = _lit(rng)
    return "\n".join(
        [
            f"define i32 @{name}(i32 %a, i32 %b) {{",
            "entry:",
            "%m = alloca i32",
            f"%c = icmp slt i32 %a, {k}",
            "br i1 %c, label %then, label %else",
            "then:",
            "%x = add i32 %a, 0",
            f"%x2 = add i32 %x, {_lit(rng)}",
            "store i32 %x2, i32* %m",
            "br label %join",
            "else:",
            "%y = mul i32 %b, 1",
            f"%y2 = mul i32 %y, {_lit(rng, 2, 9)}",
            "store i32 %y2, i32* %m",
            "br label %join",
            "join:",
            "%v = load i32, i32* %m",
            "%r = sub i32 %v, 0",
            "ret i32 %r",
            "}",
        ]
    )


def _gen_deadheavy(rng: random.Random, name: str) -> str:
    names = _Names()
    lines = [f"define i32 @{name}(i32 %a) {{", "entry:"]
    prev = "%a"
    for _ in range(rng.randint(4, 8)):
        v = names.fresh()
        op = rng.choice(["add", "mul", "sub"])
        lines.append(f"{v} = {op} i32 {prev}, {_lit(rng, 2, 9)}")
        prev = v  # chain: only the final ret keeps one value alive
    keep = names.fresh()
    lines.append(f"{keep} = add i32 {_lit(rng)}, {_lit(rng)}")
    lines.append(f"ret i32 {keep}")
    lines.append("}")
    return "\n".join(lines)


def _gen_phaseorder(rng: random.Random, name: str) -> str:
    k1, k2 = _lit(rng), _lit(rng)
    kt, kf = _lit(rng), _lit(rng)
    k3 = _lit(rng)
    mt, mf = _lit(rng), _lit(rng)
    return "\n".join(
        [
            f"define i32 @{name}(i32 %a) {{",
            "entry:",
            "%p = alloca i32",
            "%q = alloca i32",
            f"%c1 = icmp slt i32 {k1}, {k2}",
            "br i1 %c1, label %t1, label %f1",
            "t1:",
            f"store i32 {kt}, i32* %p",
            "br label %j1",
            "f1:",
            f"store i32 {kf}, i32* %p",
            "br label %j1",
            "j1:",
            "%v1 = load i32, i32* %p",
            f"%c2 = icmp slt i32 %v1, {k3}",
            "br i1 %c2, label %t2, label %f2",
            "t2:",
            f"store i32 {mt}, i32* %q",
            "br label %j2",
            "f2:",
            f"store i32 {mf}, i32* %q",
            "br label %j2",
            "j2:",
            "%v2 = load i32, i32* %q",
            "%r = add i32 %v2, %a",
            "ret i32 %r",
            "}",
        ]
    )


def _gen_loop(rng: random.Random, name: str) -> str:
    step = _lit(rng, 1, 3)
    return "\n".join(
        [
            f"define i32 @{name}(i32 %n) {{",
            "entry:",
            "%i = alloca i32",
            "%s = alloca i32",
            "store i32 0, i32* %i",
            "store i32 0, i32* %s",
            "br label %head",
            "head:",
            "%iv = load i32, i32* %i",
            "%c = icmp slt i32 %iv, %n",
            "br i1 %c, label %body, label %exit",
            "body:",
            "%sv = load i32, i32* %s",
            f"%s2 = add i32 %sv, {step}",
            "store i32 %s2, i32* %s",
            "%i2 = add i32 %iv, 1",
            "store i32 %i2, i32* %i",
            "br label %head",
            "exit:",
            "%res = load i32, i32* %s",
            "ret i32 %res",
            "}",
        ]
    )


_GENERATORS: dict[str, Callable[[random.Random, str], str]] = {
    "arith": _gen_arith,
    "constbranch": _gen_constbranch,
    "dynbranch": _gen_dynbranch,
    "deadheavy": _gen_deadheavy,
    "phaseorder": _gen_phaseorder,
    "loop": _gen_loop,
}


def generate_function(index: int, seed: int) -> IrFunction:
    """One deterministic function; identity depends only on (index, seed)."""
    rng = random.Random(stable_seed(seed, f"fn{index}"))
    kinds, weights = zip(*_KINDS)
    kind = rng.choices(kinds, weights=weights, k=1)[0]
    raw = _GENERATORS[kind](rng, f"f{index}")
    return IrFunction.from_raw(
        id=f"mini-{index:05d}", source_dataset=f"mini/{kind}", raw_text=raw
    )


def generate_corpus(n: int, seed: int) -> list[IrFunction]:
    """``n`` deterministic functions with varied optimization headroom."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return [generate_function(i, seed) for i in range(n)]
