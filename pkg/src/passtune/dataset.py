"""Training-data construction: pass-ordering and single-pass records.

Two corpora are produced from tuned functions:

- pass-ordering records pair an unoptimized function (prompt) with an
  answer holding the best pass list, the input/output instruction
  counts, and the optimized code;
- single-pass records pair an IR plus the name of one pass (prompt)
  with the IR that pass produces (answer), optionally pre-scrambling
  the input with a random pass prefix.

Both use bit-exact templates so answers round-trip through parsing.
"""

from __future__ import annotations

import logging
import random
import re
from dataclasses import asdict, dataclass
from typing import Iterable, Mapping, Optional, Sequence

from passtune.backend import Backend, PassList
from passtune.backend.passlist import sample_items
from passtune.ircore import (
    DEFAULT_TOKEN_LIMIT,
    IrFunction,
    NormalizedIr,
    estimate_tokens,
)
from passtune.util import read_jsonl, stable_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PassOrderingRecord:
    """One (prompt, answer) pair for pass-list prediction training."""

    function_id: str
    prompt: str
    answer: str
    pass_list: str
    input_count: int
    output_count: int
    truncated: bool


@dataclass(frozen=True)
class SinglePassRecord:
    """One (prompt, answer) pair for single-pass translation training."""

    function_id: str
    target_pass: str
    prefix_passes: str
    prompt: str
    answer: str
    truncated: bool


@dataclass(frozen=True)
class RecordError:
    """A record that could not be built, with the backend's reason."""

    function_id: str
    pass_list: str
    message: str


class AnswerParseError(ValueError):
    """Raised when text does not match the answer template."""


def render_answer(
    items: Sequence[str], input_count: int, output_count: int, optimized_ir: str
) -> str:
    """Answer template: header line, blank line, optimized code.

    The header is word-joined so an empty pass list cannot produce a
    double space.
    """
    words = [
        "Run",
        "passes",
        *items,
        "to",
        "reduce",
        "instruction",
        "count",
        "from",
        str(input_count),
        "to",
        f"{output_count}:",
    ]
    return " ".join(words) + "\n\n" + optimized_ir


_ANSWER_HEADER = re.compile(
    r"^Run passes\s*(.*?)\s*to reduce instruction count from (\d+) to (\d+):$"
)


def parse_answer(text: str) -> tuple[tuple[str, ...], int, int, str]:
    """Inverse of :func:`render_answer`.

    Returns (pass items, input count, output count, optimized code).
    Raises AnswerParseError if the header or the blank separator line is
    missing.
    """
    lines = text.split("\n")
    m = _ANSWER_HEADER.match(lines[0])
    if not m:
        raise AnswerParseError(f"answer header does not match template: {lines[0]!r}")
    if len(lines) < 2 or lines[1] != "":
        raise AnswerParseError("expected a blank line after the answer header")
    items = tuple(m.group(1).split())
    return items, int(m.group(2)), int(m.group(3)), "\n".join(lines[2:])


def render_single_pass_prompt(target_pass: str, ir_text: str) -> str:
    return f"Optimize the following LLVM-IR using {target_pass}:\n\n{ir_text}"


def _is_truncated(prompt: str, answer: str, token_limit: int) -> bool:
    return estimate_tokens(prompt) + estimate_tokens(answer) > token_limit


def build_pass_dataset(
    tune_results: Iterable,
    corpus: Sequence[IrFunction],
    backend: Backend,
    token_limit: int = DEFAULT_TOKEN_LIMIT,
) -> tuple[list[PassOrderingRecord], list[RecordError]]:
    """Render one record per tune result.

    The best pass list is recompiled to obtain the optimized code for
    the answer; a failure becomes a RecordError instead of a record.
    Records whose prompt+answer exceed the token limit are flagged
    ``truncated``, never dropped.
    """
    by_id = {fn.id: fn for fn in corpus}
    records: list[PassOrderingRecord] = []
    errors: list[RecordError] = []
    for result in tune_results:
        fn = by_id.get(result.function_id)
        if fn is None:
            raise ValueError(f"tune result for unknown function {result.function_id!r}")
        items = tuple(result.best_pass_list.split())
        outcome = backend.apply(
            NormalizedIr(fn.normalized_text), PassList(items, backend.vocabulary)
        )
        if not outcome.ok:
            errors.append(
                RecordError(fn.id, result.best_pass_list, outcome.diagnostic.message)
            )
            continue
        prompt = fn.normalized_text
        answer = render_answer(
            items, fn.instruction_count, outcome.instruction_count, outcome.output.text
        )
        records.append(
            PassOrderingRecord(
                function_id=fn.id,
                prompt=prompt,
                answer=answer,
                pass_list=result.best_pass_list,
                input_count=fn.instruction_count,
                output_count=outcome.instruction_count,
                truncated=_is_truncated(prompt, answer, token_limit),
            )
        )
    return records, errors


def build_single_pass_dataset(
    backend: Backend,
    corpus: Sequence[IrFunction],
    passes: Sequence[str],
    per_pass: int,
    max_prefix_len: int,
    seed: int,
    token_limit: int = DEFAULT_TOKEN_LIMIT,
) -> list[SinglePassRecord]:
    """Sample (prompt, answer) pairs for each target pass.

    For each record a function and a random pass prefix (length uniform
    in [0, max_prefix_len]) are drawn; the prefix output becomes the
    prompt IR and the target pass's output the answer. Records are
    unique per (target_pass, prompt); if uniqueness cannot be satisfied
    the pass stops early with a warning.
    """
    if per_pass < 1:
        raise ValueError("per_pass must be >= 1")
    for flag in passes:
        if flag not in backend.vocabulary:
            raise ValueError(f"target pass {flag!r} not in backend vocabulary")
    if not corpus:
        raise ValueError("corpus is empty")

    records: list[SinglePassRecord] = []
    for target in passes:
        rng = random.Random(stable_seed(seed, target))
        seen_prompts: set[str] = set()
        found = 0
        attempts = 0
        max_attempts = per_pass * 50
        while found < per_pass and attempts < max_attempts:
            attempts += 1
            fn = rng.choice(corpus)
            prefix = sample_items(
                rng, backend.vocabulary, rng.randint(0, max_prefix_len)
            )
            base = NormalizedIr(fn.normalized_text)
            pre = backend.apply(base, PassList(prefix, backend.vocabulary))
            if not pre.ok:
                continue
            prompt_ir = pre.output.text
            prompt = render_single_pass_prompt(target, prompt_ir)
            if prompt in seen_prompts:
                continue
            out = backend.apply(pre.output, PassList((target,), backend.vocabulary))
            if not out.ok:
                continue
            seen_prompts.add(prompt)
            found += 1
            records.append(
                SinglePassRecord(
                    function_id=fn.id,
                    target_pass=target,
                    prefix_passes=" ".join(prefix),
                    prompt=prompt,
                    answer=out.output.text,
                    truncated=_is_truncated(prompt, out.output.text, token_limit),
                )
            )
        if found < per_pass:
            logger.warning(
                "only %d/%d unique records for %s after %d attempts",
                found,
                per_pass,
                target,
                attempts,
            )
    return records


def dedup(
    corpus: Iterable[IrFunction],
    exclusion: Optional[Iterable[IrFunction]] = None,
) -> list[IrFunction]:
    """Keep the first function per distinct normalized text.

    ``exclusion`` drops any function whose text appears there as well
    (test-versus-train separation).
    """
    seen: set[str] = (
        {fn.normalized_text for fn in exclusion} if exclusion is not None else set()
    )
    out: list[IrFunction] = []
    for fn in corpus:
        if fn.normalized_text in seen:
            continue
        seen.add(fn.normalized_text)
        out.append(fn)
    return out


def split(
    corpus: Sequence[IrFunction],
    fractions: Mapping[str, float],
    seed: int,
) -> dict[str, list[IrFunction]]:
    """Deterministic disjoint partition by named fractions summing to 1."""
    if not fractions:
        raise ValueError("fractions must be non-empty")
    for name, frac in fractions.items():
        if frac <= 0:
            raise ValueError(f"fraction {name!r} must be positive")
    total = sum(fractions.values())
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {total}")
    shuffled = list(corpus)
    random.Random(seed).shuffle(shuffled)
    out: dict[str, list[IrFunction]] = {}
    n = len(shuffled)
    cumulative = 0.0
    start = 0
    names = list(fractions)
    for i, name in enumerate(names):
        cumulative += fractions[name]
        end = n if i == len(names) - 1 else round(cumulative * n)
        out[name] = shuffled[start:end]
        start = end
    return out


def corpus_stats(functions: Sequence[IrFunction]) -> dict[str, int]:
    """Corpus accounting: sizes in functions, instructions, tokens, bytes."""
    return {
        "functions": len(functions),
        "total_instructions": sum(fn.instruction_count for fn in functions),
        "total_tokens": sum(fn.token_estimate for fn in functions),
        "text_bytes": sum(len(fn.normalized_text.encode("utf-8")) for fn in functions),
    }


def records_to_rows(records: Iterable) -> Iterable[dict]:
    return (asdict(r) for r in records)


def read_pass_records(path) -> list[PassOrderingRecord]:
    return [PassOrderingRecord(**row) for row in read_jsonl(path)]


def read_single_pass_records(path) -> list[SinglePassRecord]:
    return [SinglePassRecord(**row) for row in read_jsonl(path)]
