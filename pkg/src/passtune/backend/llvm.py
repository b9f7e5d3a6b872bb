"""Backend that drives an external LLVM ``opt`` executable.

Each application writes the IR to a temporary file, runs
``opt -S <flags...> <file>`` with a wall-clock limit, and re-normalizes
the output. Nonzero exits become classified failure outcomes; a limit
hit raises :class:`CompileTimeoutError` so callers can charge it to
their budget.

The executable is found via the constructor argument, the
``PASSTUNE_OPT`` environment variable, or ``opt`` on PATH, in that
order. Extra fixed arguments (for example ``-enable-new-pm=0`` on
newer LLVM releases, whose default pass manager does not accept the
legacy flag set) can be supplied with ``extra_args``.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from pathlib import Path
from typing import Optional, Sequence

from passtune.backend.classify import diagnostic_from_message
from passtune.backend.passlist import PassList, PassVocabulary, llvm10_vocabulary
from passtune.backend.types import (
    BackendUnavailableError,
    CompileOutcome,
    CompileTimeoutError,
)
from passtune.ircore import MalformedIrError, NormalizedIr, count_instructions, normalize

OPT_ENV_VAR = "PASSTUNE_OPT"
DEFAULT_TIMEOUT_SECONDS = 60.0


def resolve_opt_path(explicit: Optional[str] = None) -> str:
    """Locate the optimizer executable or raise BackendUnavailableError."""
    candidate = explicit or os.environ.get(OPT_ENV_VAR) or "opt"
    resolved = shutil.which(candidate)
    if resolved is None:
        raise BackendUnavailableError(
            f"optimizer executable {candidate!r} not found; install LLVM, set "
            f"{OPT_ENV_VAR}, or pass an explicit path"
        )
    return resolved


class LlvmBackend:
    """Applies pass lists by invoking ``opt`` in a subprocess."""

    def __init__(
        self,
        opt_path: Optional[str] = None,
        vocabulary: Optional[PassVocabulary] = None,
        timeout: float = DEFAULT_TIMEOUT_SECONDS,
        extra_args: Sequence[str] = (),
    ) -> None:
        self.opt_path = resolve_opt_path(opt_path)
        self._vocabulary = vocabulary or llvm10_vocabulary()
        self.timeout = timeout
        self.extra_args = tuple(extra_args)

    @property
    def vocabulary(self) -> PassVocabulary:
        return self._vocabulary

    def version(self) -> str:
        try:
            proc = subprocess.run(
                [self.opt_path, "--version"],
                capture_output=True,
                text=True,
                timeout=self.timeout,
            )
        except (OSError, subprocess.TimeoutExpired) as err:
            raise BackendUnavailableError(
                f"cannot run {self.opt_path!r}: {err}"
            ) from err
        return " ".join(proc.stdout.split()) or f"opt at {self.opt_path}"

    def apply(self, ir: NormalizedIr, passes: PassList) -> CompileOutcome:
        for flag in passes:
            if flag not in self._vocabulary:
                raise ValueError(f"flag {flag!r} is not in this backend's vocabulary")
        with tempfile.TemporaryDirectory(prefix="passtune-opt-") as tmp:
            src = Path(tmp) / "input.ll"
            src.write_text(ir.text + "\n", encoding="utf-8")
            cmd = [self.opt_path, "-S", *self.extra_args, *passes.items, str(src)]
            try:
                proc = subprocess.run(
                    cmd,
                    capture_output=True,
                    text=True,
                    timeout=self.timeout,
                )
            except subprocess.TimeoutExpired as err:
                raise CompileTimeoutError(
                    f"{' '.join(cmd)} exceeded {self.timeout:.0f}s"
                ) from err
            except OSError as err:
                raise BackendUnavailableError(
                    f"cannot run {self.opt_path!r}: {err}"
                ) from err
        if proc.returncode != 0:
            message = proc.stderr.strip() or f"exit code {proc.returncode}"
            return CompileOutcome.failure(diagnostic_from_message(message))
        out = normalize(proc.stdout)
        try:
            count = count_instructions(out)
        except MalformedIrError as err:
            return CompileOutcome.failure(
                diagnostic_from_message(f"unparseable optimizer output: {err}")
            )
        return CompileOutcome.success(out, count)
