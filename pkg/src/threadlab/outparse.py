"""Parsing model responses into thread labels and code sets.

Responses are supposed to be single label lines like ``10 Serena [E]`` or
``25 Red Morgan [respond line = (24, -)]``, or a block of such lines for
whole-transcript prompts. Two strictness levels: ``strict`` demands exactly
the instructed shape with matching index and speaker (the right default when
replaying curated fixtures), while ``lenient`` digs the last plausible label
line out of surrounding prose and forgives spelling drift (the right default
when mining live model output). A failed parse is never an exception; it
becomes a Failed outcome carrying the raw text, and evaluation scores it as
the reserved parse-error class.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

from .corpus import VALID_CODES, CodeSet, ThreadLabel, parse_respond_line

STRICTNESS_LEVELS = ("strict", "lenient")

# Failure reasons.
NO_MATCH = "NoMatch"
INDEX_MISMATCH = "IndexMismatch"
SPEAKER_MISMATCH = "SpeakerMismatch"
FORWARD_LINK = "ForwardLink"
UNKNOWN_CODE = "UnknownCode"


@dataclass(frozen=True)
class ParsedThreadLine:
    index: int | None
    speaker: str | None
    label: ThreadLabel


@dataclass(frozen=True)
class ParsedCodeLine:
    index: int | None
    speaker: str | None
    codes: CodeSet


@dataclass(frozen=True)
class ParseOutcome:
    """Ok(value) or Failed(reason); the raw response text rides along either way."""

    ok: bool
    value: ParsedThreadLine | ParsedCodeLine | None
    reason: str | None
    raw: str

    @classmethod
    def success(cls, value, raw: str) -> "ParseOutcome":
        return cls(ok=True, value=value, reason=None, raw=raw)

    @classmethod
    def failure(cls, reason: str, raw: str) -> "ParseOutcome":
        return cls(ok=False, value=None, reason=reason, raw=raw)


def _norm_speaker(name: str) -> str:
    return " ".join(name.split()).casefold()


def _check_strictness(strictness: str) -> None:
    if strictness not in STRICTNESS_LEVELS:
        raise ValueError(f"strictness must be one of {STRICTNESS_LEVELS}, got {strictness!r}")


# ---------------------------------------------------------------------------
# Thread label lines
# ---------------------------------------------------------------------------

# Strict: the exact instructed shape, speaker mandatory, lowercase keyword.
_THREAD_STRICT_RE = re.compile(
    r"^#?(?P<index>\d+)\s+(?P<speaker>.*?)\s*\[respond line = (?P<label>[^\]]*)\]$"
)

# Lenient: keyword spelling drift, optional index and speaker.
_THREAD_LENIENT_RE = re.compile(
    r"^#?\s*(?:(?P<index>\d+)[.:]?\s*)?(?P<speaker>[^\[\]]*?)\s*"
    r"\[\s*respond[\s_-]*line\s*=?\s*(?P<label>[^\]]*)\]\s*\.?$",
    re.IGNORECASE,
)


def _finish_thread(
    m: re.Match,
    raw: str,
    expected_index: int,
    expected_speaker: str,
    strictness: str,
) -> ParseOutcome:
    idx = int(m.group("index")) if m.group("index") else None
    speaker = m.group("speaker") or None
    if strictness == "strict":
        if idx != expected_index:
            return ParseOutcome.failure(INDEX_MISMATCH, raw)
        if speaker is None or _norm_speaker(speaker) != _norm_speaker(expected_speaker):
            return ParseOutcome.failure(SPEAKER_MISMATCH, raw)
    try:
        label = parse_respond_line(m.group("label"))
    except ValueError:
        return ParseOutcome.failure(NO_MATCH, raw)
    for ref in label.line_refs:
        if ref.line >= expected_index:
            return ParseOutcome.failure(FORWARD_LINK, raw)
    return ParseOutcome.success(ParsedThreadLine(index=idx, speaker=speaker, label=label), raw)


def parse_thread_response(
    raw: str,
    expected_index: int,
    expected_speaker: str,
    strictness: str = "lenient",
) -> ParseOutcome:
    """Extract the thread label for one target utterance from a response."""
    _check_strictness(strictness)
    if strictness == "strict":
        stripped = raw.strip()
        if "\n" in stripped:
            return ParseOutcome.failure(NO_MATCH, raw)
        m = _THREAD_STRICT_RE.match(stripped)
        if not m:
            return ParseOutcome.failure(NO_MATCH, raw)
        return _finish_thread(m, raw, expected_index, expected_speaker, strictness)

    last = None
    for line in raw.splitlines():
        m = _THREAD_LENIENT_RE.match(line.strip())
        if m:
            last = m
    if last is None:
        return ParseOutcome.failure(NO_MATCH, raw)
    return _finish_thread(last, raw, expected_index, expected_speaker, strictness)


# ---------------------------------------------------------------------------
# Code lines
# ---------------------------------------------------------------------------

_CODE_STRICT_RE = re.compile(
    r"^#?(?P<index>\d+)\s+(?P<speaker>.*?)\s*\[(?P<codes>[^\]]*)\]$"
)

_CODE_LENIENT_RE = re.compile(
    r"^#?\s*(?:(?P<index>\d+)[.:]?\s*)?(?P<speaker>[^\[\]]*?)\s*"
    r"\[(?P<codes>[^\]]*)\]\s*\.?$"
)

# Shape of a plausible code list: empty, or single letters joined by commas.
_CODE_LIST_RE = re.compile(r"^$|^[A-Za-z](\s*,\s*[A-Za-z])*$")


def _parse_code_list(inner: str, strictness: str) -> CodeSet | str:
    """CodeSet on success, failure reason string otherwise."""
    inner = inner.strip()
    if not _CODE_LIST_RE.match(inner):
        return NO_MATCH
    if not inner:
        return CodeSet()
    letters = [p.strip() for p in inner.split(",")]
    if strictness == "lenient":
        letters = [p.upper() for p in letters]
    if any(p not in VALID_CODES for p in letters):
        return UNKNOWN_CODE
    return CodeSet(frozenset(letters))


def _finish_code(
    m: re.Match,
    raw: str,
    expected_index: int,
    expected_speaker: str,
    strictness: str,
) -> ParseOutcome:
    idx = int(m.group("index")) if m.group("index") else None
    speaker = m.group("speaker") or None
    if strictness == "strict":
        if idx != expected_index:
            return ParseOutcome.failure(INDEX_MISMATCH, raw)
        if speaker is None or _norm_speaker(speaker) != _norm_speaker(expected_speaker):
            return ParseOutcome.failure(SPEAKER_MISMATCH, raw)
    codes = _parse_code_list(m.group("codes"), strictness)
    if isinstance(codes, str):
        return ParseOutcome.failure(codes, raw)
    return ParseOutcome.success(ParsedCodeLine(index=idx, speaker=speaker, codes=codes), raw)


def parse_code_response(
    raw: str,
    expected_index: int,
    expected_speaker: str,
    strictness: str = "lenient",
) -> ParseOutcome:
    """Extract the code set for one target utterance from a response.

    Duplicate letters collapse (``[C, E, E]`` -> ``{C, E}``); letters outside
    A-E fail with UnknownCode.
    """
    _check_strictness(strictness)
    if strictness == "strict":
        stripped = raw.strip()
        if "\n" in stripped:
            return ParseOutcome.failure(NO_MATCH, raw)
        m = _CODE_STRICT_RE.match(stripped)
        if not m:
            return ParseOutcome.failure(NO_MATCH, raw)
        return _finish_code(m, raw, expected_index, expected_speaker, strictness)

    last = None
    for line in raw.splitlines():
        m = _CODE_LENIENT_RE.match(line.strip())
        if not m:
            continue
        shaped = _parse_code_list(m.group("codes"), strictness)
        if shaped == NO_MATCH:
            # Brackets around prose, not a code list. A code-shaped list with
            # a bad letter still counts as the model's answer.
            continue
        last = m
    if last is None:
        return ParseOutcome.failure(NO_MATCH, raw)
    return _finish_code(last, raw, expected_index, expected_speaker, strictness)


# ---------------------------------------------------------------------------
# Blocks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BlockParse:
    """One outcome per expected entry, plus how many response lines went unused."""

    outcomes: tuple[ParseOutcome, ...]
    surplus_lines: int


def parse_block_response(
    raw: str,
    expected: Sequence[tuple[int, str]],
    kind: str,
    strictness: str = "lenient",
) -> BlockParse:
    """Parse a multi-line labeling response against the expected entry list.

    Lines whose index parses are aligned to the matching expected entry, so
    shuffled output still lands in the right place; index-less lines fill the
    remaining entries in order. Every expected entry yields exactly one
    outcome (NoMatch when nothing aligned to it), and surplus or duplicate
    lines are counted, never fatal.
    """
    _check_strictness(strictness)
    if kind not in ("thread", "code"):
        raise ValueError(f"kind must be 'thread' or 'code', got {kind!r}")
    line_re = _THREAD_LENIENT_RE if kind == "thread" else _CODE_LENIENT_RE
    finish = _finish_thread if kind == "thread" else _finish_code

    candidates: list[re.Match] = []
    for line in raw.splitlines():
        s = line.strip()
        if not s:
            continue
        m = line_re.match(s)
        if not m:
            continue
        if kind == "code":
            inner = m.group("codes")
            shaped = _parse_code_list(inner, "lenient")
            if isinstance(shaped, str) and shaped == NO_MATCH:
                continue
        candidates.append(m)

    by_index: dict[int, re.Match] = {}
    positional: list[re.Match] = []
    surplus = 0
    expected_indices = {idx for idx, _ in expected}
    for m in candidates:
        idx = int(m.group("index")) if m.group("index") else None
        if idx is not None and idx in expected_indices:
            if idx in by_index:
                surplus += 1
            else:
                by_index[idx] = m
        elif idx is not None:
            surplus += 1
        else:
            positional.append(m)

    outcomes: list[ParseOutcome] = []
    pos_iter = iter(positional)
    unfilled = [idx for idx, _ in expected if idx not in by_index]
    pos_assignment: dict[int, re.Match] = {}
    for idx in unfilled:
        m = next(pos_iter, None)
        if m is None:
            break
        pos_assignment[idx] = m
    surplus += sum(1 for _ in pos_iter)

    for idx, speaker in expected:
        m = by_index.get(idx) or pos_assignment.get(idx)
        if m is None:
            outcomes.append(ParseOutcome.failure(NO_MATCH, ""))
            continue
        outcomes.append(finish(m, m.group(0), idx, speaker, strictness))
    return BlockParse(outcomes=tuple(outcomes), surplus_lines=surplus)
