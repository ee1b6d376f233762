#!/usr/bin/env python3
"""Freeze golden prompt fixtures by filling templates independently.

This deliberately does not import the package. Templates are read straight
from the asset directory and filled with str.replace over the declared
variable names only, so literal braces in the templates survive untouched.
If the package's renderer drifts from the documented serialization, the
fixtures written here will catch it.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
TEMPLATES = ROOT / "src" / "threadlab" / "templates"
GOLDEN = ROOT / "tests" / "fixtures" / "golden"
OUT = ROOT / "tests" / "fixtures" / "prompts"

WINDOW_N = 10


def read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


def fill(template_name: str, values: dict[str, object]) -> str:
    text = (TEMPLATES / f"{template_name}.txt").read_text(encoding="utf-8")
    for name, value in values.items():
        placeholder = "{" + name + "}"
        if placeholder not in text:
            raise SystemExit(f"{template_name}: no {placeholder} in template")
        text = text.replace(placeholder, str(value))
    return text


def bare_line(u: dict) -> str:
    return f"#{u['index']} {u['speaker']}: {u['text']}"


def labeled_line(u: dict, respond_line: str) -> str:
    return f"{bare_line(u)} [respond_line= {respond_line}]"


def block(utts: list[dict], gold: dict[int, str] | None = None) -> str:
    lines = []
    for u in utts:
        if gold is None:
            lines.append(bare_line(u))
        else:
            lines.append(labeled_line(u, gold[u["index"]]))
    return "\n".join(lines)


def main() -> int:
    target = read_jsonl(GOLDEN / "target.jsonl")
    target_gold = {r["index"]: r["respond_line"] for r in read_jsonl(GOLDEN / "target.gold.jsonl")}
    shot = read_jsonl(GOLDEN / "shot.jsonl")
    shot_gold = {r["index"]: r["respond_line"] for r in read_jsonl(GOLDEN / "shot.gold.jsonl")}

    last = target[-1]
    context = target[:-1]
    n_utts = len(target)

    fixtures: dict[str, str] = {}

    # sliding-window threading: labeled context, bare target line, window size
    fixtures["thread_window"] = fill(
        "thread_window",
        {
            "window_n": WINDOW_N,
            "transcript_block": block(context, target_gold) + "\n" + bare_line(last),
        },
    )

    # whole-transcript threading with one labeled example
    shots_block = (
        " Then I will provide an example transcript with labels and a new "
        "transcript without labels for threading."
        f"\n\n<<<EXAMPLE_1_START>>>\n{block(shot, shot_gold)}\n<<<EXAMPLE_1_END>>>"
    )
    fixtures["thread_all_at_once"] = fill(
        "thread_all_at_once",
        {
            "shots_block": shots_block,
            "transcript_block": block(target),
            "num_utterances": n_utts,
        },
    )

    target_vars = {
        "target_timestamp": last["timestamp"],
        "target_speaker": last["speaker"],
        "target_text": last["text"],
    }
    fixtures["abcde_window_plain"] = fill(
        "abcde_window_plain", {"transcript_block": block(target), **target_vars}
    )
    fixtures["abcde_window_threaded"] = fill(
        "abcde_window_threaded", {"transcript_block": block(target, target_gold), **target_vars}
    )
    fixtures["abcde_full_plain"] = fill(
        "abcde_full_plain", {"transcript_block": block(target), "num_utterances": n_utts}
    )
    fixtures["abcde_full_threaded"] = fill(
        "abcde_full_threaded",
        {"transcript_block": block(target, target_gold), "num_utterances": n_utts},
    )
    fixtures["baseline_martinenghi"] = fill(
        "baseline_martinenghi", {"transcript_block": block(target), "num_utterances": n_utts}
    )
    fixtures["baseline_lee"] = fill(
        "baseline_lee",
        {
            "transcript_block": block(target),
            "target_speaker": last["speaker"],
            "target_text": last["text"],
        },
    )
    fixtures["baseline_qamar"] = fill("baseline_qamar", {"transcript_block": block(target)})

    OUT.mkdir(parents=True, exist_ok=True)
    for name, text in sorted(fixtures.items()):
        (OUT / f"{name}.txt").write_text(text, encoding="utf-8")
    print(f"wrote {len(fixtures)} prompt fixtures -> {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
