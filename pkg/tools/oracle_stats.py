#!/usr/bin/env python3
"""Freeze corpus statistics computed outside the package.

Reads the bundled corpus files directly and recomputes every statistic with
its own small label parser, so the frozen fixture is an independent check on
the package's bookkeeping rather than a snapshot of it.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[1]
CORPUS = ROOT / "src" / "threadlab" / "data" / "corpus"
OUT = ROOT / "tests" / "fixtures" / "corpus_stats.json"


def read_jsonl(path: Path) -> list[dict]:
    return [json.loads(line) for line in path.read_text(encoding="utf-8").splitlines() if line]


def label_parts(raw: str) -> tuple[list[int], bool]:
    """(link targets, has new-thread marker) from a respond_line string."""
    s = raw.strip()
    tokens = [p.strip() for p in s[1:-1].split(",")] if s.startswith("(") else [s]
    links = [int(p) for p in tokens if p != "-"]
    return links, "-" in tokens


def transcript_stats(utts: list[dict], gold: list[dict]) -> dict:
    n_words = sum(len(u["text"].split()) for u in utts)
    n_no_thread = 0
    gaps: list[int] = []
    any_split_with_new = False
    for rec in sorted(gold, key=lambda r: r["index"]):
        links, has_new = label_parts(rec["respond_line"])
        if not links and has_new:
            n_no_thread += 1
        gaps.extend(rec["index"] - j for j in links)
        if links and has_new:
            any_split_with_new = True
    return {
        "n_utterances": len(utts),
        "n_words": n_words,
        "n_no_thread": n_no_thread,
        "n_links": len(gaps),
        "mean_gap": sum(gaps) / len(gaps) if gaps else None,
        "min_gap": min(gaps) if gaps else None,
        "max_gap": max(gaps) if gaps else None,
        "raw_row_min_gap": (0 if any_split_with_new else min(gaps)) if gaps else None,
    }


def main() -> int:
    manifest = json.loads((CORPUS / "manifest.json").read_text(encoding="utf-8"))
    per_transcript: dict[str, dict] = {}
    total_utt = total_words = n_no_thread = 0
    gaps: list[int] = []
    any_split_with_new = False
    code_counts = {c: 0 for c in "ABCDE"}
    n = 0
    for entry in manifest["transcripts"]:
        utts = read_jsonl(CORPUS / entry["transcript"])
        gold = read_jsonl(CORPUS / entry["gold"])
        st = transcript_stats(utts, gold)
        per_transcript[entry["id"]] = st
        n += 1
        total_utt += st["n_utterances"]
        total_words += st["n_words"]
        n_no_thread += st["n_no_thread"]
        for rec in sorted(gold, key=lambda r: r["index"]):
            links, has_new = label_parts(rec["respond_line"])
            gaps.extend(rec["index"] - j for j in links)
            if links and has_new:
                any_split_with_new = True
            letters = rec.get("abcde", "[]").strip()[1:-1]
            for letter in (p.strip() for p in letters.split(",") if p.strip()):
                code_counts[letter] += 1
    corpus = {
        "n_transcripts": n,
        "total_utterances": total_utt,
        "total_words": total_words,
        "avg_utterances_per_transcript": total_utt / n,
        "avg_words_per_transcript": total_words / n,
        "avg_words_per_utterance": total_words / total_utt,
        "n_no_thread": n_no_thread,
        "n_links": len(gaps),
        "mean_gap": sum(gaps) / len(gaps) if gaps else None,
        "min_gap": min(gaps) if gaps else None,
        "max_gap": max(gaps) if gaps else None,
        "raw_row_min_gap": (0 if any_split_with_new else min(gaps)) if gaps else None,
        "code_proportions": {c: code_counts[c] / total_utt for c in "ABCDE"},
    }
    OUT.write_text(
        json.dumps({"corpus": corpus, "per_transcript": per_transcript},
                   indent=2, sort_keys=True) + "\n",
        encoding="utf-8",
    )
    print(f"wrote stats for {n} transcripts -> {OUT}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
