#!/usr/bin/env python3
"""Generate the bundled synthetic corpus.

Deterministic (fixed seed): rerunning overwrites src/threadlab/data/corpus
with identical bytes. The generated conversations are meaningless but
structurally honest: backward-only links, splits of both shapes, backchannels
that nothing links to, gaps within the lint threshold, full code coverage,
and subcategory tags on roughly 60% of utterances.
"""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from threadlab.corpus import (  # noqa: E402
    NEW_THREAD,
    CodeSet,
    GoldAnnotations,
    ThreadLabel,
    Transcript,
    Utterance,
    is_backchannel,
    parse_respond_line,
    serialize_gold,
    serialize_transcript,
    validate_thread_graph,
)

SEED = 20240811
OUT_DIR = Path(__file__).resolve().parents[1] / "src" / "threadlab" / "data" / "corpus"

STUDENTS = [
    "Asha", "Bruno", "Celine", "Dmitri", "Elena", "Farid", "Gita", "Hugo",
    "Imani", "Jonas", "Kavya", "Liam", "Noor", "Priya", "Ravi", "Sana",
    "Tomas", "Uma", "Wendy", "Yusuf",
]
AGENT = "Oscar"

WORKSHOP_TOPICS = [
    ("rover chassis", "swap the wheels for treads", "the motor draws too much current"),
    ("bridge model", "double the truss supports", "the glue joints keep failing"),
    ("water filter", "add a charcoal layer", "the flow rate drops a lot"),
    ("mural layout", "move the title to the left panel", "the colors clash near the edge"),
    ("podcast episode", "record the intro again", "the audio clips at the start"),
    ("robot arm", "shorten the second joint", "the servo stalls under load"),
    ("garden plan", "put the herbs near the fence", "that corner gets no sun"),
    ("poster draft", "make the chart bigger", "the caption overlaps the axis"),
]
CONSENSUS_TOPICS = [
    ("field trip", "visit the science museum", "the bus budget is tight"),
    ("fundraiser", "run a bake sale next month", "we tried that last year"),
    ("club schedule", "meet on Thursdays instead", "half of us have practice then"),
    ("recycling plan", "add bins to every hallway", "nobody empties the current ones"),
]

BACKCHANNELS = ["Yeah.", "Okay.", "Mhm.", "Right.", "Uh-huh.", "Sure."]

# per ABCDE letter: sentence templates over (topic, action, reason)
SENTENCES = {
    "E": [
        "What do you all think about the {topic}?",
        "Should we {action}?",
        "Can someone check whether {reason}?",
        "How would we even test the {topic}?",
        "Does anyone remember why {reason}?",
    ],
    "A": [
        "Yeah, that makes sense to me.",
        "I agree, let's {action}.",
        "Good point, that matches what I saw.",
        "That works for me.",
    ],
    "B": [
        "Building on that, we could also {action}.",
        "And if we {action}, the {topic} gets simpler.",
        "Plus we could measure it before and after.",
        "We could start from that and then {action}.",
    ],
    "D": [
        "I'm not sure that works, because {reason}.",
        "Actually I disagree, {reason}.",
        "But didn't we find that {reason}?",
        "I'd rather not {action} yet.",
    ],
    "C": [
        "This reminds me of the lab from last week.",
        "Haha, the {topic} has a mind of its own.",
        "My notes from Tuesday are a mess.",
        "Fun fact, my cousin built one of these.",
    ],
    "": [
        "Let me pull up the doc.",
        "I'll write that down.",
        "One sec, switching screens.",
        "Passing the ruler over.",
    ],
}
AGENT_LINES = [
    "Here is a quick summary of what you have agreed on so far about the {topic}.",
    "I can look up how others approached the {topic} if that helps.",
    "A gentle reminder: you have ten minutes left for the {topic}.",
    "Would it help if I listed the open questions about the {topic}?",
]

# BC is only assigned to actual backchannels, so it stays out of this table.
SUBCAT_WEIGHTS = [("AP", 34), ("E", 16), ("I", 16), ("TT", 12), ("CI", 12), ("SC", 10)]


def _pick_subcat(rng: random.Random) -> str:
    total = sum(w for _, w in SUBCAT_WEIGHTS)
    r = rng.randrange(total)
    for tag, w in SUBCAT_WEIGHTS:
        if r < w:
            return tag
        r -= w
    return "AP"


def _sentence(rng: random.Random, code: str, topic: tuple[str, str, str]) -> str:
    tmpl = rng.choice(SENTENCES[code])
    return tmpl.format(topic=topic[0], action=topic[1], reason=topic[2])


def _gen_transcript(
    rng: random.Random, tid: str, scenario: str, topic: tuple[str, str, str], length: int
) -> tuple[Transcript, GoldAnnotations]:
    cast = rng.sample(STUDENTS, rng.randint(3, 4)) + [AGENT]
    utterances: list[Utterance] = []
    thread: dict[int, ThreadLabel] = {}
    abcde: dict[int, CodeSet] = {}
    subcat: dict[int, str] = {}
    backchannel_at: set[int] = set()
    ts = rng.randint(0, 5) * 1000

    def linkable(i: int) -> list[int]:
        # backward, within the long-gap lint threshold, never to a backchannel
        lo = max(1, i - 13)
        return [j for j in range(lo, i) if j not in backchannel_at]

    for i in range(1, length + 1):
        ts += rng.randint(2, 12) * 1000
        speaker = rng.choice(cast)
        cands = linkable(i)

        roll = rng.random()
        if i == 1 or not cands or roll < 0.16:
            label = ThreadLabel.new_thread()
        elif roll < 0.26 and len(cands) >= 1 and i > 4:
            label = parse_respond_line(f"({rng.choice(cands)}, -)")
        elif roll < 0.32 and len(cands) >= 2 and i > 5:
            a, b = rng.sample(cands, 2)
            label = parse_respond_line(f"({a}, {b})")
        else:
            # recent targets are likelier, like real replies
            weights = [1.0 / (i - j) for j in cands]
            label = ThreadLabel.link(rng.choices(cands, weights=weights, k=1)[0])
        thread[i] = label

        is_reply = bool(label.line_refs)
        if speaker == AGENT:
            text = rng.choice(AGENT_LINES).format(topic=topic[0])
            code = rng.choice(["C", "E", ""])
        elif is_reply and rng.random() < 0.14:
            text = rng.choice(BACKCHANNELS)
            code = "A"
        else:
            if not is_reply:
                code = rng.choice(["E", "E", "C", ""])
            else:
                code = rng.choice(["A", "A", "B", "B", "D", "C", "E", ""])
            text = _sentence(rng, code, topic)
        if is_backchannel(text):
            backchannel_at.add(i)

        letters = set(code) if code else set()
        if letters and rng.random() < 0.15:
            letters.add(rng.choice([c for c in "ABC" if c not in letters]))
        abcde[i] = CodeSet(frozenset(letters))

        if rng.random() < 0.6:
            if i in backchannel_at:
                subcat[i] = "BC"
            elif label.is_new_thread_only and i > 1:
                subcat[i] = rng.choice(["TT", "SC", "TT"])
            elif code == "E":
                subcat[i] = "E"
            else:
                subcat[i] = _pick_subcat(rng)

        utterances.append(Utterance(index=i, timestamp_ms=ts, speaker=speaker, text=text))

    t = Transcript(id=tid, utterances=tuple(utterances), scenario=scenario)
    g = GoldAnnotations(transcript_id=tid, thread=thread, abcde=abcde, subcat=subcat)
    return t, g


def main() -> int:
    rng = random.Random(SEED)
    specs = [(f"ws{k:02d}", "workshop", WORKSHOP_TOPICS[k - 1], rng.randint(14, 22))
             for k in range(1, 9)]
    specs += [(f"cs{k:02d}", "consensus", CONSENSUS_TOPICS[k - 1], rng.randint(10, 16))
              for k in range(1, 5)]

    OUT_DIR.mkdir(parents=True, exist_ok=True)
    manifest = {"transcripts": []}
    n_two_way = n_dash_split = 0
    n_tagged = n_total = 0
    for tid, scenario, topic, length in specs:
        t, g = _gen_transcript(rng, tid, scenario, topic, length)
        rep = validate_thread_graph(t, g)
        if rep.errors or rep.lints:
            raise SystemExit(f"{tid}: generator produced issues: {rep.errors + rep.lints}")
        for label in g.thread.values():
            if label.is_split:
                if NEW_THREAD in label.targets:
                    n_dash_split += 1
                else:
                    n_two_way += 1
        n_tagged += len(g.subcat)
        n_total += len(t)
        (OUT_DIR / f"{tid}.jsonl").write_text(serialize_transcript(t), encoding="utf-8")
        (OUT_DIR / f"{tid}.gold.jsonl").write_text(serialize_gold(g), encoding="utf-8")
        manifest["transcripts"].append(
            {"id": tid, "scenario": scenario,
             "transcript": f"{tid}.jsonl", "gold": f"{tid}.gold.jsonl"}
        )
    assert n_two_way >= 1, "need at least one (a, b) split in the corpus"
    assert n_dash_split >= 2, "need at least two (a, -) splits in the corpus"
    assert 0.5 <= n_tagged / n_total <= 0.7, f"subcat coverage off: {n_tagged / n_total:.2f}"
    (OUT_DIR / "manifest.json").write_text(
        json.dumps(manifest, indent=2) + "\n", encoding="utf-8"
    )
    print(f"wrote {len(specs)} transcripts, {n_total} utterances, "
          f"{n_two_way} two-way splits, {n_dash_split} dash splits, "
          f"{n_tagged / n_total:.0%} tagged -> {OUT_DIR}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
