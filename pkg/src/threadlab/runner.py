"""Experiment orchestration: spec in, run log out, evaluation on top.

A run works through a list of transcripts with one model, one strategy
(sliding window or whole transcript at once), and one task (threading or code
labeling). Each utterance produces one log record carrying the prompt digest,
the parse outcome, and the predicted and gold labels, so a finished run can be
re-scored or re-rendered without touching a provider. Run ids are digests of
the spec, which makes re-runs idempotent: same spec, same directory.
"""

from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

from . import metrics, outparse, prompts
from .corpus import CodeSet, GoldAnnotations, ThreadLabel, Transcript, parse_respond_line
from .llm import (
    CompletionCache,
    CompletionRecord,
    ContextOverflow,
    ModelConfig,
    PricingTable,
    Provider,
    RateLimited,
    TransportError,
    complete,
    prompt_digest,
)
from .metrics import PARSE_ERROR_LABEL
from .windowing import WindowConfig, make_window

TASKS = ("threading", "abcde")
STRATEGIES = ("all_at_once", "window")
THREAD_SOURCE_NONE = "none"
THREAD_SOURCE_HUMAN = "human"
LLM_SOURCE_PREFIX = "llm:"

DEFAULT_CONCURRENCY = 4


class RunnerError(Exception):
    pass


class GoldMismatch(RunnerError):
    pass


class MissingThreadSource(RunnerError):
    pass


@dataclass(frozen=True)
class ExperimentSpec:
    """Everything that determines a run, and nothing that doesn't."""

    task: str
    strategy: str
    model: ModelConfig
    transcripts: tuple[str, ...]
    window: WindowConfig | None = None
    shots: int = 0
    shot_ids: tuple[str, ...] = ()
    thread_source: str = THREAD_SOURCE_NONE
    template_override: str | None = None
    template_dir: str | None = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.strategy not in STRATEGIES:
            raise ValueError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}")
        if not self.transcripts:
            raise ValueError("spec needs at least one transcript id")
        if self.strategy == "window" and self.window is None:
            raise ValueError("window strategy needs a window config")
        if not 0 <= self.shots <= prompts.MAX_SHOTS:
            raise ValueError(f"shots must be 0..{prompts.MAX_SHOTS}, got {self.shots}")
        if self.shots and not (self.task == "threading" and self.strategy == "all_at_once"):
            raise ValueError("shots only apply to all-at-once threading")
        if self.thread_source != THREAD_SOURCE_NONE and self.task != "abcde":
            raise ValueError("thread_source only applies to the abcde task")
        if self.thread_source not in (THREAD_SOURCE_NONE, THREAD_SOURCE_HUMAN) and not (
            self.thread_source.startswith(LLM_SOURCE_PREFIX)
        ):
            raise ValueError(f"bad thread_source {self.thread_source!r}")
        if self.template_override is not None:
            if self.task != "abcde":
                raise ValueError("template_override only applies to the abcde task")
            if self.template_override not in prompts.BASELINE_VARIANTS:
                raise ValueError(f"unknown template override {self.template_override!r}")
            wanted = "all_at_once" if self.template_override == "baseline_martinenghi" else "window"
            if self.strategy != wanted:
                raise ValueError(f"{self.template_override} requires strategy {wanted}")
            if self.thread_source != THREAD_SOURCE_NONE:
                raise ValueError("baseline templates take no thread labels")

    def as_dict(self) -> dict:
        d: dict[str, object] = {
            "task": self.task,
            "strategy": self.strategy,
            "model": {
                "model_id": self.model.model_id,
                "temperature": self.model.temperature,
                "max_output_tokens": self.model.max_output_tokens,
                "endpoint": self.model.endpoint,
                "auth_env": self.model.auth_env,
                "fixed_temperature": self.model.fixed_temperature,
            },
            "transcripts": list(self.transcripts),
            "window": (
                {"n": self.window.n, "feedback": self.window.feedback} if self.window else None
            ),
            "shots": self.shots,
            "shot_ids": list(self.shot_ids),
            "thread_source": self.thread_source,
            "template_override": self.template_override,
            "template_dir": self.template_dir,
        }
        return d

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentSpec":
        window = None
        if d.get("window"):
            window = WindowConfig(n=int(d["window"]["n"]), feedback=d["window"]["feedback"])
        m = d["model"]
        model = ModelConfig(
            model_id=m["model_id"],
            temperature=float(m.get("temperature", 0.0)),
            max_output_tokens=int(m.get("max_output_tokens", 1024)),
            endpoint=m.get("endpoint", ModelConfig.endpoint),
            auth_env=m.get("auth_env", ModelConfig.auth_env),
            fixed_temperature=bool(m.get("fixed_temperature", False)),
        )
        return cls(
            task=d["task"],
            strategy=d["strategy"],
            model=model,
            transcripts=tuple(d["transcripts"]),
            window=window,
            shots=int(d.get("shots", 0)),
            shot_ids=tuple(d.get("shot_ids") or ()),
            thread_source=d.get("thread_source", THREAD_SOURCE_NONE),
            template_override=d.get("template_override"),
            template_dir=d.get("template_dir"),
        )

    @property
    def run_id(self) -> str:
        payload = json.dumps(self.as_dict(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]


@dataclass(frozen=True)
class UtteranceRecord:
    transcript_id: str
    index: int
    prompt_hash: str
    predicted: str  # canonical label, or the parse-error marker
    gold: str
    ok: bool
    fail_reason: str | None = None
    input_tokens: int = 0
    output_tokens: int = 0
    latency_ms: int = 0

    def as_dict(self) -> dict:
        return {
            "transcript_id": self.transcript_id,
            "index": self.index,
            "prompt_hash": self.prompt_hash,
            "predicted": self.predicted,
            "gold": self.gold,
            "ok": self.ok,
            "fail_reason": self.fail_reason,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "latency_ms": self.latency_ms,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "UtteranceRecord":
        return cls(
            transcript_id=d["transcript_id"],
            index=int(d["index"]),
            prompt_hash=d["prompt_hash"],
            predicted=d["predicted"],
            gold=d["gold"],
            ok=bool(d["ok"]),
            fail_reason=d.get("fail_reason"),
            input_tokens=int(d.get("input_tokens", 0)),
            output_tokens=int(d.get("output_tokens", 0)),
            latency_ms=int(d.get("latency_ms", 0)),
        )


@dataclass
class RunLog:
    run_id: str
    spec: ExperimentSpec
    records: list[UtteranceRecord]
    wall_time_ms: int = 0
    input_tokens: int = 0
    output_tokens: int = 0
    cost_usd: float | None = None
    failed_transcripts: tuple[str, ...] = ()
    n_fallback_labels: int = 0  # parse failures replaced by "-" when fed forward

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "meta", "run_id": self.run_id, "spec": self.spec.as_dict()})]
        for rec in self.records:
            lines.append(json.dumps({"kind": "record", **rec.as_dict()}, ensure_ascii=False))
        lines.append(
            json.dumps(
                {
                    "kind": "summary",
                    "wall_time_ms": self.wall_time_ms,
                    "input_tokens": self.input_tokens,
                    "output_tokens": self.output_tokens,
                    "cost_usd": self.cost_usd,
                    "failed_transcripts": list(self.failed_transcripts),
                    "n_fallback_labels": self.n_fallback_labels,
                }
            )
        )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_jsonl(cls, text: str) -> "RunLog":
        meta = None
        summary: dict = {}
        records = []
        for line in text.splitlines():
            if not line.strip():
                continue
            d = json.loads(line)
            kind = d.get("kind")
            if kind == "meta":
                meta = d
            elif kind == "record":
                records.append(UtteranceRecord.from_dict(d))
            elif kind == "summary":
                summary = d
        if meta is None:
            raise RunnerError("run log has no meta line")
        return cls(
            run_id=meta["run_id"],
            spec=ExperimentSpec.from_dict(meta["spec"]),
            records=records,
            wall_time_ms=int(summary.get("wall_time_ms", 0)),
            input_tokens=int(summary.get("input_tokens", 0)),
            output_tokens=int(summary.get("output_tokens", 0)),
            cost_usd=summary.get("cost_usd"),
            failed_transcripts=tuple(summary.get("failed_transcripts", ())),
            n_fallback_labels=int(summary.get("n_fallback_labels", 0)),
        )

    def save(self, runs_dir: str | Path) -> Path:
        run_dir = Path(runs_dir) / self.run_id
        run_dir.mkdir(parents=True, exist_ok=True)
        path = run_dir / "log.jsonl"
        path.write_text(self.to_jsonl(), encoding="utf-8")
        return path

    @classmethod
    def load(cls, runs_dir: str | Path, run_id: str) -> "RunLog":
        path = Path(runs_dir) / run_id / "log.jsonl"
        if not path.exists():
            raise MissingThreadSource(f"no run log at {path}")
        return cls.from_jsonl(path.read_text(encoding="utf-8"))


Corpus = Mapping[str, tuple[Transcript, GoldAnnotations]]


def _strictness_for(provider: Provider, override: str | None) -> str:
    if override:
        return override
    # Curated sources are held to the instructed format; live output gets mined.
    return "strict" if provider.name in ("oracle", "replay") else "lenient"


def _gold_thread_canonical(g: GoldAnnotations, index: int) -> str:
    label = g.thread.get(index)
    if label is None:
        raise GoldMismatch(f"{g.transcript_id}: no gold thread label for utterance {index}")
    return label.canonical()


@dataclass
class _TranscriptResult:
    records: list[UtteranceRecord]
    failed: bool = False
    n_fallbacks: int = 0


def _record_for(
    t_id: str,
    index: int,
    rec: CompletionRecord | None,
    outcome: outparse.ParseOutcome | None,
    predicted: str,
    gold: str,
    fail_reason: str | None = None,
    prompt_hash: str = "",
) -> UtteranceRecord:
    return UtteranceRecord(
        transcript_id=t_id,
        index=index,
        prompt_hash=rec.prompt_hash if rec else prompt_hash,
        predicted=predicted,
        gold=gold,
        ok=outcome.ok if outcome else False,
        fail_reason=outcome.reason if outcome else fail_reason,
        input_tokens=rec.input_tokens if rec else 0,
        output_tokens=rec.output_tokens if rec else 0,
        latency_ms=rec.latency_ms if rec else 0,
    )


def _resolve_shots(
    spec: ExperimentSpec, corpus: Corpus, exclude: str
) -> list[tuple[Transcript, GoldAnnotations]]:
    if not spec.shots:
        return []
    if spec.shot_ids:
        ids = list(spec.shot_ids)
        if len(ids) != spec.shots:
            raise RunnerError(f"spec names {len(ids)} shot ids but shots={spec.shots}")
    else:
        # Deterministic default: first transcripts in corpus order, skipping
        # the one being labeled.
        ids = [tid for tid in corpus if tid != exclude][: spec.shots]
        if len(ids) < spec.shots:
            raise RunnerError("not enough transcripts to fill the requested shots")
    for tid in ids:
        if tid not in corpus:
            raise RunnerError(f"shot transcript {tid!r} not in corpus")
        if tid == exclude:
            raise RunnerError(f"shot transcript {tid!r} is also the target")
    return [corpus[tid] for tid in ids]


# ---------------------------------------------------------------------------
# Threading runs
# ---------------------------------------------------------------------------


def _thread_transcript_window(
    spec: ExperimentSpec,
    t: Transcript,
    g: GoldAnnotations,
    provider: Provider,
    cache: CompletionCache | None,
    strictness: str,
) -> _TranscriptResult:
    assert spec.window is not None
    out = _TranscriptResult(records=[])
    feedback: dict[int, ThreadLabel] = {}
    if spec.window.feedback == "gold":
        feedback.update(g.thread)
    for i in range(1, len(t) + 1):
        w = make_window(t, i, spec.window, labels=feedback)
        p = prompts.render_thread_window(w, template_dir=spec.template_dir)
        gold_label = _gold_thread_canonical(g, i)
        try:
            rec = complete(p, spec.model, provider, cache)
        except (RateLimited, TransportError) as exc:
            out.records.append(
                _record_for(t.id, i, None, None, PARSE_ERROR_LABEL, gold_label,
                            fail_reason=type(exc).__name__,
                            prompt_hash=prompt_digest(spec.model, p.text))
            )
            if spec.window.feedback == "self":
                feedback[i] = ThreadLabel.new_thread()
                out.n_fallbacks += 1
            continue
        outcome = outparse.parse_thread_response(
            rec.response_text, i, t[i].speaker, strictness
        )
        if outcome.ok:
            predicted = outcome.value.label.canonical()
            # Feed the canonical form back so the prompt stream is a pure
            # function of the logged predictions, whatever order the model
            # wrote split targets in.
            label = parse_respond_line(predicted)
        else:
            label = ThreadLabel.new_thread()  # fed forward so later windows stay labeled
            predicted = PARSE_ERROR_LABEL
            out.n_fallbacks += 1
        if spec.window.feedback == "self":
            feedback[i] = label
        out.records.append(_record_for(t.id, i, rec, outcome, predicted, gold_label))
    return out


def _thread_transcript_all_at_once(
    spec: ExperimentSpec,
    t: Transcript,
    g: GoldAnnotations,
    corpus: Corpus,
    provider: Provider,
    cache: CompletionCache | None,
    strictness: str,
) -> _TranscriptResult:
    out = _TranscriptResult(records=[])
    shots = _resolve_shots(spec, corpus, exclude=t.id)
    p = prompts.render_thread_all_at_once(t, shots, template_dir=spec.template_dir)
    golds = {i: _gold_thread_canonical(g, i) for i in range(1, len(t) + 1)}
    try:
        rec = complete(p, spec.model, provider, cache)
    except ContextOverflow:
        out.failed = True
        h = prompt_digest(spec.model, p.text)
        for i in range(1, len(t) + 1):
            out.records.append(
                _record_for(t.id, i, None, None, PARSE_ERROR_LABEL, golds[i],
                            fail_reason="ContextOverflow", prompt_hash=h)
            )
        return out
    block = outparse.parse_block_response(
        rec.response_text, [(u.index, u.speaker) for u in t.utterances], "thread", strictness
    )
    for u, outcome in zip(t.utterances, block.outcomes):
        predicted = outcome.value.label.canonical() if outcome.ok else PARSE_ERROR_LABEL
        out.records.append(_record_for(t.id, u.index, rec, outcome, predicted, golds[u.index]))
    return out


# ---------------------------------------------------------------------------
# Code-labeling runs
# ---------------------------------------------------------------------------


def resolve_thread_labels(
    spec: ExperimentSpec,
    corpus: Corpus,
    runs_dir: str | Path | None = None,
) -> tuple[dict[str, dict[int, ThreadLabel]], int]:
    """Thread-label maps for an abcde run, per its thread_source.

    Returns ({transcript_id: {index: label}}, fallback_count). For an llm run
    reference, unparseable or missing predictions fall back to the new-thread
    marker and are counted rather than fatal.
    """
    if spec.thread_source == THREAD_SOURCE_NONE:
        return {}, 0
    if spec.thread_source == THREAD_SOURCE_HUMAN:
        return {tid: dict(g.thread) for tid, (_, g) in corpus.items()}, 0

    ref = spec.thread_source[len(LLM_SOURCE_PREFIX):]
    if runs_dir is None:
        raise MissingThreadSource("llm thread_source needs a runs directory")
    source_log = RunLog.load(runs_dir, ref)
    if source_log.spec.task != "threading":
        raise MissingThreadSource(f"run {ref} is not a threading run")
    predicted: dict[str, dict[int, ThreadLabel]] = {}
    fallbacks = 0
    by_tid: dict[str, dict[int, str]] = {}
    for rec in source_log.records:
        by_tid.setdefault(rec.transcript_id, {})[rec.index] = rec.predicted
    for tid, (t, _) in corpus.items():
        if tid not in spec.transcripts:
            continue
        labels: dict[int, ThreadLabel] = {}
        source = by_tid.get(tid)
        if source is None:
            raise MissingThreadSource(f"run {ref} has no predictions for transcript {tid!r}")
        for i in range(1, len(t) + 1):
            raw = source.get(i)
            if raw is None or raw == PARSE_ERROR_LABEL:
                labels[i] = ThreadLabel.new_thread()
                fallbacks += 1
            else:
                labels[i] = parse_respond_line(raw)
        predicted[tid] = labels
    return predicted, fallbacks


def _gold_codes_canonical(g: GoldAnnotations, index: int) -> str:
    return g.codes_at(index).canonical()


def _code_transcript_window(
    spec: ExperimentSpec,
    t: Transcript,
    g: GoldAnnotations,
    thread_labels: Mapping[int, ThreadLabel] | None,
    provider: Provider,
    cache: CompletionCache | None,
    strictness: str,
) -> _TranscriptResult:
    assert spec.window is not None
    out = _TranscriptResult(records=[])
    cfg = WindowConfig(n=spec.window.n, feedback="none")
    threaded = thread_labels is not None
    variant = "abcde_window_threaded" if threaded else "abcde_window_plain"
    for i in range(1, len(t) + 1):
        w = make_window(t, i, cfg)
        if spec.template_override:
            p = prompts.render_baseline(spec.template_override, w, template_dir=spec.template_dir)
        else:
            p = prompts.render_abcde(
                variant, w, thread_labels if threaded else None, template_dir=spec.template_dir
            )
        gold = _gold_codes_canonical(g, i)
        try:
            rec = complete(p, spec.model, provider, cache)
        except (RateLimited, TransportError) as exc:
            out.records.append(
                _record_for(t.id, i, None, None, PARSE_ERROR_LABEL, gold,
                            fail_reason=type(exc).__name__,
                            prompt_hash=prompt_digest(spec.model, p.text))
            )
            continue
        outcome = outparse.parse_code_response(rec.response_text, i, t[i].speaker, strictness)
        predicted = outcome.value.codes.canonical() if outcome.ok else PARSE_ERROR_LABEL
        out.records.append(_record_for(t.id, i, rec, outcome, predicted, gold))
    return out


def _code_transcript_full(
    spec: ExperimentSpec,
    t: Transcript,
    g: GoldAnnotations,
    thread_labels: Mapping[int, ThreadLabel] | None,
    provider: Provider,
    cache: CompletionCache | None,
    strictness: str,
) -> _TranscriptResult:
    out = _TranscriptResult(records=[])
    threaded = thread_labels is not None
    if spec.template_override:
        p = prompts.render_baseline(spec.template_override, t, template_dir=spec.template_dir)
    else:
        variant = "abcde_full_threaded" if threaded else "abcde_full_plain"
        p = prompts.render_abcde(
            variant, t, thread_labels if threaded else None, template_dir=spec.template_dir
        )
    golds = {i: _gold_codes_canonical(g, i) for i in range(1, len(t) + 1)}
    try:
        rec = complete(p, spec.model, provider, cache)
    except ContextOverflow:
        out.failed = True
        h = prompt_digest(spec.model, p.text)
        for i in range(1, len(t) + 1):
            out.records.append(
                _record_for(t.id, i, None, None, PARSE_ERROR_LABEL, golds[i],
                            fail_reason="ContextOverflow", prompt_hash=h)
            )
        return out
    block = outparse.parse_block_response(
        rec.response_text, [(u.index, u.speaker) for u in t.utterances], "code", strictness
    )
    for u, outcome in zip(t.utterances, block.outcomes):
        predicted = outcome.value.codes.canonical() if outcome.ok else PARSE_ERROR_LABEL
        out.records.append(_record_for(t.id, u.index, rec, outcome, predicted, golds[u.index]))
    return out


# ---------------------------------------------------------------------------
# Run drivers
# ---------------------------------------------------------------------------


def _run(
    spec: ExperimentSpec,
    corpus: Corpus,
    provider: Provider,
    cache: CompletionCache | None,
    concurrency: int,
    strictness: str | None,
    pricing: PricingTable | None,
    runs_dir: str | Path | None,
) -> RunLog:
    for tid in spec.transcripts:
        if tid not in corpus:
            raise RunnerError(f"transcript {tid!r} not in corpus")
    mode = _strictness_for(provider, strictness)
    thread_labels: dict[str, dict[int, ThreadLabel]] = {}
    source_fallbacks = 0
    if spec.task == "abcde" and spec.thread_source != THREAD_SOURCE_NONE:
        thread_labels, source_fallbacks = resolve_thread_labels(spec, corpus, runs_dir)

    def work(tid: str) -> _TranscriptResult:
        t, g = corpus[tid]
        if spec.task == "threading":
            if spec.strategy == "window":
                return _thread_transcript_window(spec, t, g, provider, cache, mode)
            return _thread_transcript_all_at_once(spec, t, g, corpus, provider, cache, mode)
        labels = thread_labels.get(tid) if spec.thread_source != THREAD_SOURCE_NONE else None
        if spec.strategy == "window":
            return _code_transcript_window(spec, t, g, labels, provider, cache, mode)
        return _code_transcript_full(spec, t, g, labels, provider, cache, mode)

    started = time.perf_counter()
    if concurrency > 1 and len(spec.transcripts) > 1:
        with ThreadPoolExecutor(max_workers=concurrency) as pool:
            results = list(pool.map(work, spec.transcripts))
    else:
        results = [work(tid) for tid in spec.transcripts]
    wall_time_ms = int((time.perf_counter() - started) * 1000)

    records: list[UtteranceRecord] = []
    failed: list[str] = []
    fallbacks = source_fallbacks
    for tid, res in zip(spec.transcripts, results):
        records.extend(sorted(res.records, key=lambda r: r.index))
        if res.failed:
            failed.append(tid)
        fallbacks += res.n_fallbacks
    input_tokens = sum(r.input_tokens for r in records)
    output_tokens = sum(r.output_tokens for r in records)
    cost = None
    if pricing is not None:
        rate_in, rate_out = pricing.rate(spec.model.model_id)
        cost = input_tokens * rate_in / 1e6 + output_tokens * rate_out / 1e6
    return RunLog(
        run_id=spec.run_id,
        spec=spec,
        records=records,
        wall_time_ms=wall_time_ms,
        input_tokens=input_tokens,
        output_tokens=output_tokens,
        cost_usd=cost,
        failed_transcripts=tuple(failed),
        n_fallback_labels=fallbacks,
    )


def run_threading(
    spec: ExperimentSpec,
    corpus: Corpus,
    provider: Provider,
    cache: CompletionCache | None = None,
    concurrency: int = DEFAULT_CONCURRENCY,
    strictness: str | None = None,
    pricing: PricingTable | None = None,
) -> RunLog:
    """Thread every transcript in the spec and log one record per utterance.

    Window runs feed each parsed prediction back as context for the next
    window; a failed parse is logged as the parse-error class and replaced by
    the new-thread marker in the feedback stream so later windows stay fully
    labeled. All-at-once runs parse the response block; a context overflow
    marks the whole transcript failed without aborting the run.
    """
    if spec.task != "threading":
        raise ValueError(f"spec task is {spec.task!r}, expected 'threading'")
    return _run(spec, corpus, provider, cache, concurrency, strictness, pricing, None)


def run_abcde(
    spec: ExperimentSpec,
    corpus: Corpus,
    provider: Provider,
    cache: CompletionCache | None = None,
    concurrency: int = DEFAULT_CONCURRENCY,
    strictness: str | None = None,
    pricing: PricingTable | None = None,
    runs_dir: str | Path | None = None,
) -> RunLog:
    """Code-label every transcript in the spec, optionally thread-aware.

    With a human thread source the gold thread map is woven into the prompts;
    with an llm run reference the earlier run's predictions are used instead
    (parse failures degrade to the new-thread marker and are counted). Code
    predictions are never fed back into later prompts.
    """
    if spec.task != "abcde":
        raise ValueError(f"spec task is {spec.task!r}, expected 'abcde'")
    return _run(spec, corpus, provider, cache, concurrency, strictness, pricing, runs_dir)


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EvalResult:
    run_id: str
    task: str
    per_conversation: Mapping[str, metrics.MetricReport]
    aggregate: metrics.AggregateReport
    code_letter: str | None = None
    slices: Mapping[str, object] | None = None  # tag -> AggregateReport or error marker

    def as_dict(self) -> dict:
        d: dict[str, object] = {
            "run_id": self.run_id,
            "task": self.task,
            "per_conversation": {
                tid: rep.as_dict() for tid, rep in sorted(self.per_conversation.items())
            },
            "aggregate": self.aggregate.as_dict(),
        }
        if self.code_letter is not None:
            d["code_letter"] = self.code_letter
        if self.slices is not None:
            d["slices"] = {
                tag: (
                    val.as_dict() if isinstance(val, metrics.AggregateReport) else val
                )
                for tag, val in sorted(self.slices.items())
            }
        return d

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"


def _records_by_transcript(log: RunLog) -> dict[str, list[UtteranceRecord]]:
    grouped: dict[str, list[UtteranceRecord]] = {}
    for rec in log.records:
        grouped.setdefault(rec.transcript_id, []).append(rec)
    for recs in grouped.values():
        recs.sort(key=lambda r: r.index)
    return grouped


def _check_coverage(tid: str, recs: list[UtteranceRecord], t: Transcript) -> None:
    got = [r.index for r in recs]
    if got != list(range(1, len(t) + 1)):
        raise GoldMismatch(f"{tid}: records cover {got[:5]}..., expected 1..{len(t)}")


def evaluate_run(
    log: RunLog,
    corpus: Corpus,
    code_letter: str = "E",
    subcats: Sequence[str] | None = None,
) -> EvalResult:
    """Score a finished run against gold, per conversation plus aggregate.

    Threading runs score canonical thread labels and can be sliced by gold
    threading subcategories; code runs reduce to presence of one letter.
    Conversations missing a requested subcategory are skipped for that slice,
    and a tag absent from every conversation is reported as empty rather than
    raising.
    """
    grouped = _records_by_transcript(log)
    per_conv: dict[str, metrics.MetricReport] = {}
    reports: list[metrics.MetricReport] = []

    if log.spec.task == "threading":
        sliced: dict[str, list[metrics.MetricReport]] = {tag: [] for tag in subcats or ()}
        for tid in log.spec.transcripts:
            if tid not in corpus:
                raise GoldMismatch(f"transcript {tid!r} not in corpus")
            t, g = corpus[tid]
            recs = grouped.get(tid, [])
            _check_coverage(tid, recs, t)
            gold = [_gold_thread_canonical(g, r.index) for r in recs]
            pred = [r.predicted for r in recs]
            report = metrics.score(gold, pred)
            per_conv[tid] = report
            reports.append(report)
            for tag in subcats or ():
                try:
                    sliced[tag].append(metrics.subcategory_slice(gold, pred, g.subcat, tag))
                except metrics.EmptyCategory:
                    continue
        slices: dict[str, object] | None = None
        if subcats:
            slices = {}
            for tag in subcats:
                if sliced[tag]:
                    slices[tag] = metrics.aggregate(sliced[tag])
                else:
                    slices[tag] = {"error": "EmptyCategory"}
        return EvalResult(
            run_id=log.run_id,
            task="threading",
            per_conversation=per_conv,
            aggregate=metrics.aggregate(reports),
            slices=slices,
        )

    if code_letter not in "ABCDE" or len(code_letter) != 1:
        raise ValueError(f"code_letter must be one of A-E, got {code_letter!r}")
    for tid in log.spec.transcripts:
        if tid not in corpus:
            raise GoldMismatch(f"transcript {tid!r} not in corpus")
        t, g = corpus[tid]
        recs = grouped.get(tid, [])
        _check_coverage(tid, recs, t)
        gold_sets = [g.codes_at(r.index) for r in recs]
        pred_sets: list[CodeSet | None] = []
        for r in recs:
            if r.predicted == PARSE_ERROR_LABEL:
                pred_sets.append(None)
            else:
                pred_sets.append(CodeSet(frozenset(r.predicted)))
        report = metrics.binary_code_metrics(gold_sets, pred_sets, code_letter)
        per_conv[tid] = report
        reports.append(report)
    return EvalResult(
        run_id=log.run_id,
        task="abcde",
        per_conversation=per_conv,
        aggregate=metrics.aggregate(reports),
        code_letter=code_letter,
    )
