"""Sliding windows over a transcript for incremental labeling.

A window holds the target utterance plus the utterances immediately before it,
capped at n - 1 lines of context. Depending on the feedback mode, context
lines carry thread labels taken from the model's own earlier predictions
(``self``), from human annotation (``gold``), or none at all (``none``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterator, Mapping

from .corpus import GoldAnnotations, ThreadLabel, Transcript, Utterance

FEEDBACK_MODES = ("self", "gold", "none")


class MissingFeedbackLabel(Exception):
    def __init__(self, index: int):
        super().__init__(f"no feedback label for context utterance {index}")
        self.index = index


@dataclass(frozen=True)
class WindowConfig:
    n: int  # window size including the target line
    feedback: str = "self"

    def __post_init__(self):
        if self.n < 2:
            raise ValueError(f"window size must be >= 2, got {self.n}")
        if self.feedback not in FEEDBACK_MODES:
            raise ValueError(f"feedback must be one of {FEEDBACK_MODES}, got {self.feedback!r}")


@dataclass(frozen=True)
class Window:
    """Context lines (with labels unless feedback is off) plus the unlabeled target."""

    context: tuple[tuple[Utterance, ThreadLabel | None], ...]
    target: Utterance
    target_index: int
    n: int  # configured window size; actual size is min(n, target_index)
    transcript_id: str = ""

    def __post_init__(self):
        k = min(self.n, self.target_index)
        if len(self.context) != k - 1:
            raise ValueError(
                f"window at {self.target_index} needs {k - 1} context lines, "
                f"got {len(self.context)}"
            )


def make_window(
    t: Transcript,
    target_index: int,
    cfg: WindowConfig,
    labels: Mapping[int, ThreadLabel] | None = None,
) -> Window:
    """Build the window ending at ``target_index``.

    Context is exactly the ``min(cfg.n, target_index) - 1`` utterances
    immediately before the target; early targets simply see everything
    available, and the first utterance gets an empty context rather than any
    special-case label. With feedback on, every context line must have a label
    in ``labels``.
    """
    if not 1 <= target_index <= len(t):
        raise IndexError(f"target index {target_index} outside 1..{len(t)}")
    first = max(1, target_index - cfg.n + 1)
    context = []
    for idx in range(first, target_index):
        if cfg.feedback == "none":
            label = None
        else:
            label = (labels or {}).get(idx)
            if label is None:
                raise MissingFeedbackLabel(idx)
        context.append((t[idx], label))
    return Window(
        context=tuple(context),
        target=t[target_index],
        target_index=target_index,
        n=cfg.n,
        transcript_id=t.id,
    )


def window_sequence(
    t: Transcript,
    cfg: WindowConfig,
    label_source: Mapping[int, ThreadLabel] | Callable[[int], ThreadLabel] | None = None,
) -> Iterator[Window]:
    """Yield one window per utterance, in order.

    ``label_source`` (a mapping or a callable) is queried lazily for context
    labels, so in self-feedback mode the caller can record a prediction for
    utterance i after receiving window i and before the generator builds
    window i + 1. A mutable dict the caller appends to works as-is.
    """
    if cfg.feedback != "none" and label_source is None:
        raise ValueError(f"feedback={cfg.feedback!r} requires a label source")
    if callable(label_source):
        fetch = label_source
    else:
        fetch = None if label_source is None else label_source.__getitem__

    class _Lookup:
        def get(self, idx: int) -> ThreadLabel | None:
            if fetch is None:
                return None
            try:
                return fetch(idx)
            except KeyError:
                return None

    lookup = _Lookup()
    for i in range(1, len(t) + 1):
        yield make_window(t, i, cfg, labels=lookup)


def gold_label_source(g: GoldAnnotations) -> Callable[[int], ThreadLabel]:
    """Label source that reads from human annotation, for gold-feedback windows."""
    return lambda idx: g.thread[idx]
