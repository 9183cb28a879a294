"""Sentence punctuation strategies: merge every k consecutive cues into one sentence.

k=1 leaves the stream as delivered ("solo"), k=2 and k=3 ("duo", "tri") merge
adjacent cues into longer commentary sentences; any k >= 1 works. Grouping is
fixed-stride and non-overlapping. A trailing group smaller than k is dropped
by default or kept with ``complete=False`` under the ``keep`` policy.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

from .captions import EmptyTranscript, Transcript

__all__ = [
    "Strategy",
    "CommentarySentence",
    "DEFAULT_START_MARKER",
    "DEFAULT_END_MARKER",
    "punctuate",
    "render_with_markers",
    "parse_strategy_spec",
]

DEFAULT_START_MARKER = "<start>"
DEFAULT_END_MARKER = "<end>"

_NAMES = {1: "solo", 2: "duo", 3: "tri"}
_SPEC_RE = re.compile(r"^k=(\d+)$")


@dataclass(frozen=True)
class Strategy:
    """Grouping rule: how many consecutive cues form one sentence."""

    group_size: int
    remainder_policy: str = "drop"

    def __post_init__(self):
        if self.group_size < 1:
            raise ValueError("group_size must be >= 1")
        if self.remainder_policy not in ("drop", "keep"):
            raise ValueError("remainder_policy must be 'drop' or 'keep'")

    @property
    def name(self) -> str:
        return _NAMES.get(self.group_size, f"k{self.group_size}")


@dataclass(frozen=True)
class CommentarySentence:
    """k cue texts from one video merged into a single commentary sentence."""

    video_id: str
    seq_index: int
    text: str
    cue_span: tuple[int, int]  # inclusive (first_cue_index, last_cue_index)
    complete: bool = True


def punctuate(transcript: Transcript, strategy: Strategy) -> list[CommentarySentence]:
    """Merge consecutive cue groups of ``strategy.group_size`` into sentences.

    Sentences carry their cue span and are numbered consecutively from 0.
    A trailing partial group is dropped or, under the ``keep`` policy,
    emitted with ``complete=False``.
    """
    if not transcript.cues:
        raise EmptyTranscript(f"transcript {transcript.video_id!r} has no cues")
    k = strategy.group_size
    sentences = []
    for group_start in range(0, len(transcript.cues), k):
        group = transcript.cues[group_start:group_start + k]
        complete = len(group) == k
        if not complete and strategy.remainder_policy == "drop":
            break
        sentences.append(
            CommentarySentence(
                video_id=transcript.video_id,
                seq_index=len(sentences),
                text=" ".join(cue.text for cue in group),
                cue_span=(group[0].index, group[-1].index),
                complete=complete,
            )
        )
    return sentences


def render_with_markers(
    sentence: CommentarySentence,
    start_marker: str = DEFAULT_START_MARKER,
    end_marker: str = DEFAULT_END_MARKER,
) -> str:
    """Frame a sentence as "<start> text <end>" for model input."""
    for marker in (start_marker, end_marker):
        if not marker or any(ch.isspace() for ch in marker):
            raise ValueError(f"marker must be non-empty without whitespace, got {marker!r}")
    return f"{start_marker} {sentence.text} {end_marker}"


def parse_strategy_spec(spec: str, remainder: str = "drop") -> Strategy:
    """Parse a CLI strategy spec: "solo" | "duo" | "tri" | "k=<N>"."""
    lowered = spec.strip().lower()
    for size, name in _NAMES.items():
        if lowered == name:
            return Strategy(group_size=size, remainder_policy=remainder)
    m = _SPEC_RE.match(lowered)
    if m and int(m.group(1)) >= 1:
        return Strategy(group_size=int(m.group(1)), remainder_policy=remainder)
    raise ValueError(f"invalid strategy spec {spec!r}; expected solo, duo, tri, or k=<N>")
