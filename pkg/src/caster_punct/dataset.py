"""Commentary-pair corpora: adjacent-sentence pairs, video-level splits, JSONL I/O.

A pair is (context sentence -> follow-up sentence) taken from consecutive
sentences of the same video. Corpora split at video granularity so that no
video contributes pairs to both sides, which prevents near-duplicate leakage
between train and test.

The split shuffle uses splitmix64 so the assignment reproduces bit-for-bit
across platforms and languages. The generator state advances as
``state = (state + 0x9E3779B97F4A7C15) mod 2^64`` and each output is

    z = state
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9   (mod 2^64)
    z = (z ^ (z >> 27)) * 0x94D049BB133111EB   (mod 2^64)
    return z ^ (z >> 31)

The video list is sorted lexicographically, then Fisher-Yates shuffled with
``j = next() mod (i + 1)``, and the first round(train_fraction * n) videos
(round half-up) become the train side.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

from .metrics import tokenize
from .punctuation import CommentarySentence

__all__ = [
    "CommentaryPair",
    "SplitSpec",
    "Corpus",
    "DegenerateSplit",
    "SchemaError",
    "make_pairs",
    "split_by_video",
    "write_jsonl",
    "read_jsonl",
    "corpus_manifest_json",
    "corpus_stats",
    "splitmix64_shuffle",
]

JSONL_FIELDS = ("video_id", "pair_index", "strategy", "context", "target")

_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_MASK64 = (1 << 64) - 1


class DegenerateSplit(ValueError):
    """A requested split would leave the train or test side empty."""


class SchemaError(ValueError):
    """A JSONL line does not match the corpus schema."""

    def __init__(self, line_no: int, reason: str):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


@dataclass(frozen=True)
class CommentaryPair:
    """Context sentence and its follow-up, adjacent within one video."""

    video_id: str
    pair_index: int
    context: str
    target: str
    strategy_name: str


@dataclass(frozen=True)
class SplitSpec:
    """Train fraction and shuffle seed for a video-level split."""

    train_fraction: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.train_fraction < 1:
            raise ValueError("train_fraction must be in (0, 1)")


@dataclass
class Corpus:
    """All pairs produced under one strategy, with per-video counts."""

    pairs: list[CommentaryPair]
    strategy_name: str
    manifest: dict[str, int] = field(default_factory=dict)

    @classmethod
    def from_pairs(cls, pairs: list[CommentaryPair], strategy_name: str) -> "Corpus":
        manifest: dict[str, int] = {}
        for pair in pairs:
            if pair.strategy_name != strategy_name:
                raise ValueError(
                    f"pair from {pair.video_id!r} has strategy "
                    f"{pair.strategy_name!r}, expected {strategy_name!r}"
                )
            manifest[pair.video_id] = manifest.get(pair.video_id, 0) + 1
        return cls(pairs=list(pairs), strategy_name=strategy_name, manifest=manifest)

    @property
    def video_ids(self) -> list[str]:
        return sorted(self.manifest)


def make_pairs(sentences: list[CommentarySentence]) -> list[CommentaryPair]:
    """Pair each complete sentence with the next one in the same video.

    Sentences must arrive sorted by (video_id, seq_index). Remainder
    sentences (``complete=False``) are skipped. Videos with fewer than two
    complete sentences contribute nothing; pairs never cross videos.
    """
    pairs: list[CommentaryPair] = []
    previous: CommentarySentence | None = None
    counter = 0
    for sentence in sentences:
        if not sentence.complete:
            continue
        if previous is not None and previous.video_id == sentence.video_id:
            pairs.append(
                CommentaryPair(
                    video_id=sentence.video_id,
                    pair_index=counter,
                    context=previous.text,
                    target=sentence.text,
                    strategy_name=_strategy_of(sentence),
                )
            )
            counter += 1
        else:
            counter = 0
        previous = sentence
    return pairs


def _strategy_of(sentence: CommentarySentence) -> str:
    size = sentence.cue_span[1] - sentence.cue_span[0] + 1
    return {1: "solo", 2: "duo", 3: "tri"}.get(size, f"k{size}")


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + _GAMMA) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return state, z ^ (z >> 31)


def splitmix64_shuffle(items: list, seed: int) -> list:
    """Fisher-Yates shuffle driven by splitmix64; deterministic in seed."""
    out = list(items)
    state = seed & _MASK64
    for i in range(len(out) - 1, 0, -1):
        state, value = _splitmix64(state)
        j = value % (i + 1)
        out[i], out[j] = out[j], out[i]
    return out


def split_by_video(corpus: Corpus, spec: SplitSpec) -> tuple[Corpus, Corpus]:
    """Split a corpus into train/test by whole videos, deterministically.

    Raises DegenerateSplit when either side would end up with no videos.
    """
    videos = corpus.video_ids
    shuffled = splitmix64_shuffle(videos, spec.seed)
    n_train = math.floor(spec.train_fraction * len(videos) + 0.5)  # round half-up
    if n_train == 0 or n_train == len(videos):
        raise DegenerateSplit(
            f"{len(videos)} videos at fraction {spec.train_fraction} "
            f"leaves {'train' if n_train == 0 else 'test'} empty"
        )
    train_videos = set(shuffled[:n_train])
    train_pairs = [p for p in corpus.pairs if p.video_id in train_videos]
    test_pairs = [p for p in corpus.pairs if p.video_id not in train_videos]
    return (
        Corpus.from_pairs(train_pairs, corpus.strategy_name),
        Corpus.from_pairs(test_pairs, corpus.strategy_name),
    )


def write_jsonl(corpus: Corpus, sink) -> None:
    """Write one JSON object per pair; UTF-8, LF endings, fixed key order."""
    if hasattr(sink, "write"):
        _write_lines(corpus, sink)
    else:
        with io.open(Path(sink), "w", encoding="utf-8", newline="\n") as handle:
            _write_lines(corpus, handle)


def _write_lines(corpus: Corpus, handle) -> None:
    for pair in corpus.pairs:
        record = {
            "video_id": pair.video_id,
            "pair_index": pair.pair_index,
            "strategy": pair.strategy_name,
            "context": pair.context,
            "target": pair.target,
        }
        handle.write(json.dumps(record, ensure_ascii=False) + "\n")


def read_jsonl(source) -> Corpus:
    """Read a pairs JSONL file back into a Corpus.

    Every line must carry exactly the schema fields and all lines must share
    one strategy; otherwise SchemaError(line_no). An empty file yields an
    empty corpus with strategy_name "".
    """
    if hasattr(source, "read"):
        lines = source.read().splitlines()
    else:
        lines = Path(source).read_text(encoding="utf-8").splitlines()

    pairs: list[CommentaryPair] = []
    strategy: str | None = None
    for line_no, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise SchemaError(line_no, f"invalid JSON: {exc.msg}") from exc
        if not isinstance(record, dict):
            raise SchemaError(line_no, "line is not a JSON object")
        missing = [k for k in JSONL_FIELDS if k not in record]
        if missing:
            raise SchemaError(line_no, f"missing fields: {', '.join(missing)}")
        unknown = [k for k in record if k not in JSONL_FIELDS]
        if unknown:
            raise SchemaError(line_no, f"unknown fields: {', '.join(unknown)}")
        if not isinstance(record["context"], str) or not record["context"]:
            raise SchemaError(line_no, "context must be a non-empty string")
        if not isinstance(record["target"], str) or not record["target"]:
            raise SchemaError(line_no, "target must be a non-empty string")
        if strategy is None:
            strategy = record["strategy"]
        elif record["strategy"] != strategy:
            raise SchemaError(
                line_no, f"strategy {record['strategy']!r} differs from {strategy!r}"
            )
        pairs.append(
            CommentaryPair(
                video_id=record["video_id"],
                pair_index=record["pair_index"],
                context=record["context"],
                target=record["target"],
                strategy_name=record["strategy"],
            )
        )
    return Corpus.from_pairs(pairs, strategy if strategy is not None else "")


def corpus_manifest_json(corpus: Corpus) -> str:
    """Sidecar manifest for a pairs file: strategy plus per-video pair counts."""
    doc = {
        "strategy": corpus.strategy_name,
        "videos": {vid: corpus.manifest[vid] for vid in sorted(corpus.manifest)},
    }
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"


def corpus_stats(corpus: Corpus) -> dict:
    """Pair/video counts and mean token lengths (metrics tokenizer)."""
    if not corpus.pairs:
        return {
            "pair_count": 0,
            "video_count": 0,
            "mean_context_tokens": 0.0,
            "mean_target_tokens": 0.0,
        }
    context_total = sum(len(tokenize(p.context).tokens) for p in corpus.pairs)
    target_total = sum(len(tokenize(p.target).tokens) for p in corpus.pairs)
    return {
        "pair_count": len(corpus.pairs),
        "video_count": len(corpus.manifest),
        "mean_context_tokens": context_total / len(corpus.pairs),
        "mean_target_tokens": target_total / len(corpus.pairs),
    }
