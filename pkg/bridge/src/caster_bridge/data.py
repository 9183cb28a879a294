"""Reading the pairs JSONL format and shaping model inputs.

One JSON object per line with fields {video_id, pair_index, strategy,
context, target}. Contexts are framed with the wire protocol's <start>/<end>
markers (unless already framed) and prefixed with the fixed task prefix, so
the text seen at training time matches the text arriving over the protocol.
"""

from __future__ import annotations

import json
from pathlib import Path

from . import END_MARKER, START_MARKER, TASK_PREFIX

REQUIRED_FIELDS = ("video_id", "pair_index", "strategy", "context", "target")


class PairsFileError(ValueError):
    """The pairs file is missing or violates the JSONL schema."""


def read_pairs(path: str | Path) -> list[dict]:
    path = Path(path)
    if not path.is_file():
        raise PairsFileError(f"pairs file not found: {path}")
    pairs = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if not line.strip():
            continue
        try:
            record = json.loads(line)
        except json.JSONDecodeError as exc:
            raise PairsFileError(f"{path}:{line_no}: invalid JSON: {exc.msg}") from exc
        missing = [k for k in REQUIRED_FIELDS if k not in record]
        if missing:
            raise PairsFileError(
                f"{path}:{line_no}: missing fields: {', '.join(missing)}"
            )
        pairs.append(record)
    if not pairs:
        raise PairsFileError(f"pairs file has no records: {path}")
    return pairs


def frame_context(context: str) -> str:
    framed = context.strip()
    if not framed.startswith(START_MARKER):
        framed = f"{START_MARKER} {framed} {END_MARKER}"
    return TASK_PREFIX + framed


def model_input_texts(pairs: list[dict]) -> list[tuple[str, str]]:
    return [(frame_context(p["context"]), p["target"]) for p in pairs]
