"""Timed-caption ingestion: WebVTT, SRT and YouTube JSON3 parsing plus HTTP fetch.

Parsing is strict about structure (explicit format flag, no sniffing) and
lenient about presentation: inline markup is stripped, HTML entities are
decoded, and cue text is whitespace-normalized with original letter case
preserved. Cues that end up empty after normalization are dropped before
indexing. Timestamps are truncated to integer milliseconds.
"""

from __future__ import annotations

import html
import json
import re
from dataclasses import dataclass, field

import requests

__all__ = [
    "CaptionCue",
    "Transcript",
    "MalformedInput",
    "EmptyTranscript",
    "HttpError",
    "FetchTimeout",
    "CAPTION_FORMATS",
    "normalize_text",
    "parse_captions",
    "fetch_captions",
    "transcript_to_json",
    "transcript_from_json",
]

CAPTION_FORMATS = ("webvtt", "srt", "json3")

MAX_REDIRECTS = 5


class MalformedInput(ValueError):
    """Input violates the caption grammar (bad header, timestamp, or JSON)."""

    def __init__(self, reason: str, line: int | None = None):
        self.reason = reason
        self.line = line
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{reason}")


class EmptyTranscript(ValueError):
    """No cues survived parsing and normalization."""


class HttpError(RuntimeError):
    """Non-200 response (or redirect overflow) while fetching captions."""

    def __init__(self, status: int, reason: str = ""):
        self.status = status
        self.reason = reason
        super().__init__(f"HTTP {status}" + (f": {reason}" if reason else ""))


class FetchTimeout(TimeoutError):
    """Caption fetch exceeded its deadline."""


@dataclass(frozen=True)
class CaptionCue:
    """One timed caption text sequence, as originally punctuated upstream."""

    index: int
    start_ms: int
    end_ms: int
    text: str


@dataclass
class Transcript:
    """Ordered cues for a single video."""

    video_id: str
    cues: list[CaptionCue] = field(default_factory=list)

    def __post_init__(self):
        if not self.video_id:
            raise ValueError("video_id must be non-empty")


_WS_RUN = re.compile(r"\s+")
# Inline tags: VTT voice/class/timestamp tags, SRT italics/bold, anything <...>
# on a single line. A bare "<" with no closing ">" is kept as literal text.
_TAG = re.compile(r"<[^<>\n]*>")

# HH is optional in WebVTT; fractional seconds are truncated to milliseconds.
_TIMESTAMP = re.compile(
    r"^(?:(\d{1,4}):)?(\d{1,2}):(\d{1,2})[.,](\d+)$"
)


def normalize_text(text: str) -> str:
    """Collapse internal whitespace to single spaces and trim. Idempotent."""
    return _WS_RUN.sub(" ", text).strip()


def _clean_payload(raw: str) -> str:
    """Strip inline markup and entities from cue payload, then normalize."""
    return normalize_text(html.unescape(_TAG.sub("", raw)))


def _parse_timestamp(token: str, line_no: int) -> int:
    m = _TIMESTAMP.match(token.strip())
    if not m:
        raise MalformedInput(f"unparsable timestamp {token.strip()!r}", line=line_no)
    hours = int(m.group(1)) if m.group(1) is not None else 0
    minutes = int(m.group(2))
    seconds = int(m.group(3))
    frac = m.group(4)[:3].ljust(3, "0")  # truncate sub-millisecond digits
    return ((hours * 60 + minutes) * 60 + seconds) * 1000 + int(frac)


def _decode(data: bytes) -> str:
    try:
        return data.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise MalformedInput(f"not valid UTF-8 at byte {exc.start}") from exc


def _split_timing_line(line: str, line_no: int) -> tuple[int, int]:
    left, _, right = line.partition("-->")
    if not right:
        raise MalformedInput("expected 'start --> end' timing line", line=line_no)
    start = _parse_timestamp(left, line_no)
    # Drop cue settings trailing the end timestamp ("align:start position:0%").
    end_token = right.strip().split(" ", 1)[0]
    end = _parse_timestamp(end_token, line_no)
    if start > end:
        raise MalformedInput("cue start is after cue end", line=line_no)
    return start, end


def _blocks(lines: list[str], start: int) -> list[tuple[int, list[str]]]:
    """Split lines[start:] into blank-line-separated blocks with line numbers."""
    out = []
    current: list[str] = []
    current_start = start + 1
    for offset, line in enumerate(lines[start:], start=start + 1):
        if line.strip():
            if not current:
                current_start = offset
            current.append(line)
        elif current:
            out.append((current_start, current))
            current = []
    if current:
        out.append((current_start, current))
    return out


def _parse_webvtt(text: str) -> list[tuple[int, int, str]]:
    lines = text.splitlines()
    if not lines or not lines[0].strip().startswith("WEBVTT"):
        raise MalformedInput("missing WEBVTT header", line=1)
    # Header block may carry metadata lines until the first blank line.
    body_start = 1
    while body_start < len(lines) and lines[body_start].strip() and "-->" not in lines[body_start]:
        body_start += 1

    cues = []
    for line_no, block in _blocks(lines, body_start):
        head = block[0].strip()
        if head.startswith("NOTE") or head in ("STYLE", "REGION"):
            continue
        timing_idx = 0
        if "-->" not in block[0]:
            # Optional cue identifier line precedes the timing line.
            if len(block) < 2 or "-->" not in block[1]:
                raise MalformedInput("expected timing line in cue block", line=line_no)
            timing_idx = 1
        start, end = _split_timing_line(block[timing_idx], line_no + timing_idx)
        payload = " ".join(block[timing_idx + 1:])
        cues.append((start, end, _clean_payload(payload)))
    return cues


def _parse_srt(text: str) -> list[tuple[int, int, str]]:
    blocks = _blocks(text.splitlines(), 0)
    if not blocks:
        raise MalformedInput("no cue blocks found", line=1)
    cues = []
    for line_no, block in blocks:
        timing_idx = 0
        if "-->" not in block[0]:
            if not block[0].strip().isdigit():
                raise MalformedInput(
                    f"expected numeric counter or timing line, got {block[0].strip()!r}",
                    line=line_no,
                )
            if len(block) < 2:
                raise MalformedInput("cue block ends after counter", line=line_no)
            timing_idx = 1
        start, end = _split_timing_line(block[timing_idx], line_no + timing_idx)
        payload = " ".join(block[timing_idx + 1:])
        cues.append((start, end, _clean_payload(payload)))
    return cues


def _parse_json3(text: str) -> list[tuple[int, int, str]]:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedInput(f"invalid JSON: {exc.msg}", line=exc.lineno) from exc
    if not isinstance(doc, dict) or not isinstance(doc.get("events"), list):
        raise MalformedInput("missing top-level 'events' array")
    cues = []
    for pos, event in enumerate(doc["events"]):
        if not isinstance(event, dict):
            raise MalformedInput(f"events[{pos}] is not an object")
        segs = event.get("segs")
        if not segs:
            continue  # events lacking text are skipped
        joined = " ".join(str(seg.get("utf8", "")) for seg in segs if isinstance(seg, dict))
        cleaned = _clean_payload(joined)
        if not cleaned:
            continue
        start = event.get("tStartMs")
        if not isinstance(start, int):
            raise MalformedInput(f"events[{pos}] missing integer tStartMs")
        duration = event.get("dDurationMs", 0)
        if not isinstance(duration, int) or duration < 0:
            raise MalformedInput(f"events[{pos}] has invalid dDurationMs")
        cues.append((start, start + duration, cleaned))
    return cues


_PARSERS = {"webvtt": _parse_webvtt, "srt": _parse_srt, "json3": _parse_json3}


def parse_captions(
    data: bytes,
    format: str,
    video_id: str,
    dedup_consecutive: bool = False,
) -> Transcript:
    """Parse caption file bytes into a normalized Transcript.

    The format is always the caller's explicit choice. Cues are kept in file
    order, stably sorted by start time, and indexed from 0 after empty cues
    are dropped. With ``dedup_consecutive``, a cue whose text equals the
    previous kept cue's text is discarded (YouTube roll-up captions repeat
    lines across overlapping cues).

    Raises MalformedInput on grammar violations and EmptyTranscript when no
    cue survives normalization.
    """
    if format not in _PARSERS:
        raise ValueError(f"unknown caption format {format!r}; use one of {CAPTION_FORMATS}")
    raw_cues = _PARSERS[format](_decode(data))

    timed = [(start, end, text) for start, end, text in raw_cues if text]
    timed.sort(key=lambda cue: cue[0])  # stable: file order breaks ties

    cues: list[CaptionCue] = []
    for start, end, text in timed:
        if dedup_consecutive and cues and cues[-1].text == text:
            continue
        cues.append(CaptionCue(index=len(cues), start_ms=start, end_ms=end, text=text))
    if not cues:
        raise EmptyTranscript(f"no non-empty cues in captions for {video_id!r}")
    return Transcript(video_id=video_id, cues=cues)


def fetch_captions(url: str, timeout_ms: int) -> bytes:
    """Fetch raw caption bytes over HTTP(S).

    Returns the body on status 200. Raises HttpError for any other status or
    for redirect chains longer than 5 hops, and FetchTimeout past the
    deadline.
    """
    if not url.startswith(("http://", "https://")):
        raise ValueError(f"url must be http or https, got {url!r}")
    session = requests.Session()
    session.max_redirects = MAX_REDIRECTS
    try:
        response = session.get(url, timeout=timeout_ms / 1000.0)
    except requests.Timeout as exc:
        raise FetchTimeout(f"no response within {timeout_ms} ms from {url}") from exc
    except requests.TooManyRedirects as exc:
        last = exc.response.status_code if exc.response is not None else 0
        raise HttpError(last, f"more than {MAX_REDIRECTS} redirects") from exc
    except requests.ConnectionError as exc:
        raise HttpError(0, f"connection failed: {exc}") from exc
    finally:
        session.close()
    if response.status_code != 200:
        raise HttpError(response.status_code, response.reason or "")
    return response.content


def transcript_to_json(transcript: Transcript) -> str:
    """Serialize to the canonical transcript JSON (stable key order)."""
    doc = {
        "video_id": transcript.video_id,
        "cues": [
            {"index": c.index, "start_ms": c.start_ms, "end_ms": c.end_ms, "text": c.text}
            for c in transcript.cues
        ],
    }
    return json.dumps(doc, ensure_ascii=False)


def transcript_from_json(text: str) -> Transcript:
    """Inverse of transcript_to_json."""
    doc = json.loads(text)
    cues = [
        CaptionCue(
            index=c["index"], start_ms=c["start_ms"], end_ms=c["end_ms"], text=c["text"]
        )
        for c in doc["cues"]
    ]
    return Transcript(video_id=doc["video_id"], cues=cues)
