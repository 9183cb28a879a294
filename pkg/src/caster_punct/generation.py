"""Commentary generators: a native tf-idf retrieval baseline and an adapter
client for external neural generators.

The retrieval baseline answers a context with the stored follow-up of the
most similar training context (cosine over L2-normalized tf-idf vectors),
which keeps the whole pipeline runnable with no model dependencies.

External generators speak newline-delimited JSON, either over a child
process's stdin/stdout or via HTTP POST to /generate:

    request   {"id": <int>, "context": <string>}\\n
    response  {"id": <int>, "commentary": <string>}\\n

A stdio adapter announces itself with {"type": "ready", "version": 1} before
its first response. Lines starting with "#" are diagnostic chatter and are
ignored. Exactly one request is in flight per session; responses are matched
to requests by id, so any reordering or id invention is detected.
"""

from __future__ import annotations

import json
import logging
import math
import queue
import shlex
import subprocess
import threading
import time
from collections import Counter
from dataclasses import dataclass, field

import requests

from .dataset import CommentaryPair
from .metrics import TokenSeq, tokenize

__all__ = [
    "GeneratorRequest",
    "GeneratorResponse",
    "RetrievalIndex",
    "AdapterConfig",
    "EmptyTrainingSet",
    "AdapterCrashed",
    "AdapterTimeout",
    "ProtocolError",
    "PROTOCOL_VERSION",
    "build_index",
    "retrieve_generate",
    "run_external",
]

PROTOCOL_VERSION = 1

log = logging.getLogger("caster_punct.adapter")


class EmptyTrainingSet(ValueError):
    """build_index() requires at least one training pair."""


class AdapterError(RuntimeError):
    """Base for external-generator failures; carries any partial results."""

    def __init__(self, message: str):
        super().__init__(message)
        self.partial_results: list[str] | None = None


class AdapterCrashed(AdapterError):
    """The adapter process exited or the connection dropped."""


class AdapterTimeout(AdapterError, TimeoutError):
    """No response within the deadline."""

    def __init__(self, message: str, request_id: int | None = None):
        super().__init__(message)
        self.request_id = request_id


class ProtocolError(AdapterError):
    """The adapter sent a line that violates the protocol."""

    def __init__(self, message: str, line: str | None = None):
        super().__init__(message)
        self.line = line


@dataclass(frozen=True)
class GeneratorRequest:
    id: int
    context: str

    def to_line(self) -> str:
        return json.dumps({"id": self.id, "context": self.context}, ensure_ascii=False)


@dataclass(frozen=True)
class GeneratorResponse:
    id: int
    commentary: str

    @classmethod
    def from_line(cls, line: str) -> "GeneratorResponse":
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"response is not valid JSON: {exc.msg}", line=line) from exc
        if not isinstance(doc, dict) or not isinstance(doc.get("id"), int) \
                or not isinstance(doc.get("commentary"), str):
            raise ProtocolError("response must be {\"id\": int, \"commentary\": str}", line=line)
        return cls(id=doc["id"], commentary=doc["commentary"])


@dataclass
class RetrievalIndex:
    """Immutable after build: tokenized contexts, idf table, unit vectors."""

    entries: list[tuple[TokenSeq, str, int]]  # (context_tokens, target, pair_index)
    idf: dict[str, float]
    vectors: list[dict[str, float]]


def _unit_tfidf(tokens: TokenSeq, idf: dict[str, float]) -> dict[str, float]:
    weights = {
        token: count * idf[token]
        for token, count in Counter(tokens.tokens).items()
        if token in idf
    }
    norm = math.sqrt(sum(w * w for w in weights.values()))
    if norm == 0.0:
        return {}
    return {token: w / norm for token, w in weights.items()}


def build_index(train_pairs: list[CommentaryPair]) -> RetrievalIndex:
    """Index training contexts by tf-idf; idf(t) = ln(N / df(t))."""
    if not train_pairs:
        raise EmptyTrainingSet("cannot build a retrieval index from zero pairs")
    entries = [
        (tokenize(pair.context), pair.target, i) for i, pair in enumerate(train_pairs)
    ]
    df: Counter = Counter()
    for context_tokens, _, _ in entries:
        df.update(set(context_tokens.tokens))
    n = len(entries)
    idf = {token: math.log(n / count) for token, count in df.items()}
    vectors = [_unit_tfidf(context_tokens, idf) for context_tokens, _, _ in entries]
    return RetrievalIndex(entries=entries, idf=idf, vectors=vectors)


def retrieve_generate(index: RetrievalIndex, context: str) -> str:
    """Return the stored follow-up of the most cosine-similar context.

    Ties and the no-overlap case fall back to the smallest pair_index, so the
    function is total and deterministic.
    """
    query = _unit_tfidf(tokenize(context), index.idf)
    best_score = 0.0
    best_entry = 0
    if query:
        for position, vector in enumerate(index.vectors):
            if len(query) < len(vector):
                score = sum(w * vector.get(token, 0.0) for token, w in query.items())
            else:
                score = sum(w * query.get(token, 0.0) for token, w in vector.items())
            if score > best_score:
                best_score = score
                best_entry = position
    return index.entries[best_entry][1]


@dataclass
class AdapterConfig:
    """How to reach an external generator: child command or HTTP endpoint."""

    command: str | list[str] | None = None
    url: str | None = None
    timeout_ms: int = 10000
    max_retries: int = 0
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if bool(self.command) == bool(self.url):
            raise ValueError("exactly one of command or url must be set")


class _StdioSession:
    """One adapter child process: spawn, handshake, one request in flight."""

    def __init__(self, command: str | list[str], timeout_ms: int):
        argv = shlex.split(command) if isinstance(command, str) else list(command)
        self.timeout_s = timeout_ms / 1000.0
        try:
            self.proc = subprocess.Popen(
                argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                encoding="utf-8",
                bufsize=1,
            )
        except OSError as exc:
            raise AdapterCrashed(f"could not start adapter {argv!r}: {exc}") from exc
        self._lines: queue.Queue = queue.Queue()
        threading.Thread(target=self._pump_stdout, daemon=True).start()
        threading.Thread(target=self._pump_stderr, daemon=True).start()
        self._handshake()

    def _pump_stdout(self):
        for line in self.proc.stdout:
            self._lines.put(line)
        self._lines.put(None)

    def _pump_stderr(self):
        for line in self.proc.stderr:
            text = line.rstrip("\n")
            if text and not text.startswith("#"):
                log.debug("adapter stderr: %s", text)

    def _read_line(self, request_id: int | None) -> str:
        deadline = time.monotonic() + self.timeout_s
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise AdapterTimeout(
                    f"no adapter line within {self.timeout_s * 1000:.0f} ms",
                    request_id=request_id,
                )
            try:
                line = self._lines.get(timeout=remaining)
            except queue.Empty:
                raise AdapterTimeout(
                    f"no adapter line within {self.timeout_s * 1000:.0f} ms",
                    request_id=request_id,
                ) from None
            if line is None:
                code = self.proc.poll()
                raise AdapterCrashed(f"adapter closed its output (exit code {code})")
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue  # diagnostic chatter
            return stripped

    def _handshake(self):
        line = self._read_line(request_id=None)
        try:
            doc = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"ready line is not valid JSON: {exc.msg}", line=line) from exc
        if not isinstance(doc, dict) or doc.get("type") != "ready":
            raise ProtocolError("adapter did not announce readiness first", line=line)
        if doc.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(
                f"unsupported protocol version {doc.get('version')!r}", line=line
            )

    def request(self, request: GeneratorRequest) -> str:
        try:
            self.proc.stdin.write(request.to_line() + "\n")
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise AdapterCrashed(f"adapter stdin closed: {exc}") from exc
        response = GeneratorResponse.from_line(self._read_line(request.id))
        if response.id != request.id:
            raise ProtocolError(
                f"response id {response.id} does not match request id {request.id}"
            )
        return response.commentary

    def close(self):
        for stream in (self.proc.stdin,):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.wait(timeout=1.0)
        except subprocess.TimeoutExpired:
            self.proc.kill()
            self.proc.wait()


class _HttpSession:
    """POSTs each request to the adapter's /generate endpoint."""

    def __init__(self, url: str, timeout_ms: int):
        base = url.rstrip("/")
        self.endpoint = base if base.endswith("/generate") else base + "/generate"
        self.timeout_s = timeout_ms / 1000.0
        self.session = requests.Session()

    def request(self, request: GeneratorRequest) -> str:
        try:
            http_response = self.session.post(
                self.endpoint,
                data=(request.to_line() + "\n").encode("utf-8"),
                headers={"Content-Type": "application/json"},
                timeout=self.timeout_s,
            )
        except requests.Timeout as exc:
            raise AdapterTimeout(
                f"no response within {self.timeout_s * 1000:.0f} ms",
                request_id=request.id,
            ) from exc
        except requests.ConnectionError as exc:
            raise AdapterCrashed(f"adapter connection failed: {exc}") from exc
        if http_response.status_code != 200:
            raise AdapterCrashed(f"adapter returned HTTP {http_response.status_code}")
        response = GeneratorResponse.from_line(http_response.text.strip())
        if response.id != request.id:
            raise ProtocolError(
                f"response id {response.id} does not match request id {request.id}"
            )
        return response.commentary

    def close(self):
        self.session.close()


def _open_session(config: AdapterConfig):
    if config.command is not None:
        return _StdioSession(config.command, config.timeout_ms)
    return _HttpSession(config.url, config.timeout_ms)


def run_external(config: AdapterConfig, contexts: list[str]) -> list[str]:
    """Send each context to the adapter, in order, one request in flight.

    Output order matches input order. A failed request (timeout, crash,
    protocol violation) tears the session down and is retried on a fresh
    session up to ``config.max_retries`` times; when retries are exhausted
    the classified error is raised with ``partial_results`` carrying the
    commentary collected so far.
    """
    outputs: list[str] = []
    session = None
    next_id = 0
    try:
        for context in contexts:
            attempts = 0
            while True:
                try:
                    if session is None:
                        session = _open_session(config)
                    request = GeneratorRequest(id=next_id, context=context)
                    next_id += 1
                    outputs.append(session.request(request))
                    break
                except (AdapterCrashed, AdapterTimeout, ProtocolError) as exc:
                    if session is not None:
                        session.close()
                        session = None
                    attempts += 1
                    if attempts > config.max_retries:
                        exc.partial_results = list(outputs)
                        raise
                    log.warning("adapter attempt %d failed (%s); retrying", attempts, exc)
    finally:
        if session is not None:
            session.close()
    return outputs
