"""Protocol server: newline-delimited JSON over stdin/stdout.

Emits {"type": "ready", "version": 1} first, then answers each
{"id", "context"} request with {"id", "commentary"}. Malformed request lines
get {"id": -1, "error": ...} and the loop continues; EOF exits cleanly.

Decoding is deterministic (greedy or fixed-width beam, never sampling), so a
given model directory always produces the same commentary for the same
request. Echo mode skips model loading entirely and answers with the request
context; it exists as a transport test double.
"""

from __future__ import annotations

import json
import sys

from . import PROTOCOL_VERSION
from .data import frame_context


def _emit(doc: dict) -> None:
    sys.stdout.write(json.dumps(doc, ensure_ascii=False) + "\n")
    sys.stdout.flush()


def _parse_request(line: str):
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as exc:
        return None, f"invalid JSON: {exc.msg}"
    if not isinstance(doc, dict) or not isinstance(doc.get("id"), int) \
            or not isinstance(doc.get("context"), str):
        return None, 'request must be {"id": int, "context": str}'
    return doc, None


class ModelGenerator:
    """Lazily loads the saved bundle and runs deterministic decoding."""

    def __init__(self, model_dir: str):
        import torch  # heavy imports deferred until a model is actually served
        from .model import load_bundle

        self.torch = torch
        self.model, self.vocab, self.config = load_bundle(model_dir)
        self.device = self.config.get("device", "cpu")
        self.model.to(self.device)

    def __call__(self, context: str) -> str:
        torch = self.torch
        text = frame_context(context)
        ids = self.vocab.encode(text, self.config.get("max_input_len", 48))
        input_ids = torch.tensor([ids], dtype=torch.long, device=self.device)
        with torch.no_grad():
            output = self.model.generate(
                input_ids=input_ids,
                max_new_tokens=self.config.get("max_new_tokens", 24),
                num_beams=self.config.get("beam_size", 1),
                do_sample=False,
            )
        return self.vocab.decode(output[0].tolist())


def serve(model_dir: str | None = None, echo: bool = False) -> int:
    generate = (lambda context: context) if echo else ModelGenerator(model_dir)
    _emit({"type": "ready", "version": PROTOCOL_VERSION})
    sys.stderr.write("# caster-bridge serving\n")
    sys.stderr.flush()
    for line in sys.stdin:
        line = line.strip()
        if not line:
            continue
        request, problem = _parse_request(line)
        if problem is not None:
            _emit({"id": -1, "error": problem})
            continue
        _emit({"id": request["id"], "commentary": generate(request["context"])})
    return 0
