"""Word-level vocabulary for the bridge's text-to-text model.

Tokens are whitespace-separated words, lowercased. Three reserved ids:
0 = <pad>, 1 = </s> (end of sequence), 2 = <unk>. The vocabulary is built
from the training pairs and saved next to the model weights, so a served
model is self-contained.
"""

from __future__ import annotations

import json
from collections import Counter
from pathlib import Path

PAD_ID = 0
EOS_ID = 1
UNK_ID = 2
RESERVED = ("<pad>", "</s>", "<unk>")


class Vocab:
    def __init__(self, words: list[str]):
        self.tokens = list(RESERVED) + list(words)
        self.index = {token: i for i, token in enumerate(self.tokens)}

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def build(cls, texts: list[str], max_size: int = 8000) -> "Vocab":
        counts: Counter = Counter()
        for text in texts:
            counts.update(text.lower().split())
        ranked = sorted(counts.items(), key=lambda item: (-item[1], item[0]))
        words = [word for word, _ in ranked[: max_size - len(RESERVED)]]
        return cls(words)

    def encode(self, text: str, max_len: int) -> list[int]:
        ids = [self.index.get(word, UNK_ID) for word in text.lower().split()]
        return ids[: max_len - 1] + [EOS_ID]

    def decode(self, ids: list[int]) -> str:
        words = []
        for token_id in ids:
            if token_id == EOS_ID:
                break
            if token_id in (PAD_ID, UNK_ID) or token_id >= len(self.tokens):
                continue
            words.append(self.tokens[token_id])
        return " ".join(words)

    def save(self, path: Path) -> None:
        doc = {"version": 1, "tokens": self.tokens}
        path.write_text(json.dumps(doc, ensure_ascii=False), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "Vocab":
        doc = json.loads(path.read_text(encoding="utf-8"))
        tokens = doc["tokens"]
        if tokens[: len(RESERVED)] != list(RESERVED):
            raise ValueError(f"{path} does not start with the reserved tokens")
        vocab = cls.__new__(cls)
        vocab.tokens = tokens
        vocab.index = {token: i for i, token in enumerate(tokens)}
        return vocab
