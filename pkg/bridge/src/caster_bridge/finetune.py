"""Fine-tuning on commentary pairs with a plain teacher-forcing loop.

The training log records the mean full-dataset loss before any update and
after every epoch, so downstream checks can compare end-of-training loss
against the starting point. epochs=0 saves the base model untouched, which
is how the untuned comparison arm is produced.
"""

from __future__ import annotations

import json
import random
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import TASK_PREFIX, __version__
from .data import model_input_texts, read_pairs
from .model import CONFIG_NAME, init_base_model, load_bundle, save_bundle
from .vocab import PAD_ID, Vocab

LOG_NAME = "training_log.json"


@dataclass
class BridgeConfig:
    """Everything a fine-tuning run needs; persisted with the model."""

    pairs_path: str
    out_dir: str
    base: str = "small"  # variant name or path to an existing bundle
    epochs: int = 1
    max_input_len: int = 48
    max_output_len: int = 32
    beam_size: int = 1
    max_new_tokens: int = 24
    device: str = "cpu"
    seed: int = 0
    learning_rate: float = 1e-3
    batch_size: int = 16
    vocab_size: int = 8000
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


def _batches(items: list, size: int):
    for start in range(0, len(items), size):
        yield items[start:start + size]


def _encode_batch(batch, vocab: Vocab, config: BridgeConfig, torch):
    sources = [vocab.encode(src, config.max_input_len) for src, _ in batch]
    targets = [vocab.encode(tgt, config.max_output_len) for _, tgt in batch]
    src_width = max(len(s) for s in sources)
    tgt_width = max(len(t) for t in targets)
    input_ids = torch.full((len(batch), src_width), PAD_ID, dtype=torch.long)
    attention = torch.zeros((len(batch), src_width), dtype=torch.long)
    labels = torch.full((len(batch), tgt_width), -100, dtype=torch.long)
    for row, (src, tgt) in enumerate(zip(sources, targets)):
        input_ids[row, : len(src)] = torch.tensor(src)
        attention[row, : len(src)] = 1
        labels[row, : len(tgt)] = torch.tensor(tgt)
    return input_ids, attention, labels


def _mean_loss(model, examples, vocab, config, torch) -> float:
    model.eval()
    total, count = 0.0, 0
    with torch.no_grad():
        for batch in _batches(examples, config.batch_size):
            input_ids, attention, labels = _encode_batch(batch, vocab, config, torch)
            out = model(input_ids=input_ids, attention_mask=attention, labels=labels)
            total += float(out.loss.detach()) * len(batch)
            count += len(batch)
    return total / count


def bridge_finetune(config: BridgeConfig) -> Path:
    """Train context -> target and save the model, vocab, config and log."""
    import torch

    pairs = read_pairs(config.pairs_path)
    examples = model_input_texts(pairs)

    if Path(config.base).is_dir() and (Path(config.base) / CONFIG_NAME).is_file():
        model, vocab, _ = load_bundle(config.base)
    else:
        vocab = Vocab.build(
            [src for src, _ in examples] + [tgt for _, tgt in examples],
            max_size=config.vocab_size,
        )
        model = init_base_model(config.base, len(vocab), config.seed)
    model = model.to(config.device)

    torch.manual_seed(config.seed)
    log = {
        "pairs": len(pairs),
        "vocab_size": len(vocab),
        "initial_loss": _mean_loss(model, examples, vocab, config, torch),
        "epoch_losses": [],
        "seconds": 0.0,
    }

    started = time.time()
    if config.epochs > 0:
        optimizer = torch.optim.AdamW(model.parameters(), lr=config.learning_rate)
        order_rng = random.Random(config.seed)
        for _ in range(config.epochs):
            model.train()
            shuffled = list(examples)
            order_rng.shuffle(shuffled)
            for batch in _batches(shuffled, config.batch_size):
                input_ids, attention, labels = _encode_batch(batch, vocab, config, torch)
                loss = model(input_ids=input_ids, attention_mask=attention,
                             labels=labels).loss
                optimizer.zero_grad()
                loss.backward()
                optimizer.step()
            log["epoch_losses"].append(_mean_loss(model, examples, vocab, config, torch))
    log["seconds"] = round(time.time() - started, 3)
    log["final_loss"] = log["epoch_losses"][-1] if log["epoch_losses"] else log["initial_loss"]

    model.eval()
    bridge_config = {
        "bridge_version": __version__,
        "task_prefix": TASK_PREFIX,
        **asdict(config),
    }
    out_dir = save_bundle(model, vocab, bridge_config, config.out_dir)
    (out_dir / LOG_NAME).write_text(
        json.dumps(log, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    return out_dir
