"""Model construction, saving and loading.

Two reduced-scale encoder-decoder variants stand in for the small and base
checkpoints when no local pre-trained directory is given: their weights are
initialized from a fixed seed, so "the untuned model" is a reproducible
artifact rather than a network download. Passing a directory path as the
base identifier loads that checkpoint instead.

Heavy imports happen inside functions so protocol-only code paths (echo
mode) stay fast.
"""

from __future__ import annotations

import json
from pathlib import Path

from .vocab import EOS_ID, PAD_ID, Vocab

VARIANTS = {
    "small": dict(d_model=64, d_kv=16, d_ff=128, num_layers=2, num_heads=4),
    "base": dict(d_model=96, d_kv=16, d_ff=192, num_layers=3, num_heads=6),
}

CONFIG_NAME = "bridge_config.json"
VOCAB_NAME = "vocab.json"


def _quiet_transformers():
    import transformers

    transformers.utils.logging.set_verbosity_error()
    transformers.utils.logging.disable_progress_bar()


def init_base_model(variant: str, vocab_size: int, seed: int):
    """Deterministically initialized reduced-scale text-to-text model."""
    import torch
    from transformers import T5Config, T5ForConditionalGeneration

    _quiet_transformers()
    if variant not in VARIANTS:
        raise ValueError(f"unknown model variant {variant!r}; use one of {sorted(VARIANTS)}")
    torch.manual_seed(seed)
    config = T5Config(
        vocab_size=vocab_size,
        decoder_start_token_id=PAD_ID,
        pad_token_id=PAD_ID,
        eos_token_id=EOS_ID,
        **VARIANTS[variant],
    )
    return T5ForConditionalGeneration(config).eval()


def save_bundle(model, vocab: Vocab, bridge_config: dict, out_dir: str | Path) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _quiet_transformers()
    model.save_pretrained(out_dir)
    vocab.save(out_dir / VOCAB_NAME)
    (out_dir / CONFIG_NAME).write_text(
        json.dumps(bridge_config, ensure_ascii=False, indent=2) + "\n", encoding="utf-8"
    )
    return out_dir


def load_bundle(model_dir: str | Path):
    from transformers import T5ForConditionalGeneration

    _quiet_transformers()
    model_dir = Path(model_dir)
    if not (model_dir / CONFIG_NAME).is_file():
        raise FileNotFoundError(f"{model_dir} is not a bridge model directory")
    model = T5ForConditionalGeneration.from_pretrained(model_dir).eval()
    vocab = Vocab.load(model_dir / VOCAB_NAME)
    bridge_config = json.loads((model_dir / CONFIG_NAME).read_text(encoding="utf-8"))
    return model, vocab, bridge_config
