"""Shared fixtures: templated duo-pair corpora and a pre-built model bundle."""

from __future__ import annotations

import json
import random
import sys
from pathlib import Path

import pytest

TEAMS = ["blue", "red"]
OBJECTIVES = ["baron", "dragon", "tower", "inhibitor"]


def templated_pairs(n: int, seed: int, video_count: int = 5) -> list[dict]:
    """Duo-style pairs in a tiny regular language a small model can learn."""
    rng = random.Random(seed)
    pairs = []
    for i in range(n):
        team, objective = rng.choice(TEAMS), rng.choice(OBJECTIVES)
        pairs.append(
            {
                "video_id": f"v{i % video_count}",
                "pair_index": i // video_count,
                "strategy": "duo",
                "context": f"the {team} team moves to the {objective} now they commit",
                "target": f"they take the {objective} and the {team} team wins the fight",
            }
        )
    return pairs


def write_pairs(path: Path, pairs: list[dict]) -> Path:
    path.write_text("\n".join(json.dumps(p) for p in pairs) + "\n", encoding="utf-8")
    return path


def bridge_cmd(*args: str) -> list[str]:
    return [sys.executable, "-m", "caster_bridge", *args]


def primary_cmd(*args: str) -> list[str]:
    return [sys.executable, "-m", "caster_punct.cli", *args]


@pytest.fixture(scope="session")
def base_bundle(tmp_path_factory) -> Path:
    """An untuned (epochs=0) small-variant bundle shared across tests."""
    from caster_bridge.finetune import BridgeConfig, bridge_finetune

    root = tmp_path_factory.mktemp("base-bundle")
    pairs_path = write_pairs(root / "pairs.jsonl", templated_pairs(20, seed=3))
    return bridge_finetune(
        BridgeConfig(pairs_path=str(pairs_path), out_dir=str(root / "model"),
                     epochs=0, seed=11)
    )
