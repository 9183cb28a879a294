"""Shared fixtures: synthetic transcripts, metric fixture pairs, adapter commands."""

from __future__ import annotations

import random
import sys
from pathlib import Path

import pytest

from caster_punct.captions import CaptionCue, Transcript

TESTS_DIR = Path(__file__).resolve().parent
REPO_ROOT = TESTS_DIR.parent
BRIDGE_SRC = REPO_ROOT / "bridge" / "src"

WORDS = [
    "the", "baron", "dragon", "mid", "lane", "they", "fight", "gank", "flash",
    "tower", "minions", "push", "team", "gold", "kill", "carry", "support",
    "jungle", "ward", "ultimate", "into", "over", "takes", "wins", "now",
]

# (candidate, reference) pairs for the metric oracle suite. Every side stays
# within 8 tokens so the exhaustive-subsequence LCS oracle applies, and the
# matched-unigram counts stay small enough for the exhaustive aligner.
METRIC_FIXTURE_PAIRS = [
    ("the baron is down", "the baron is down"),
    ("they take the dragon now", "they take the baron now"),
    ("flash out from the mid lane", "he flashes out of mid"),
    ("what a play from faker", "faker with an insane play"),
    ("gg that is the nexus", "the nexus falls gg"),
    ("blue side wins the fight", "red side loses the fight"),
    ("he is so low", "so low he is"),
    ("", "no candidate here"),
    ("no reference overlap at all", "completely different words spoken"),
    ("the the the", "the cat"),
    ("a b a b", "b a b a"),
    ("one two three four five", "one two three four five six"),
    ("six five four three two", "two three four five six"),
    ("kill onto the carry", "kill onto the carry!"),
    ("it's a clean ace", "its a clean ace"),
    ("tower dives again and again", "he dives the tower again"),
    ("mid is pushing hard", "mid pushing very hard"),
    ("baron buff secured", "baron buff secured easily"),
    ("that ultimate was huge", "huge ultimate right there"),
    ("they group for mid", "they group for baron"),
    ("vision control wins games", "wards win games"),
    ("he teleports behind them", "teleport behind the backline"),
    ("the minions take the tower", "minions took that tower"),
    ("does he have flash", "flash is down"),
    ("three men bot side", "three men bot side now"),
    ("objective bounty up", "objective bounty is up"),
]


def synthetic_transcript(video_id: str, n_cues: int, seed: int) -> Transcript:
    rng = random.Random(seed)
    cues = []
    clock = 0
    for i in range(n_cues):
        duration = rng.randint(800, 3000)
        cues.append(
            CaptionCue(
                index=i,
                start_ms=clock,
                end_ms=clock + duration,
                text=" ".join(rng.choices(WORDS, k=rng.randint(2, 7))),
            )
        )
        clock += duration
    return Transcript(video_id=video_id, cues=cues)


def transcript_to_vtt(transcript: Transcript) -> str:
    def stamp(ms: int) -> str:
        h, rem = divmod(ms, 3_600_000)
        m, rem = divmod(rem, 60_000)
        s, milli = divmod(rem, 1000)
        return f"{h:02d}:{m:02d}:{s:02d}.{milli:03d}"

    blocks = ["WEBVTT", ""]
    for cue in transcript.cues:
        blocks.append(f"{stamp(cue.start_ms)} --> {stamp(cue.end_ms)}")
        blocks.append(cue.text)
        blocks.append("")
    return "\n".join(blocks)


def random_sentence(rng: random.Random, min_words: int = 1, max_words: int = 12) -> str:
    return " ".join(rng.choices(WORDS, k=rng.randint(min_words, max_words)))


def mock_adapter_cmd() -> list[str]:
    return [sys.executable, str(TESTS_DIR / "mock_adapter.py")]


def fault_proxy_cmd(mode: str, base_cmd: list[str]) -> list[str]:
    return [sys.executable, str(TESTS_DIR / "fault_proxy.py"), mode, "--", *base_cmd]


def bridge_echo_cmd() -> list[str] | None:
    """Command for the external model bridge in echo mode, if it is present."""
    if not BRIDGE_SRC.is_dir():
        return None
    bootstrap = (
        f"import sys; sys.path.insert(0, {str(BRIDGE_SRC)!r}); "
        "from caster_bridge.cli import main; sys.exit(main(['serve', '--echo']))"
    )
    return [sys.executable, "-c", bootstrap]


@pytest.fixture
def metric_pairs():
    return list(METRIC_FIXTURE_PAIRS)
