"""Dataset tests: pair building, video splits, JSONL round-trips, stats."""

from __future__ import annotations

import io

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from caster_punct.dataset import (
    CommentaryPair,
    Corpus,
    DegenerateSplit,
    SchemaError,
    SplitSpec,
    corpus_stats,
    make_pairs,
    read_jsonl,
    split_by_video,
    splitmix64_shuffle,
    write_jsonl,
)
from caster_punct.punctuation import CommentarySentence, Strategy, punctuate

from conftest import synthetic_transcript


def sentence(video_id: str, seq: int, text: str, complete: bool = True,
             k: int = 1) -> CommentarySentence:
    first = seq * k
    return CommentarySentence(
        video_id=video_id, seq_index=seq, text=text,
        cue_span=(first, first + k - 1), complete=complete,
    )


def corpus_of(pair_specs: list[tuple[str, str, str]], strategy: str = "solo") -> Corpus:
    by_video: dict[str, int] = {}
    pairs = []
    for video_id, context, target in pair_specs:
        index = by_video.get(video_id, 0)
        by_video[video_id] = index + 1
        pairs.append(CommentaryPair(video_id, index, context, target, strategy))
    return Corpus.from_pairs(pairs, strategy)


# ---------------------------------------------------------------------------
# make_pairs
# ---------------------------------------------------------------------------

def test_single_sentence_video_yields_no_pairs():
    assert make_pairs([sentence("v", 0, "alone")]) == []


def test_three_sentences_yield_two_adjacent_pairs():
    pairs = make_pairs([sentence("v", 0, "A"), sentence("v", 1, "B"),
                        sentence("v", 2, "C")])
    assert [(p.context, p.target) for p in pairs] == [("A", "B"), ("B", "C")]
    assert [p.pair_index for p in pairs] == [0, 1]


def test_pairs_never_cross_video_boundaries():
    sentences = [
        sentence("va", 0, "A"), sentence("va", 1, "B"),
        sentence("vb", 0, "C"), sentence("vb", 1, "D"),
    ]
    pairs = make_pairs(sentences)
    # brute force: every adjacent in-video index pair, nothing else
    expected = []
    for vid, texts in (("va", ["A", "B"]), ("vb", ["C", "D"])):
        for i in range(len(texts) - 1):
            expected.append((vid, texts[i], texts[i + 1]))
    assert [(p.video_id, p.context, p.target) for p in pairs] == expected
    assert ("B", "C") not in [(p.context, p.target) for p in pairs]


def test_incomplete_remainder_sentences_are_skipped():
    sentences = [
        sentence("v", 0, "A", k=2), sentence("v", 1, "B", k=2),
        sentence("v", 2, "tail", complete=False, k=2),
    ]
    pairs = make_pairs(sentences)
    assert [(p.context, p.target) for p in pairs] == [("A", "B")]
    assert pairs[0].strategy_name == "duo"


def test_pair_locality_against_source_sentences():
    transcripts = [synthetic_transcript(f"v{i}", 9, seed=i) for i in range(4)]
    sentences = [s for t in transcripts for s in punctuate(t, Strategy(2))]
    pairs = make_pairs(sentences)
    by_video = {}
    for s in sentences:
        by_video.setdefault(s.video_id, []).append(s)
    for pair in pairs:
        texts = [s.text for s in by_video[pair.video_id]]
        i = texts.index(pair.context)
        assert texts[i + 1] == pair.target


# ---------------------------------------------------------------------------
# split_by_video
# ---------------------------------------------------------------------------

def test_hundred_videos_split_90_10():
    corpus = corpus_of([(f"vid{i:03d}", "a b", "c d") for i in range(100)])
    train, test = split_by_video(corpus, SplitSpec(train_fraction=0.9, seed=11))
    assert len(train.manifest) == 90
    assert len(test.manifest) == 10
    assert not set(train.manifest) & set(test.manifest)
    assert set(train.manifest) | set(test.manifest) == set(corpus.manifest)


def test_split_deterministic_under_seed():
    corpus = corpus_of([(f"v{i}", "a", "b") for i in range(2)])
    spec = SplitSpec(train_fraction=0.5, seed=99)
    first = split_by_video(corpus, spec)
    second = split_by_video(corpus, spec)
    assert sorted(first[0].manifest) == sorted(second[0].manifest)
    assert len(first[0].manifest) == len(first[1].manifest) == 1


def test_split_changes_with_seed():
    corpus = corpus_of([(f"v{i:02d}", "a", "b") for i in range(20)])
    assignments = {
        tuple(sorted(split_by_video(corpus, SplitSpec(0.5, seed=s))[0].manifest))
        for s in range(8)
    }
    assert len(assignments) > 1


def test_degenerate_split_rejected():
    corpus = corpus_of([(f"v{i}", "a", "b") for i in range(10)])
    with pytest.raises(DegenerateSplit):
        split_by_video(corpus, SplitSpec(train_fraction=0.99, seed=1))


def test_round_half_up_on_train_count():
    corpus = corpus_of([(f"v{i}", "a", "b") for i in range(3)])
    train, test = split_by_video(corpus, SplitSpec(train_fraction=0.5, seed=5))
    assert (len(train.manifest), len(test.manifest)) == (2, 1)


def test_split_spec_validation():
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=0.0)
    with pytest.raises(ValueError):
        SplitSpec(train_fraction=1.0)


def test_splitmix64_generator_matches_reference_vectors():
    # published splitmix64 outputs for seed 1234567
    from caster_punct.dataset import _splitmix64
    state = 1234567
    for expected in (6457827717110365317, 3203168211198807973, 9817491932198370423):
        state, value = _splitmix64(state)
        assert value == expected


def test_splitmix64_shuffle_known_permutation_is_stable():
    # frozen expectation: documents that the shuffle recurrence never drifts
    assert splitmix64_shuffle(list(range(8)), seed=1) == [4, 3, 2, 7, 5, 6, 0, 1]
    assert splitmix64_shuffle([], seed=1) == []
    assert splitmix64_shuffle(["only"], seed=9) == ["only"]


@given(st.integers(min_value=2, max_value=60), st.integers())
def test_split_partitions_videos(n_videos, seed):
    corpus = corpus_of([(f"v{i:02d}", "a", "b") for i in range(n_videos)])
    try:
        train, test = split_by_video(corpus, SplitSpec(0.75, seed=seed))
    except DegenerateSplit:
        assert n_videos < 2 or round(0.75 * n_videos) in (0, n_videos)
        return
    assert not set(train.manifest) & set(test.manifest)
    assert set(train.manifest) | set(test.manifest) == set(corpus.manifest)
    assert len(train.pairs) + len(test.pairs) == len(corpus.pairs)


# ---------------------------------------------------------------------------
# JSONL round-trip
# ---------------------------------------------------------------------------

def test_empty_corpus_round_trips_as_zero_bytes(tmp_path):
    path = tmp_path / "pairs.jsonl"
    write_jsonl(Corpus.from_pairs([], "duo"), path)
    assert path.read_bytes() == b""
    loaded = read_jsonl(path)
    assert loaded.pairs == []


def test_three_pair_fixture_round_trips_byte_identically(tmp_path):
    corpus = corpus_of([
        ("v1", "the baron is up", "they go for it"),
        ("v1", "they go for it", "smite fight now"),
        ("v2", "clean ace bot side", "nexus is exposed"),
    ], strategy="duo")
    path = tmp_path / "pairs.jsonl"
    write_jsonl(corpus, path)
    raw = path.read_bytes()
    assert raw.count(b"\n") == 3
    assert b"\r" not in raw
    loaded = read_jsonl(path)
    assert loaded == corpus
    again = tmp_path / "again.jsonl"
    write_jsonl(loaded, again)
    assert again.read_bytes() == raw


def test_jsonl_field_order_fixed():
    corpus = corpus_of([("v", "a", "b")], strategy="tri")
    sink = io.StringIO()
    write_jsonl(corpus, sink)
    assert sink.getvalue() == (
        '{"video_id": "v", "pair_index": 0, "strategy": "tri", '
        '"context": "a", "target": "b"}\n'
    )


def test_missing_field_raises_schema_error(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        '{"video_id": "v", "pair_index": 0, "strategy": "solo", "context": "a"}\n',
        encoding="utf-8",
    )
    with pytest.raises(SchemaError) as err:
        read_jsonl(path)
    assert err.value.line_no == 1
    assert "target" in str(err.value)


def test_unknown_field_and_bad_json_rejected(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text(
        '{"video_id": "v", "pair_index": 0, "strategy": "solo", '
        '"context": "a", "target": "b", "extra": 1}\n',
        encoding="utf-8",
    )
    with pytest.raises(SchemaError):
        read_jsonl(path)
    path.write_text("{broken\n", encoding="utf-8")
    with pytest.raises(SchemaError):
        read_jsonl(path)


def test_mixed_strategies_rejected(tmp_path):
    path = tmp_path / "mixed.jsonl"
    path.write_text(
        '{"video_id": "v", "pair_index": 0, "strategy": "solo", "context": "a", "target": "b"}\n'
        '{"video_id": "v", "pair_index": 1, "strategy": "duo", "context": "b", "target": "c"}\n',
        encoding="utf-8",
    )
    with pytest.raises(SchemaError) as err:
        read_jsonl(path)
    assert err.value.line_no == 2


@settings(max_examples=50)
@given(st.lists(
    st.tuples(st.sampled_from(["v1", "v2", "v3"]),
              st.text(alphabet="abc xyz", min_size=1).map(lambda s: " ".join(s.split()) or "a"),
              st.text(alphabet="abc xyz", min_size=1).map(lambda s: " ".join(s.split()) or "b")),
    max_size=12,
))
def test_jsonl_round_trip_property(specs):
    corpus = corpus_of(list(specs))
    sink = io.StringIO()
    write_jsonl(corpus, sink)
    loaded = read_jsonl(io.StringIO(sink.getvalue()))
    assert loaded.pairs == corpus.pairs
    if corpus.pairs:
        assert loaded == corpus


# ---------------------------------------------------------------------------
# corpus_stats
# ---------------------------------------------------------------------------

def test_stats_empty_corpus_all_zeros():
    assert corpus_stats(Corpus.from_pairs([], "")) == {
        "pair_count": 0, "video_count": 0,
        "mean_context_tokens": 0.0, "mean_target_tokens": 0.0,
    }


def test_stats_single_pair_token_means():
    stats = corpus_stats(corpus_of([("v", "a b", "c")]))
    assert stats["pair_count"] == 1
    assert stats["video_count"] == 1
    assert stats["mean_context_tokens"] == 2
    assert stats["mean_target_tokens"] == 1


def test_duo_targets_roughly_double_solo_targets():
    transcripts = [synthetic_transcript(f"v{i}", 24, seed=100 + i) for i in range(6)]
    def stats_for(k):
        sentences = [s for t in transcripts for s in punctuate(t, Strategy(k))]
        pairs = make_pairs(sentences)
        return corpus_stats(Corpus.from_pairs(pairs, Strategy(k).name))
    solo, duo = stats_for(1), stats_for(2)
    ratio = duo["mean_target_tokens"] / solo["mean_target_tokens"]
    assert 1.6 <= ratio <= 2.4
