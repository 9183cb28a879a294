"""Self-contained evaluation suite: tokenizer, BLEU, ROUGE-1/2/L, METEOR.

All metrics are implemented here from first principles, over one shared
tokenizer, and aggregated into a deterministic report.

Tokenizer: lowercase; maximal runs of letters, digits and apostrophes are
tokens; every other non-whitespace character is its own single-character
token; the "<start>"/"<end>" framing markers are removed before tokenizing.

BLEU is corpus-level: clipped n-gram matches and totals are pooled over all
pairs for n = 1..max_n, with add-one smoothing applied to the match and total
counts of any order whose pooled match count is zero, a brevity penalty
min(1, exp(1 - r/c)), and the geometric mean of the order precisions.

ROUGE-N uses clipped (multiset-intersection) n-gram overlap; ROUGE-L uses the
longest common subsequence. Both report precision, recall, and balanced F.

METEOR runs the exact-match stage only: m matched unigrams (multiset
intersection), an alignment chosen to minimize the number of chunks among
maximum-cardinality matchings (exact search for m <= 10, deterministic greedy
left-to-right beyond), Fmean = 10PR / (R + 9P), and fragmentation penalty
0.5 * (chunks / m)^3.
"""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass

__all__ = [
    "TokenSeq",
    "PRF",
    "PairScores",
    "MetricReport",
    "LengthMismatch",
    "EmptyEvaluation",
    "METEOR_EXHAUSTIVE_LIMIT",
    "tokenize",
    "ngram_counts",
    "bleu_corpus",
    "rouge_n",
    "rouge_l",
    "lcs_length",
    "meteor",
    "meteor_alignment",
    "evaluate",
    "report_to_json",
]

MARKERS = ("<start>", "<end>")
METEOR_EXHAUSTIVE_LIMIT = 10

# A token is a maximal run of letters/digits/apostrophes, else any single
# non-whitespace character. Underscore is deliberately excluded from runs.
_TOKEN_RE = re.compile(r"(?:[^\W_]|')+|\S")


class LengthMismatch(ValueError):
    """Candidate and reference lists differ in length."""


class EmptyEvaluation(ValueError):
    """evaluate() was called with zero pairs."""


@dataclass(frozen=True)
class TokenSeq:
    """Ordered lowercase tokens."""

    tokens: tuple[str, ...]

    def __post_init__(self):
        for token in self.tokens:
            if not token or any(ch.isspace() for ch in token):
                raise ValueError(f"invalid token {token!r}")

    def __len__(self) -> int:
        return len(self.tokens)


@dataclass(frozen=True)
class PRF:
    """Precision / recall / balanced F triple."""

    precision: float
    recall: float
    f1: float

    @classmethod
    def from_pr(cls, precision: float, recall: float) -> "PRF":
        if precision + recall > 0:
            f1 = 2 * precision * recall / (precision + recall)
        else:
            f1 = 0.0
        return cls(precision, recall, f1)


ZERO_PRF = PRF(0.0, 0.0, 0.0)


def tokenize(text: str) -> TokenSeq:
    """Lowercase and split text into tokens; framing markers are dropped."""
    lowered = text.lower()
    for marker in MARKERS:
        lowered = lowered.replace(marker, " ")
    return TokenSeq(tuple(_TOKEN_RE.findall(lowered)))


def ngram_counts(tokens: TokenSeq, n: int) -> Counter:
    """Multiset of contiguous n-grams (as tuples) with multiplicity."""
    if n < 1:
        raise ValueError("n must be >= 1")
    seq = tokens.tokens
    return Counter(seq[i:i + n] for i in range(len(seq) - n + 1))


def _overlap(a: Counter, b: Counter) -> int:
    """Size of the multiset intersection (clipped counts)."""
    return sum(min(count, b[gram]) for gram, count in a.items())


def _closest_ref_len(candidate_len: int, references: list[TokenSeq]) -> int:
    # Ties in distance go to the shorter reference.
    return min(
        (len(ref) for ref in references),
        key=lambda ref_len: (abs(ref_len - candidate_len), ref_len),
    )


def bleu_corpus(
    candidates: list[TokenSeq],
    references: list[list[TokenSeq]],
    max_n: int = 4,
) -> float:
    """Corpus BLEU in [0, 1] from pooled clipped n-gram counts.

    ``references[i]`` lists the acceptable references for ``candidates[i]``.
    Any order whose pooled match count is zero gets add-one smoothing on both
    match and total counts, so scores for non-degenerate corpora stay
    strictly positive. An all-empty candidate corpus scores 0.
    """
    if len(candidates) != len(references):
        raise LengthMismatch(
            f"{len(candidates)} candidates vs {len(references)} reference lists"
        )
    if not candidates:
        raise ValueError("bleu_corpus needs at least one pair")
    if any(not refs for refs in references):
        raise ValueError("every candidate needs at least one reference")

    matches = [0] * max_n
    totals = [0] * max_n
    candidate_len = 0
    effective_ref_len = 0
    for candidate, refs in zip(candidates, references):
        candidate_len += len(candidate)
        effective_ref_len += _closest_ref_len(len(candidate), refs)
        for order in range(1, max_n + 1):
            cand_grams = ngram_counts(candidate, order)
            if not cand_grams:
                continue
            clip = Counter()
            for ref in refs:
                ref_grams = ngram_counts(ref, order)
                for gram in cand_grams:
                    clip[gram] = max(clip[gram], ref_grams[gram])
            matches[order - 1] += sum(
                min(count, clip[gram]) for gram, count in cand_grams.items()
            )
            totals[order - 1] += sum(cand_grams.values())

    if candidate_len == 0:
        return 0.0

    log_sum = 0.0
    for order in range(max_n):
        match, total = matches[order], totals[order]
        if match == 0:
            match += 1
            total += 1
        log_sum += math.log(match / total)
    brevity = min(1.0, math.exp(1.0 - effective_ref_len / candidate_len))
    return brevity * math.exp(log_sum / max_n)


def rouge_n(candidate: TokenSeq, reference: TokenSeq, n: int) -> PRF:
    """Clipped n-gram overlap precision/recall/F."""
    cand_grams = ngram_counts(candidate, n)
    ref_grams = ngram_counts(reference, n)
    overlap = _overlap(cand_grams, ref_grams)
    cand_total = sum(cand_grams.values())
    ref_total = sum(ref_grams.values())
    precision = overlap / cand_total if cand_total else 0.0
    recall = overlap / ref_total if ref_total else 0.0
    return PRF.from_pr(precision, recall)


def lcs_length(a: TokenSeq, b: TokenSeq) -> int:
    """Longest common subsequence length via the classic DP, two rows."""
    xs, ys = a.tokens, b.tokens
    if not xs or not ys:
        return 0
    previous = [0] * (len(ys) + 1)
    for x in xs:
        current = [0] * (len(ys) + 1)
        for j, y in enumerate(ys, start=1):
            if x == y:
                current[j] = previous[j - 1] + 1
            else:
                current[j] = max(previous[j], current[j - 1])
        previous = current
    return previous[-1]


def rouge_l(candidate: TokenSeq, reference: TokenSeq) -> PRF:
    """LCS-based precision/recall/F."""
    if not candidate.tokens or not reference.tokens:
        return ZERO_PRF
    lcs = lcs_length(candidate, reference)
    return PRF.from_pr(lcs / len(candidate), lcs / len(reference))


def _positions_by_token(tokens: tuple[str, ...]) -> dict[str, list[int]]:
    positions: dict[str, list[int]] = {}
    for i, token in enumerate(tokens):
        positions.setdefault(token, []).append(i)
    return positions


def _min_chunks_exact(cand: tuple[str, ...], ref: tuple[str, ...],
                      quota: dict[str, int], m: int) -> int:
    """Minimum chunk count over all maximum-cardinality exact matchings.

    Depth-first over candidate positions with branch-and-bound: the chunk
    count of a partial alignment never decreases, so any branch at or above
    the best complete alignment is cut. Reference choices that extend the
    current chunk are tried first.
    """
    ref_positions = _positions_by_token(ref)
    used = [False] * len(ref)
    remaining_quota = dict(quota)

    # suffix_count[i][t] = occurrences of t in cand[i:], for skip feasibility
    suffix_counts: list[dict[str, int]] = [dict() for _ in range(len(cand) + 1)]
    for i in range(len(cand) - 1, -1, -1):
        acc = dict(suffix_counts[i + 1])
        acc[cand[i]] = acc.get(cand[i], 0) + 1
        suffix_counts[i] = acc

    best = m  # m singleton chunks is always achievable

    def descend(i: int, remaining: int, prev_i: int, prev_j: int, chunks: int):
        nonlocal best
        if chunks >= best:
            return
        if remaining == 0:
            best = chunks
            return
        if i >= len(cand):
            return
        token = cand[i]
        q = remaining_quota.get(token, 0)
        if q > 0:
            choices = [j for j in ref_positions[token] if not used[j]]
            # extending the open chunk first makes the bound bite sooner
            choices.sort(key=lambda j: (not (i == prev_i + 1 and j == prev_j + 1), j))
            for j in choices:
                next_chunks = chunks + (0 if (i == prev_i + 1 and j == prev_j + 1) else 1)
                if next_chunks >= best:
                    continue
                used[j] = True
                remaining_quota[token] = q - 1
                descend(i + 1, remaining - 1, i, j, next_chunks)
                remaining_quota[token] = q
                used[j] = False
        if q == 0 or suffix_counts[i + 1].get(token, 0) >= q:
            descend(i + 1, remaining, prev_i, prev_j, chunks)

    descend(0, m, -2, -2, 0)
    return best


def _chunks_greedy(cand: tuple[str, ...], ref: tuple[str, ...],
                   quota: dict[str, int]) -> int:
    """Deterministic left-to-right alignment: earliest candidate positions
    fill each token's quota; each takes the reference slot continuing the
    current chunk when possible, else the smallest free slot."""
    ref_positions = _positions_by_token(ref)
    used: set[int] = set()
    remaining = dict(quota)
    chunks = 0
    prev_i = prev_j = -2
    for i, token in enumerate(cand):
        if remaining.get(token, 0) == 0:
            continue
        slot = None
        if i == prev_i + 1 and prev_j + 1 < len(ref) \
                and ref[prev_j + 1] == token and prev_j + 1 not in used:
            slot = prev_j + 1
        else:
            for j in ref_positions[token]:
                if j not in used:
                    slot = j
                    break
        used.add(slot)
        remaining[token] -= 1
        if not (i == prev_i + 1 and slot == prev_j + 1):
            chunks += 1
        prev_i, prev_j = i, slot
    return chunks


def meteor_alignment(candidate: TokenSeq, reference: TokenSeq) -> tuple[int, int]:
    """Matched unigram count m and the chunk count of the chosen alignment."""
    cand, ref = candidate.tokens, reference.tokens
    cand_counts = Counter(cand)
    ref_counts = Counter(ref)
    quota = {
        token: min(count, ref_counts[token])
        for token, count in cand_counts.items()
        if ref_counts[token]
    }
    m = sum(quota.values())
    if m == 0:
        return 0, 0
    if m <= METEOR_EXHAUSTIVE_LIMIT:
        return m, _min_chunks_exact(cand, ref, quota, m)
    return m, _chunks_greedy(cand, ref, quota)


def meteor(candidate: TokenSeq, reference: TokenSeq) -> float:
    """Exact-match METEOR score in [0, 1]."""
    if not candidate.tokens or not reference.tokens:
        return 0.0
    m, chunks = meteor_alignment(candidate, reference)
    if m == 0:
        return 0.0
    precision = m / len(candidate)
    recall = m / len(reference)
    fmean = 10 * precision * recall / (recall + 9 * precision)
    penalty = 0.5 * (chunks / m) ** 3
    return fmean * (1.0 - penalty)


@dataclass(frozen=True)
class PairScores:
    """All per-pair metric values, unscaled ([0, 1])."""

    pair_index: int
    bleu_sentence: float
    rouge1: PRF
    rouge2: PRF
    rougeL: PRF
    meteor: float


@dataclass
class MetricReport:
    """Per-pair scores plus corpus aggregates scaled to [0, 100]."""

    config: dict
    corpus: dict
    per_pair: list[PairScores]


def _default_config() -> dict:
    return {
        "report_version": 1,
        "tokenizer": "lowercase; letter/digit/apostrophe runs; "
                     "other non-space chars as single tokens; markers stripped",
        "markers": list(MARKERS),
        "bleu": {"level": "corpus", "max_n": 4,
                 "smoothing": "add-one on zero-match orders"},
        "rouge": {"reported": "f1", "beta": 1},
        "meteor": {"stage": "exact", "recall_weight": 9, "penalty_weight": 0.5,
                   "penalty_power": 3, "exhaustive_limit": METEOR_EXHAUSTIVE_LIMIT},
        "scale": 100,
    }


def evaluate(pairs: list[tuple[str, str]], max_n: int = 4) -> MetricReport:
    """Score (candidate, reference) text pairs with the full metric suite.

    Corpus BLEU pools counts over all pairs; corpus ROUGE and METEOR are
    arithmetic means of the per-pair values. Corpus values are scaled by 100.
    """
    if not pairs:
        raise EmptyEvaluation("no (candidate, reference) pairs to evaluate")
    candidates = [tokenize(candidate) for candidate, _ in pairs]
    references = [tokenize(reference) for _, reference in pairs]

    per_pair = []
    for i, (candidate, reference) in enumerate(zip(candidates, references)):
        per_pair.append(
            PairScores(
                pair_index=i,
                bleu_sentence=bleu_corpus([candidate], [[reference]], max_n=max_n),
                rouge1=rouge_n(candidate, reference, 1),
                rouge2=rouge_n(candidate, reference, 2),
                rougeL=rouge_l(candidate, reference),
                meteor=meteor(candidate, reference),
            )
        )

    n = len(per_pair)
    corpus = {
        "bleu": 100.0 * bleu_corpus(candidates, [[ref] for ref in references], max_n=max_n),
        "rouge1": 100.0 * sum(s.rouge1.f1 for s in per_pair) / n,
        "rouge2": 100.0 * sum(s.rouge2.f1 for s in per_pair) / n,
        "rougeL": 100.0 * sum(s.rougeL.f1 for s in per_pair) / n,
        "meteor": 100.0 * sum(s.meteor for s in per_pair) / n,
    }
    config = _default_config()
    config["bleu"]["max_n"] = max_n
    return MetricReport(config=config, corpus=corpus, per_pair=per_pair)


def _prf_dict(prf: PRF) -> dict:
    return {"precision": prf.precision, "recall": prf.recall, "f1": prf.f1}


def report_to_json(report: MetricReport) -> str:
    """Serialize a report with fixed key order (stable across runs)."""
    doc = {
        "config": report.config,
        "corpus": {key: report.corpus[key]
                   for key in ("bleu", "rouge1", "rouge2", "rougeL", "meteor")},
        "per_pair": [
            {
                "pair_index": s.pair_index,
                "bleu_sentence": s.bleu_sentence,
                "rouge1": _prf_dict(s.rouge1),
                "rouge2": _prf_dict(s.rouge2),
                "rougeL": _prf_dict(s.rougeL),
                "meteor": s.meteor,
            }
            for s in report.per_pair
        ],
    }
    return json.dumps(doc, ensure_ascii=False, indent=2) + "\n"
