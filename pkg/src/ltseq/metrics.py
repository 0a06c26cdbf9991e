"""BLEU (corpus and smoothed sentence level), perplexity, and
sentence-length-bucket reporting.

Single-reference BLEU over word-level token lists: geometric mean of
clipped modified n-gram precisions (n = 1..4) times the brevity penalty
exp(min(0, 1 - |ref|/|hyp|)). The smoothed sentence variant adds 1 to
numerator and denominator of the n >= 2 precisions; this is the pinned
in-repo convention for the length-bucket figures. Scores are on the
0..100 scale. The evaluator refuses "@@"-marked input: BLEU is defined
on words, so run remove_bpe first.
"""

from __future__ import annotations

import math
import warnings
from collections import Counter
from dataclasses import dataclass, field

from .bpe import MARKER
from .errors import AlignmentError, ConfigError, DataError

MAX_ORDER = 4


def _ngrams(tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def _check_words(tokens) -> None:
    if any(t.endswith(MARKER) for t in tokens):
        raise DataError(
            "BLEU input still carries '@@' subword markers; apply remove_bpe first")


@dataclass
class BleuStats:
    """Clipped match/total counts per order plus lengths; merges add."""

    matches: list = field(default_factory=lambda: [0] * MAX_ORDER)
    totals: list = field(default_factory=lambda: [0] * MAX_ORDER)
    hyp_len: int = 0
    ref_len: int = 0

    def add_pair(self, hyp, ref) -> None:
        _check_words(hyp)
        _check_words(ref)
        self.hyp_len += len(hyp)
        self.ref_len += len(ref)
        for n in range(1, MAX_ORDER + 1):
            hyp_ngrams = _ngrams(hyp, n)
            ref_ngrams = _ngrams(ref, n)
            self.totals[n - 1] += sum(hyp_ngrams.values())
            self.matches[n - 1] += sum(
                min(c, ref_ngrams[g]) for g, c in hyp_ngrams.items())

    def merge(self, other: "BleuStats") -> "BleuStats":
        out = BleuStats(
            [a + b for a, b in zip(self.matches, other.matches)],
            [a + b for a, b in zip(self.totals, other.totals)],
            self.hyp_len + other.hyp_len,
            self.ref_len + other.ref_len,
        )
        return out

    def brevity_penalty(self) -> float:
        if self.hyp_len == 0:
            return 0.0
        return math.exp(min(0.0, 1.0 - self.ref_len / self.hyp_len))

    def score(self, smooth: bool = False) -> float:
        """0..100; unsmoothed score is 0 when any match count is 0."""
        log_sum = 0.0
        for n in range(1, MAX_ORDER + 1):
            m, t = self.matches[n - 1], self.totals[n - 1]
            if smooth and n >= 2:
                m, t = m + 1, t + 1
            if m == 0 or t == 0:
                return 0.0
            log_sum += math.log(m / t)
        return 100.0 * self.brevity_penalty() * math.exp(log_sum / MAX_ORDER)


def corpus_bleu(hyps, refs) -> float:
    """Unsmoothed corpus BLEU over aligned lists of token lists."""
    if len(hyps) != len(refs):
        raise AlignmentError(f"corpus size mismatch: {len(hyps)} vs {len(refs)}")
    if not hyps:
        raise DataError("empty corpus")
    stats = BleuStats()
    for hyp, ref in zip(hyps, refs):
        stats.add_pair(hyp, ref)
    return stats.score(smooth=False)


def sentence_bleu_smoothed(hyp, ref) -> float:
    """Add-1-smoothed (n >= 2) BLEU for a single pair."""
    if not ref:
        raise DataError("empty reference sentence")
    if not hyp:
        warnings.warn("empty hypothesis scored as 0", stacklevel=2)
        return 0.0
    stats = BleuStats()
    stats.add_pair(hyp, ref)
    return stats.score(smooth=True)


def length_bucket_report(pairs, edges) -> list[dict]:
    """Mean smoothed sentence BLEU per reference-length bucket.

    `edges` are strictly increasing interior boundaries; buckets are
    [0, e1), [e1, e2), ..., [ek, inf). Empty buckets report count 0 and
    mean None.
    """
    edges = list(edges)
    if any(b <= a for a, b in zip(edges, edges[1:])):
        raise ConfigError(f"bucket edges must be strictly increasing: {edges}")
    bounds = [0] + edges + [None]
    buckets = [{"lo": lo, "hi": hi, "scores": []}
               for lo, hi in zip(bounds[:-1], bounds[1:])]
    for hyp, ref in pairs:
        n = len(ref)
        for b in buckets:
            if n >= b["lo"] and (b["hi"] is None or n < b["hi"]):
                b["scores"].append(sentence_bleu_smoothed(hyp, ref))
                break
    return [{"lo": b["lo"], "hi": b["hi"], "count": len(b["scores"]),
             "mean": (sum(b["scores"]) / len(b["scores"])) if b["scores"] else None}
            for b in buckets]


def perplexity(total_nll: float, token_count: int) -> float:
    """exp(mean per-token negative log likelihood in nats)."""
    if token_count <= 0:
        raise DataError(f"token count must be positive, got {token_count}")
    return math.exp(total_nll / token_count)
