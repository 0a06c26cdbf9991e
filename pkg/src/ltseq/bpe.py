"""Byte-pair encoding with the trailing "@@" continuation marker.

Merges are learned word-internally: a word is a character sequence, the
most frequent adjacent symbol pair is merged greedily, and frequency
ties break to the lexicographically smallest pair so the rule list is a
pure function of the corpus. On application, every subword of a word
except the last carries the "@@" suffix; stripping markers and joining
restores the original word exactly.
"""

from __future__ import annotations

import warnings
from collections import Counter
from pathlib import Path

from .errors import DataError

MARKER = "@@"


class DanglingMarkerWarning(UserWarning):
    """A token stream ended with a continuation marker."""


class BPEModel:
    """Ordered merge rules; application order equals learned order."""

    def __init__(self, merges: list[tuple[str, str]]):
        if len(set(merges)) != len(merges):
            raise DataError("duplicate merge rules")
        self.merges = list(merges)
        self._ranks = {pair: i for i, pair in enumerate(self.merges)}
        self._cache: dict[str, list[str]] = {}

    def __len__(self) -> int:
        return len(self.merges)

    def segment_word(self, word: str) -> list[str]:
        """Split one word into subword symbols (no markers)."""
        cached = self._cache.get(word)
        if cached is not None:
            return list(cached)
        symbols = list(word)
        while len(symbols) > 1:
            best_rank, best_idx = None, -1
            for i in range(len(symbols) - 1):
                rank = self._ranks.get((symbols[i], symbols[i + 1]))
                if rank is not None and (best_rank is None or rank < best_rank):
                    best_rank, best_idx = rank, i
            if best_rank is None:
                break
            merged = symbols[best_idx] + symbols[best_idx + 1]
            pair = (symbols[best_idx], symbols[best_idx + 1])
            out = []
            i = 0
            while i < len(symbols):
                if (i < len(symbols) - 1
                        and (symbols[i], symbols[i + 1]) == pair):
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            symbols = out
        self._cache[word] = list(symbols)
        return symbols

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for left, right in self.merges:
                fh.write(f"{left} {right}\n")

    @classmethod
    def load(cls, path) -> "BPEModel":
        merges = []
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split(" ")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'left right'")
            merges.append((parts[0], parts[1]))
        return cls(merges)


def learn_bpe(corpus: list[list[str]], num_merges: int) -> BPEModel:
    """Greedy most-frequent-pair merges, word-internal only."""
    if not corpus or not any(corpus):
        raise DataError("cannot learn BPE from an empty corpus")
    if num_merges < 0:
        raise DataError(f"num_merges must be >= 0, got {num_merges}")
    word_counts = Counter()
    for sent in corpus:
        word_counts.update(sent)
    words = {w: list(w) for w in word_counts}

    merges: list[tuple[str, str]] = []
    for _ in range(num_merges):
        pair_counts = Counter()
        for w, symbols in words.items():
            n = word_counts[w]
            for i in range(len(symbols) - 1):
                pair_counts[(symbols[i], symbols[i + 1])] += n
        if not pair_counts:
            break
        best = min(pair_counts.items(), key=lambda kv: (-kv[1], kv[0]))[0]
        merges.append(best)
        merged = best[0] + best[1]
        for w, symbols in words.items():
            if len(symbols) < 2:
                continue
            out = []
            i = 0
            while i < len(symbols):
                if i < len(symbols) - 1 and (symbols[i], symbols[i + 1]) == best:
                    out.append(merged)
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            words[w] = out
    return BPEModel(merges)


def apply_bpe(model: BPEModel, words: list[str]) -> list[str]:
    """Word list -> subword tokens, "@@" on all but each word's last piece."""
    out = []
    for word in words:
        pieces = model.segment_word(word)
        out.extend(p + MARKER for p in pieces[:-1])
        out.append(pieces[-1])
    return out


def remove_bpe(tokens: list[str]) -> list[str]:
    """Join marker-bearing tokens with their successors and strip markers."""
    words: list[str] = []
    current = ""
    for tok in tokens:
        if tok.endswith(MARKER):
            current += tok[: -len(MARKER)]
        else:
            words.append(current + tok)
            current = ""
    if current:
        warnings.warn("token stream ends with a dangling continuation marker",
                      DanglingMarkerWarning, stacklevel=2)
        words.append(current)
    return words


def word_segment_counts(model: BPEModel, words: list[str]) -> list[int]:
    """Per-word subword counts, as needed for BPE-aware tree alignment."""
    return [len(model.segment_word(w)) for w in words]
