"""Token/id vocabulary with fixed reserved symbols."""

from __future__ import annotations

from collections import Counter
from pathlib import Path

from .errors import ConfigError, DataError

PAD, UNK, BOS, EOS = 0, 1, 2, 3
RESERVED = ("<pad>", "<unk>", "<s>", "</s>")


class Vocab:
    """Bijective token<->id map; ids 0..3 are PAD/UNK/BOS/EOS."""

    def __init__(self, tokens: list[str], counts: dict[str, int] | None = None):
        self.id_to_token = list(RESERVED) + [t for t in tokens if t not in RESERVED]
        self.token_to_id = {t: i for i, t in enumerate(self.id_to_token)}
        if len(self.token_to_id) != len(self.id_to_token):
            raise DataError("duplicate tokens in vocabulary")
        self.counts = dict(counts or {})

    def __len__(self) -> int:
        return len(self.id_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def encode(self, tokens: list[str]) -> list[int]:
        get = self.token_to_id.get
        return [get(t, UNK) for t in tokens]

    def decode(self, ids: list[int]) -> list[str]:
        return [self.id_to_token[int(i)] for i in ids]

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for tok in self.id_to_token[len(RESERVED):]:
                fh.write(f"{tok}\t{self.counts.get(tok, 0)}\n")

    @classmethod
    def load(cls, path) -> "Vocab":
        tokens, counts = [], {}
        for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected 'token<TAB>count'")
            tokens.append(parts[0])
            try:
                counts[parts[0]] = int(parts[1])
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: bad count {parts[1]!r}") from exc
        return cls(tokens, counts)


def build_vocab(corpus: list[list[str]], max_size: int) -> Vocab:
    """Keep the most frequent tokens (count desc, then lexicographic).

    `max_size` bounds the total vocabulary including the 4 reserved ids.
    """
    if max_size < len(RESERVED):
        raise ConfigError(
            f"max_size must be at least {len(RESERVED)}, got {max_size}")
    if not corpus:
        raise DataError("cannot build a vocabulary from an empty corpus")
    counts = Counter()
    for sent in corpus:
        counts.update(sent)
    for r in RESERVED:
        counts.pop(r, None)
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = ranked[: max_size - len(RESERVED)]
    return Vocab([t for t, _ in kept], dict(kept))
