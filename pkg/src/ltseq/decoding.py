"""Greedy and beam-search decoding.

Hypotheses are ranked during search by cumulative log probability and
finally by logprob / length**penalty (length counts generated tokens
including EOS). Ties break deterministically: higher score, then lower
token id, then lower parent beam index. PAD and BOS are never proposed,
and generation caps at 2 * source_length + 10 tokens; hypotheses still
active at the cap are force-finished without EOS.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import no_grad
from .errors import ConfigError
from .vocab import BOS, EOS, PAD


@dataclass
class Hypothesis:
    tokens: tuple[int, ...]  # generated tokens, EOS excluded
    logprob: float
    length: int              # generated count including EOS if emitted
    ended_with_eos: bool

    def score(self, len_penalty: float) -> float:
        if self.length == 0:
            return float("-inf")
        return self.logprob / (self.length ** len_penalty)


@dataclass
class DecodeResult:
    tokens: list[int]
    score: float
    finished: list[Hypothesis]


def _log_probs(logits) -> np.ndarray:
    x = logits.data
    shifted = x - x.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def default_max_len(src_len: int) -> int:
    return 2 * src_len + 10


def greedy_decode(model, src_ids=None, max_len: int | None = None,
                  len_penalty: float = 1.0) -> DecodeResult:
    """Argmax decoding; ties go to the lowest token id."""
    if max_len is None:
        if src_ids is None:
            raise ConfigError("greedy_decode needs max_len in lm mode")
        max_len = default_max_len(len(src_ids))
    with no_grad():
        session = model.start_session(
            None if src_ids is None else np.asarray(src_ids)[None, :])
        prev = np.array([BOS])
        tokens: list[int] = []
        logprob = 0.0
        ended = False
        for _ in range(max_len):
            logp = _log_probs(session.step(prev))[0]
            logp[PAD] = logp[BOS] = -np.inf
            tok = int(np.argmax(logp))
            logprob += float(logp[tok])
            if tok == EOS:
                ended = True
                break
            tokens.append(tok)
            prev = np.array([tok])
    length = len(tokens) + (1 if ended else 0)
    hyp = Hypothesis(tuple(tokens), logprob, length, ended)
    return DecodeResult(tokens, hyp.score(len_penalty), [hyp])


def beam_search(model, src_ids=None, beam_size: int = 5,
                len_penalty: float = 1.0, max_len: int | None = None,
                ) -> DecodeResult:
    """Beam decoding over a single source sentence."""
    if beam_size < 1:
        raise ConfigError(f"beam size must be >= 1, got {beam_size}")
    if max_len is None:
        if src_ids is None:
            raise ConfigError("beam_search needs max_len in lm mode")
        max_len = default_max_len(len(src_ids))

    with no_grad():
        if src_ids is None:
            session = model.start_session(None)
        else:
            src = np.asarray(src_ids)[None, :].repeat(beam_size, axis=0)
            session = model.start_session(src)
        seqs: list[tuple[int, ...]] = [()] * beam_size
        scores = np.zeros(beam_size)
        alive = 1  # all beams identical at the first step
        finished: list[Hypothesis] = []
        prev = np.full(beam_size, BOS, dtype=np.int64)

        for _ in range(max_len):
            logp = _log_probs(session.step(prev))
            logp[:, PAD] = logp[:, BOS] = -np.inf
            vocab = logp.shape[1]
            cand = scores[:alive, None] + logp[:alive]
            flat = cand.ravel()
            # deterministic order: score desc, then token id, then beam
            beams_idx = np.arange(alive).repeat(vocab)
            tokens_idx = np.tile(np.arange(vocab), alive)
            order = np.lexsort((beams_idx, tokens_idx, -flat))
            next_seqs, next_scores, next_prev = [], [], []
            for pos in order:
                b, tok = int(beams_idx[pos]), int(tokens_idx[pos])
                total = float(flat[pos])
                if not np.isfinite(total):
                    break
                if tok == EOS:
                    finished.append(Hypothesis(
                        seqs[b], total, len(seqs[b]) + 1, True))
                else:
                    next_seqs.append(seqs[b] + (tok,))
                    next_scores.append(total)
                    next_prev.append((b, tok))
                if len(next_seqs) == beam_size or \
                        len(finished) + len(next_seqs) >= 2 * beam_size:
                    break
            if not next_seqs or len(finished) >= beam_size:
                break
            alive = len(next_seqs)
            parents = np.array([b for b, _ in next_prev], dtype=np.int64)
            reindex = np.concatenate(
                [parents, np.zeros(beam_size - alive, dtype=np.int64)])
            session.reorder(reindex)
            seqs = next_seqs + [()] * (beam_size - alive)
            scores = np.array(next_scores + [0.0] * (beam_size - alive))
            prev = np.array([tok for _, tok in next_prev]
                            + [PAD] * (beam_size - alive), dtype=np.int64)
        else:
            # length cap: force-finish whatever is still active
            for b in range(alive):
                finished.append(Hypothesis(
                    seqs[b], float(scores[b]), len(seqs[b]), False))

    if not finished:
        for b in range(alive):
            finished.append(Hypothesis(
                seqs[b], float(scores[b]), len(seqs[b]), False))
    best = max(finished,
               key=lambda h: (h.score(len_penalty), tuple(-t for t in h.tokens)))
    return DecodeResult(list(best.tokens), best.score(len_penalty), finished)
