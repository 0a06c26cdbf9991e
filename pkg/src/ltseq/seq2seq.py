"""Encoder/decoder assembly: BiLSTM encoder, additive attention over
source states, and one of three decoders (lstm | prpn | onlstm).

MT mode encodes a source and feeds an attention context (queried with
the previous decoder state) into the decoder input; LM mode is the same
decoder with no encoder and a zero-width context, so both modes share
one step path. A Session owns the per-sentence state and is the unit
decoding and teacher forcing drive.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import (
    ParamSet,
    Tensor,
    concat,
    embedding,
    gather_rows,
    log_softmax,
    matmul,
    softmax,
    tanh,
)
from .errors import ConfigError, DataError
from .nn import add_lstm, affine, lstm_cell, zeros
from .onlstm import ONLSTMConfig, ONLSTMDecoder
from .prpn import PRPNConfig, PRPNDecoder

DECODER_KINDS = ("lstm", "prpn", "onlstm")
MODES = ("lm", "mt")
MASK_PENALTY = 1e9  # large enough that exp(-x) underflows to exactly 0


@dataclass
class ModelConfig:
    decoder: str
    mode: str
    tgt_vocab_size: int
    src_vocab_size: int = 0
    embed_dim: int = 64
    hidden_dim: int = 64
    attn_dim: int = 64
    parser_hidden: int = 64
    lookback: int = 3
    temperature: float = 10.0
    chunk: int = 2
    num_layers: int = 3
    layer_dropout: float = 0.0
    init_scale: float = 0.1

    def validate(self) -> None:
        if self.decoder not in DECODER_KINDS:
            raise ConfigError(f"unknown decoder {self.decoder!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.tgt_vocab_size < 5:
            raise ConfigError("target vocabulary too small")
        if self.mode == "mt" and self.src_vocab_size < 5:
            raise ConfigError("mt mode needs a source vocabulary")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


class LSTMDecoder:
    """Baseline single-layer LSTM decoder with an affine head."""

    def __init__(self, ps: ParamSet, embed_dim: int, hidden_dim: int,
                 ctx_dim: int, vocab_size: int, prefix: str = "dec"):
        self.ps = ps
        self.hidden_dim = hidden_dim
        self.ctx_dim = ctx_dim
        self.prefix = prefix
        add_lstm(ps, f"{prefix}.cell", embed_dim + ctx_dim, hidden_dim)
        ps.add(f"{prefix}.head.w", (hidden_dim, vocab_size))
        ps.add_zeros(f"{prefix}.head.b", (vocab_size,))

    class State:
        __slots__ = ("h", "c", "t")

        def __init__(self, h, c, t=1):
            self.h, self.c, self.t = h, c, t

        def reorder(self, idx):
            return LSTMDecoder.State(self.h[idx], self.c[idx], self.t)

    def init_state(self, batch: int) -> "LSTMDecoder.State":
        return self.State(zeros((batch, self.hidden_dim)),
                          zeros((batch, self.hidden_dim)))

    def query_state(self, state) -> Tensor:
        return state.h

    def step(self, state, x_emb: Tensor, ctx: Tensor | None):
        x = x_emb if ctx is None else concat([x_emb, ctx], axis=1)
        h, c = lstm_cell(self.ps, f"{self.prefix}.cell", x, state.h, state.c)
        return h, self.State(h, c, state.t + 1)

    def head(self, h: Tensor) -> Tensor:
        return affine(h, self.ps[f"{self.prefix}.head.w"].tensor,
                      self.ps[f"{self.prefix}.head.b"].tensor)

    def score_kind(self) -> str | None:
        return None  # no parse scores: the baseline cannot induce trees


class Seq2SeqModel:
    def __init__(self, config: ModelConfig, seed: int = 0):
        config.validate()
        self.config = config
        rng = np.random.default_rng(np.random.SeedSequence(seed))
        self.ps = ParamSet(rng, init_scale=config.init_scale)
        c = config
        self.ps.add("tgt_emb", (c.tgt_vocab_size, c.embed_dim))
        ctx_dim = c.hidden_dim if c.mode == "mt" else 0
        if c.mode == "mt":
            self.ps.add("src_emb", (c.src_vocab_size, c.embed_dim))
            add_lstm(self.ps, "enc.fwd", c.embed_dim, c.hidden_dim)
            add_lstm(self.ps, "enc.bwd", c.embed_dim, c.hidden_dim)
            self.ps.add("enc.proj.w", (2 * c.hidden_dim, c.hidden_dim))
            self.ps.add_zeros("enc.proj.b", (c.hidden_dim,))
            self.ps.add("attn.wq", (c.hidden_dim, c.attn_dim))
            self.ps.add("attn.wk", (c.hidden_dim, c.attn_dim))
            self.ps.add("attn.v", (c.attn_dim, 1))
        if c.decoder == "lstm":
            self.decoder = LSTMDecoder(self.ps, c.embed_dim, c.hidden_dim,
                                       ctx_dim, c.tgt_vocab_size)
        elif c.decoder == "prpn":
            pc = PRPNConfig(c.embed_dim, c.hidden_dim, c.parser_hidden,
                            c.lookback, c.temperature)
            self.decoder = PRPNDecoder(self.ps, pc, ctx_dim, c.tgt_vocab_size)
        else:
            oc = ONLSTMConfig(c.embed_dim, c.hidden_dim, c.chunk,
                              c.num_layers, c.layer_dropout)
            self.decoder = ONLSTMDecoder(self.ps, oc, ctx_dim, c.tgt_vocab_size)

    # -- encoder ---------------------------------------------------------------

    def _run_direction(self, emb_steps: list[Tensor], prefix: str,
                       mask: np.ndarray) -> list[Tensor]:
        """LSTM over the given step order with masked state carry."""
        batch = emb_steps[0].shape[0]
        h = zeros((batch, self.config.hidden_dim))
        c = zeros((batch, self.config.hidden_dim))
        states = []
        for t, x in enumerate(emb_steps):
            h_new, c_new = lstm_cell(self.ps, prefix, x, h, c)
            m = Tensor(mask[:, t:t + 1])
            h = m * h_new + (1.0 - m) * h
            c = m * c_new + (1.0 - m) * c
            states.append(h)
        return states

    def encode(self, src_ids: np.ndarray, src_mask: np.ndarray,
               ) -> tuple[Tensor, Tensor]:
        """(states (B,S,H), attention keys (B,S,A)) for a padded batch."""
        if self.config.mode != "mt":
            raise ConfigError("lm-mode model has no encoder")
        src_ids = np.atleast_2d(np.asarray(src_ids, dtype=np.int64))
        if src_ids.shape[1] == 0:
            raise DataError("empty source")
        batch, slen = src_ids.shape
        emb = [embedding(self.ps["src_emb"].tensor, src_ids[:, t])
               for t in range(slen)]
        fwd = self._run_direction(emb, "enc.fwd", src_mask)
        bwd_rev = self._run_direction(emb[::-1], "enc.bwd", src_mask[:, ::-1])
        bwd = bwd_rev[::-1]
        states, keys = [], []
        for hf, hb in zip(fwd, bwd):
            s = affine(concat([hf, hb], axis=1), self.ps["enc.proj.w"].tensor,
                       self.ps["enc.proj.b"].tensor)
            states.append(s.reshape(batch, 1, self.config.hidden_dim))
            keys.append(matmul(s, self.ps["attn.wk"].tensor)
                        .reshape(batch, 1, self.config.attn_dim))
        return concat(states, axis=1), concat(keys, axis=1)

    def attend(self, query: Tensor, enc_states: Tensor, keys: Tensor,
               mask: np.ndarray) -> tuple[Tensor, Tensor]:
        """Additive attention; PAD positions get exactly zero weight."""
        if not mask.any(axis=1).all():
            raise ConfigError("attention over a fully masked source")
        batch, slen, _ = enc_states.shape
        q = matmul(query, self.ps["attn.wq"].tensor)
        scores3 = tanh(keys + q.reshape(batch, 1, self.config.attn_dim)) \
            * self.ps["attn.v"].tensor.reshape(1, 1, self.config.attn_dim)
        scores = scores3.sum(axis=2) + Tensor((mask - 1.0) * MASK_PENALTY)
        weights = softmax(scores, axis=1)
        ctx = (enc_states * weights.reshape(batch, slen, 1)).sum(axis=1)
        return ctx, weights

    # -- sessions ----------------------------------------------------------------

    def start_session(self, src_ids=None, src_mask=None,
                      rng: np.random.Generator | None = None) -> "Session":
        return Session(self, src_ids, src_mask, rng)

    def params(self):
        return self.ps.params()


class Session:
    """Per-sentence (or per-beam-batch) decoding state."""

    def __init__(self, model: Seq2SeqModel, src_ids, src_mask,
                 rng: np.random.Generator | None = None):
        self.model = model
        self.rng = rng
        if model.config.mode == "mt":
            if src_ids is None:
                raise DataError("mt mode needs a source")
            src_ids = np.atleast_2d(np.asarray(src_ids, dtype=np.int64))
            if src_mask is None:
                src_mask = np.ones(src_ids.shape, dtype=np.float64)
            self.src_mask = np.asarray(src_mask, dtype=np.float64)
            self.enc_states, self.enc_keys = model.encode(src_ids, self.src_mask)
            self.batch = src_ids.shape[0]
        else:
            self.enc_states = self.enc_keys = self.src_mask = None
            self.batch = None
        self.dec_state = None
        self.last_attention = None

    def _ensure_state(self, batch: int):
        if self.dec_state is None:
            if self.batch is not None and batch != self.batch:
                raise DataError(
                    f"target batch {batch} != source batch {self.batch}")
            self.batch = batch
            self.dec_state = self.model.decoder.init_state(batch)

    def step(self, token_ids) -> Tensor:
        """Consume one input token per row; returns vocabulary logits."""
        token_ids = np.asarray(token_ids, dtype=np.int64).reshape(-1)
        self._ensure_state(len(token_ids))
        x = embedding(self.model.ps["tgt_emb"].tensor, token_ids)
        ctx = None
        if self.model.config.mode == "mt":
            query = self.model.decoder.query_state(self.dec_state)
            ctx, self.last_attention = self.model.attend(
                query, self.enc_states, self.enc_keys, self.src_mask)
        if isinstance(self.model.decoder, ONLSTMDecoder):
            h, self.dec_state = self.model.decoder.step(
                self.dec_state, x, ctx, rng=self.rng)
        else:
            h, self.dec_state = self.model.decoder.step(self.dec_state, x, ctx)
        return self.model.decoder.head(h)

    def reorder(self, idx) -> None:
        """Select/duplicate rows (beam bookkeeping)."""
        idx = np.asarray(idx, dtype=np.int64)
        if self.enc_states is not None:
            self.enc_states = self.enc_states[idx]
            self.enc_keys = self.enc_keys[idx]
            self.src_mask = self.src_mask[idx]
        if self.dec_state is not None:
            self.dec_state = self.dec_state.reorder(idx)
        self.batch = len(idx)


def sequence_nll(model: Seq2SeqModel, src_ids, src_mask, tgt_in: np.ndarray,
                 tgt_out: np.ndarray, tgt_mask: np.ndarray,
                 rng: np.random.Generator | None = None,
                 ) -> tuple[Tensor, float]:
    """(total masked NLL in nats, token count) under teacher forcing."""
    tgt_in = np.atleast_2d(tgt_in)
    tgt_out = np.atleast_2d(tgt_out)
    tgt_mask = np.atleast_2d(tgt_mask).astype(np.float64)
    session = model.start_session(src_ids, src_mask, rng=rng)
    total = None
    for t in range(tgt_in.shape[1]):
        mask_col = tgt_mask[:, t]
        if not mask_col.any():
            break
        logits = session.step(tgt_in[:, t])
        logp = log_softmax(logits, axis=1)
        nll = -gather_rows(logp, tgt_out[:, t]) * Tensor(mask_col)
        total = nll.sum() if total is None else total + nll.sum()
    if total is None:
        raise DataError("batch contains no unmasked target tokens")
    return total, float(tgt_mask.sum())
