"""PRPN decoder: convolutional syntactic-distance parser, soft gates,
and an LSTMN reading network with structured intra-attention.

The parser scores each token boundary with a nonnegative distance
d_i = relu(W_d . relu(W_c [e_{i-L}; ...; e_i] + b_c) + b_d) computed
from a fixed look-back window (learned pad vectors fill positions
before the sentence start). At step t the gates

    alpha_j = (hardtanh((d_t - d_j) * tau) + 1) / 2
    g_i     = prod_{j=i+1}^{t-1} alpha_j      (empty product = 1)

reweight a scaled-dot-product self-attention over the hidden/memory
tapes; the resulting summary vectors replace the recurrent state in a
standard LSTM update, and the new state is appended to the tapes. The
output head is a one-hidden-layer feedforward network over h_t.

Only distance differences enter the gates, so shifting all distances
by a constant changes neither the gates nor the induced tree.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .autodiff import ParamSet, Tensor, concat, hardtanh, matmul, relu, softmax
from .errors import ConfigError, DataError
from .nn import add_lstm, affine, lstm_cell, zeros
from .trees import ScoreSequence, Tree, induce_tree


@dataclass
class PRPNConfig:
    embed_dim: int = 64
    hidden_dim: int = 64
    parser_hidden: int = 64
    lookback: int = 3
    temperature: float = 10.0

    def validate(self) -> None:
        if self.lookback < 1:
            raise ConfigError(f"lookback must be >= 1, got {self.lookback}")
        if self.temperature <= 0:
            raise ConfigError(
                f"temperature must be positive, got {self.temperature}")
        if min(self.embed_dim, self.hidden_dim, self.parser_hidden) < 1:
            raise ConfigError("all dimensions must be positive")


def gate_row(distances: list[Tensor], d_t: Tensor, tau: float,
             ) -> tuple[Tensor | None, Tensor | None]:
    """(alphas, g) for one step given d_1..d_{t-1} columns of shape (B, 1).

    g has one column per tape position i = 1..t-1, nondecreasing in i;
    the last column is the empty product 1, so the most recent position
    is never gated out. Returns (None, None) when the tape is empty.
    """
    if tau <= 0:
        raise ConfigError(f"temperature must be positive, got {tau}")
    t = len(distances) + 1
    if t == 1:
        return None, None
    batch = d_t.shape[0]
    one = Tensor(np.ones((batch, 1)))
    if t == 2:
        return None, one
    # alpha_j for j = 2..t-1 lives at distances[1..t-2]
    alphas = (hardtanh((d_t - concat(distances[1:], axis=1)) * tau) + 1.0) * 0.5
    cols = [one]
    for j in range(t - 2, 0, -1):  # produces g_{t-2} .. g_1
        cols.append(cols[-1] * alphas[:, j - 1:j])
    return alphas, concat(cols[::-1], axis=1)


class PRPNDecoder:
    """State-holding decoder; parameters live in the model's ParamSet."""

    def __init__(self, ps: ParamSet, config: PRPNConfig, ctx_dim: int,
                 vocab_size: int, prefix: str = "dec"):
        config.validate()
        self.ps = ps
        self.cfg = config
        self.ctx_dim = ctx_dim
        self.prefix = prefix
        e, h, p, look = (config.embed_dim, config.hidden_dim,
                         config.parser_hidden, config.lookback)
        ps.add(f"{prefix}.pad_emb", (look, e))
        ps.add(f"{prefix}.parser.wc", ((look + 1) * e, p))
        ps.add_zeros(f"{prefix}.parser.bc", (p,))
        ps.add(f"{prefix}.parser.wd", (p, 1))
        ps.add_zeros(f"{prefix}.parser.bd", (1,))
        ps.add(f"{prefix}.attn.wh", (h, h))
        ps.add(f"{prefix}.attn.wx", (e, h))
        add_lstm(ps, f"{prefix}.cell", e + ctx_dim, h)
        ps.add(f"{prefix}.head.w1", (h, h))
        ps.add_zeros(f"{prefix}.head.b1", (h,))
        ps.add(f"{prefix}.head.w2", (h, vocab_size))
        ps.add_zeros(f"{prefix}.head.b2", (vocab_size,))

    # -- state ---------------------------------------------------------------

    class State:
        __slots__ = ("h_tape", "c_tape", "window", "distances", "t")

        def __init__(self):
            self.h_tape = None   # (B, t-1, H)
            self.c_tape = None
            self.window = []     # last L input embeddings, each (B, E)
            self.distances = []  # d_1..d_t, each (B, 1)
            self.t = 1

        def reorder(self, idx) -> "PRPNDecoder.State":
            out = PRPNDecoder.State()
            out.h_tape = None if self.h_tape is None else self.h_tape[idx]
            out.c_tape = None if self.c_tape is None else self.c_tape[idx]
            out.window = [w[idx] for w in self.window]
            out.distances = [d[idx] for d in self.distances]
            out.t = self.t
            return out

    def init_state(self, batch: int) -> "PRPNDecoder.State":
        state = self.State()
        pads = self.ps[f"{self.prefix}.pad_emb"].tensor
        ones = Tensor(np.ones((batch, 1)))
        state.window = [pads[j:j + 1, :] * ones
                        for j in range(self.cfg.lookback)]
        return state

    def query_state(self, state: "PRPNDecoder.State") -> Tensor:
        if state.h_tape is None:
            return zeros((state.window[0].shape[0], self.cfg.hidden_dim))
        return state.h_tape[:, -1, :]

    # -- pieces --------------------------------------------------------------

    def boundary_distance(self, window: list[Tensor]) -> Tensor:
        """d for the boundary ending at the window's last embedding."""
        p = self.ps
        win = concat(window, axis=1)
        hidden = relu(affine(win, p[f"{self.prefix}.parser.wc"].tensor,
                             p[f"{self.prefix}.parser.bc"].tensor))
        return relu(affine(hidden, p[f"{self.prefix}.parser.wd"].tensor,
                           p[f"{self.prefix}.parser.bd"].tensor))

    def structured_attention(self, state: "PRPNDecoder.State", x_emb: Tensor,
                             gates: Tensor | None) -> tuple[Tensor, Tensor]:
        """Gated summary (h~, c~) of the tapes; zeros when the tape is empty."""
        h = self.cfg.hidden_dim
        if state.h_tape is None:
            batch = x_emb.shape[0]
            return zeros((batch, h)), zeros((batch, h))
        p = self.ps
        k = matmul(x_emb, p[f"{self.prefix}.attn.wx"].tensor) + matmul(
            self.query_state(state), p[f"{self.prefix}.attn.wh"].tensor)
        scores = (state.h_tape * k.reshape(k.shape[0], 1, h)).sum(axis=2) \
            * (1.0 / math.sqrt(h))
        s_tilde = softmax(scores, axis=1)
        denom = gates.sum(axis=1, keepdims=True)
        assert (denom.data > 0).all()  # last gate is always exactly 1
        s = gates * s_tilde / denom
        weights = s.reshape(s.shape[0], s.shape[1], 1)
        h_sum = (state.h_tape * weights).sum(axis=1)
        c_sum = (state.c_tape * weights).sum(axis=1)
        return h_sum, c_sum

    def step(self, state: "PRPNDecoder.State", x_emb: Tensor,
             ctx: Tensor | None) -> tuple[Tensor, "PRPNDecoder.State"]:
        cfg = self.cfg
        window = state.window[-cfg.lookback:] + [x_emb]
        d_t = self.boundary_distance(window)
        _, gates = gate_row(state.distances, d_t, cfg.temperature)
        h_sum, c_sum = self.structured_attention(state, x_emb, gates)
        x_full = x_emb if ctx is None else concat([x_emb, ctx], axis=1)
        h_new, c_new = lstm_cell(self.ps, f"{self.prefix}.cell",
                                 x_full, h_sum, c_sum)
        new = self.State()
        batch = x_emb.shape[0]
        row_h = h_new.reshape(batch, 1, cfg.hidden_dim)
        row_c = c_new.reshape(batch, 1, cfg.hidden_dim)
        new.h_tape = row_h if state.h_tape is None \
            else concat([state.h_tape, row_h], axis=1)
        new.c_tape = row_c if state.c_tape is None \
            else concat([state.c_tape, row_c], axis=1)
        new.window = window[-cfg.lookback:]
        new.distances = state.distances + [d_t]
        new.t = state.t + 1
        return h_new, new

    def head(self, h: Tensor) -> Tensor:
        p = self.ps
        hidden = relu(affine(h, p[f"{self.prefix}.head.w1"].tensor,
                             p[f"{self.prefix}.head.b1"].tensor))
        return affine(hidden, p[f"{self.prefix}.head.w2"].tensor,
                      p[f"{self.prefix}.head.b2"].tensor)

    # -- parsing ---------------------------------------------------------------

    def score_kind(self) -> str:
        return "boundary"

    def collect_scores(self, state: "PRPNDecoder.State") -> list[np.ndarray]:
        """Distances d_1..d_T as (B,) arrays, one per consumed input."""
        return [d.data[:, 0].copy() for d in state.distances]


def distances_to_tree(distances: list[float]) -> Tree:
    """Boundary distances over the decoder's [BOS] w_1..w_n [EOS] stream.

    Drops the BOS/EOS boundaries: d at stream position j scores the
    split between inputs j-1 and j, so interior word boundaries are
    positions 3..n+1 of the 1-based distance list.
    """
    if not distances:
        raise DataError("no distances collected")
    n = len(distances) - 2  # words between BOS and EOS
    if n < 1:
        raise DataError("sentence has no words")
    interior = distances[2:n + 1]
    return induce_tree(ScoreSequence(tuple(interior), "boundary"))
