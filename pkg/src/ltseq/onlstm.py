"""ON-LSTM decoder: cumax-driven master gates over a 3-layer stack with
per-layer expected split depths for tree induction.

Master gates are computed at chunk resolution (hidden_dim / chunk slots)
and expanded by repetition to full width. The overlap combination and
chunking below follow the cited ordered-neurons construction, which the
recap in our source leaves implicit:

    omega = f_master * i_master
    f_eff = f * omega + (f_master - omega)
    i_eff = i * omega + (i_master - omega)

With both master gates forced to all-ones this reduces exactly to a
plain LSTM cell. The expected split depth of a step is
D_m - sum(f_master_chunk), zero-based at chunk resolution; any constant
offset convention induces the same trees (argmax invariance).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .autodiff import (
    ParamSet,
    Tensor,
    concat,
    cumsum,
    dropout,
    repeat_chunks,
    sigmoid,
    softmax,
    tanh,
)
from .errors import ConfigError, DataError
from .nn import affine, zeros
from .trees import ScoreSequence, Tree, induce_tree


@dataclass
class ONLSTMConfig:
    embed_dim: int = 64
    hidden_dim: int = 64
    chunk: int = 2
    num_layers: int = 3
    layer_dropout: float = 0.0

    @property
    def chunk_slots(self) -> int:
        return self.hidden_dim // self.chunk

    def validate(self) -> None:
        if self.num_layers < 1:
            raise ConfigError(f"need at least one layer, got {self.num_layers}")
        if self.chunk < 1 or self.hidden_dim % self.chunk != 0:
            raise ConfigError(
                f"chunk ({self.chunk}) must divide hidden_dim ({self.hidden_dim})")
        if not 0.0 <= self.layer_dropout < 1.0:
            raise ConfigError(f"bad dropout rate {self.layer_dropout}")


def cumax(logits: Tensor, axis: int = -1) -> Tensor:
    """Cumulative sum of softmax: nondecreasing, ends at 1.

    Realizes p(g_k = 1) = p(split <= k) for the soft binary gate whose
    first 1 sits at the split index.
    """
    return cumsum(softmax(logits, axis=axis), axis=axis)


def expected_depth(f_master_chunk: np.ndarray | Tensor) -> np.ndarray:
    """Zero-based expected split slot: D_m - sum_k f_master_k per row."""
    data = f_master_chunk.data if isinstance(f_master_chunk, Tensor) \
        else np.asarray(f_master_chunk, dtype=np.float64)
    d_m = data.shape[-1]
    return d_m - data.sum(axis=-1)


def onlstm_cell(ps: ParamSet, prefix: str, x: Tensor, h: Tensor, c: Tensor,
                chunk: int) -> tuple[Tensor, Tensor, Tensor, Tensor]:
    """One ordered-neurons update; returns (h', c', f_master, i_master)
    with the master gates at chunk resolution."""
    hid = h.shape[1]
    xh = concat([x, h], axis=1)
    f_chunk = cumax(affine(xh, ps[f"{prefix}.wf"].tensor,
                           ps[f"{prefix}.bf"].tensor), axis=1)
    i_chunk = 1.0 - cumax(affine(xh, ps[f"{prefix}.wi"].tensor,
                                 ps[f"{prefix}.bi"].tensor), axis=1)
    f_master = repeat_chunks(f_chunk, chunk, axis=1)
    i_master = repeat_chunks(i_chunk, chunk, axis=1)
    z = affine(xh, ps[f"{prefix}.w"].tensor, ps[f"{prefix}.b"].tensor)
    i = sigmoid(z[:, :hid])
    f = sigmoid(z[:, hid:2 * hid])
    o = sigmoid(z[:, 2 * hid:3 * hid])
    g = tanh(z[:, 3 * hid:])
    omega = f_master * i_master
    f_eff = f * omega + (f_master - omega)
    i_eff = i * omega + (i_master - omega)
    c_new = f_eff * c + i_eff * g
    h_new = o * tanh(c_new)
    return h_new, c_new, f_chunk, i_chunk


class ONLSTMDecoder:
    """Stack of ordered-neurons layers with an affine output head."""

    def __init__(self, ps: ParamSet, config: ONLSTMConfig, ctx_dim: int,
                 vocab_size: int, prefix: str = "dec"):
        config.validate()
        self.ps = ps
        self.cfg = config
        self.ctx_dim = ctx_dim
        self.prefix = prefix
        hid, d_m = config.hidden_dim, config.chunk_slots
        in_dim = config.embed_dim + ctx_dim
        for layer in range(config.num_layers):
            name = f"{prefix}.layer{layer}"
            ps.add(f"{name}.w", (in_dim + hid, 4 * hid))
            ps.add(f"{name}.b", (4 * hid,))
            ps.add(f"{name}.wf", (in_dim + hid, d_m))
            ps.add(f"{name}.bf", (d_m,))
            ps.add(f"{name}.wi", (in_dim + hid, d_m))
            ps.add(f"{name}.bi", (d_m,))
            in_dim = hid
        ps.add(f"{prefix}.head.w", (hid, vocab_size))
        ps.add_zeros(f"{prefix}.head.b", (vocab_size,))

    class State:
        __slots__ = ("hs", "cs", "depths", "t")

        def __init__(self, num_layers: int):
            self.hs: list = [None] * num_layers
            self.cs: list = [None] * num_layers
            self.depths: list[list[np.ndarray]] = [[] for _ in range(num_layers)]
            self.t = 1

        def reorder(self, idx) -> "ONLSTMDecoder.State":
            out = ONLSTMDecoder.State(len(self.hs))
            out.hs = [h[idx] for h in self.hs]
            out.cs = [c[idx] for c in self.cs]
            out.depths = [[d[idx] for d in layer] for layer in self.depths]
            out.t = self.t
            return out

    def init_state(self, batch: int) -> "ONLSTMDecoder.State":
        state = self.State(self.cfg.num_layers)
        state.hs = [zeros((batch, self.cfg.hidden_dim))
                    for _ in range(self.cfg.num_layers)]
        state.cs = [zeros((batch, self.cfg.hidden_dim))
                    for _ in range(self.cfg.num_layers)]
        return state

    def query_state(self, state: "ONLSTMDecoder.State") -> Tensor:
        return state.hs[-1]

    def step(self, state: "ONLSTMDecoder.State", x_emb: Tensor,
             ctx: Tensor | None, rng: np.random.Generator | None = None,
             ) -> tuple[Tensor, "ONLSTMDecoder.State"]:
        cfg = self.cfg
        new = self.State(cfg.num_layers)
        new.t = state.t + 1
        inp = x_emb if ctx is None else concat([x_emb, ctx], axis=1)
        for layer in range(cfg.num_layers):
            h, c, f_chunk, _ = onlstm_cell(
                self.ps, f"{self.prefix}.layer{layer}", inp,
                state.hs[layer], state.cs[layer], cfg.chunk)
            new.hs[layer] = h
            new.cs[layer] = c
            new.depths[layer] = state.depths[layer] + [expected_depth(f_chunk)]
            inp = h
            if rng is not None and cfg.layer_dropout > 0 \
                    and layer < cfg.num_layers - 1:
                inp = dropout(inp, cfg.layer_dropout, rng)
        return new.hs[-1], new

    def head(self, h: Tensor) -> Tensor:
        return affine(h, self.ps[f"{self.prefix}.head.w"].tensor,
                      self.ps[f"{self.prefix}.head.b"].tensor)

    def score_kind(self) -> str:
        return "node"

    def collect_scores(self, state: "ONLSTMDecoder.State") -> list[list[np.ndarray]]:
        """Per-layer expected depths, one (B,) array per consumed input."""
        return [list(layer) for layer in state.depths]
