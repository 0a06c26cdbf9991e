"""Teacher-forced training with length-bucketed batching, gradient
clipping, early stopping on dev loss, and fully seeded determinism."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass

import numpy as np

from .autodiff import backward, clip_global_norm, optimizer_step
from .errors import ConfigError, DataError, NumericalError
from .seq2seq import Seq2SeqModel, sequence_nll
from .vocab import BOS, EOS, PAD


@dataclass
class TrainConfig:
    optimizer: str = "adam"
    lr: float = 0.0005
    batch_size: int = 32
    max_epochs: int = 10
    seed: int = 0
    clip_norm: float = 5.0
    patience: int = 5

    def validate(self) -> None:
        if self.lr <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.lr}")
        if self.optimizer not in ("adam", "sgd"):
            raise ConfigError(f"unknown optimizer {self.optimizer!r}")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


def default_lr(mode: str, decoder: str, optimizer: str) -> tuple[str, float]:
    """(optimizer, lr) defaults per training regime."""
    if mode == "mt":
        return "adam", 0.0005
    if decoder == "onlstm":
        return "sgd", 0.7
    return "adam", 0.001


Pair = tuple[list[int] | None, list[int]]  # (source ids or None, target ids)


def pad_batch(pairs: list[Pair], mt: bool) -> dict:
    """Pad a batch; targets get BOS-shifted inputs and EOS-closed outputs."""
    if not pairs:
        raise DataError("empty batch")
    tgt_lens = [len(t) + 1 for _, t in pairs]  # +1 for EOS on the output side
    tmax = max(tgt_lens)
    batch = len(pairs)
    tgt_in = np.full((batch, tmax), PAD, dtype=np.int64)
    tgt_out = np.full((batch, tmax), PAD, dtype=np.int64)
    tgt_mask = np.zeros((batch, tmax))
    for i, (_, tgt) in enumerate(pairs):
        n = len(tgt)
        tgt_in[i, 0] = BOS
        tgt_in[i, 1:n + 1] = tgt
        tgt_out[i, :n] = tgt
        tgt_out[i, n] = EOS
        tgt_mask[i, :n + 1] = 1.0
    out = {"tgt_in": tgt_in, "tgt_out": tgt_out, "tgt_mask": tgt_mask,
           "src": None, "src_mask": None}
    if mt:
        src_lens = [len(s) for s, _ in pairs]
        if min(src_lens) == 0:
            raise DataError("empty source sentence in batch")
        smax = max(src_lens)
        src = np.full((batch, smax), PAD, dtype=np.int64)
        src_mask = np.zeros((batch, smax))
        for i, (s, _) in enumerate(pairs):
            src[i, :len(s)] = s
            src_mask[i, :len(s)] = 1.0
        out["src"] = src
        out["src_mask"] = src_mask
    return out


def length_bucketed_order(data: list[Pair], batch_size: int,
                          rng: np.random.Generator) -> list[list[int]]:
    """Shuffle, sort each shuffle-window by target length, emit batches."""
    idx = rng.permutation(len(data))
    window = batch_size * 16
    ordered: list[int] = []
    for lo in range(0, len(idx), window):
        chunk = sorted(idx[lo:lo + window], key=lambda i: len(data[i][1]))
        ordered.extend(chunk)
    batches = [ordered[i:i + batch_size]
               for i in range(0, len(ordered), batch_size)]
    order = rng.permutation(len(batches))
    return [batches[i] for i in order]


def dataset_nll(model: Seq2SeqModel, data: list[Pair],
                batch_size: int = 64) -> tuple[float, int]:
    """(total nll nats, token count) over a dataset, EOS counted."""
    mt = model.config.mode == "mt"
    total, count = 0.0, 0
    for lo in range(0, len(data), batch_size):
        chunk = sorted(data[lo:lo + batch_size], key=lambda p: len(p[1]))
        b = pad_batch(chunk, mt)
        nll, n = sequence_nll(model, b["src"], b["src_mask"], b["tgt_in"],
                              b["tgt_out"], b["tgt_mask"])
        total += nll.item()
        count += int(n)
    return total, count


@dataclass
class TrainLog:
    train_loss: list[float]
    dev_loss: list[float]
    best_epoch: int
    grad_norms: list[float]
    seconds: float

    def to_dict(self) -> dict:
        return asdict(self)


def train(model: Seq2SeqModel, train_data: list[Pair],
          dev_data: list[Pair] | None, config: TrainConfig,
          log_fn=None) -> TrainLog:
    """Train in place; restores the best-dev-loss parameters at the end."""
    config.validate()
    if not train_data:
        raise DataError("empty training corpus")
    mt = model.config.mode == "mt"
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    params = model.params()
    start = time.time()
    train_losses, dev_losses, norms = [], [], []
    best = (float("inf"), -1, None)  # (dev loss, epoch, state)
    bad_epochs = 0
    for epoch in range(config.max_epochs):
        epoch_nll, epoch_tokens = 0.0, 0
        for batch_idx in length_bucketed_order(train_data, config.batch_size, rng):
            b = pad_batch([train_data[i] for i in batch_idx], mt)
            nll, n = sequence_nll(model, b["src"], b["src_mask"], b["tgt_in"],
                                  b["tgt_out"], b["tgt_mask"], rng=rng)
            loss = nll * (1.0 / n)
            if not np.isfinite(loss.data):
                raise NumericalError(
                    f"loss diverged at epoch {epoch}: {float(loss.data)}")
            backward(loss, params=params)
            norms.append(clip_global_norm(params, config.clip_norm))
            optimizer_step(params, config.optimizer, config.lr)
            epoch_nll += nll.item()
            epoch_tokens += int(n)
        train_losses.append(epoch_nll / max(epoch_tokens, 1))
        if dev_data:
            dev_total, dev_count = dataset_nll(model, dev_data)
            dev_loss = dev_total / dev_count
        else:
            dev_loss = train_losses[-1]
        dev_losses.append(dev_loss)
        if log_fn:
            log_fn(f"epoch {epoch}: train {train_losses[-1]:.4f} "
                   f"dev {dev_loss:.4f}")
        if dev_loss < best[0] - 1e-9:
            best = (dev_loss, epoch, model.ps.state_dict())
            bad_epochs = 0
        else:
            bad_epochs += 1
            if bad_epochs > config.patience:
                break
    if best[2] is not None:
        model.ps.load_state_dict(best[2])
    return TrainLog(train_losses, dev_losses, best[1], norms,
                    time.time() - start)
