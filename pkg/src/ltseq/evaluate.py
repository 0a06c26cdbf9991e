"""Parse extraction (teacher-forced and EOS-probe), translation
scoring, and the per-run evaluation report.

Parse extraction feeds [BOS] target [EOS] through the decoder exactly
as in training (teacher forcing) and induces a tree from the collected
syntactic distances (PRPN, one tree) or per-layer expected depths
(ON-LSTM, one tree per layer). The EOS probe is identical but fixes the
source to the single token [EOS], isolating the decoder from source
signal. Report F1 values are on the 0-100 scale like BLEU.
"""

from __future__ import annotations

import numpy as np

from .autodiff import no_grad
from .decoding import beam_search
from .errors import AlignmentError, ConfigError
from .metrics import corpus_bleu, length_bucket_report, perplexity
from .onlstm import ONLSTMDecoder, depths_to_tree
from .prpn import PRPNDecoder, distances_to_tree
from .seq2seq import Seq2SeqModel
from .trees import Tree, label_accuracy, sentence_f1
from .training import dataset_nll
from .vocab import BOS, EOS

DEFAULT_BUCKETS = (10, 20, 30, 40, 50, 60)
DEFAULT_LABELS = ("ADJP", "NP", "PP")


def _run_stream(model: Seq2SeqModel, src_ids, tgt_ids: list[int]):
    """Teacher-force [BOS] tgt [EOS] and return the final decoder state."""
    with no_grad():
        session = model.start_session(
            None if src_ids is None else np.asarray(src_ids)[None, :])
        for tok in [BOS, *tgt_ids, EOS]:
            session.step(np.array([tok]))
        return session.dec_state


def extract_parse(model: Seq2SeqModel, src_ids, tgt_ids: list[int],
                  ) -> Tree | dict[str, Tree]:
    """Induced tree(s) over the target words; dict of layers for ON-LSTM."""
    decoder = model.decoder
    if decoder.score_kind() is None:
        raise ConfigError(
            f"{model.config.decoder!r} decoder does not induce trees")
    state = _run_stream(model, src_ids, tgt_ids)
    if isinstance(decoder, PRPNDecoder):
        distances = [float(d[0]) for d in decoder.collect_scores(state)]
        return distances_to_tree(distances)
    assert isinstance(decoder, ONLSTMDecoder)
    out = {}
    for layer, records in enumerate(decoder.collect_scores(state), start=1):
        depths = [float(d[0]) for d in records]
        out[f"layer{layer}"] = depths_to_tree(depths)
    return out


def parse_target_teacher_forced(model: Seq2SeqModel, sources, targets,
                                ) -> list[Tree] | dict[str, list[Tree]]:
    """Parses of gold target sentences (the F1(Target) inputs)."""
    if model.config.mode == "mt":
        if sources is None or len(sources) != len(targets):
            raise AlignmentError("sources and targets must align in mt mode")
    else:
        sources = [None] * len(targets)
    parses = [extract_parse(model, s, t) for s, t in zip(sources, targets)]
    if parses and isinstance(parses[0], dict):
        layers = sorted(parses[0])
        return {layer: [p[layer] for p in parses] for layer in layers}
    return parses


def eos_probe_parse(model: Seq2SeqModel, targets,
                    ) -> list[Tree] | dict[str, list[Tree]]:
    """Teacher-forced parses with the source fixed to the [EOS] token."""
    if model.config.mode != "mt":
        raise ConfigError("the EOS probe needs an mt-mode model")
    probe_source = [EOS]
    return parse_target_teacher_forced(
        model, [probe_source] * len(targets), targets)


def _f1_block(parses, golds) -> float | dict[str, float]:
    if isinstance(parses, dict):
        return {layer: 100.0 * _mean_f1(trees, golds)
                for layer, trees in parses.items()}
    return 100.0 * _mean_f1(parses, golds)


def _mean_f1(trees, golds) -> float:
    scores = [sentence_f1(p, g) for p, g in zip(trees, golds)]
    return float(np.mean(scores)) if scores else 0.0


def _label_block(parses, golds, labels):
    def one(trees):
        agg: dict[str, dict] = {}
        for pred, gold in zip(trees, golds):
            for lab, rec in label_accuracy(pred, gold, labels).items():
                slot = agg.setdefault(lab, {"hits": 0, "total": 0})
                slot["hits"] += rec["hits"]
                slot["total"] += rec["total"]
        return {lab: {"hits": rec["hits"], "total": rec["total"],
                      "accuracy": rec["hits"] / rec["total"]}
                for lab, rec in agg.items()}

    if isinstance(parses, dict):
        return {layer: one(trees) for layer, trees in parses.items()}
    return one(parses)


def evaluate(model: Seq2SeqModel, test_pairs, tgt_vocab=None,
             gold_trees=None, labels=DEFAULT_LABELS, buckets=DEFAULT_BUCKETS,
             beam_size: int = 5, len_penalty: float = 1.0,
             run_probe: bool = True) -> dict:
    """Full per-run report: BLEU, perplexity, F1(Target), probe F1,
    label accuracy, and length-bucket BLEU. F1 columns are present only
    when gold trees are supplied."""
    mt = model.config.mode == "mt"
    report: dict = {"mode": model.config.mode, "decoder": model.config.decoder}

    total_nll, count = dataset_nll(model, test_pairs)
    report["perplexity"] = perplexity(total_nll, count)

    if mt:
        if tgt_vocab is None:
            raise ConfigError("mt evaluation needs the target vocabulary")
        hyps, refs = [], []
        for src, tgt in test_pairs:
            result = beam_search(model, src, beam_size=beam_size,
                                 len_penalty=len_penalty)
            hyps.append(tgt_vocab.decode(result.tokens))
            refs.append(tgt_vocab.decode(tgt))
        report["bleu"] = corpus_bleu(hyps, refs)
        report["length_buckets"] = length_bucket_report(
            list(zip(hyps, refs)), list(buckets))

    if model.decoder.score_kind() is not None and gold_trees is not None:
        targets = [tgt for _, tgt in test_pairs]
        if len(gold_trees) != len(targets):
            raise AlignmentError("gold trees do not align with the test set")
        sources = [src for src, _ in test_pairs] if mt else None
        parses = parse_target_teacher_forced(model, sources, targets)
        report["f1_target"] = _f1_block(parses, gold_trees)
        report["label_accuracy"] = _label_block(parses, gold_trees, labels)
        if mt and run_probe:
            probe = eos_probe_parse(model, targets)
            report["f1_probe"] = _f1_block(probe, gold_trees)
    return report


def flatten_metrics(report: dict, prefix: str = "") -> dict[str, float]:
    """Dot-flatten numeric report entries for cross-seed aggregation."""
    flat: dict[str, float] = {}
    for key, value in report.items():
        name = f"{prefix}{key}"
        if isinstance(value, dict):
            flat.update(flatten_metrics(value, prefix=f"{name}."))
        elif isinstance(value, (int, float)) and not isinstance(value, bool):
            flat[name] = float(value)
        elif isinstance(value, list):
            for i, item in enumerate(value):
                if isinstance(item, dict):
                    flat.update(flatten_metrics(item, prefix=f"{name}.{i}."))
    return flat
