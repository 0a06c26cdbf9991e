"""Binary tree induction from score sequences, bracketing F1, trivial
baselines, label accuracy, and PTB-style parse I/O.

Binary trees are nested pairs with int leaf positions: ((0, 1), 2).
Gold trees are n-ary LabeledNode records whose leaves are token strings.
Bracket sets are half-open (start, end) spans over leaf positions and
exclude the trivial spans (single tokens and the whole sentence).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, ConfigError, DataError

Tree = int | tuple  # leaf position | (left, right)


@dataclass(frozen=True)
class LabeledNode:
    label: str
    children: tuple  # of LabeledNode | str

    def __post_init__(self):
        if not self.children:
            raise DataError(f"constituent {self.label!r} has no children")


LabeledTree = LabeledNode | str


@dataclass(frozen=True)
class ScoreSequence:
    """Per-boundary or per-token scores a tree is induced from.

    kind "boundary": length n-1 for an n-token sentence, score i rates
    the split between tokens i and i+1. kind "node": length n, the score
    of token t rates the split immediately before it; position 0 is
    dropped on conversion.
    """

    values: tuple
    kind: str  # "boundary" | "node"

    def boundary_values(self) -> list[float]:
        if self.kind == "boundary":
            return list(self.values)
        if self.kind == "node":
            return list(self.values[1:])
        raise ConfigError(f"unknown score kind {self.kind!r}")


# -- structure helpers ------------------------------------------------------


def tree_leaves(tree: Tree) -> list[int]:
    if isinstance(tree, int):
        return [tree]
    return tree_leaves(tree[0]) + tree_leaves(tree[1])


def leaf_count(tree: Tree) -> int:
    return len(tree_leaves(tree))


def labeled_leaves(tree: LabeledTree) -> list[str]:
    if isinstance(tree, str):
        return [tree]
    out = []
    for child in tree.children:
        out.extend(labeled_leaves(child))
    return out


def _binary_spans(tree: Tree, start: int, out: list) -> int:
    """Appends (start, end) for every internal node; returns span end."""
    if isinstance(tree, int):
        return start + 1
    mid = _binary_spans(tree[0], start, out)
    end = _binary_spans(tree[1], mid, out)
    out.append((start, end))
    return end


def _labeled_spans(tree: LabeledTree, start: int, out: list) -> int:
    if isinstance(tree, str):
        return start + 1
    pos = start
    for child in tree.children:
        pos = _labeled_spans(child, pos, out)
    out.append((start, pos, tree.label))
    return pos


def brackets(tree) -> set[tuple[int, int]]:
    """Nontrivial internal-node spans (no single tokens, no full span)."""
    if isinstance(tree, (int, str)):
        return set()
    spans: list = []
    if isinstance(tree, LabeledNode):
        n = _labeled_spans(tree, 0, spans)
        spans = [(s, e) for s, e, _ in spans]
    else:
        n = _binary_spans(tree, 0, spans)
    return {(s, e) for s, e in spans if e - s > 1 and not (s == 0 and e == n)}


# -- tree induction ----------------------------------------------------------


def induce_tree(scores: ScoreSequence) -> Tree:
    """Greedy top-down split at the highest boundary score.

    Ties go to the leftmost maximum, so constant scores give a fully
    right-branching tree. Any strictly increasing transform of the
    scores leaves the result unchanged. A node-kind sequence must cover
    at least one token; an empty boundary sequence means n=1.
    """
    if scores.kind == "node" and len(scores.values) == 0:
        raise DataError("empty score sequence")
    vals = scores.boundary_values()
    n = len(vals) + 1

    def build(lo: int, hi: int) -> Tree:
        if hi - lo == 1:
            return lo
        window = vals[lo:hi - 1]
        k = lo + max(range(len(window)), key=lambda i: (window[i], -i))
        return (build(lo, k + 1), build(k + 1, hi))

    return build(0, n)


def induce_tree_from_values(values, kind: str) -> Tree:
    return induce_tree(ScoreSequence(tuple(float(v) for v in values), kind))


# -- F1 ---------------------------------------------------------------------


def _nleaves(tree) -> int:
    if isinstance(tree, (LabeledNode, str)):
        return len(labeled_leaves(tree))
    return leaf_count(tree)


def sentence_f1(pred, gold) -> float:
    """Unlabeled bracketing F1 of two parses of the same sentence.

    Both bracket sets empty scores 1.0 (length <= 2 sentences); exactly
    one empty scores 0.0.
    """
    n_pred = _nleaves(pred)
    n_gold = _nleaves(gold)
    if n_pred != n_gold:
        raise AlignmentError(f"leaf count mismatch: {n_pred} vs {n_gold}")
    bp, bg = brackets(pred), brackets(gold)
    if not bp and not bg:
        return 1.0
    if not bp or not bg:
        return 0.0
    overlap = len(bp & bg)
    precision = overlap / len(bp)
    recall = overlap / len(bg)
    if precision + recall == 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def corpus_f1(preds, golds) -> float:
    """Unweighted mean of sentence-level F1."""
    if len(preds) != len(golds):
        raise AlignmentError(f"corpus size mismatch: {len(preds)} vs {len(golds)}")
    if not preds:
        raise DataError("empty corpus")
    return sum(sentence_f1(p, g) for p, g in zip(preds, golds)) / len(preds)


# -- baselines ---------------------------------------------------------------


def baseline_tree(kind: str, n: int, seed: int | None = None) -> Tree:
    """left | right | balanced | random trivial trees over n leaves."""
    if n < 1:
        raise DataError(f"need at least one token, got n={n}")
    if kind == "random":
        rng = np.random.default_rng(0 if seed is None else seed)
    elif kind not in ("left", "right", "balanced"):
        raise ConfigError(f"unknown baseline kind {kind!r}")

    def build(lo: int, hi: int) -> Tree:
        if hi - lo == 1:
            return lo
        if kind == "left":
            k = hi - 2
        elif kind == "right":
            k = lo
        elif kind == "balanced":
            k = lo + (hi - lo + 1) // 2 - 1  # left side gets the odd token
        else:
            k = lo + int(rng.integers(0, hi - lo - 1))
        return (build(lo, k + 1), build(k + 1, hi))

    return build(0, n)


def label_accuracy(pred: Tree, gold: LabeledTree,
                   labels=("ADJP", "NP", "PP")) -> dict[str, dict]:
    """Fraction of nontrivial gold constituents per label found in pred.

    Labels with no gold occurrences are omitted from the result rather
    than reported as zero.
    """
    n_pred = leaf_count(pred)
    gold_leaves = labeled_leaves(gold)
    if n_pred != len(gold_leaves):
        raise AlignmentError(
            f"leaf count mismatch: {n_pred} vs {len(gold_leaves)}")
    n = len(gold_leaves)
    spans: list = []
    if isinstance(gold, LabeledNode):
        _labeled_spans(gold, 0, spans)
    pred_brackets = brackets(pred)
    out: dict[str, dict] = {}
    for s, e, label in spans:
        if label not in labels or e - s <= 1 or (s == 0 and e == n):
            continue
        rec = out.setdefault(label, {"hits": 0, "total": 0})
        rec["total"] += 1
        if (s, e) in pred_brackets:
            rec["hits"] += 1
    for rec in out.values():
        rec["accuracy"] = rec["hits"] / rec["total"]
    return out


# -- BPE alignment -----------------------------------------------------------


def left_branching_group(items: list):
    node = items[0]
    for item in items[1:]:
        node = (node, item)
    return node


def bpe_align_tree(word_tree, segments):
    """Expand each word leaf into a left-branching subtree of subwords.

    `segments` gives, per word in leaf order, either the subword count
    (for position-indexed binary trees) or the subword strings (for
    labeled gold trees, whose new internal groups are labeled "X").
    """
    counts = [len(s) if not isinstance(s, int) else s for s in segments]
    if any(c < 1 for c in counts):
        raise AlignmentError("every word needs at least one subword")

    if isinstance(word_tree, (LabeledNode, str)):
        words = labeled_leaves(word_tree)
        if len(words) != len(segments):
            raise AlignmentError(
                f"segmentation covers {len(segments)} words, tree has {len(words)}")
        if any(isinstance(s, int) for s in segments):
            raise AlignmentError(
                "labeled trees need subword strings, not counts")
        it = iter(segments)

        def expand_labeled(node):
            if isinstance(node, str):
                pieces = list(next(it))
                if len(pieces) == 1:
                    return pieces[0]
                grouped = left_branching_group(pieces)

                def to_labeled(t):
                    if isinstance(t, str):
                        return t
                    return LabeledNode("X", (to_labeled(t[0]), to_labeled(t[1])))

                return to_labeled(grouped)
            return LabeledNode(node.label,
                               tuple(expand_labeled(c) for c in node.children))

        return expand_labeled(word_tree)

    n_words = leaf_count(word_tree)
    if n_words != len(counts):
        raise AlignmentError(
            f"segmentation covers {len(counts)} words, tree has {n_words}")
    offsets = np.concatenate([[0], np.cumsum(counts)])

    def expand(node):
        if isinstance(node, int):
            lo, hi = int(offsets[node]), int(offsets[node + 1])
            return left_branching_group(list(range(lo, hi)))
        return (expand(node[0]), expand(node[1]))

    return expand(word_tree)


# -- PTB-style I/O -----------------------------------------------------------


def parse_ptb(text: str) -> LabeledTree:
    """Parse one "(LABEL child ...)" s-expression.

    An empty label is tolerated (ROOT-style wrappers); a constituent
    with no children is an error at its closing paren.
    """
    pos = 0
    n = len(text)

    def skip_ws():
        nonlocal pos
        while pos < n and text[pos].isspace():
            pos += 1

    def read_symbol() -> str:
        nonlocal pos
        start = pos
        while pos < n and not text[pos].isspace() and text[pos] not in "()":
            pos += 1
        return text[start:pos]

    def read_node() -> LabeledTree:
        nonlocal pos
        skip_ws()
        if pos >= n:
            raise DataError(f"parse error at offset {pos}: unexpected end of input")
        if text[pos] != "(":
            tok = read_symbol()
            if not tok:
                raise DataError(f"parse error at offset {pos}: expected token or '('")
            return tok
        pos += 1  # consume '('
        skip_ws()
        label = ""
        if pos < n and text[pos] not in "()":
            label = read_symbol()
        children = []
        while True:
            skip_ws()
            if pos >= n:
                raise DataError(
                    f"parse error at offset {pos}: missing ')'")
            if text[pos] == ")":
                if not children:
                    raise DataError(
                        f"parse error at offset {pos}: constituent has no children")
                pos += 1
                return LabeledNode(label, tuple(children))
            children.append(read_node())

    skip_ws()
    if pos >= n:
        raise DataError("parse error at offset 0: empty input")
    tree = read_node()
    skip_ws()
    if pos != n:
        raise DataError(f"parse error at offset {pos}: trailing content")
    if isinstance(tree, str):
        raise DataError("parse error at offset 0: expected '('")
    return tree


def write_ptb(tree: LabeledTree) -> str:
    if isinstance(tree, str):
        return tree
    inner = " ".join(write_ptb(c) for c in tree.children)
    return f"({tree.label} {inner})" if tree.label else f"( {inner})"


def tree_to_labeled(tree: Tree, tokens: list[str], label: str = "X") -> LabeledTree:
    """Attach tokens to a position tree; every internal node labeled `label`."""
    if isinstance(tree, int):
        return tokens[tree]
    if leaf_count(tree) != len(tokens):
        raise AlignmentError(
            f"tree has {leaf_count(tree)} leaves, got {len(tokens)} tokens")

    def convert(node):
        if isinstance(node, int):
            return tokens[node]
        return LabeledNode(label, (convert(node[0]), convert(node[1])))

    return convert(tree)


def labeled_to_positions(tree: LabeledTree) -> Tree:
    """Left-binarize an n-ary labeled tree into a position-indexed tree."""
    counter = [0]

    def convert(node):
        if isinstance(node, str):
            counter[0] += 1
            return counter[0] - 1
        kids = [convert(c) for c in node.children]
        return left_branching_group(kids)

    return convert(tree)


def read_parse_file(path) -> list[LabeledTree]:
    trees = []
    for lineno, line in enumerate(open(path, encoding="utf-8"), 1):
        line = line.strip()
        if not line:
            continue
        try:
            trees.append(parse_ptb(line))
        except DataError as exc:
            raise DataError(f"{path}:{lineno}: {exc}") from exc
    if not trees:
        raise DataError(f"{path}: no parses found")
    return trees


def write_parse_file(path, trees: list[LabeledTree]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for tree in trees:
            fh.write(write_ptb(tree) + "\n")
