"""Seeded PCFG sampling of parallel corpora with gold trees.

Derivations are depth-capped: when the remaining height budget cannot
accommodate a rule, sampling falls back to the shortest-completing rule
(earliest in file order on ties), which skews rule frequencies only in
the rare capped expansions; the bias is recorded in the corpus manifest
by callers. Source sentences are derived from the target by a declared
transform: `dictmap` relabels every word through a bijective dictionary
into a disjoint source vocabulary; `dictmap+np-swap` additionally
reverses the children of every NP constituent, so source word order
depends on the gold tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import ConfigError, DataError
from .trees import LabeledNode, LabeledTree, labeled_leaves

SOURCE_SUFFIX = "_s"
TRANSFORMS = ("dictmap", "dictmap+np-swap")


@dataclass(frozen=True)
class Rule:
    lhs: str
    rhs: tuple[str, ...]
    prob: float


@dataclass(frozen=True)
class GrammarSample:
    target: list[str]
    gold: LabeledTree
    source: list[str]


class PCFG:
    def __init__(self, rules: list[Rule], start: str = "S", max_depth: int = 12):
        if not rules:
            raise ConfigError("grammar has no rules")
        self.rules = list(rules)
        self.start = start
        self.max_depth = max_depth
        self.by_lhs: dict[str, list[Rule]] = {}
        for r in rules:
            self.by_lhs.setdefault(r.lhs, []).append(r)
        self.nonterminals = set(self.by_lhs)
        self.terminals = sorted(
            {s for r in rules for s in r.rhs if s not in self.nonterminals})
        if start not in self.by_lhs:
            raise ConfigError(f"start symbol {start!r} has no rules")
        self._validate()
        self._min_height = self._completion_heights()

    def _validate(self) -> None:
        for lhs, rules in self.by_lhs.items():
            total = sum(r.prob for r in rules)
            if abs(total - 1.0) > 1e-9:
                raise ConfigError(
                    f"probabilities for {lhs!r} sum to {total}, not 1")
            if any(r.prob < 0 for r in rules):
                raise ConfigError(f"negative probability under {lhs!r}")

    def _completion_heights(self) -> dict[str, int]:
        """Min derivation height per symbol; terminals are height 0."""
        height = {t: 0 for t in self.terminals}
        inf = float("inf")
        for nt in self.nonterminals:
            height[nt] = inf
        for _ in range(len(self.nonterminals) + 1):
            changed = False
            for nt in self.nonterminals:
                best = min((1 + max(height[s] for s in r.rhs)
                            for r in self.by_lhs[nt]), default=inf)
                if best < height[nt]:
                    height[nt] = best
                    changed = True
            if not changed:
                break
        dead = [nt for nt in self.nonterminals if height[nt] == inf]
        if dead:
            raise ConfigError(
                f"symbols cannot derive finite sentences: {sorted(dead)}")
        return height

    def rule_height(self, rule: Rule) -> int:
        return 1 + max(self._min_height[s] for s in rule.rhs)

    @classmethod
    def parse(cls, text: str, start: str = "S", max_depth: int = 12) -> "PCFG":
        """One rule per line: "lhs -> rhs symbols : prob"; '#' comments."""
        rules = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "->" not in line or ":" not in line:
                raise ConfigError(f"line {lineno}: expected 'lhs -> rhs : prob'")
            head, rest = line.split("->", 1)
            body, prob_text = rest.rsplit(":", 1)
            lhs = head.strip()
            rhs = tuple(body.split())
            if not lhs or not rhs:
                raise ConfigError(f"line {lineno}: empty lhs or rhs")
            try:
                prob = float(prob_text)
            except ValueError as exc:
                raise ConfigError(f"line {lineno}: bad probability "
                                  f"{prob_text.strip()!r}") from exc
            rules.append(Rule(lhs, rhs, prob))
        return cls(rules, start=start, max_depth=max_depth)

    @classmethod
    def load(cls, path, start: str = "S", max_depth: int = 12) -> "PCFG":
        with open(path, encoding="utf-8") as fh:
            return cls.parse(fh.read(), start=start, max_depth=max_depth)


def default_grammar(max_depth: int = 12) -> PCFG:
    text = resources.files("ltseq").joinpath("grammars/default.txt").read_text("utf-8")
    return PCFG.parse(text, max_depth=max_depth)


def copy_grammar(vocab_size: int = 200, min_len: int = 3,
                 max_len: int = 10) -> PCFG:
    """Flat grammar: uniform length in [min_len, max_len], uniform words."""
    if vocab_size < 1 or min_len < 1 or max_len < min_len:
        raise ConfigError("copy grammar needs vocab_size>=1, 1<=min_len<=max_len")
    n_lens = max_len - min_len + 1
    rules = [Rule("S", ("W",) * k, 1.0 / n_lens)
             for k in range(min_len, max_len + 1)]
    rules += [Rule("W", (f"w{i:03d}",), 1.0 / vocab_size)
              for i in range(vocab_size)]
    return PCFG(rules, start="S", max_depth=3)


def resolve_grammar(spec: str, max_depth: int = 12) -> PCFG:
    """Map a CLI --grammar value (default | copy | path) to a PCFG."""
    if spec == "default":
        return default_grammar(max_depth=max_depth)
    if spec == "copy":
        return copy_grammar()
    return PCFG.load(spec, max_depth=max_depth)


# -- sampling -----------------------------------------------------------------


def sample_tree(grammar: PCFG, rng: np.random.Generator) -> LabeledTree:
    def expand(symbol: str, budget: int):
        if symbol not in grammar.nonterminals:
            return symbol
        rules = grammar.by_lhs[symbol]
        allowed = [r for r in rules if grammar.rule_height(r) <= budget]
        if not allowed:
            rule = min(rules, key=grammar.rule_height)
        elif len(allowed) == len(rules):
            probs = np.array([r.prob for r in rules])
            rule = rules[rng.choice(len(rules), p=probs)]
        else:
            probs = np.array([r.prob for r in allowed])
            rule = allowed[rng.choice(len(allowed), p=probs / probs.sum())]
        return LabeledNode(symbol,
                           tuple(expand(s, budget - 1) for s in rule.rhs))

    return expand(grammar.start, grammar.max_depth)


def build_dictionary(grammar: PCFG) -> dict[str, str]:
    """Bijective word map into a disjoint source-side vocabulary."""
    mapping = {w: w + SOURCE_SUFFIX for w in grammar.terminals}
    clash = set(mapping.values()) & set(grammar.terminals)
    if clash:
        raise DataError(
            f"grammar terminals collide with source vocabulary: {sorted(clash)}")
    return mapping


def np_swap(tree: LabeledTree) -> LabeledTree:
    """Reverse the children order inside every NP constituent."""
    if isinstance(tree, str):
        return tree
    children = tuple(np_swap(c) for c in tree.children)
    if tree.label == "NP":
        children = children[::-1]
    return LabeledNode(tree.label, children)


def derive_source(target: list[str], tree: LabeledTree, transform: str,
                  dictionary: dict[str, str]) -> list[str]:
    if transform not in TRANSFORMS:
        raise ConfigError(f"unknown transform {transform!r}; "
                          f"expected one of {TRANSFORMS}")
    words = target if transform == "dictmap" else labeled_leaves(np_swap(tree))
    missing = [w for w in words if w not in dictionary]
    if missing:
        raise DataError(f"words missing from dictionary: {sorted(set(missing))}")
    return [dictionary[w] for w in words]


def sample(grammar: PCFG, seed: int, count: int,
           transform: str = "dictmap") -> list[GrammarSample]:
    """Deterministic per (seed, index); shards may be drawn independently."""
    if transform not in TRANSFORMS:
        raise ConfigError(f"unknown transform {transform!r}")
    dictionary = build_dictionary(grammar)
    samples = []
    for i in range(count):
        rng = np.random.default_rng(
            np.random.SeedSequence(entropy=seed, spawn_key=(i,)))
        gold = sample_tree(grammar, rng)
        target = labeled_leaves(gold)
        source = derive_source(target, gold, transform, dictionary)
        samples.append(GrammarSample(target, gold, source))
    return samples
