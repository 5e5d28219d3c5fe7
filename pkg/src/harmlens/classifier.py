"""Bernoulli naive Bayes and ID3-style decision tree over token presence."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from harmlens.errors import ContractError

POSITIVE = "positive"
NEGATIVE = "negative"
LABELS = (POSITIVE, NEGATIVE)
MODEL_FORMAT = "harmlens-nb/1"
DT_FORMAT = "harmlens-dt/1"

_TOKEN = re.compile(r"[^\W_]+")


def featurize(text: str) -> frozenset[str]:
    """Distinct lowercased letter/digit runs of length >= 2."""
    return frozenset(t for t in _TOKEN.findall(text.lower()) if len(t) >= 2)


@dataclass(frozen=True)
class LabeledExample:
    text: str
    label: str

    def __post_init__(self):
        if self.label not in LABELS:
            raise ContractError(f"label must be one of {LABELS}, got {self.label!r}")
        if not self.text.strip():
            raise ContractError("example text must be non-empty")

    @classmethod
    def from_dict(cls, raw: Mapping) -> LabeledExample:
        return cls(text=str(raw["text"]), label=str(raw["label"]))


def read_examples(path) -> list[LabeledExample]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                out.append(LabeledExample.from_dict(json.loads(line)))
            except (ValueError, KeyError, TypeError) as exc:
                raise ContractError(f"{path}:{lineno}: bad labeled example: {exc}") from exc
    return out


def _log1mexp(logp: float) -> float:
    """log(1 - exp(logp)) for logp < 0."""
    return math.log(-math.expm1(logp)) if logp > -0.693 else math.log1p(-math.exp(logp))


@dataclass
class NBModel:
    class_log_priors: dict[str, float]
    token_log_likelihood: dict[tuple[str, str], float]
    vocabulary: frozenset[str]
    smoothing_alpha: float
    _absent_total: dict[str, float] = field(init=False, repr=False, compare=False)
    _delta: dict[str, dict[str, float]] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        # score(c) = prior + sum over vocab of log P(absent|c)
        #            + sum over present tokens of [log P(present|c) - log P(absent|c)]
        self._absent_total = {c: 0.0 for c in LABELS}
        self._delta = {c: {} for c in LABELS}
        for tok in sorted(self.vocabulary):
            for c in LABELS:
                lp = self.token_log_likelihood[(tok, c)]
                la = _log1mexp(lp)
                self._absent_total[c] += la
                self._delta[c][tok] = lp - la

    def log_absent(self, token: str, label: str) -> float:
        return _log1mexp(self.token_log_likelihood[(token, label)])

    def log_joint(self, tokens: Iterable[str]) -> dict[str, float]:
        toks = [t for t in set(tokens) if t in self.vocabulary]
        return {
            c: self.class_log_priors[c] + self._absent_total[c] + math.fsum(self._delta[c][t] for t in toks)
            for c in LABELS
        }

    def to_dict(self) -> dict:
        return {
            "format_version": MODEL_FORMAT,
            "alpha": self.smoothing_alpha,
            "priors": dict(sorted(self.class_log_priors.items())),
            "vocabulary": sorted(self.vocabulary),
            "likelihoods": [
                [tok, c, self.token_log_likelihood[(tok, c)]]
                for tok in sorted(self.vocabulary) for c in LABELS
            ],
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> NBModel:
        if raw.get("format_version") != MODEL_FORMAT:
            raise ContractError(
                f"unsupported model format {raw.get('format_version')!r}, expected {MODEL_FORMAT}"
            )
        vocab = frozenset(raw["vocabulary"])
        lik = {(t, c): float(lp) for t, c, lp in raw["likelihoods"]}
        missing = [t for t in vocab for c in LABELS if (t, c) not in lik]
        if missing:
            raise ContractError(f"model is missing likelihoods for {len(missing)} entries")
        return cls(
            class_log_priors={c: float(v) for c, v in raw["priors"].items()},
            token_log_likelihood=lik,
            vocabulary=vocab,
            smoothing_alpha=float(raw["alpha"]),
        )


def train_nb(positives: list[LabeledExample], negatives: list[LabeledExample],
             alpha: float = 0.5) -> NBModel:
    """Fit presence likelihoods ``(count + alpha) / (class_size + 2 alpha)``."""
    if not positives or not negatives:
        raise ContractError("naive Bayes training needs at least one example per class")
    if not alpha > 0:
        raise ContractError(f"smoothing alpha must be positive, got {alpha}")
    counts = {}
    sizes = {POSITIVE: len(positives), NEGATIVE: len(negatives)}
    for label, examples in ((POSITIVE, positives), (NEGATIVE, negatives)):
        c = Counter()
        for ex in examples:
            c.update(featurize(ex.text))
        counts[label] = c
    vocab = frozenset(counts[POSITIVE]) | frozenset(counts[NEGATIVE])
    total = sizes[POSITIVE] + sizes[NEGATIVE]
    priors = {c: math.log(sizes[c] / total) for c in LABELS}
    lik = {
        (tok, c): math.log((counts[c][tok] + alpha) / (sizes[c] + 2 * alpha))
        for tok in vocab for c in LABELS
    }
    return NBModel(priors, lik, vocab, alpha)


def predict_nb(model: NBModel, text: str) -> tuple[str, float]:
    """Return the label and ``P(positive | text)``; ties go to negative."""
    joint = model.log_joint(featurize(text))
    diff = joint[NEGATIVE] - joint[POSITIVE]
    # logistic of the log-odds, kept strictly inside (0, 1)
    if diff > 0:
        e = math.exp(-diff)
        p = e / (1.0 + e)
    else:
        p = 1.0 / (1.0 + math.exp(diff))
    p = min(max(p, 5e-324), math.nextafter(1.0, 0.0))
    label = POSITIVE if joint[POSITIVE] > joint[NEGATIVE] else NEGATIVE
    return label, p


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model.to_dict(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_model(path) -> NBModel | DTModel:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if raw.get("format_version") == DT_FORMAT:
        return DTModel.from_dict(raw)
    return NBModel.from_dict(raw)


# -- decision tree -----------------------------------------------------------

@dataclass(frozen=True)
class DTNode:
    """Internal node when ``token`` is set, otherwise a leaf."""

    label: str
    purity: float
    n: int
    token: str | None = None
    present: DTNode | None = None
    absent: DTNode | None = None

    @property
    def is_leaf(self) -> bool:
        return self.token is None

    def to_dict(self) -> dict:
        d = {"label": self.label, "purity": self.purity, "n": self.n}
        if self.token is not None:
            d.update(token=self.token, present=self.present.to_dict(), absent=self.absent.to_dict())
        return d

    @classmethod
    def from_dict(cls, raw: Mapping) -> DTNode:
        if "token" in raw:
            return cls(raw["label"], raw["purity"], raw["n"], raw["token"],
                       cls.from_dict(raw["present"]), cls.from_dict(raw["absent"]))
        return cls(raw["label"], raw["purity"], raw["n"])


@dataclass(frozen=True)
class DTModel:
    root: DTNode
    max_depth: int
    vocabulary: frozenset[str]

    def depth(self) -> int:
        def walk(node):
            return 0 if node.is_leaf else 1 + max(walk(node.present), walk(node.absent))
        return walk(self.root)

    def to_dict(self) -> dict:
        return {"format_version": DT_FORMAT, "max_depth": self.max_depth,
                "vocabulary": sorted(self.vocabulary), "root": self.root.to_dict()}

    @classmethod
    def from_dict(cls, raw: Mapping) -> DTModel:
        return cls(DTNode.from_dict(raw["root"]), int(raw["max_depth"]), frozenset(raw["vocabulary"]))


def _entropy(pos: int, n: int) -> float:
    if n == 0 or pos == 0 or pos == n:
        return 0.0
    p = pos / n
    return -(p * math.log2(p) + (1 - p) * math.log2(1 - p))


def _leaf(rows) -> DTNode:
    n = len(rows)
    pos = sum(1 for _, y in rows if y == POSITIVE)
    label = POSITIVE if pos > n - pos else NEGATIVE
    purity = max(pos, n - pos) / n if n else 1.0
    return DTNode(label, purity, n)


def _grow(rows, depth: int, max_depth: int) -> DTNode:
    leaf = _leaf(rows)
    n = len(rows)
    pos = sum(1 for _, y in rows if y == POSITIVE)
    if depth >= max_depth or pos in (0, n):
        return leaf
    base = _entropy(pos, n)
    present_n = Counter()
    present_pos = Counter()
    for feats, y in rows:
        present_n.update(feats)
        if y == POSITIVE:
            present_pos.update(feats)
    best_tok, best_gain = None, 0.0
    for tok in sorted(present_n):
        k, kp = present_n[tok], present_pos[tok]
        if k == n:
            continue
        rem = (k / n) * _entropy(kp, k) + ((n - k) / n) * _entropy(pos - kp, n - k)
        gain = base - rem
        # strict improvement keeps the lexicographically smallest token on ties
        if gain > best_gain + 1e-12:
            best_tok, best_gain = tok, gain
    if best_tok is None:
        return leaf
    yes = [r for r in rows if best_tok in r[0]]
    no = [r for r in rows if best_tok not in r[0]]
    return DTNode(leaf.label, leaf.purity, n, best_tok,
                  _grow(yes, depth + 1, max_depth), _grow(no, depth + 1, max_depth))


def train_dt(positives: list[LabeledExample], negatives: list[LabeledExample],
             max_depth: int = 8) -> DTModel:
    """Greedy information-gain tree on token presence."""
    if not positives or not negatives:
        raise ContractError("decision tree training needs at least one example per class")
    if max_depth < 1:
        raise ContractError(f"max_depth must be >= 1, got {max_depth}")
    rows = [(featurize(e.text), POSITIVE) for e in positives]
    rows += [(featurize(e.text), NEGATIVE) for e in negatives]
    vocab = frozenset().union(*(f for f, _ in rows))
    return DTModel(_grow(rows, 0, max_depth), max_depth, vocab)


def predict_dt(model: DTModel, text: str) -> tuple[str, float]:
    """Return the leaf label and its training purity."""
    feats = featurize(text)
    node = model.root
    while not node.is_leaf:
        node = node.present if node.token in feats else node.absent
    return node.label, node.purity


def predict(model: NBModel | DTModel, text: str) -> tuple[str, float]:
    if isinstance(model, DTModel):
        return predict_dt(model, text)
    return predict_nb(model, text)


# -- evaluation --------------------------------------------------------------

@dataclass(frozen=True)
class EvalReport:
    accuracy: float
    per_class_accuracy: dict[str, float]
    false_positive_rate: float
    false_negative_rate: float
    n: int
    confusion: dict[str, int]

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "per_class_accuracy": self.per_class_accuracy,
            "false_positive_rate": self.false_positive_rate,
            "false_negative_rate": self.false_negative_rate,
            "n": self.n,
            "confusion": self.confusion,
        }


def evaluate(predict_fn: Callable[[str], object], examples: Iterable[LabeledExample]) -> EvalReport:
    """Score ``predict_fn`` (returning a label or ``(label, score)``)."""
    cm = Counter(tp=0, tn=0, fp=0, fn=0)
    for ex in examples:
        out = predict_fn(ex.text)
        label = out[0] if isinstance(out, tuple) else out
        if ex.label == POSITIVE:
            cm["tp" if label == POSITIVE else "fn"] += 1
        else:
            cm["fp" if label == POSITIVE else "tn"] += 1
    n = sum(cm.values())
    if n == 0:
        raise ContractError("cannot evaluate on an empty labeled set")
    n_pos, n_neg = cm["tp"] + cm["fn"], cm["tn"] + cm["fp"]
    fpr = cm["fp"] / n_neg if n_neg else 0.0
    fnr = cm["fn"] / n_pos if n_pos else 0.0
    per_class = {}
    if n_pos:
        per_class[POSITIVE] = cm["tp"] / n_pos
    if n_neg:
        per_class[NEGATIVE] = cm["tn"] / n_neg
    return EvalReport((cm["tp"] + cm["tn"]) / n, per_class, fpr, fnr, n, dict(cm))


def top_features(model: NBModel, k: int) -> list[tuple[str, float]]:
    """Tokens ranked by log P(present|positive) - log P(present|negative)."""
    if k < 1:
        raise ContractError(f"k must be >= 1, got {k}")
    rows = [
        (tok, model.token_log_likelihood[(tok, POSITIVE)] - model.token_log_likelihood[(tok, NEGATIVE)])
        for tok in model.vocabulary
    ]
    rows.sort(key=lambda r: (-r[1], r[0]))
    return rows[:k]


def features_to_lexicon(rows: list[tuple[str, float]], lexicon_id: str = "nb-top",
                        version: str = "1", category: str = "target") -> str:
    lines = [f"!id: {lexicon_id}", f"!version: {version}", f"!category: {category}",
             "!boundary: on"]
    lines += [f"# llr={ratio:.6f}\n{tok}" for tok, ratio in rows]
    return "\n".join(lines) + "\n"
