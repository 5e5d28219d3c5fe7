"""Yearly prevalence measurement with false-positive/false-negative correction."""

from __future__ import annotations

import csv
from dataclasses import asdict, dataclass
from typing import IO, Iterable, Mapping

from harmlens.corpus import Document, sample
from harmlens.dedup import canonical_documents, group_duplicates
from harmlens.errors import ContractError
from harmlens.lexicon import CompiledMatcher

REVIEW_TEXT_CHARS = 500
REVIEW_COLUMNS = ("domain", "title", "text", "label")
POSITIVE_LABELS = {"1", "y", "yes", "true", "positive", "pos"}
NEGATIVE_LABELS = {"0", "n", "no", "false", "negative", "neg"}


def corrected_share(matches: int, unique: int, fp_rate: float, fn_rate: float) -> float:
    """Share of sites that are truly positive, given detector error rates.

    ``fp_rate`` is the fraction of matched sites that are not positive and
    ``fn_rate`` the fraction of unmatched sites that are. The estimate
    keeps the true matches and adds the expected misses::

        (M * (1 - fp_rate) + (N - M) * fn_rate) / N
    """
    if unique <= 0:
        raise ContractError("corrected_share needs N > 0 unique sites")
    if not 0 <= matches <= unique:
        raise ContractError(f"match count M={matches} must lie in [0, N={unique}]")
    for name, r in (("fp_rate", fp_rate), ("fn_rate", fn_rate)):
        if not 0.0 <= r <= 1.0:
            raise ContractError(f"{name} must be in [0, 1], got {r}")
    return (matches * (1.0 - fp_rate) + (unique - matches) * fn_rate) / unique


@dataclass(frozen=True)
class PrevalenceEstimate:
    period: str
    sample_size: int
    unique_sites: int
    raw_matches: int
    fp_rate: float
    fn_rate: float
    corrected_share: float
    # matches before mirror collapsing, kept so the dedup effect stays visible
    sampled_matches: int = 0
    seed: int | None = None
    lexicon: str = ""

    @property
    def raw_share(self) -> float:
        return self.raw_matches / self.unique_sites if self.unique_sites else 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["raw_share"] = self.raw_share
        return d


def yearly_pipeline(corpus: list[Document], matcher: CompiledMatcher, k: int, seed: int,
                    fp_rate: float, fn_rate: float, period: str = "") -> PrevalenceEstimate:
    """Sample ``k`` domains, collapse mirrors, scan canonical sites, correct."""
    picked = sample(corpus, k, seed)
    groups = group_duplicates(picked)
    canon = canonical_documents(picked, groups)
    flagged = {d.domain for d in picked if matcher.matches(d.text)}
    raw = sum(1 for d in canon if d.domain in flagged)
    unique = len(canon)
    share = corrected_share(raw, unique, fp_rate, fn_rate) if unique else 0.0
    return PrevalenceEstimate(
        period=period, sample_size=k, unique_sites=unique, raw_matches=raw,
        fp_rate=fp_rate, fn_rate=fn_rate, corrected_share=share,
        sampled_matches=len(flagged), seed=seed, lexicon=matcher.name,
    )


def manual_sample(corpus: list[Document], k: int = 1000, seed: int = 0) -> list[dict]:
    """Review-sheet rows for ``k`` randomly chosen domains, label left blank."""
    return [
        {"domain": d.domain, "title": d.title,
         "text": d.body_text[:REVIEW_TEXT_CHARS], "label": ""}
        for d in sample(corpus, k, seed)
    ]


def write_review_sheet(rows: Iterable[Mapping], fh: IO[str]) -> None:
    w = csv.DictWriter(fh, fieldnames=REVIEW_COLUMNS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({c: r.get(c, "") for c in REVIEW_COLUMNS})


def read_review_labels(fh: IO[str]) -> dict[str, bool]:
    """Annotated review sheet -> domain -> is positive. Blank labels are skipped."""
    out = {}
    for i, row in enumerate(csv.DictReader(fh), 2):
        label = (row.get("label") or "").strip().lower()
        if not label:
            continue
        if label in POSITIVE_LABELS:
            out[row["domain"]] = True
        elif label in NEGATIVE_LABELS:
            out[row["domain"]] = False
        else:
            raise ContractError(f"review sheet row {i}: unrecognised label {label!r}")
    return out


@dataclass(frozen=True)
class ErrorRates:
    fp_rate: float
    fn_rate: float
    flagged: int
    false_positives: int
    unflagged: int
    false_negatives: int


def rates_from_counts(flagged: int, false_positives: int, unflagged: int,
                      false_negatives: int) -> ErrorRates:
    fp = false_positives / flagged if flagged else 0.0
    fn = false_negatives / unflagged if unflagged else 0.0
    return ErrorRates(fp, fn, flagged, false_positives, unflagged, false_negatives)


def estimate_rates(labels: Mapping[str, bool], docs: Iterable[Document],
                   matcher: CompiledMatcher) -> ErrorRates:
    """Detector error rates on annotated documents.

    fp_rate = labelled-negative among matched, fn_rate = labelled-positive
    among unmatched; the same conditioning the correction formula uses.
    """
    flagged = fps = unflagged = fns = 0
    for d in docs:
        if d.domain not in labels:
            continue
        truth = labels[d.domain]
        if matcher.matches(d.text):
            flagged += 1
            fps += not truth
        else:
            unflagged += 1
            fns += truth
    if flagged + unflagged == 0:
        raise ContractError("no annotated documents overlap the corpus")
    return rates_from_counts(flagged, fps, unflagged, fns)
