"""Exact-age and broad age-term extraction from search sessions."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from typing import IO, Iterable

from harmlens.errors import ContractError
from harmlens.lexicon import CompiledMatcher, LexiconPattern, parse_pattern
from harmlens.sessions import Session

MIN_AGE, MAX_AGE = 0, 19
AGE_WORDS = (
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
    "ten", "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen",
    "seventeen", "eighteen", "nineteen",
)
# Numeric-year separators: "13y", "13 y", "13+y", "13-y".
YEAR_SEPARATORS = ("", " ", "+", "-")
BROAD_TERMS = ("toddler", "infant", "baby", "pthc", "preteen", "lolita", "teen")
# Broad terms counted only inside sessions flagged by the target lexicon.
TARGET_ONLY_TERMS = frozenset({"teen"})


@dataclass(frozen=True)
class AgePatternSet:
    age: int
    patterns: tuple[LexiconPattern, ...]


def build_age_patterns(age: int) -> AgePatternSet:
    if not isinstance(age, int) or not MIN_AGE <= age <= MAX_AGE:
        raise ContractError(f"age must be an integer in {MIN_AGE}..{MAX_AGE}, got {age!r}")
    word = AGE_WORDS[age]
    raws = [f"{age}{sep}y*" for sep in YEAR_SEPARATORS]
    if age >= 13:
        raws.append(f"{age}teen")
    raws += [f"{word} year*", f"{word}-year*"]
    raws += [f"{age}{noun}" for noun in ("boy", "boys", "girl", "girls")]
    return AgePatternSet(age, tuple(parse_pattern(r, boundary=True) for r in raws))


@lru_cache(maxsize=1)
def _age_matcher() -> tuple[CompiledMatcher, dict[str, int]]:
    pats, owner = [], {}
    for age in range(MIN_AGE, MAX_AGE + 1):
        for p in build_age_patterns(age).patterns:
            pats.append(p)
            owner[p.raw] = age
    return CompiledMatcher(pats, name="ages"), owner


def extract_ages_text(text: str) -> set[int]:
    matcher, owner = _age_matcher()
    return {owner[raw] for raw in matcher.match_text(text).patterns}


def extract_ages(session: Session) -> set[int]:
    """Union of exact ages mentioned by any query of the session."""
    out: set[int] = set()
    for _, q in session.queries:
        out |= extract_ages_text(q)
    return out


def broad_term_matcher(terms: Iterable[str] = BROAD_TERMS) -> CompiledMatcher:
    return CompiledMatcher([parse_pattern(f"{t}(s)", boundary=True) for t in terms], name="broad-age")


@dataclass
class AgeHistogram:
    exact_counts: dict[int, int] = field(
        default_factory=lambda: {a: 0 for a in range(MIN_AGE, MAX_AGE + 1)})
    broad_counts: dict[str, int] = field(default_factory=lambda: {t: 0 for t in BROAD_TERMS})
    age_sessions: int = 0

    def exact_shares(self) -> dict[int, float]:
        """Each age's count as a fraction of age-revealing sessions."""
        n = self.age_sessions
        return {a: (c / n if n else 0.0) for a, c in self.exact_counts.items()}

    def write_exact_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["age", "count"])
        for age in range(MIN_AGE, MAX_AGE + 1):
            w.writerow([age, self.exact_counts[age]])

    def write_broad_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["term", "count"])
        for term, n in self.broad_counts.items():
            w.writerow([term, n])

    def to_dict(self) -> dict:
        return {
            "age_sessions": self.age_sessions,
            "exact_counts": {str(k): v for k, v in self.exact_counts.items()},
            "broad_counts": self.broad_counts,
        }


def age_histogram(sessions: Iterable[Session], target: CompiledMatcher | None,
                  terms: Iterable[str] = BROAD_TERMS) -> AgeHistogram:
    """Per-session counts of exact ages and broad age terms.

    A session mentioning several ages counts once toward each. Terms in
    :data:`TARGET_ONLY_TERMS` count only in sessions the target lexicon
    flags; with ``target=None`` those terms are never counted.
    """
    terms = tuple(terms)
    hist = AgeHistogram(broad_counts={t: 0 for t in terms})
    broad = broad_term_matcher(terms)
    term_of = {p.raw: t for p, t in zip(broad.patterns, terms)}
    for s in sessions:
        ages = extract_ages(s)
        if ages:
            hist.age_sessions += 1
            for a in ages:
                hist.exact_counts[a] += 1
        found: set[str] = set()
        for _, q in s.queries:
            found.update(term_of[raw] for raw in broad.match_text(q).patterns)
        if found & TARGET_ONLY_TERMS:
            flagged = target is not None and any(target.matches(q) for _, q in s.queries)
            if not flagged:
                found -= TARGET_ONLY_TERMS
        for t in found:
            hist.broad_counts[t] += 1
    return hist
