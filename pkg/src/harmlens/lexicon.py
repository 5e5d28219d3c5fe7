"""Shareable phrase lexicons and a single-pass multi-pattern matcher.

Lexicon file format (UTF-8)::

    # comment
    !id: demo-target
    !version: 3
    !category: target
    !boundary: auto        # auto | on | off, applies to the patterns below
    placeholder phrase
    kitten(s)              # optional suffix: "kitten" or "kittens"
    13y*                   # trailing wildcard: any token starting "13y"
    13+y(*)                # same as 13+y*

Matching is Unicode case-folded. A boundary pattern may not start or end
inside a token (a token is a run of letters/digits); a wildcard pattern
only checks the start. With ``!boundary: auto`` a pattern is boundary
matched when its shortest expansion is at most five characters long.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable

from harmlens.errors import ContractError, LexiconError

CATEGORIES = ("target", "sexual", "survey-trigger", "violence", "gender-girl", "gender-boy")
AUTO_BOUNDARY_MAX_LEN = 5

_GROUP = re.compile(r"^(?P<head>[^()*]+)\((?P<opt>[^()*]+|\*)\)(?P<tail>[^()*]*)$")


class PatternKind(str, Enum):
    LITERAL = "literal"
    OPTIONAL_SUFFIX = "optional-suffix"
    TRAILING_WILDCARD = "trailing-wildcard"


@dataclass(frozen=True)
class LexiconPattern:
    raw: str
    kind: PatternKind
    boundary: bool
    # Case-folded literal expansions; a wildcard pattern has one stem.
    alternatives: tuple[str, ...] = field(compare=False)

    @property
    def wildcard(self) -> bool:
        return self.kind is PatternKind.TRAILING_WILDCARD


def _is_word(c: str) -> bool:
    return c.isalnum()


def parse_pattern(raw: str, boundary: bool | None = None) -> LexiconPattern:
    """Parse one pattern; ``boundary=None`` applies the length rule."""
    text = " ".join(raw.split())
    if not text:
        raise LexiconError("empty pattern")
    m = _GROUP.match(text)
    if m:
        head, opt, tail = m.group("head"), m.group("opt"), m.group("tail")
        if not _is_word(head[-1]):
            raise LexiconError(f"suffix group must follow a token in {raw!r}")
        if tail and _is_word(tail[0]):
            raise LexiconError(f"suffix group must end a token in {raw!r}")
        if opt == "*":
            if tail:
                raise LexiconError(f"wildcard group must end the pattern in {raw!r}")
            kind, alts = PatternKind.TRAILING_WILDCARD, (head,)
        else:
            if not opt.strip() or opt != opt.strip():
                raise LexiconError(f"malformed suffix group in {raw!r}")
            kind, alts = PatternKind.OPTIONAL_SUFFIX, (head + tail, head + opt + tail)
    elif "(" in text or ")" in text:
        raise LexiconError(f"malformed '(...)' group in {raw!r}")
    elif text.endswith("*"):
        stem = text[:-1].rstrip()
        if not stem or "*" in stem:
            raise LexiconError(f"'*' is only allowed once, at the end, in {raw!r}")
        kind, alts = PatternKind.TRAILING_WILDCARD, (stem,)
    elif "*" in text:
        raise LexiconError(f"'*' is only allowed at the end of {raw!r}")
    else:
        kind, alts = PatternKind.LITERAL, (text,)
    folded = tuple(dict.fromkeys(a.casefold() for a in alts))
    if boundary is None:
        boundary = min(len(a) for a in folded) <= AUTO_BOUNDARY_MAX_LEN
    return LexiconPattern(raw=text, kind=kind, boundary=boundary, alternatives=folded)


@dataclass(frozen=True)
class Lexicon:
    id: str
    version: str
    category: str
    patterns: tuple[LexiconPattern, ...]

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ContractError(f"unknown lexicon category {self.category!r}")
        raws = [p.raw for p in self.patterns]
        if len(set(raws)) != len(raws):
            raise ContractError("lexicon pattern raw strings must be unique")

    def to_text(self) -> str:
        lines = [f"!id: {self.id}", f"!version: {self.version}", f"!category: {self.category}"]
        current = None
        for p in self.patterns:
            if p.boundary != current:
                lines.append(f"!boundary: {'on' if p.boundary else 'off'}")
                current = p.boundary
            lines.append(p.raw)
        return "\n".join(lines) + "\n"


def parse_lexicon(text: str) -> Lexicon:
    """Parse lexicon file text; errors carry the offending line number."""
    header: dict[str, str] = {}
    boundary: bool | None = None
    patterns: list[LexiconPattern] = []
    seen: dict[str, int] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        if s.startswith("!"):
            key, sep, value = s[1:].partition(":")
            key, value = key.strip().lower(), value.strip()
            if not sep:
                raise LexiconError(f"malformed directive {s!r}", lineno)
            if key == "boundary":
                modes = {"auto": None, "on": True, "off": False}
                if value.lower() not in modes:
                    raise LexiconError(f"boundary must be auto, on or off, got {value!r}", lineno)
                boundary = modes[value.lower()]
            elif key in ("id", "version", "category"):
                if key in header:
                    raise LexiconError(f"repeated directive !{key}", lineno)
                if key == "category" and value not in CATEGORIES:
                    raise LexiconError(f"unknown category {value!r}", lineno)
                header[key] = value
            else:
                raise LexiconError(f"unknown directive !{key}", lineno)
            continue
        try:
            pat = parse_pattern(s, boundary)
        except LexiconError as exc:
            raise LexiconError(str(exc), lineno) from None
        key = pat.raw.casefold()
        if key in seen:
            raise LexiconError(f"duplicate pattern {pat.raw!r} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        patterns.append(pat)
    if "category" not in header:
        raise LexiconError("missing !category directive")
    if not patterns:
        raise LexiconError("empty lexicon")
    return Lexicon(
        id=header.get("id", "unnamed"),
        version=header.get("version", "0"),
        category=header["category"],
        patterns=tuple(patterns),
    )


def load_lexicon(path) -> Lexicon:
    return parse_lexicon(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class MatchResult:
    matched: bool
    hits: tuple[tuple[str, int], ...]
    scanned_length: int

    @property
    def patterns(self) -> list[str]:
        """Distinct matched pattern strings in first-hit order."""
        return list(dict.fromkeys(raw for raw, _ in self.hits))


def fold_with_map(text: str) -> tuple[str, list[int] | None]:
    """Case-fold ``text``; the map sends folded indices to original ones.

    ``None`` means the identity map (no character changed length).
    """
    folded = text.casefold()
    if len(folded) == len(text):
        return folded, None
    out: list[str] = []
    index: list[int] = []
    for i, c in enumerate(text):
        f = c.casefold()
        out.append(f)
        index.extend([i] * len(f))
    return "".join(out), index


class _Node:
    __slots__ = ("goto", "fail", "out")

    def __init__(self):
        self.goto: dict[str, _Node] = {}
        self.fail: _Node | None = None
        # (pattern index, alternative length)
        self.out: tuple[tuple[int, int], ...] = ()


class CompiledMatcher:
    """Immutable Aho-Corasick automaton over case-folded pattern expansions."""

    def __init__(self, patterns: Iterable[LexiconPattern], category: str | None = None,
                 name: str = ""):
        self.patterns: tuple[LexiconPattern, ...] = tuple(patterns)
        self.category = category
        self.name = name
        self._root = root = _Node()
        for idx, pat in enumerate(self.patterns):
            for alt in pat.alternatives:
                node = root
                for ch in alt:
                    node = node.goto.setdefault(ch, _Node())
                node.out = node.out + ((idx, len(alt)),)
        root.fail = root
        queue: deque[_Node] = deque()
        for child in root.goto.values():
            child.fail = root
            queue.append(child)
        while queue:
            node = queue.popleft()
            for ch, child in node.goto.items():
                f = node.fail
                while f is not root and ch not in f.goto:
                    f = f.fail
                child.fail = f.goto[ch] if ch in f.goto and f.goto[ch] is not child else root
                child.out = child.out + child.fail.out
                queue.append(child)

    def __repr__(self):
        return f"CompiledMatcher({self.name or self.category!r}, {len(self.patterns)} patterns)"

    def match_text(self, text: str) -> MatchResult:
        folded, index = fold_with_map(text)
        n = len(folded)
        root = self._root
        node = root
        found: set[tuple[int, int]] = set()
        pats = self.patterns
        for i, ch in enumerate(folded):
            while node is not root and ch not in node.goto:
                node = node.fail
            node = node.goto.get(ch, root)
            for idx, length in node.out:
                start = i - length + 1
                pat = pats[idx]
                if pat.boundary:
                    if start > 0 and folded[start - 1].isalnum() and folded[start].isalnum():
                        continue
                    if not pat.wildcard and i + 1 < n and folded[i].isalnum() and folded[i + 1].isalnum():
                        continue
                found.add((idx, start))
        return _result(text, pats, found, index)

    def matches(self, text: str) -> bool:
        return self.match_text(text).matched


def _result(text: str, pats, found, index) -> MatchResult:
    if not found:
        return MatchResult(False, (), len(text.encode("utf-8")))
    if index is not None:
        found = {(idx, index[s]) for idx, s in found}
    if not text.isascii():
        prefix = [0]
        for c in text:
            prefix.append(prefix[-1] + len(c.encode("utf-8")))
        found = {(idx, prefix[s]) for idx, s in found}
    hits = sorted(((pats[idx].raw, s) for idx, s in found), key=lambda h: (h[1], h[0]))
    return MatchResult(True, tuple(hits), len(text.encode("utf-8")))


def compile_lexicon(lexicon: Lexicon) -> CompiledMatcher:
    return CompiledMatcher(lexicon.patterns, category=lexicon.category,
                           name=f"{lexicon.id}@{lexicon.version}")


def match_text(matcher: CompiledMatcher, text: str) -> MatchResult:
    return matcher.match_text(text)


def compile_patterns(raws: Iterable[str], category: str | None = None,
                     boundary: bool | None = None) -> CompiledMatcher:
    """Build a matcher straight from pattern strings."""
    return CompiledMatcher([parse_pattern(r, boundary) for r in raws], category=category)


def load_lexicon_dir(path) -> dict[str, CompiledMatcher]:
    """Compile every ``*.txt`` lexicon in a directory, merged per category."""
    by_cat: dict[str, dict[str, LexiconPattern]] = {}
    names: dict[str, list[str]] = {}
    files = sorted(Path(path).glob("*.txt"))
    if not files:
        raise ContractError(f"no lexicon files (*.txt) in {path}")
    for f in files:
        try:
            lex = load_lexicon(f)
        except LexiconError as exc:
            raise LexiconError(f"{f.name}: {exc}") from None
        pats = by_cat.setdefault(lex.category, {})
        for p in lex.patterns:
            pats.setdefault(p.raw, p)
        names.setdefault(lex.category, []).append(f"{lex.id}@{lex.version}")
    return {
        cat: CompiledMatcher(pats.values(), category=cat, name="+".join(names[cat]))
        for cat, pats in sorted(by_cat.items())
    }
