"""Website snapshot ingestion, markup-to-text extraction and domain sampling.

A corpus file is JSONL with one :class:`Document` per line, ordered by
domain. Snapshot input is JSONL of :class:`RawSnapshot` records.
"""

from __future__ import annotations

import json
import logging
import random
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html.parser import HTMLParser
from pathlib import PurePosixPath
from typing import IO, Iterable, Iterator
from urllib.parse import unquote, urlsplit

from harmlens.errors import ContractError

logger = logging.getLogger(__name__)

_SENTENCE_BREAK = re.compile(r"(?<=[.!?])\s+|\n+")
_MARKUP_CHARS = re.compile(r"[<>&]")

# Elements whose content never reaches the text representation.
_DROP = {"script", "style", "noscript", "template", "head"}
_BLOCK = {
    "p", "div", "br", "li", "ul", "ol", "tr", "td", "th", "table", "section",
    "article", "header", "footer", "nav", "aside", "main", "h1", "h2", "h3",
    "h4", "h5", "h6", "blockquote", "pre", "hr", "figure", "figcaption",
    "form", "dl", "dt", "dd", "body", "html", "title",
}
_HEADINGS = {"h1", "h2", "h3", "h4", "h5", "h6"}
_MEDIA = {"img", "video", "source", "audio", "embed"}


def _clean(text: str) -> str:
    return " ".join(_MARKUP_CHARS.sub(" ", text).split())


def sentence_split(text: str) -> list[str]:
    """Split on ``.``/``!``/``?`` followed by whitespace and on newlines.

    Sentences are lowercased with internal whitespace collapsed; a
    terminal punctuation mark is dropped with the break.
    """
    out = []
    for frag in _SENTENCE_BREAK.split(text):
        frag = " ".join(frag.split()).lower()
        if frag and frag[-1] in ".!?":
            frag = frag[:-1].rstrip()
        if frag:
            out.append(frag)
    return out


def _to_utc(value) -> datetime:
    if isinstance(value, bool):
        raise ValueError("boolean is not a timestamp")
    if isinstance(value, (int, float)):
        return datetime.fromtimestamp(int(value), tz=timezone.utc)
    if isinstance(value, str):
        s = value.strip()
        if s.endswith("Z"):
            s = s[:-1] + "+00:00"
        dt = datetime.fromisoformat(s)
        if dt.tzinfo is None:
            dt = dt.replace(tzinfo=timezone.utc)
        return dt.astimezone(timezone.utc).replace(microsecond=0)
    if isinstance(value, datetime):
        dt = value if value.tzinfo else value.replace(tzinfo=timezone.utc)
        return dt.astimezone(timezone.utc).replace(microsecond=0)
    raise ValueError(f"unsupported timestamp {value!r}")


def format_ts(dt: datetime) -> str:
    return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


@dataclass(frozen=True)
class RawSnapshot:
    domain: str
    url_path: str
    fetched_at: datetime
    markup: str

    def __post_init__(self):
        if not self.domain or self.domain != self.domain.lower():
            raise ValueError(f"domain must be non-empty lowercase: {self.domain!r}")

    @classmethod
    def from_dict(cls, raw: dict) -> RawSnapshot:
        if not isinstance(raw, dict):
            raise ValueError("snapshot record must be an object")
        domain = raw["domain"]
        markup = raw.get("markup", "")
        if not isinstance(domain, str) or not isinstance(markup, str):
            raise ValueError("domain and markup must be strings")
        return cls(
            domain=domain,
            url_path=str(raw.get("url_path", "/")),
            fetched_at=_to_utc(raw["fetched_at"]),
            markup=markup,
        )


@dataclass(frozen=True)
class Document:
    domain: str
    fetched_at: datetime
    title: str
    body_text: str
    sentences: tuple[str, ...]
    media_refs: tuple[tuple[str, str], ...] = ()

    @classmethod
    def build(cls, domain: str, fetched_at, title: str, body_text: str,
              media_refs: Iterable[tuple[str, str]] = ()) -> Document:
        """Create a Document, deriving ``sentences`` from ``body_text``."""
        return cls(
            domain=domain,
            fetched_at=_to_utc(fetched_at),
            title=title,
            body_text=body_text,
            sentences=tuple(sentence_split(body_text)),
            media_refs=tuple((f, c) for f, c in media_refs),
        )

    @property
    def text(self) -> str:
        """Title and body joined, the unit detectors scan."""
        if self.title and self.body_text:
            return f"{self.title} {self.body_text}"
        return self.title or self.body_text

    def to_dict(self) -> dict:
        return {
            "domain": self.domain,
            "fetched_at": format_ts(self.fetched_at),
            "title": self.title,
            "body_text": self.body_text,
            "sentences": list(self.sentences),
            "media_refs": [list(m) for m in self.media_refs],
        }

    @classmethod
    def from_dict(cls, raw: dict) -> Document:
        doc = cls.build(
            raw["domain"], raw["fetched_at"], raw.get("title", ""),
            raw.get("body_text", ""), [tuple(m) for m in raw.get("media_refs", [])],
        )
        if "sentences" in raw and list(raw["sentences"]) != list(doc.sentences):
            raise ValueError(f"sentences of {doc.domain} do not match body_text")
        return doc


@dataclass
class Extracted:
    title: str
    body_text: str
    media_refs: list[tuple[str, str]] = field(default_factory=list)


class _TextExtractor(HTMLParser):
    def __init__(self):
        super().__init__(convert_charrefs=True)
        self.parts: list[str] = []
        self.title_parts: list[str] = []
        self.heading_parts: list[str] = []
        self.first_heading: str | None = None
        self.media: list[list[str]] = []
        self._drop_depth = 0
        self._in_title = False
        self._heading_depth = 0
        self._figures: list[list[int]] = []
        self._caption_depth = 0
        self._caption_parts: list[str] = []

    def _emit(self, text: str) -> None:
        self.parts.append(text)
        if self._heading_depth and self.first_heading is None:
            self.heading_parts.append(text)
        if self._caption_depth:
            self._caption_parts.append(text)

    def handle_starttag(self, tag, attrs):
        if tag == "title":
            self._in_title = True
            return
        if tag in _DROP:
            self._drop_depth += 1
            return
        if self._drop_depth:
            return
        if tag in _BLOCK:
            self.parts.append(" ")
        if tag in _HEADINGS:
            self._heading_depth += 1
        elif tag == "figure":
            self._figures.append([])
        elif tag == "figcaption":
            self._caption_depth += 1
        if tag in _MEDIA:
            self._media(dict(attrs))

    handle_startendtag = handle_starttag

    def _media(self, attrs: dict) -> None:
        src = attrs.get("src") or attrs.get("data-src") or ""
        name = _clean(PurePosixPath(unquote(urlsplit(src).path)).name) if src else ""
        caption = _clean(attrs.get("alt") or attrs.get("title") or "")
        if not name:
            if caption:
                self._emit(f" {caption} ")
            return
        self._emit(f" {name} {caption} ")
        self.media.append([name, caption])
        if self._figures:
            self._figures[-1].append(len(self.media) - 1)

    def handle_endtag(self, tag):
        if tag == "title":
            self._in_title = False
            return
        if tag in _DROP:
            self._drop_depth = max(0, self._drop_depth - 1)
            return
        if self._drop_depth:
            return
        if tag in _HEADINGS and self._heading_depth:
            self._heading_depth -= 1
            if not self._heading_depth and self.first_heading is None:
                text = _clean("".join(self.heading_parts))
                if text:
                    self.first_heading = text
                self.heading_parts = []
        elif tag == "figcaption" and self._caption_depth:
            self._caption_depth -= 1
        elif tag == "figure" and self._figures:
            idxs = self._figures.pop()
            caption = _clean("".join(self._caption_parts))
            self._caption_parts = []
            for i in idxs:
                if not self.media[i][1]:
                    self.media[i][1] = caption
        if tag in _BLOCK:
            self.parts.append(" ")

    def handle_data(self, data):
        if self._in_title:
            self.title_parts.append(data)
        elif not self._drop_depth:
            self._emit(data)


def extract_text(markup: str) -> Extracted:
    """Convert page source to title, plain body text and media references.

    Never raises on malformed markup. Image/video filenames and their
    alt or caption text stay inline in ``body_text``.
    """
    parser = _TextExtractor()
    try:
        parser.feed(markup)
        parser.close()
    except Exception:  # html.parser is lenient, but never let a page abort ingest
        logger.debug("markup parser gave up; keeping partial text", exc_info=True)
    title = _clean("".join(parser.title_parts))
    if not title:
        title = parser.first_heading or _clean("".join(parser.heading_parts))
    body = _clean("".join(parser.parts))
    media = [(n, c) for n, c in parser.media if n in body]
    return Extracted(title=title, body_text=body, media_refs=media)


def document_from_snapshot(snap: RawSnapshot) -> Document:
    ex = extract_text(snap.markup)
    return Document.build(snap.domain, snap.fetched_at, ex.title, ex.body_text, ex.media_refs)


@dataclass
class IngestResult:
    documents: list[Document]
    rejects: int


def ingest(lines: Iterable[str], period: str | None = None) -> IngestResult:
    """Reduce a snapshot stream to one Document per domain.

    The newest ``fetched_at`` wins per domain; equal timestamps fall back
    to the larger markup string so the result never depends on input
    order. ``period`` (a year such as ``"2022"``) drops snapshots fetched
    outside that year.
    """
    newest: dict[str, RawSnapshot] = {}
    rejects = 0
    for line in lines:
        if not line.strip():
            continue
        try:
            snap = RawSnapshot.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            rejects += 1
            logger.debug("rejected snapshot: %s", exc)
            continue
        if period is not None and str(snap.fetched_at.year) != str(period):
            continue
        cur = newest.get(snap.domain)
        if cur is None or (snap.fetched_at, snap.markup, snap.url_path) > (
            cur.fetched_at, cur.markup, cur.url_path
        ):
            newest[snap.domain] = snap
    docs = [document_from_snapshot(newest[d]) for d in sorted(newest)]
    return IngestResult(documents=docs, rejects=rejects)


def write_corpus(docs: Iterable[Document], fh: IO[str]) -> int:
    n = 0
    for doc in docs:
        fh.write(json.dumps(doc.to_dict(), ensure_ascii=False, sort_keys=True))
        fh.write("\n")
        n += 1
    return n


def iter_corpus(fh: IO[str]) -> Iterator[Document]:
    for lineno, line in enumerate(fh, 1):
        if not line.strip():
            continue
        try:
            yield Document.from_dict(json.loads(line))
        except (ValueError, KeyError, TypeError) as exc:
            raise ContractError(f"corpus line {lineno}: {exc}") from exc


def read_corpus(path) -> list[Document]:
    with open(path, encoding="utf-8") as fh:
        return list(iter_corpus(fh))


def sample(corpus: list[Document], k: int, seed: int) -> list[Document]:
    """Uniform sample of ``k`` distinct domains, returned sorted by domain."""
    by_domain = {d.domain: d for d in corpus}
    if k < 0:
        raise ContractError(f"sample size must be non-negative, got {k}")
    if k > len(by_domain):
        raise ContractError(
            f"sample size k={k} exceeds corpus size of {len(by_domain)} distinct domains"
        )
    domains = sorted(by_domain)
    picked = random.Random(seed).sample(domains, k)
    return [by_domain[d] for d in sorted(picked)]
