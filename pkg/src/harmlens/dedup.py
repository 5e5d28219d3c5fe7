"""Mirror detection: collapse domains serving identical title and sentences."""

from __future__ import annotations

import csv
import hashlib
from collections import defaultdict
from dataclasses import dataclass
from typing import IO, Iterable

from harmlens.corpus import Document
from harmlens.errors import ContractError


@dataclass(frozen=True, order=True)
class Fingerprint:
    title_norm: str
    sentence_set_digest: str


@dataclass(frozen=True)
class SiteGroup:
    canonical_domain: str
    members: frozenset[str]
    fingerprint: Fingerprint


def normalize_title(title: str) -> str:
    return " ".join(title.split()).lower()


def fingerprint(doc: Document) -> Fingerprint:
    # 128-bit digest over the sorted distinct sentences; each sentence is
    # length-prefixed so joins cannot collide.
    h = hashlib.blake2b(digest_size=16)
    for s in sorted(set(doc.sentences)):
        b = s.encode("utf-8")
        h.update(len(b).to_bytes(8, "big"))
        h.update(b)
    return Fingerprint(normalize_title(doc.title), h.hexdigest())


def group_duplicates(docs: Iterable[Document]) -> list[SiteGroup]:
    """Partition documents by fingerprint; canonical is the smallest domain."""
    seen: set[str] = set()
    groups: dict[Fingerprint, list[str]] = defaultdict(list)
    for doc in docs:
        if doc.domain in seen:
            raise ContractError(f"duplicate domain in dedup input: {doc.domain}")
        seen.add(doc.domain)
        groups[fingerprint(doc)].append(doc.domain)
    out = [
        SiteGroup(min(members), frozenset(members), fp)
        for fp, members in groups.items()
    ]
    out.sort(key=lambda g: g.canonical_domain)
    return out


def canonical_documents(docs: list[Document], groups: list[SiteGroup] | None = None) -> list[Document]:
    if groups is None:
        groups = group_duplicates(docs)
    by_domain = {d.domain: d for d in docs}
    return [by_domain[g.canonical_domain] for g in groups]


def write_group_report(groups: Iterable[SiteGroup], fh: IO[str]) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(["canonical_domain", "member_count", "members"])
    for g in groups:
        w.writerow([g.canonical_domain, len(g.members), ";".join(sorted(g.members))])
