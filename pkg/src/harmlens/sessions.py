"""Search-log parsing and referrer-chained session reconstruction.

A request for a new search carries the previous search URL in its
``Referer`` header, so sessions can be followed without cookies or
client addresses: a query continues the session whose last query equals
its referrer query, provided it arrives within the continuation window.
"""

from __future__ import annotations

import csv
import json
import re
from collections import Counter
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import IO, Iterable, Iterator, Mapping
from urllib.parse import parse_qs, urlsplit

from harmlens.lexicon import CompiledMatcher

DEFAULT_WINDOW = 300
SESSION_CATEGORIES = ("target", "sexual", "violence", "gender-girl", "gender-boy")
# Pairs reported as "target+<other>": sessions flagged target that also match <other>.
COOCCURRENCE = ("violence", "gender-girl", "gender-boy")

_CLF = re.compile(
    r'^(?P<host>\S+) (?P<ident>\S+) (?P<user>\S+) \[(?P<time>[^\]]+)\] '
    r'"(?P<request>[^"\\]*(?:\\.[^"\\]*)*)" (?P<status>\d{3}|-) (?P<bytes>\d+|-)'
    r'(?: "(?P<referrer>[^"\\]*(?:\\.[^"\\]*)*)"(?: "(?P<agent>[^"\\]*(?:\\.[^"\\]*)*)")?)?\s*$'
)
_TIME_FMT = "%d/%b/%Y:%H:%M:%S %z"


@dataclass(frozen=True)
class LogRecord:
    timestamp: int
    query: str
    referrer_query: str | None
    line_no: int


@dataclass(frozen=True)
class Skip:
    line_no: int
    reason: str


@dataclass
class Session:
    id: int
    queries: list[tuple[int, str]] = field(default_factory=list)

    @property
    def last_time(self) -> int:
        return self.queries[-1][0]

    @property
    def last_query(self) -> str:
        return self.queries[-1][1]

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "queries": [
                {"timestamp": datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
                 "query": q}
                for t, q in self.queries
            ],
        }

    @classmethod
    def from_dict(cls, raw: Mapping) -> Session:
        qs = []
        for item in raw["queries"]:
            ts = item["timestamp"]
            if isinstance(ts, str):
                ts = int(datetime.fromisoformat(ts.replace("Z", "+00:00")).timestamp())
            qs.append((int(ts), item["query"]))
        return cls(int(raw["id"]), qs)


def _search_query(url: str, search_path: str) -> str | None:
    parts = urlsplit(url)
    path = parts.path.rstrip("/") or "/"
    if path != (search_path.rstrip("/") or "/"):
        return None
    # parse_qs decodes percent escapes and '+' as space
    values = parse_qs(parts.query, keep_blank_values=True).get("q")
    if not values:
        return None
    q = " ".join(values[0].split())
    return q or None


def parse_log_line(line: str, line_no: int = 0, search_path: str = "/search",
                   site_host: str | None = None) -> LogRecord | Skip:
    """Parse one Combined Log Format line into a search record.

    Lines that are not search requests, or that do not parse, come back as
    :class:`Skip`. The referrer counts only when it is a search URL on the
    same site: a relative URL, or any host when ``site_host`` is None.
    """
    m = _CLF.match(line.rstrip("\r\n"))
    if not m:
        return Skip(line_no, "malformed")
    try:
        ts = int(datetime.strptime(m.group("time"), _TIME_FMT).timestamp())
    except ValueError:
        return Skip(line_no, "bad-timestamp")
    req = m.group("request").split()
    if len(req) < 2:
        return Skip(line_no, "bad-request")
    query = _search_query(req[1], search_path)
    if query is None:
        return Skip(line_no, "not-search")
    ref = m.group("referrer")
    ref_query = None
    if ref and ref != "-":
        host = urlsplit(ref).hostname
        if site_host is None or host is None or host == site_host.lower():
            ref_query = _search_query(ref, search_path)
    return LogRecord(ts, query, ref_query, line_no)


@dataclass
class ParseResult:
    records: list[LogRecord]
    skipped: Counter

    @property
    def skipped_total(self) -> int:
        return sum(self.skipped.values())


def parse_log(lines: Iterable[str], search_path: str = "/search",
              site_host: str | None = None) -> ParseResult:
    records, skipped = [], Counter()
    for i, line in enumerate(lines, 1):
        if not line.strip():
            continue
        out = parse_log_line(line, i, search_path, site_host)
        if isinstance(out, Skip):
            skipped[out.reason] += 1
        else:
            records.append(out)
    return ParseResult(records, skipped)


def reconstruct_sessions(records: Iterable[LogRecord], window: int = DEFAULT_WINDOW) -> list[Session]:
    """Chain records into sessions in file order.

    A record with a referrer query joins the open session whose last query
    equals it and whose last timestamp is at most ``window`` seconds
    earlier (never later). Among several candidates the latest last
    timestamp wins, then the most recently started session.
    """
    sessions: list[Session] = []
    # last query -> ids of sessions currently ending with it
    tails: dict[str, list[int]] = {}
    for rec in records:
        best = None
        if rec.referrer_query is not None:
            for sid in tails.get(rec.referrer_query, ()):
                gap = rec.timestamp - sessions[sid].last_time
                if 0 <= gap <= window:
                    key = (sessions[sid].last_time, sid)
                    if best is None or key > best:
                        best = key
        if best is None:
            sess = Session(len(sessions), [(rec.timestamp, rec.query)])
            sessions.append(sess)
        else:
            sess = sessions[best[1]]
            old = tails[sess.last_query]
            old.remove(sess.id)
            if not old:
                del tails[sess.last_query]
            sess.queries.append((rec.timestamp, rec.query))
        tails.setdefault(sess.last_query, []).append(sess.id)
    return sessions


def classify_session(session: Session, matchers: Mapping[str, CompiledMatcher]) -> set[str]:
    """Categories whose lexicon matches at least one query of the session."""
    return {
        cat for cat, m in matchers.items()
        if any(m.matches(q) for _, q in session.queries)
    }


@dataclass
class SessionMetrics:
    total_sessions: int = 0
    category_counts: dict[str, int] = field(default_factory=dict)
    cooccurrence_counts: dict[str, int] = field(default_factory=dict)

    def shares(self) -> dict[str, float]:
        if not self.total_sessions:
            return {k: 0.0 for k in self.category_counts}
        return {k: v / self.total_sessions for k, v in self.category_counts.items()}

    def cooccurrence_shares(self) -> dict[str, float]:
        target = self.category_counts.get("target", 0)
        return {k: (v / target if target else 0.0) for k, v in self.cooccurrence_counts.items()}

    def to_dict(self) -> dict:
        return {
            "total_sessions": self.total_sessions,
            "category_counts": self.category_counts,
            "category_shares": self.shares(),
            "cooccurrence_counts": self.cooccurrence_counts,
            "cooccurrence_shares_of_target": self.cooccurrence_shares(),
        }

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "count", "share"])
        w.writerow(["total_sessions", self.total_sessions, "1.0" if self.total_sessions else "0.0"])
        for k, v in self.shares().items():
            w.writerow([k, self.category_counts[k], f"{v:.10f}"])
        for k, v in self.cooccurrence_shares().items():
            w.writerow([k, self.cooccurrence_counts[k], f"{v:.10f}"])


def aggregate(sessions: Iterable[Session], matchers: Mapping[str, CompiledMatcher],
              flags: Iterable[set[str]] | None = None) -> SessionMetrics:
    """Count sessions per category and target co-occurrences.

    ``flags`` may carry precomputed :func:`classify_session` results.
    """
    cats = sorted(matchers)
    counts = Counter({c: 0 for c in cats})
    pairs = [c for c in COOCCURRENCE if c in matchers] if "target" in matchers else []
    co = Counter({f"target+{c}": 0 for c in pairs})
    total = 0
    sessions = list(sessions)
    flag_iter = iter(flags) if flags is not None else (classify_session(s, matchers) for s in sessions)
    for _, f in zip(sessions, flag_iter):
        total += 1
        counts.update(f)
        if "target" in f:
            co.update(f"target+{c}" for c in pairs if c in f)
    return SessionMetrics(total, dict(sorted(counts.items())), dict(sorted(co.items())))


def write_sessions(sessions: Iterable[Session], fh: IO[str]) -> None:
    for s in sessions:
        fh.write(json.dumps(s.to_dict(), ensure_ascii=False))
        fh.write("\n")


def iter_sessions(fh: IO[str]) -> Iterator[Session]:
    for line in fh:
        if line.strip():
            yield Session.from_dict(json.loads(line))
