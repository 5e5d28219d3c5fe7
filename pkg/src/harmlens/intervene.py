"""Per-query filtering decisions for a search engine.

Precedence: survey-trigger -> SurveyPrompt, target -> RedirectHelp,
sexual (strict mode only) -> Block, otherwise Allow.
"""

from __future__ import annotations

import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import IO, Mapping

from harmlens.errors import ContractError
from harmlens.lexicon import CompiledMatcher

logger = logging.getLogger(__name__)


class Mode(str, Enum):
    TARGETED = "targeted"
    STRICT = "strict"


class Action(str, Enum):
    ALLOW = "Allow"
    BLOCK = "Block"
    REDIRECT_HELP = "RedirectHelp"
    SURVEY_PROMPT = "SurveyPrompt"


@dataclass(frozen=True)
class FilterPolicy:
    mode: Mode
    help_url: str
    survey_url: str
    matchers: Mapping[str, CompiledMatcher]

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if not self.help_url or not self.survey_url:
            raise ContractError("policy needs non-empty help_url and survey_url")
        required = {"target", "survey-trigger"}
        if self.mode is Mode.STRICT:
            required.add("sexual")
        missing = sorted(required - set(self.matchers))
        if missing:
            raise ContractError(f"{self.mode.value} policy is missing lexicon categories: {', '.join(missing)}")
        object.__setattr__(self, "matchers", dict(sorted(self.matchers.items())))


@dataclass(frozen=True)
class FilterDecision:
    action: Action
    matched_categories: frozenset[str] = frozenset()
    matched_patterns: tuple[str, ...] = ()
    url: str | None = None
    help_url: str | None = None

    def to_wire(self, request_id) -> dict:
        out = {"id": request_id, "action": self.action.value,
               "matched_categories": sorted(self.matched_categories)}
        if self.url is not None:
            out["url"] = self.url
        if self.help_url is not None:
            out["help_url"] = self.help_url
        return out


def decide(query: str, policy: FilterPolicy) -> FilterDecision:
    cats = set()
    patterns: list[str] = []
    for cat, matcher in policy.matchers.items():
        res = matcher.match_text(query)
        if res.matched:
            cats.add(cat)
            patterns.extend(res.patterns)
    cats_f = frozenset(cats)
    patterns_t = tuple(dict.fromkeys(patterns))
    if "survey-trigger" in cats:
        return FilterDecision(Action.SURVEY_PROMPT, cats_f, patterns_t,
                              url=policy.survey_url, help_url=policy.help_url)
    if "target" in cats:
        return FilterDecision(Action.REDIRECT_HELP, cats_f, patterns_t, url=policy.help_url)
    if policy.mode is Mode.STRICT and "sexual" in cats:
        return FilterDecision(Action.BLOCK, cats_f, patterns_t)
    return FilterDecision(Action.ALLOW, cats_f, patterns_t)


def _error(reason: str) -> dict:
    return {"id": None, "action": "Error", "reason": reason}


def handle_request_line(line: str, policy: FilterPolicy) -> tuple[dict, Action | None]:
    try:
        req = json.loads(line)
    except json.JSONDecodeError as exc:
        return _error(f"invalid JSON: {exc.msg}"), None
    if not isinstance(req, dict):
        return _error("request must be a JSON object"), None
    rid, query = req.get("id"), req.get("query")
    if not isinstance(rid, str):
        return _error("request id must be a string"), None
    if not isinstance(query, str):
        return _error("request query must be a string"), None
    d = decide(query, policy)
    return d.to_wire(rid), d.action


@dataclass
class DecisionLog:
    """Count-only decision log; query text is never retained."""

    counts: Counter = field(default_factory=Counter)

    def record(self, action: str) -> None:
        self.counts[action] += 1


def serve_stream(inp: IO[str], out: IO[str], policy: FilterPolicy,
                 log: DecisionLog | None = None) -> int:
    """Answer line-delimited JSON requests until ``inp`` closes.

    Returns 0 on clean shutdown and 2 if the input stream cannot be read.
    """
    log = log if log is not None else DecisionLog()
    try:
        for line in inp:
            if not line.strip():
                continue
            resp, action = handle_request_line(line, policy)
            log.record(action.value if action else "Error")
            out.write(json.dumps(resp, ensure_ascii=False))
            out.write("\n")
            out.flush()
    except (OSError, UnicodeDecodeError) as exc:
        logger.error("unreadable input stream: %s", exc)
        return 2
    finally:
        logger.info("decisions: %s", dict(sorted(log.counts.items())))
    return 0
