"""Run configuration: ``key=value`` file, overridden by command-line flags."""

from __future__ import annotations

from dataclasses import dataclass, fields, replace
from pathlib import Path

from harmlens.errors import ContractError, UsageError


@dataclass(frozen=True)
class RunConfig:
    corpus: Path | None = None
    snapshots: Path | None = None
    lexicon: Path | None = None
    lexicon_dir: Path | None = None
    model: Path | None = None
    train: Path | None = None
    log: Path | None = None
    sessions: Path | None = None
    review: Path | None = None
    out_dir: Path = Path("out")
    seed: int = 0
    window_seconds: int = 300
    sample_k: int = 10000
    review_k: int = 1000
    mode: str = "targeted"
    help_url: str = ""
    survey_url: str = ""
    search_path: str = "/search"
    site_host: str | None = None
    alpha: float = 0.5
    max_depth: int = 8
    period: str | None = None
    fp: float | None = None
    fn: float | None = None

    def __post_init__(self):
        if self.window_seconds < 1:
            raise ContractError(f"window_seconds must be >= 1, got {self.window_seconds}")

    def with_overrides(self, **kw) -> RunConfig:
        return replace(self, **{k: v for k, v in kw.items() if v is not None})

    def require(self, *names: str) -> None:
        """Check that the named input paths are set and exist."""
        for name in names:
            value = getattr(self, name)
            if value is None:
                raise UsageError(f"missing required input --{name.replace('_', '-')}")
            if not Path(value).exists():
                raise ContractError(f"input {name} does not exist: {value}")


_TYPES = {f.name: f.type for f in fields(RunConfig)}


def _coerce(name: str, value: str):
    kind = _TYPES[name]
    if "Path" in kind:
        return Path(value)
    if kind.startswith("int"):
        return int(value)
    if kind.startswith("float"):
        return float(value)
    return value


def parse_config(text: str) -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        key, sep, value = s.partition("=")
        key = key.strip().replace("-", "_")
        if not sep:
            raise ContractError(f"config line {lineno}: expected key=value")
        if key not in _TYPES:
            raise ContractError(f"config line {lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, value.strip())
        except ValueError as exc:
            raise ContractError(f"config line {lineno}: bad value for {key}: {exc}") from exc
    return out


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    return RunConfig(**parse_config(Path(path).read_text(encoding="utf-8")))
