"""Rule-based scenario identification from a prose violation-cause description.

Step one pulls parameters out of the text with fixed regular expressions.
Step two walks the per-scenario rule sets in priority order; the first
rule whose condition holds names the scenario, otherwise ``Unknown``.

Rule conditions are a small JSON tree stored in the config::

    {"all": [...]} | {"any": [...]} | {"not": cond}
    {"keywords": ["stem", ...]}                      # any stem was hit
    {"param": "bit_width", "op": ">=", "value": 2}   # absent param -> false
"""

from __future__ import annotations

import operator
import re
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

from timing_triage.config import ConfigError, default_config
from timing_triage.kb import SUBSCENARIOS, UNKNOWN

_SLACK_RE = re.compile(r"(?<![\w.])(-?\d+\.\d+)\s*ns\b")
_DEPTH_RE = re.compile(r"\b(\d+)\s+(?:\w+\s+)?(?:levels?|stages?)\b")
_WIDTH_RE = re.compile(r"\b(\d+)-bit\b")
_MUX_DEPTH_RES = (
    re.compile(r"\b(\d+)[- ](?:levels?|deep|stages?)\s+(?:of\s+)?(?:\w+\s+)?(?:mux|multiplexer|conditional|ternar)"),
    re.compile(r"\b(?:mux|multiplexer)\s+(?:depth|chain)\s+(?:of\s+)?(\d+)\b"),
    re.compile(r"\b(\d+)\s+nested\b"),
)
_BACKTICK_RE = re.compile(r"`([A-Za-z_]\w*)`")
_NAMED_RE = re.compile(r"\b(?:signal|register|clock)\s+`?([A-Za-z_]\w*)`?", re.IGNORECASE)
_CLOCK_RE = re.compile(r"\b(\w*clk\w*)\b", re.IGNORECASE)
_CLOCK_NAMED_RE = re.compile(r"\bclock\s+`([A-Za-z_]\w*)`", re.IGNORECASE)

_OPS = {
    "==": operator.eq, "!=": operator.ne,
    "<": operator.lt, "<=": operator.le, ">": operator.gt, ">=": operator.ge,
}
NUMERIC_PARAMS = ("path_depth", "mux_depth", "bit_width", "clock_count", "min_slack")


@dataclass(frozen=True)
class ExtractedParams:
    signal_names: tuple[str, ...] = ()
    slack_values: tuple[float, ...] = ()
    path_depth: Optional[int] = None
    mux_depth: Optional[int] = None
    bit_width: Optional[int] = None
    clock_names: tuple[str, ...] = ()
    keyword_hits: frozenset[str] = field(default_factory=frozenset)

    @property
    def clock_count(self) -> int:
        return len(self.clock_names)

    @property
    def min_slack(self) -> Optional[float]:
        return min(self.slack_values) if self.slack_values else None

    def numeric(self, name: str) -> Optional[float]:
        if name not in NUMERIC_PARAMS:
            raise KeyError(name)
        return getattr(self, name)


@dataclass(frozen=True)
class RuleSet:
    scenario: str
    when: Mapping[str, Any]
    priority: int


def _normalize(text: str) -> str:
    return " ".join(text.lower().split())


def _first_int(pattern: re.Pattern, text: str) -> Optional[int]:
    m = pattern.search(text)
    return int(m.group(1)) if m else None


def _unique(items) -> tuple:
    return tuple(dict.fromkeys(items))


def _looks_like_rtl_name(name: str) -> bool:
    return "_" in name or any(ch.isdigit() for ch in name)


class Classifier:
    def __init__(self, keywords: Mapping[str, list[str]], rules: list[Mapping[str, Any]]):
        try:
            self.keywords = {stem: [re.compile(p) for p in pats] for stem, pats in keywords.items()}
        except re.error as exc:
            raise ConfigError(f"bad keyword pattern: {exc}") from None
        parsed = []
        for i, raw in enumerate(rules):
            scenario = raw.get("scenario")
            if scenario not in SUBSCENARIOS:
                raise ConfigError(f"rule {i}: unknown scenario {scenario!r}")
            self._check(raw.get("when"), f"rule {scenario}")
            parsed.append(RuleSet(scenario, raw["when"], int(raw.get("priority", i))))
        names = [r.scenario for r in parsed]
        if sorted(names) != sorted(SUBSCENARIOS):
            raise ConfigError(f"need exactly one rule per subscenario, got {names}")
        ranks = [r.priority for r in parsed]
        if len(set(ranks)) != len(ranks):
            raise ConfigError("rule priorities must be distinct")
        self.rules = tuple(sorted(parsed, key=lambda r: r.priority))

    @classmethod
    def from_config(cls, cfg: Optional[Mapping[str, Any]] = None) -> "Classifier":
        section = (cfg or default_config())["classifier"]
        return cls(section["keywords"], section["rules"])

    def _check(self, cond: Any, where: str) -> None:
        if not isinstance(cond, dict) or len(cond) == 0:
            raise ConfigError(f"{where}: condition must be a non-empty object")
        if "all" in cond or "any" in cond:
            for sub in cond.get("all", cond.get("any")):
                self._check(sub, where)
        elif "not" in cond:
            self._check(cond["not"], where)
        elif "keywords" in cond:
            unknown = [k for k in cond["keywords"] if k not in self.keywords]
            if unknown:
                raise ConfigError(f"{where}: unknown keyword stems {unknown}")
        elif "param" in cond:
            if cond["param"] not in NUMERIC_PARAMS:
                raise ConfigError(f"{where}: unknown param {cond['param']!r}")
            if cond.get("op") not in _OPS:
                raise ConfigError(f"{where}: unknown op {cond.get('op')!r}")
            if not isinstance(cond.get("value"), (int, float)):
                raise ConfigError(f"{where}: value must be numeric")
        else:
            raise ConfigError(f"{where}: unrecognized condition {sorted(cond)}")

    def extract_params(self, text: str) -> ExtractedParams:
        if not text or not text.strip():
            raise ValueError("cause description must be non-empty")
        norm = _normalize(text)
        hits = frozenset(
            stem for stem, pats in self.keywords.items() if any(p.search(norm) for p in pats)
        )
        mux_depth = None
        for pat in _MUX_DEPTH_RES:
            mux_depth = _first_int(pat, norm)
            if mux_depth is not None:
                break
        signals = [m.group(1) for m in _BACKTICK_RE.finditer(text)]
        signals += [m.group(1) for m in _NAMED_RE.finditer(text) if _looks_like_rtl_name(m.group(1))]
        clocks = [m.group(1) for m in _CLOCK_RE.finditer(text)]
        clocks += [m.group(1) for m in _CLOCK_NAMED_RE.finditer(text)]
        return ExtractedParams(
            signal_names=_unique(signals),
            slack_values=tuple(float(m.group(1)) for m in _SLACK_RE.finditer(norm)),
            path_depth=_first_int(_DEPTH_RE, norm),
            mux_depth=mux_depth,
            bit_width=_first_int(_WIDTH_RE, norm),
            clock_names=_unique(clocks),
            keyword_hits=hits,
        )

    def matches(self, cond: Mapping[str, Any], params: ExtractedParams) -> bool:
        if "all" in cond:
            return all(self.matches(c, params) for c in cond["all"])
        if "any" in cond:
            return any(self.matches(c, params) for c in cond["any"])
        if "not" in cond:
            return not self.matches(cond["not"], params)
        if "keywords" in cond:
            return any(k in params.keyword_hits for k in cond["keywords"])
        value = params.numeric(cond["param"])
        return value is not None and _OPS[cond["op"]](value, cond["value"])

    def identify(self, text: str) -> str:
        params = self.extract_params(text)
        for rule in self.rules:
            if self.matches(rule.when, params):
                return rule.scenario
        return UNKNOWN


_default: Optional[Classifier] = None


def default_classifier() -> Classifier:
    global _default
    if _default is None:
        _default = Classifier.from_config()
    return _default


def extract_params(text: str, classifier: Optional[Classifier] = None) -> ExtractedParams:
    return (classifier or default_classifier()).extract_params(text)


def identify_scenario(text: str, classifier: Optional[Classifier] = None) -> str:
    return (classifier or default_classifier()).identify(text)
