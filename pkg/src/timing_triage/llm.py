"""Completion client: chat-completions over HTTP, or deterministic offline mocks.

Mock policies:

``kb_golden``  repair prompts get the golden module registered for the case
``scripted``   responses come from a JSON file keyed by case id
``echo``       repair prompts get the design back unchanged

Cause-analysis prompts under ``kb_golden`` and ``echo`` are answered with the
case's stored reference cause. Every call appends one ``ChatExchange`` to
the run log; HTTP retries are reported through :mod:`logging`.
"""

from __future__ import annotations

import json
import logging
import os
import re
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional

import httpx

from timing_triage.frontend import ParseError, parse
from timing_triage.templates import RepairPrompt

log = logging.getLogger(__name__)

SYSTEM_PROMPT = "You are an RTL timing repair assistant."
API_KEY_ENV = "TIMING_TRIAGE_API_KEY"
MODES = ("http", "mock")
POLICIES = ("kb_golden", "scripted", "echo")


class LlmError(Exception):
    pass


class Transport(LlmError):
    def __init__(self, reason: str):
        self.reason = reason
        super().__init__(f"transport error: {reason}")


class HttpStatus(LlmError):
    def __init__(self, code: int):
        self.code = code
        super().__init__(f"HTTP status {code}")


class Timeout(LlmError):
    def __init__(self, seconds: float):
        self.seconds = seconds
        super().__init__(f"request timed out after {seconds:g} s")


class NoScriptedResponse(LlmError):
    def __init__(self, case: str):
        self.case = case
        super().__init__(f"no scripted response left for case {case!r}")


class ExtractError(Exception):
    pass


class NoCodeBlock(ExtractError):
    def __init__(self) -> None:
        super().__init__("response contains no fenced code block and is not a module")


class NotParseable(ExtractError):
    def __init__(self, error: ParseError):
        self.error = error
        super().__init__(f"code block does not parse: {error}")


@dataclass(frozen=True)
class LlmConfig:
    mode: str = "mock"
    mock_policy: str = "kb_golden"
    scripted_path: Optional[str] = None
    endpoint: str = "http://127.0.0.1:8000/v1/chat/completions"
    model: str = "gpt-4o"
    temperature: float = 0.7
    max_tokens: int = 4096
    timeout_s: float = 60.0
    retries: int = 3
    backoff_s: float = 0.5

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.mode == "mock" and self.mock_policy not in POLICIES:
            raise ValueError(f"mock policy must be one of {POLICIES}, got {self.mock_policy!r}")
        if self.mode == "mock" and self.mock_policy == "scripted" and not self.scripted_path:
            raise ValueError("scripted mock needs a response file path")
        if not 0 <= self.temperature <= 2:
            raise ValueError(f"temperature must be in [0, 2], got {self.temperature}")
        if self.retries < 0:
            raise ValueError("retries must be >= 0")
        if self.timeout_s <= 0 or self.max_tokens <= 0 or self.backoff_s < 0:
            raise ValueError("timeout, max_tokens must be positive and backoff non-negative")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "LlmConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown llm config keys: {sorted(unknown)}")
        return cls(**data)

    def with_selector(self, selector: str) -> "LlmConfig":
        """Apply a CLI selector: ``http``, ``mock:echo``, ``mock:scripted:<file>``."""
        if selector == "http":
            return _replace(self, mode="http")
        if selector.startswith("mock:"):
            policy, _, rest = selector[5:].partition(":")
            if policy == "scripted":
                return _replace(self, mode="mock", mock_policy=policy, scripted_path=rest or self.scripted_path)
            return _replace(self, mode="mock", mock_policy=policy)
        raise ValueError(f"bad --llm selector {selector!r}; use http or mock:<policy>")


def _replace(cfg: LlmConfig, **kw: Any) -> LlmConfig:
    return LlmConfig(**{**asdict(cfg), **kw})


@dataclass(frozen=True)
class ChatExchange:
    case_id: str
    kind: str
    system: str
    user: str
    response: str
    latency_ms: float
    attempt: int
    error: Optional[str] = None


class RunLog:
    """Append-only exchange log, optionally mirrored to a JSON-lines file."""

    def __init__(self, path: Optional[str | Path] = None):
        self.path = Path(path) if path is not None else None
        self._lock = threading.Lock()
        self._items: list[ChatExchange] = []

    def append(self, exchange: ChatExchange) -> None:
        line = json.dumps(asdict(exchange), sort_keys=True)
        with self._lock:
            self._items.append(exchange)
            if self.path is not None:
                with self.path.open("a", encoding="utf-8") as fh:
                    fh.write(line + "\n")

    @property
    def exchanges(self) -> list[ChatExchange]:
        with self._lock:
            return list(self._items)

    def __len__(self) -> int:
        with self._lock:
            return len(self._items)


@dataclass
class CaseBook:
    """What the mocks know about each case: golden repair and reference cause."""

    golden: dict[str, str] = field(default_factory=dict)
    causes: dict[str, str] = field(default_factory=dict)

    def register(self, case_id: str, golden: Optional[str] = None, cause: Optional[str] = None) -> None:
        if golden is not None:
            self.golden[case_id] = golden
        if cause is not None:
            self.causes[case_id] = cause


class LlmGateway:
    def __init__(
        self,
        cfg: LlmConfig,
        run_log: Optional[RunLog] = None,
        cases: Optional[CaseBook] = None,
        http_client: Optional[httpx.Client] = None,
        sleep=time.sleep,
    ):
        self.cfg = cfg
        self.run_log = run_log if run_log is not None else RunLog()
        self.cases = cases if cases is not None else CaseBook()
        self._client = http_client
        self._sleep = sleep
        self._lock = threading.Lock()
        self._cursor: dict[str, int] = {}
        self._script: Optional[dict[str, Any]] = None
        if cfg.mode == "mock" and cfg.mock_policy == "scripted":
            self._script = load_script(cfg.scripted_path)  # type: ignore[arg-type]

    def complete(self, prompt: RepairPrompt) -> str:
        kind = prompt.metadata.get("kind", "repair")
        start = time.monotonic()
        attempt = 1
        try:
            if self.cfg.mode == "http":
                response, attempt = self._http(prompt.text)
            else:
                response = self._mock(prompt, kind)
        except _Exhausted as exc:
            self._record(prompt, kind, "", start, exc.attempts, str(exc.cause))
            raise exc.cause from None
        except LlmError as exc:
            self._record(prompt, kind, "", start, attempt, str(exc))
            raise
        self._record(prompt, kind, response, start, attempt)
        return response

    def _record(
        self, prompt: RepairPrompt, kind: str, response: str, start: float, attempt: int, error: Optional[str] = None
    ) -> None:
        latency = 0.0 if self.cfg.mode == "mock" else round((time.monotonic() - start) * 1000, 3)
        self.run_log.append(
            ChatExchange(prompt.case_id, kind, SYSTEM_PROMPT, prompt.text, response, latency, attempt, error)
        )

    # ---- mocks -------------------------------------------------------------

    def _reference_cause(self, prompt: RepairPrompt) -> str:
        cause = self.cases.causes.get(prompt.case_id)
        if cause:
            return cause
        meta = prompt.metadata
        return f"{meta.get('vtype', 'timing')} violation at register `{meta.get('endpoint', '?')}`."

    def _mock(self, prompt: RepairPrompt, kind: str) -> str:
        policy = self.cfg.mock_policy
        if policy == "scripted":
            return self._scripted(prompt, kind)
        if kind == "cause":
            return self._reference_cause(prompt)
        if policy == "kb_golden":
            golden = self.cases.golden.get(prompt.case_id)
            if golden is None:
                raise NoScriptedResponse(prompt.case_id)
            return f"```verilog\n{golden.rstrip()}\n```\n"
        return f"```verilog\n{prompt.design_code.rstrip()}\n```\n"

    def _scripted(self, prompt: RepairPrompt, kind: str) -> str:
        assert self._script is not None
        entry = self._script.get(prompt.case_id)
        if isinstance(entry, dict):
            cause, repairs = entry.get("cause"), entry.get("repair", [])
        else:
            cause, repairs = None, entry
        if isinstance(repairs, str):
            repairs = [repairs]
        if kind == "cause":
            if cause is not None:
                return cause
            return self._reference_cause(prompt)
        if not repairs:
            raise NoScriptedResponse(prompt.case_id)
        with self._lock:
            idx = self._cursor.get(prompt.case_id, 0)
            if idx >= len(repairs):
                raise NoScriptedResponse(prompt.case_id)
            self._cursor[prompt.case_id] = idx + 1
        return repairs[idx]

    # ---- http --------------------------------------------------------------

    def _client_or_new(self) -> httpx.Client:
        if self._client is None:
            self._client = httpx.Client(timeout=self.cfg.timeout_s)
        return self._client

    def _http(self, user: str) -> tuple[str, int]:
        cfg = self.cfg
        body = {
            "model": cfg.model,
            "temperature": cfg.temperature,
            "max_tokens": cfg.max_tokens,
            "messages": [
                {"role": "system", "content": SYSTEM_PROMPT},
                {"role": "user", "content": user},
            ],
        }
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(API_KEY_ENV)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        client = self._client_or_new()
        last: LlmError = Transport("no attempt made")
        for attempt in range(1, cfg.retries + 2):
            try:
                resp = client.post(cfg.endpoint, json=body, headers=headers, timeout=cfg.timeout_s)
            except httpx.TimeoutException:
                last = Timeout(cfg.timeout_s)
            except httpx.TransportError as exc:
                last = Transport(str(exc) or type(exc).__name__)
            else:
                if resp.status_code >= 500:
                    last = HttpStatus(resp.status_code)
                elif resp.status_code >= 400:
                    raise _Exhausted(HttpStatus(resp.status_code), attempt)
                else:
                    return _content(resp), attempt
            if attempt <= cfg.retries:
                delay = cfg.backoff_s * (2 ** (attempt - 1))
                log.warning("llm attempt %d failed (%s); retrying in %.2f s", attempt, last, delay)
                self._sleep(delay)
        raise _Exhausted(last, cfg.retries + 1)

    def close(self) -> None:
        if self._client is not None:
            self._client.close()


class _Exhausted(LlmError):
    """Carries the final error and how many attempts were made."""

    def __init__(self, cause: LlmError, attempts: int):
        self.cause = cause
        self.attempts = attempts
        super().__init__(str(cause))


def _content(resp: httpx.Response) -> str:
    try:
        content = resp.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError):
        raise Transport("malformed chat-completions response") from None
    if not isinstance(content, str):
        raise Transport("response content is not text")
    return content


def load_script(path: str | Path) -> dict[str, Any]:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot load scripted responses from {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ValueError(f"{path}: scripted responses must be a JSON object keyed by case id")
    return data


def complete(cfg: LlmConfig, prompt: RepairPrompt, gateway: Optional[LlmGateway] = None) -> str:
    """Convenience wrapper; reuse a gateway to share the run log and case book."""
    return (gateway or LlmGateway(cfg)).complete(prompt)


_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)


def extract_code(text: str) -> str:
    """First fenced block (or the whole response if it is a bare module), checked to parse."""
    m = _FENCE_RE.search(text)
    if m is None:
        candidate = text.strip()
        try:
            parse(candidate)
        except ParseError:
            raise NoCodeBlock() from None
        return candidate
    code = m.group(1).strip("\n")
    try:
        parse(code)
    except ParseError as exc:
        raise NotParseable(exc) from None
    return code
