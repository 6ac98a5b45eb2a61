"""End-to-end debug loop per case, and fix-rate evaluation over a dataset.

For one case: analyze the faulty design, reconstruct the violation path,
ask for a cause, classify it, retrieve knowledge, ask for a repair and
verify it. A rejected repair is retried with the rejection reason appended,
up to ``max_attempts``.
"""

from __future__ import annotations

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional

from timing_triage.analysis import Analysis, analyze_source
from timing_triage.classifier import Classifier
from timing_triage.config import default_config
from timing_triage.frontend import ParseError, parse
from timing_triage.injector import InjectedCase, load_case
from timing_triage.kb import SUBSCENARIOS, Kb, load_and_validate, retrieve
from timing_triage.llm import CaseBook, ExtractError, LlmConfig, LlmError, LlmGateway, RunLog, extract_code
from timing_triage.paths import PathExplosion, build_violation_context
from timing_triage.stdg import AnnotateError, BuildError, annotate
from timing_triage.templates import NoKnowledge, TemplateError, build_cause_prompt, build_repair_prompt
from timing_triage.timing.engine import DelayModel, MissingClockConstraint

PERSISTS = "violation persists"


class ManifestError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    llm: LlmConfig = field(default_factory=LlmConfig)
    delay_model: DelayModel = field(default_factory=DelayModel)
    default_period: float = 5.0
    classifier: Optional[Classifier] = None
    max_attempts: int = 3
    workers: int = 1
    repetitions: int = 1
    kb_path: Optional[str] = None
    run_log_path: Optional[str] = None

    def __post_init__(self) -> None:
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.workers < 1 or self.repetitions < 1:
            raise ValueError("workers and repetitions must be >= 1")

    @classmethod
    def from_config(cls, cfg: Optional[dict[str, Any]] = None, **overrides: Any) -> "RunConfig":
        cfg = cfg or default_config()
        base = dict(
            llm=LlmConfig.from_dict(cfg["llm"]),
            delay_model=DelayModel().with_overrides(cfg.get("delay_model")),
            default_period=float(cfg.get("default_period", 5.0)),
            classifier=Classifier.from_config(cfg),
            max_attempts=int(cfg.get("max_attempts", 3)),
            workers=int(cfg.get("workers", 1)),
            repetitions=int(cfg.get("repetitions", 1)),
        )
        base.update({k: v for k, v in overrides.items() if v is not None})
        return cls(**base)


@dataclass(frozen=True)
class AttemptRecord:
    attempt: int
    scenario: str
    violation_cleared: Optional[bool]
    new_violations: Optional[bool]
    failure_reason: Optional[str]


@dataclass(frozen=True)
class CaseResult:
    case_id: str
    subscenario: str
    difficulty: str
    success: bool
    attempts_used: int
    attempts: tuple[AttemptRecord, ...] = ()
    scenario: str = ""
    cause: str = ""
    failure_reason: Optional[str] = None
    repaired: Optional[str] = None

    def to_dict(self) -> dict[str, Any]:
        out = asdict(self)
        out.pop("repaired")
        return out


def verify_repair(
    case: InjectedCase,
    original: Analysis,
    repaired: str,
    model: DelayModel,
    default_period: float,
) -> tuple[Optional[str], Optional[bool], Optional[bool]]:
    """(failure reason or None, target cleared?, new violations?) for a parsed repair."""
    if parse(repaired).port_signature() != original.module.port_signature():
        return "port list changed", None, None
    try:
        after = analyze_source(repaired, model, case.clock_constraints(), default_period)
    except (BuildError, MissingClockConstraint) as exc:
        return f"analysis failed: {exc}", None, None
    keys = after.report.keys()
    if case.expected in keys:
        return PERSISTS, False, None
    fresh = sorted(keys - original.report.keys())
    if fresh:
        vtype, endpoint = fresh[0]
        return f"new violation introduced: {vtype} at {endpoint}", True, True
    return None, True, False


def run_debug_case(
    case: InjectedCase,
    cfg: RunConfig,
    kb: Optional[Kb] = None,
    gateway: Optional[LlmGateway] = None,
) -> CaseResult:
    """Never raises for per-case failures; they land in ``failure_reason``."""
    kb = kb or load_and_validate(cfg.kb_path, model=cfg.delay_model, default_period=cfg.default_period)
    if gateway is None:
        book = CaseBook()
        book.register(case.case_id, case.golden, case.reference_cause)
        gateway = LlmGateway(cfg.llm, RunLog(cfg.run_log_path), book)
    classifier = cfg.classifier or Classifier.from_config()
    model = case.delay_model(cfg.delay_model)

    def failed(reason: str, attempts=(), scenario: str = "", cause: str = "") -> CaseResult:
        return CaseResult(
            case.case_id, case.subscenario, case.difficulty, False, len(attempts), tuple(attempts),
            scenario, cause, reason,
        )

    try:
        original = analyze_source(case.faulty, model, case.clock_constraints(), cfg.default_period)
    except (ParseError, BuildError, MissingClockConstraint) as exc:
        return failed(f"faulty design could not be analyzed: {exc}")
    if not original.report:
        return failed("no violation to repair")

    try:
        graph = annotate(original.graph, original.report)
        contexts = build_violation_context(graph, original.report, case.faulty, model)
    except (AnnotateError, PathExplosion) as exc:
        return failed(f"context construction failed: {exc}")
    ordered = original.report.ordered()
    index = next(
        (i for i, v in enumerate(ordered) if (v.vtype, v.endpoint) == case.expected), 0
    )
    ctx = contexts[index]

    try:
        cause = gateway.complete(build_cause_prompt(ctx, case.case_id)).strip()
    except (LlmError, TemplateError) as exc:
        return failed(f"cause analysis failed: {exc}")
    if not cause:
        return failed("empty cause description")
    scenario = classifier.identify(cause)
    entries = retrieve(kb, ctx.violation.vtype, scenario)

    attempts: list[AttemptRecord] = []
    feedback: Optional[str] = None
    for attempt in range(1, cfg.max_attempts + 1):
        try:
            prompt = build_repair_prompt(scenario, entries, ctx, cause, case.case_id, feedback)
        except (NoKnowledge, TemplateError) as exc:
            return failed(f"prompt construction failed: {exc}", attempts, scenario, cause)
        cleared = new = None
        repaired = None
        try:
            response = gateway.complete(prompt)
            repaired = extract_code(response)
            reason, cleared, new = verify_repair(case, original, repaired, model, cfg.default_period)
        except LlmError as exc:
            reason = f"llm error: {exc}"
        except ExtractError as exc:
            reason = str(exc)
        attempts.append(AttemptRecord(attempt, scenario, cleared, new, reason))
        if reason is None:
            return CaseResult(
                case.case_id, case.subscenario, case.difficulty, True, attempt, tuple(attempts),
                scenario, cause, None, repaired,
            )
        feedback = reason
    return failed(attempts[-1].failure_reason or "unknown failure", attempts, scenario, cause)


# ---- evaluation -------------------------------------------------------------------


def fix_rate(c: int, n: int) -> Fraction:
    if n <= 0:
        raise ValueError("fix rate needs n > 0")
    if not 0 <= c <= n:
        raise ValueError(f"successes {c} outside [0, {n}]")
    return Fraction(c, n)


def format_percent(c: int, n: int) -> str:
    """c/n as a percentage truncated to two decimals, e.g. 14/17 -> '82.35%'."""
    hundredths = (fix_rate(c, n) * 10000).__floor__()
    return f"{hundredths // 100}.{hundredths % 100:02d}%"


@dataclass(frozen=True)
class GroupStat:
    subscenario: str
    difficulty: str
    c: int
    n: int

    @property
    def rate(self) -> Fraction:
        return fix_rate(self.c, self.n)


@dataclass(frozen=True)
class EvalSummary:
    groups: tuple[GroupStat, ...]
    results: tuple[CaseResult, ...]

    @property
    def c(self) -> int:
        return sum(g.c for g in self.groups)

    @property
    def n(self) -> int:
        return sum(g.n for g in self.groups)

    @property
    def overall(self) -> Fraction:
        return fix_rate(self.c, self.n)

    def to_dict(self) -> dict[str, Any]:
        return {
            "overall": {"c": self.c, "n": self.n, "fix_rate": format_percent(self.c, self.n)},
            "groups": [
                {
                    "subscenario": g.subscenario,
                    "difficulty": g.difficulty,
                    "c": g.c,
                    "n": g.n,
                    "fix_rate": format_percent(g.c, g.n),
                }
                for g in self.groups
            ],
            "cases": [r.to_dict() for r in self.results],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        rows = [("Subscenario", "Difficulty", "c/n", "FR")]
        rows += [(g.subscenario, g.difficulty, f"{g.c}/{g.n}", format_percent(g.c, g.n)) for g in self.groups]
        rows.append(("overall", "", f"{self.c}/{self.n}", format_percent(self.c, self.n)))
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        lines = ["  ".join(cell.ljust(w) for cell, w in zip(r, widths)).rstrip() for r in rows]
        lines.insert(1, "  ".join("-" * w for w in widths))
        lines.insert(len(lines) - 1, "  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"


def group_results(results: list[CaseResult]) -> tuple[GroupStat, ...]:
    counts: dict[tuple[str, str], list[int]] = {}
    for r in results:
        c_n = counts.setdefault((r.subscenario, r.difficulty), [0, 0])
        c_n[0] += int(r.success)
        c_n[1] += 1
    order = {s: i for i, s in enumerate(SUBSCENARIOS)}
    keys = sorted(counts, key=lambda k: (order.get(k[0], len(order)), k[0], k[1] != "simple", k[1]))
    return tuple(GroupStat(s, d, *counts[(s, d)]) for s, d in keys)


def load_manifest(dataset_dir: str | Path) -> list[Path]:
    root = Path(dataset_dir)
    path = root / "manifest.json"
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise ManifestError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: invalid JSON ({exc.msg})") from None
    ids = data.get("cases") if isinstance(data, dict) else None
    if not isinstance(ids, list) or not all(isinstance(i, str) for i in ids) or not ids:
        raise ManifestError(f"{path}: 'cases' must be a non-empty list of case ids")
    if len(set(ids)) != len(ids):
        raise ManifestError(f"{path}: duplicate case ids")
    dirs = [root / i for i in ids]
    for d in dirs:
        if not (d / "case.json").is_file():
            raise ManifestError(f"case {d.name} listed in manifest but {d}/case.json is missing")
    return dirs


def evaluate(
    dataset_dir: str | Path,
    cfg: RunConfig,
    kb: Optional[Kb] = None,
    artifacts_dir: Optional[str | Path] = None,
) -> EvalSummary:
    """Run every case ``repetitions`` times and aggregate c/n per group."""
    try:
        cases = [load_case(d) for d in load_manifest(dataset_dir)]
    except (KeyError, ValueError) as exc:
        raise ManifestError(f"malformed case: {exc}") from None
    kb = kb or load_and_validate(cfg.kb_path, model=cfg.delay_model, default_period=cfg.default_period)
    book = CaseBook()
    for case in cases:
        book.register(case.case_id, case.golden, case.reference_cause)
    gateway = LlmGateway(cfg.llm, RunLog(cfg.run_log_path), book)
    jobs = [case for case in sorted(cases, key=lambda c: c.case_id) for _ in range(cfg.repetitions)]
    try:
        if cfg.workers > 1:
            with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
                results = list(pool.map(lambda c: run_debug_case(c, cfg, kb, gateway), jobs))
        else:
            results = [run_debug_case(c, cfg, kb, gateway) for c in jobs]
    finally:
        gateway.close()
    if artifacts_dir is not None:
        write_artifacts(artifacts_dir, results)
    return EvalSummary(group_results(results), tuple(results))


def write_artifacts(root: str | Path, results: list[CaseResult]) -> None:
    root = Path(root)
    for r in results:
        target = root / r.case_id
        target.mkdir(parents=True, exist_ok=True)
        (target / "result.json").write_text(json.dumps(r.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
        if r.repaired is not None:
            (target / "repaired.v").write_text(r.repaired.rstrip("\n") + "\n", encoding="utf-8")
