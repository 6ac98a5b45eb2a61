"""Repair knowledge base: violation type -> subscenario -> strategy + demo pair.

Entries live one per file under ``<root>/<type>/<subscenario>/NNN.json``.
Loading validates the schema and taxonomy, then re-runs the timing engine
on both demos: ``demo_before`` must show the claimed violation type and
``demo_after`` must be clean.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

from timing_triage.analysis import analyze_source
from timing_triage.config import data_path
from timing_triage.frontend import ParseError
from timing_triage.stdg import BuildError
from timing_triage.timing.engine import DelayModel, MissingClockConstraint
from timing_triage.timing.report import ClockConstraint

TAXONOMY: dict[str, tuple[str, ...]] = {
    "setup": ("long_comb_chain", "deep_mux", "low_pipe_stage"),
    "hold": ("short_logic_path",),
    "cdc": ("single_bit_trans", "multi_bits_trans"),
}
UNKNOWN = "Unknown"
SUBSCENARIOS: tuple[str, ...] = tuple(s for subs in TAXONOMY.values() for s in subs)

_FIELDS = ("id", "violation_type", "subscenario", "description", "repair_strategy", "demo_before", "demo_after", "tags")
_ID_RE = re.compile(r"^([a-z]+)\.([a-z_]+)\.(\d{3})$")
_CLOCK_TAG = re.compile(r"^clock:([A-Za-z_]\w*)=(\d+(?:\.\d+)?)$")
_DELAY_TAG = re.compile(r"^([a-z_]+)=(\d+(?:\.\d+)?)$")


def violation_type_of(subscenario: str) -> Optional[str]:
    for vtype, subs in TAXONOMY.items():
        if subscenario in subs:
            return vtype
    return None


class KbError(Exception):
    pass


class SchemaError(KbError):
    def __init__(self, file: str, field: str, reason: str = "missing or not a string"):
        self.file = file
        self.field = field
        super().__init__(f"{file}: field {field!r} {reason}")


class TaxonomyError(KbError):
    def __init__(self, entry_id: str, detail: str = ""):
        self.id = entry_id
        super().__init__(f"{entry_id}: not in the violation taxonomy{': ' + detail if detail else ''}")


class DemoInvalid(KbError):
    def __init__(self, entry_id: str, which: str, reason: str):
        self.id = entry_id
        self.which = which
        self.reason = reason
        super().__init__(f"{entry_id}: {which} invalid: {reason}")


class DuplicateId(KbError):
    def __init__(self, entry_id: str):
        self.id = entry_id
        super().__init__(f"duplicate knowledge-base id {entry_id!r}")


class IncompleteKb(KbError):
    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__(f"no entries for subscenarios: {', '.join(missing)}")


@dataclass(frozen=True)
class KbEntry:
    id: str
    violation_type: str
    subscenario: str
    description: str
    repair_strategy: str
    demo_before: str
    demo_after: str
    tags: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {f: (list(self.tags) if f == "tags" else getattr(self, f)) for f in _FIELDS}

    def analysis_settings(self) -> tuple[dict[str, float], list[ClockConstraint]]:
        """Delay-model overrides and clock periods carried in the tags."""
        overrides: dict[str, float] = {}
        clocks: list[ClockConstraint] = []
        for tag in self.tags:
            if m := _CLOCK_TAG.match(tag):
                clocks.append(ClockConstraint(m.group(1), float(m.group(2))))
            elif m := _DELAY_TAG.match(tag):
                overrides[m.group(1)] = float(m.group(2))
        return overrides, clocks


@dataclass(frozen=True)
class Kb:
    entries: tuple[KbEntry, ...]

    def __len__(self) -> int:
        return len(self.entries)

    def by_id(self, entry_id: str) -> KbEntry:
        for e in self.entries:
            if e.id == entry_id:
                return e
        raise KeyError(entry_id)

    def retrieve(self, violation_type: str, subscenario: str) -> list[KbEntry]:
        return retrieve(self, violation_type, subscenario)


def parse_entry(data: object, file: str = "<entry>") -> KbEntry:
    if not isinstance(data, dict):
        raise SchemaError(file, "<root>", "must be a JSON object")
    for name in _FIELDS:
        value = data.get(name)
        if name == "tags":
            if not isinstance(value, list) or not all(isinstance(t, str) for t in value):
                raise SchemaError(file, name, "must be a list of strings")
        elif not isinstance(value, str) or not value.strip():
            raise SchemaError(file, name)
    extra = sorted(set(data) - set(_FIELDS))
    if extra:
        raise SchemaError(file, extra[0], "is not part of the schema")
    m = _ID_RE.match(data["id"])
    if m is None:
        raise SchemaError(file, "id", "must look like type.subscenario.NNN")
    if (m.group(1), m.group(2)) != (data["violation_type"], data["subscenario"]):
        raise SchemaError(file, "id", "disagrees with violation_type/subscenario")
    return KbEntry(
        id=data["id"],
        violation_type=data["violation_type"],
        subscenario=data["subscenario"],
        description=data["description"],
        repair_strategy=data["repair_strategy"],
        demo_before=data["demo_before"],
        demo_after=data["demo_after"],
        tags=tuple(data["tags"]),
    )


def check_taxonomy(entry: KbEntry) -> None:
    if entry.subscenario not in TAXONOMY.get(entry.violation_type, ()):
        raise TaxonomyError(entry.id, f"({entry.violation_type}, {entry.subscenario})")


def validate_demos(entry: KbEntry, model: Optional[DelayModel] = None, default_period: float = 5.0) -> None:
    """Both demos parse; before shows the violation type, after is clean."""
    overrides, clocks = entry.analysis_settings()
    try:
        model = (model or DelayModel()).with_overrides(overrides)
    except ValueError as exc:
        raise DemoInvalid(entry.id, "tags", str(exc)) from None
    results = {}
    for which in ("demo_before", "demo_after"):
        try:
            results[which] = analyze_source(
                getattr(entry, which), model, clocks, default_period, file=f"{entry.id}:{which}"
            )
        except (ParseError, BuildError, MissingClockConstraint) as exc:
            raise DemoInvalid(entry.id, which, str(exc)) from None
    before, after = results["demo_before"], results["demo_after"]
    if not any(v.vtype == entry.violation_type for v in before.report.ordered()):
        raise DemoInvalid(entry.id, "demo_before", f"shows no {entry.violation_type} violation")
    if after.report:
        first = after.report.ordered()[0]
        raise DemoInvalid(entry.id, "demo_after", f"still has a {first.vtype} violation at {first.endpoint}")
    if before.module.port_signature() != after.module.port_signature():
        raise DemoInvalid(entry.id, "demo_after", "port list differs from demo_before")


def entry_files(root: Path) -> list[Path]:
    return sorted(root.glob("*/*/*.json"))


def load_and_validate(
    path: Optional[str | Path] = None,
    *,
    model: Optional[DelayModel] = None,
    default_period: float = 5.0,
    require_complete: bool = True,
) -> Kb:
    """Load every entry under ``path`` (bundled KB by default) and validate it."""
    root = Path(path) if path is not None else default_kb_path()
    if not root.is_dir():
        raise KbError(f"knowledge base directory not found: {root}")
    entries: dict[str, KbEntry] = {}
    for file in entry_files(root):
        try:
            data = json.loads(file.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise SchemaError(str(file), "<root>", f"is not valid JSON ({exc.msg})") from None
        entry = parse_entry(data, str(file))
        check_taxonomy(entry)
        rel = file.relative_to(root).parts
        if rel[:2] != (entry.violation_type, entry.subscenario):
            raise SchemaError(str(file), "id", f"entry stored under {'/'.join(rel[:2])}")
        if entry.id in entries:
            raise DuplicateId(entry.id)
        validate_demos(entry, model, default_period)
        entries[entry.id] = entry
    if require_complete:
        present = {e.subscenario for e in entries.values()}
        missing = [s for s in SUBSCENARIOS if s not in present]
        if missing:
            raise IncompleteKb(missing)
    return Kb(tuple(sorted(entries.values(), key=lambda e: e.id)))


def retrieve(kb: Kb, violation_type: str, subscenario: str) -> list[KbEntry]:
    """Exact (type, subscenario) matches by id; Unknown widens to the whole type."""
    if subscenario == UNKNOWN:
        return [e for e in kb.entries if e.violation_type == violation_type]
    return [e for e in kb.entries if (e.violation_type, e.subscenario) == (violation_type, subscenario)]


def default_kb_path() -> Path:
    return data_path("kb")


def write_entry(root: Path, entry: KbEntry) -> Path:
    num = entry.id.rsplit(".", 1)[1]
    target = root / entry.violation_type / entry.subscenario / f"{num}.json"
    target.parent.mkdir(parents=True, exist_ok=True)
    target.write_text(json.dumps(entry.to_dict(), indent=2) + "\n", encoding="utf-8")
    return target


def iter_demo_sources(kb: Kb) -> Iterable[tuple[str, str]]:
    for e in kb.entries:
        yield f"{e.id}:demo_before", e.demo_before
        yield f"{e.id}:demo_after", e.demo_after
