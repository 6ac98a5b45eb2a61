"""Canonical timing-report text format and the violation records it carries.

A report is a sequence of blocks::

    VIOLATION setup
      Startpoint: r_src (rising edge clk)
      Endpoint:   r_dst (rising edge clk)
      Requirement: 5.000 ns
      Arrival:     6.200 ns
      Slack:      -1.200 ns
      Path: r_src -> add#1 -> add#2 -> r_dst
    END

``hold`` blocks use the same fields. ``cdc`` blocks swap the three timing
lines for ``Source``, ``Destination``, ``Width`` and ``Synchronizer``.
Blocks are separated by one blank line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Union

PATH_SEP = " -> "
SYNCHRONIZERS = ("none", "two_flop", "handshake")


class ReportParseError(ValueError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


def render_path(names: Iterable[str]) -> str:
    return PATH_SEP.join(names)


@dataclass(frozen=True)
class TimingPath:
    vtype: str  # setup or hold
    startpoint: str
    endpoint: str
    path: tuple[str, ...]
    arrival: float
    required: float
    slack: float
    clock: str
    start_clock: Optional[str] = None  # None when the startpoint is a port
    start_edge: str = "rising"
    end_edge: str = "rising"

    def sort_key(self) -> tuple:
        return (self.vtype, self.slack, self.endpoint, self.startpoint)


@dataclass(frozen=True)
class CdcFinding:
    source: str
    source_domain: str
    destination: str
    dest_domain: str
    width: int
    synchronizer: str
    path: tuple[str, ...] = ()
    source_edge: str = "rising"
    dest_edge: str = "rising"

    vtype = "cdc"

    @property
    def violating(self) -> bool:
        if self.width == 1:
            return self.synchronizer == "none"
        return self.synchronizer != "handshake"

    @property
    def startpoint(self) -> str:
        return self.source

    @property
    def endpoint(self) -> str:
        return self.destination

    @property
    def slack(self) -> None:
        return None

    def sort_key(self) -> tuple:
        return ("cdc", 0.0, self.destination, self.source)


Violation = Union[TimingPath, CdcFinding]


@dataclass(frozen=True)
class TimingReport:
    paths: tuple[TimingPath, ...] = ()
    cdc: tuple[CdcFinding, ...] = field(default=())

    def ordered(self) -> list[Violation]:
        """All violations in canonical report order."""
        items: list[Violation] = [*self.paths, *self.cdc]
        return sorted(items, key=lambda v: v.sort_key())

    def __len__(self) -> int:
        return len(self.paths) + len(self.cdc)

    def __bool__(self) -> bool:
        return len(self) > 0

    def keys(self) -> set[tuple[str, str]]:
        """(violation type, endpoint) pairs present in the report."""
        return {(v.vtype, v.endpoint) for v in self.ordered()}


# ---- emit -----------------------------------------------------------------


def _edge_text(edge: str, clock: str) -> str:
    return f"{edge} edge {clock}"


def _num(label: str, value: float) -> str:
    if value == 0:
        value = 0.0  # no "-0.000"
    return f"  {label:<12}{value:6.3f} ns"


def emit_violation(v: Violation) -> str:
    if isinstance(v, TimingPath):
        start = (
            f"{v.startpoint} (input port)"
            if v.start_clock is None
            else f"{v.startpoint} ({_edge_text(v.start_edge, v.start_clock)})"
        )
        lines = [
            f"VIOLATION {v.vtype}",
            f"  {'Startpoint:':<12}{start}",
            f"  {'Endpoint:':<12}{v.endpoint} ({_edge_text(v.end_edge, v.clock)})",
            _num("Requirement:", v.required),
            _num("Arrival:", v.arrival),
            _num("Slack:", v.slack),
            f"  Path: {render_path(v.path)}",
            "END",
        ]
    else:
        lines = [
            "VIOLATION cdc",
            f"  {'Startpoint:':<12}{v.source} ({_edge_text(v.source_edge, v.source_domain)})",
            f"  {'Endpoint:':<12}{v.destination} ({_edge_text(v.dest_edge, v.dest_domain)})",
            f"  Source: {v.source} ({v.source_domain})",
            f"  Destination: {v.destination} ({v.dest_domain})",
            f"  Width: {v.width}",
            f"  Synchronizer: {v.synchronizer}",
            f"  Path: {render_path(v.path)}",
            "END",
        ]
    return "\n".join(lines) + "\n"


def emit_report(report: TimingReport) -> str:
    return "\n".join(emit_violation(v) for v in report.ordered())


# ---- parse ----------------------------------------------------------------

_FIELD_RE = re.compile(r"^  (\w+):\s*(.*?)\s*$")
_NUM_RE = re.compile(r"^(-?\d+(?:\.\d+)?) ns$")
_CLOCKED_RE = re.compile(r"^(\S+) \((rising|falling) edge (\S+)\)$")
_PORT_RE = re.compile(r"^(\S+) \(input port\)$")
_DOMAIN_RE = re.compile(r"^(\S+) \((\S+)\)$")

_TIMING_FIELDS = ("Startpoint", "Endpoint", "Requirement", "Arrival", "Slack", "Path")
_CDC_FIELDS = ("Startpoint", "Endpoint", "Source", "Destination", "Width", "Synchronizer", "Path")


def _number(text: str, line: int, name: str) -> float:
    m = _NUM_RE.match(text)
    if m is None:
        raise ReportParseError(line, f"malformed {name} value {text!r}")
    return float(m.group(1))


def _path(text: str, line: int) -> tuple[str, ...]:
    names = tuple(part.strip() for part in text.split("->"))
    if not names or any(not n or " " in n for n in names):
        raise ReportParseError(line, f"malformed path {text!r}")
    return names


def _clocked(text: str, line: int, name: str) -> tuple[str, str, str]:
    m = _CLOCKED_RE.match(text)
    if m is None:
        raise ReportParseError(line, f"malformed {name} {text!r}")
    return m.group(1), m.group(2), m.group(3)


def _build(vtype: str, fields: dict[str, tuple[str, int]], end_line: int) -> Violation:
    expected = _CDC_FIELDS if vtype == "cdc" else _TIMING_FIELDS
    for name in expected:
        if name not in fields:
            raise ReportParseError(end_line, f"{vtype} block missing '{name}:' line")
    extra = set(fields) - set(expected)
    if extra:
        name = sorted(extra)[0]
        raise ReportParseError(fields[name][1], f"unexpected field {name!r} in {vtype} block")

    text, ln = fields["Endpoint"]
    endpoint, end_edge, end_clock = _clocked(text, ln, "endpoint")
    path = _path(*fields["Path"])
    text, ln = fields["Startpoint"]

    if vtype == "cdc":
        source, source_edge, source_domain = _clocked(text, ln, "startpoint")
        src_text, src_ln = fields["Source"]
        dst_text, dst_ln = fields["Destination"]
        ms, md = _DOMAIN_RE.match(src_text), _DOMAIN_RE.match(dst_text)
        if ms is None or (ms.group(1), ms.group(2)) != (source, source_domain):
            raise ReportParseError(src_ln, f"Source {src_text!r} disagrees with startpoint")
        if md is None or (md.group(1), md.group(2)) != (endpoint, end_clock):
            raise ReportParseError(dst_ln, f"Destination {dst_text!r} disagrees with endpoint")
        width_text, width_ln = fields["Width"]
        if not width_text.isdigit() or int(width_text) < 1:
            raise ReportParseError(width_ln, f"malformed width {width_text!r}")
        sync, sync_ln = fields["Synchronizer"]
        if sync not in SYNCHRONIZERS:
            raise ReportParseError(sync_ln, f"unknown synchronizer {sync!r}")
        return CdcFinding(
            source=source,
            source_domain=source_domain,
            destination=endpoint,
            dest_domain=end_clock,
            width=int(width_text),
            synchronizer=sync,
            path=path,
            source_edge=source_edge,
            dest_edge=end_edge,
        )

    port = _PORT_RE.match(text)
    if port is not None:
        startpoint, start_edge, start_clock = port.group(1), "rising", None
    else:
        startpoint, start_edge, start_clock = _clocked(text, ln, "startpoint")
    required = _number(*fields["Requirement"], "Requirement")
    arrival = _number(*fields["Arrival"], "Arrival")
    slack_text, slack_ln = fields["Slack"]
    slack = _number(slack_text, slack_ln, "Slack")
    if slack >= 0:
        raise ReportParseError(slack_ln, "violation block with non-negative slack")
    return TimingPath(
        vtype=vtype,
        startpoint=startpoint,
        endpoint=endpoint,
        path=path,
        arrival=arrival,
        required=required,
        slack=slack,
        clock=end_clock,
        start_clock=start_clock,
        start_edge=start_edge,
        end_edge=end_edge,
    )


def parse_report(text: str) -> TimingReport:
    paths: list[TimingPath] = []
    cdc: list[CdcFinding] = []
    vtype: Optional[str] = None
    fields: dict[str, tuple[str, int]] = {}
    lineno = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.rstrip()
        if vtype is None:
            if not line:
                continue
            m = re.match(r"^VIOLATION (setup|hold|cdc)$", line)
            if m is None:
                raise ReportParseError(lineno, f"expected 'VIOLATION <type>', found {line!r}")
            vtype = m.group(1)
            fields = {}
            continue
        if line == "END":
            v = _build(vtype, fields, lineno)
            (cdc if isinstance(v, CdcFinding) else paths).append(v)  # type: ignore[arg-type]
            vtype = None
            continue
        m = _FIELD_RE.match(line)
        if m is None:
            raise ReportParseError(lineno, f"malformed line {line!r}")
        name, value = m.group(1), m.group(2)
        if name in fields:
            raise ReportParseError(lineno, f"duplicate field {name!r}")
        fields[name] = (value, lineno)
    if vtype is not None:
        raise ReportParseError(lineno, "unterminated block (missing END)")
    return TimingReport(tuple(paths), tuple(cdc))


# ---- constraints ----------------------------------------------------------


@dataclass(frozen=True)
class ClockConstraint:
    clock: str
    period: float

    def __post_init__(self) -> None:
        if not self.period > 0:
            raise ValueError(f"clock {self.clock!r}: period must be > 0, got {self.period}")


class ConstraintError(ValueError):
    pass


def parse_constraints(text: str) -> list[ClockConstraint]:
    """Parse ``clock <name> <period_ns>`` lines; ``#`` starts a comment."""
    out: dict[str, ClockConstraint] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3 or parts[0] != "clock":
            raise ConstraintError(f"line {lineno}: expected 'clock <name> <period_ns>', found {raw!r}")
        try:
            period = float(parts[2])
        except ValueError:
            raise ConstraintError(f"line {lineno}: bad period {parts[2]!r}") from None
        if parts[1] in out:
            raise ConstraintError(f"line {lineno}: clock {parts[1]!r} constrained twice")
        try:
            out[parts[1]] = ClockConstraint(parts[1], period)
        except ValueError as exc:
            raise ConstraintError(f"line {lineno}: {exc}") from None
    return list(out.values())


def load_constraints(path: str | Path) -> list[ClockConstraint]:
    return parse_constraints(Path(path).read_text(encoding="utf-8"))


def emit_constraints(constraints: Iterable[ClockConstraint]) -> str:
    return "".join(f"clock {c.clock} {c.period:g}\n" for c in constraints)
