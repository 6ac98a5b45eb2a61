"""Static timing analysis, CDC detection and the timing-report text format."""

from timing_triage.timing.engine import (
    DelayModel,
    MissingClockConstraint,
    analyze_timing,
    detect_cdc,
    full_report,
)
from timing_triage.timing.report import (
    CdcFinding,
    ClockConstraint,
    ConstraintError,
    ReportParseError,
    TimingPath,
    TimingReport,
    emit_report,
    load_constraints,
    parse_constraints,
    parse_report,
)

__all__ = [
    "CdcFinding", "ClockConstraint", "ConstraintError", "DelayModel", "MissingClockConstraint",
    "ReportParseError", "TimingPath", "TimingReport", "analyze_timing", "detect_cdc",
    "emit_report", "full_report", "load_constraints", "parse_constraints", "parse_report",
]
