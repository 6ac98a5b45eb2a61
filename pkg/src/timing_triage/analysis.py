"""One-call design analysis shared by the KB validator, injector and pipeline."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping, Optional

from timing_triage.frontend import AstModule, parse
from timing_triage.stdg import Stdg, build
from timing_triage.timing.engine import DelayModel, full_report
from timing_triage.timing.report import ClockConstraint, TimingReport


@dataclass(frozen=True)
class Analysis:
    module: AstModule
    graph: Stdg
    report: TimingReport


def complete_constraints(
    graph: Stdg, constraints: Iterable[ClockConstraint], default_period: Optional[float]
) -> list[ClockConstraint]:
    """Explicit constraints plus ``default_period`` for any unconstrained clock."""
    given = {c.clock: c for c in constraints}
    if default_period is not None:
        for clock in graph.clocks:
            given.setdefault(clock, ClockConstraint(clock, default_period))
    return sorted(given.values(), key=lambda c: c.clock)


def analyze_source(
    text: str,
    model: Optional[DelayModel] = None,
    constraints: Iterable[ClockConstraint] = (),
    default_period: Optional[float] = None,
    file: str = "<input>",
) -> Analysis:
    """Parse, build the graph and run setup/hold plus CDC analysis."""
    mod = parse(text, file=file)
    graph = build(mod)
    model = model or DelayModel()
    report = full_report(graph, model, complete_constraints(graph, constraints, default_period))
    return Analysis(mod, graph, report)


def constraints_from_mapping(periods: Mapping[str, float]) -> list[ClockConstraint]:
    return [ClockConstraint(clock, float(p)) for clock, p in sorted(periods.items())]
