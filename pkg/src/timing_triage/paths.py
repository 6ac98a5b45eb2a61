"""Violation path reconstruction.

From a violating register, every logical path back to a startpoint is
enumerated, then collapsed to the single slowest physical path. The result
is packaged with the report block and source excerpts for cause analysis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Optional

from timing_triage.frontend.ast import NOLOC, SourceLoc
from timing_triage.stdg import Stdg, StdgNode, violation_info, ViolationInfo
from timing_triage.timing.engine import EPS, DelayModel, endpoint_paths
from timing_triage.timing.report import TimingReport, Violation, emit_violation, render_path

MAX_PATHS = 10_000


class NotARegister(ValueError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"{name!r} is not a Register node")


class PathExplosion(RuntimeError):
    def __init__(self, endpoint: str, limit: int):
        self.endpoint = endpoint
        self.limit = limit
        super().__init__(f"more than {limit} logical paths into {endpoint!r}")


class EmptyPathSet(ValueError):
    pass


@dataclass(frozen=True)
class LogicalPath:
    nodes: tuple[StdgNode, ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise ValueError("a logical path has at least one node")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n.name for n in self.nodes)

    @property
    def startpoint(self) -> StdgNode:
        return self.nodes[0]

    @property
    def endpoint(self) -> StdgNode:
        return self.nodes[-1]

    def delay(self, model: DelayModel) -> float:
        return sum(model.node_delay(n) for n in self.nodes)

    def __str__(self) -> str:
        return render_path(self.names)


@dataclass(frozen=True)
class PhysicalPath:
    path: LogicalPath
    delay: float

    @property
    def names(self) -> tuple[str, ...]:
        return self.path.names

    def __str__(self) -> str:
        return str(self.path)


@dataclass(frozen=True)
class ViolationContext:
    violation: ViolationInfo
    endpoint: str
    physical_path: PhysicalPath
    report_block: str
    path_source_excerpts: tuple[tuple[SourceLoc, str], ...]
    source: str

    @property
    def path_text(self) -> str:
        return str(self.physical_path)

    def excerpt_text(self) -> str:
        return "\n".join(f"{loc.line:>4}: {text}" for loc, text in self.path_source_excerpts)


def _require_register(stdg: Stdg, v_viol: int | str) -> StdgNode:
    node = stdg.node(v_viol)
    if not node.is_register:
        raise NotARegister(node.name)
    return node


def enumerate_logical_paths(stdg: Stdg, v_viol: int | str, limit: int = MAX_PATHS) -> set[LogicalPath]:
    """Every startpoint-to-``v_viol`` path over Data and Control edges.

    Expansion stops at registers and input ports. Branches that dead-end at
    constants or undriven nets are dropped; if nothing is left the result
    is the degenerate single-node path.
    """
    end = _require_register(stdg, v_viol)
    found: set[LogicalPath] = set()
    # stack of reversed partial paths (endpoint first)
    stack: list[tuple[int, ...]] = [(p, end.id) for p in stdg.predecessors(end.id)]
    while stack:
        rev = stack.pop()
        head = stdg.nodes[rev[0]]
        if head.is_startpoint:
            found.add(LogicalPath(tuple(stdg.nodes[i] for i in rev)))
            if len(found) > limit:
                raise PathExplosion(end.name, limit)
            continue
        for p in stdg.predecessors(head.id):
            stack.append((p,) + rev)
    if not found:
        found.add(LogicalPath((end,)))
    return found


def _rank(path: LogicalPath, delay: float) -> tuple:
    return (-round(delay / EPS), path.names)


def merge_to_physical(
    paths: Iterable[LogicalPath], model: DelayModel, startpoint: Optional[str] = None
) -> PhysicalPath:
    """Slowest path, optionally restricted to a reported startpoint.

    Equal delays resolve to the lexicographically smallest name sequence.
    A startpoint that matches none of the paths is ignored.
    """
    pool = list(paths)
    if not pool:
        raise EmptyPathSet("no logical paths to merge")
    if startpoint is not None:
        narrowed = [p for p in pool if p.startpoint.name == startpoint]
        pool = narrowed or pool
    scored = [(p, p.delay(model)) for p in pool]
    best, delay = min(scored, key=lambda pd: _rank(*pd))
    return PhysicalPath(best, delay)


def longest_path_fallback(
    stdg: Stdg, v_viol: int | str, model: DelayModel, startpoint: Optional[str] = None
) -> PhysicalPath:
    """Same answer as enumerate + merge, computed by DP without enumeration."""
    end = _require_register(stdg, v_viol)
    table = endpoint_paths(stdg, end.id, model.node_delay).longest
    if startpoint is not None:
        narrowed = {s: e for s, e in table.items() if stdg.nodes[s].name == startpoint}
        table = narrowed or table
    if not table:
        return PhysicalPath(LogicalPath((end,)), 0.0)
    best = min(table.values(), key=lambda e: (-round(e.delay / EPS), e.names))
    nodes = tuple(stdg.by_name[n] for n in best.names)
    return PhysicalPath(LogicalPath(nodes), best.delay)


def violation_path(
    stdg: Stdg, v_viol: int | str, model: DelayModel, startpoint: Optional[str] = None
) -> PhysicalPath:
    try:
        paths = enumerate_logical_paths(stdg, v_viol)
    except PathExplosion:
        return longest_path_fallback(stdg, v_viol, model, startpoint)
    return merge_to_physical(paths, model, startpoint)


def source_excerpts(path: LogicalPath, source: str) -> tuple[tuple[SourceLoc, str], ...]:
    lines = source.splitlines()
    out = []
    for node in path.nodes:
        loc = node.loc
        if loc is None or loc == NOLOC or not 1 <= loc.line <= len(lines):
            continue
        out.append((loc, lines[loc.line - 1].rstrip()))
    return tuple(out)


def context_for(stdg: Stdg, violation: Violation, source: str, model: DelayModel) -> ViolationContext:
    info = violation_info(violation)
    physical = violation_path(stdg, violation.endpoint, model, info.report_startpoint)
    return ViolationContext(
        violation=info,
        endpoint=violation.endpoint,
        physical_path=physical,
        report_block=emit_violation(violation),
        path_source_excerpts=source_excerpts(physical.path, source),
        source=source,
    )


def build_violation_context(
    stdg: Stdg, report: TimingReport, source: str, model: Optional[DelayModel] = None
) -> list[ViolationContext]:
    """One context per report violation, in report order."""
    model = model or DelayModel()
    return [context_for(stdg, v, source, model) for v in report.ordered()]
