"""Desk-scale static timing analysis and clock-domain-crossing detection.

Setup arrival at an endpoint register is ``t_cq`` plus the sum of operator
delays along the slowest combinational path from a same-domain register or
an input port; required time is ``period - t_su``. Hold slack uses the
fastest path: ``t_cq + min_delay - t_h``. Clock skew is zero. Paths between
registers in different domains are left to :func:`detect_cdc`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, fields, replace
from typing import TYPE_CHECKING, Callable, Iterable, Mapping, Optional

from timing_triage.timing.report import CdcFinding, ClockConstraint, TimingPath, TimingReport

if TYPE_CHECKING:
    from timing_triage.stdg import Stdg, StdgNode

# operator node name -> delay class
OP_CLASS = {
    "not": "bitwise", "and": "bitwise", "or": "bitwise", "xor": "bitwise",
    "lnot": "bitwise", "land": "bitwise", "lor": "bitwise",
    "rand": "bitwise", "ror": "bitwise", "rxor": "bitwise",
    "add": "add", "sub": "add", "neg": "add",
    "mux": "mux",
    "eq": "compare", "ne": "compare", "lt": "compare", "le": "compare", "gt": "compare", "ge": "compare",
    "shl": "shift", "shr": "shift",
    "mul": "multiply",
    "div": "divide", "mod": "divide",
    "bitsel": "select", "partsel": "select", "concat": "select",
}

# comparisons below this magnitude are treated as exact ties / zero slack
EPS = 1e-9


class MissingClockConstraint(Exception):
    def __init__(self, clock: str):
        self.clock = clock
        super().__init__(f"no period constraint for clock {clock!r}")


@dataclass(frozen=True)
class DelayModel:
    bitwise: float = 0.3
    add: float = 1.0
    mux: float = 0.5
    compare: float = 0.8
    shift: float = 0.6
    multiply: float = 3.0
    divide: float = 6.0
    select: float = 0.0
    t_cq: float = 0.5
    t_su: float = 0.5
    t_h: float = 0.3

    def __post_init__(self) -> None:
        for f in fields(self):
            value = getattr(self, f.name)
            if not isinstance(value, (int, float)) or value < 0:
                raise ValueError(f"delay {f.name} must be a non-negative number, got {value!r}")

    def node_delay(self, node: StdgNode) -> float:
        if node.op is None:
            return 0.0
        return getattr(self, OP_CLASS[node.op])

    def with_overrides(self, overrides: Optional[Mapping[str, float]]) -> "DelayModel":
        if not overrides:
            return self
        unknown = set(overrides) - {f.name for f in fields(self)}
        if unknown:
            raise ValueError(f"unknown delay model keys: {sorted(unknown)}")
        return replace(self, **{k: float(v) for k, v in overrides.items()})

    def to_dict(self) -> dict[str, float]:
        return asdict(self)


# ---- path dynamic programming ---------------------------------------------


@dataclass(frozen=True)
class Extreme:
    """Best suffix from a node to the endpoint: summed weight and node names."""

    delay: float
    names: tuple[str, ...]


def _pick(cands: list[Extreme], longest: bool) -> Extreme:
    if longest:
        return min(cands, key=lambda c: (-round(c.delay / EPS), c.names))
    return min(cands, key=lambda c: (round(c.delay / EPS), c.names))


def endpoint_fanin(stdg: Stdg, endpoint: int) -> tuple[set[int], list[int]]:
    """Interior combinational nodes and startpoints feeding ``endpoint``.

    Walks predecessors, stopping at registers and input ports. Nodes that
    have no startpoint upstream (constants, undriven wires) are still part
    of the interior set but never yield a path.
    """
    interior: set[int] = set()
    starts: set[int] = set()
    stack = list(stdg.predecessors(endpoint))
    while stack:
        v = stack.pop()
        node = stdg.nodes[v]
        if node.is_startpoint:
            starts.add(v)
            continue
        if v in interior:
            continue
        interior.add(v)
        stack.extend(stdg.predecessors(v))
    return interior, sorted(starts)


def suffix_extremes(
    stdg: Stdg,
    endpoint: int,
    weight: Callable[[StdgNode], float],
    interior: set[int],
) -> Callable[[int], Optional[tuple[Extreme, Extreme]]]:
    """Return a memoised lookup of (longest, shortest) suffixes from a node.

    A suffix excludes the node it starts from and ends with the endpoint.
    Ties break on the lexicographically smallest name sequence, which is
    the same order a brute-force enumeration would pick.
    """
    memo: dict[int, Optional[tuple[Extreme, Extreme]]] = {}
    end_name = stdg.nodes[endpoint].name

    def visit(v: int) -> Optional[tuple[Extreme, Extreme]]:
        if v in memo:
            return memo[v]
        longs: list[Extreme] = []
        shorts: list[Extreme] = []
        for w in stdg.successors(v):
            if w == endpoint:
                longs.append(Extreme(0.0, (end_name,)))
                shorts.append(Extreme(0.0, (end_name,)))
            elif w in interior:
                sub = visit(w)
                if sub is None:
                    continue
                node = stdg.nodes[w]
                d = weight(node)
                longs.append(Extreme(d + sub[0].delay, (node.name,) + sub[0].names))
                shorts.append(Extreme(d + sub[1].delay, (node.name,) + sub[1].names))
        result = (_pick(longs, True), _pick(shorts, False)) if longs else None
        memo[v] = result
        return result

    # iterative warm-up in reverse topological order keeps recursion shallow
    order = _topo_order(stdg, interior)
    for v in reversed(order):
        visit(v)
    return visit


def _topo_order(stdg: Stdg, interior: set[int]) -> list[int]:
    indeg = {v: 0 for v in interior}
    for v in interior:
        for w in stdg.successors(v):
            if w in interior:
                indeg[w] += 1
    ready = sorted(v for v, d in indeg.items() if d == 0)
    order: list[int] = []
    while ready:
        v = ready.pop()
        order.append(v)
        for w in stdg.successors(v):
            if w in interior:
                indeg[w] -= 1
                if indeg[w] == 0:
                    ready.append(w)
    return order


@dataclass(frozen=True)
class EndpointPaths:
    """Per-startpoint extreme paths into one endpoint."""

    longest: dict[int, Extreme]
    shortest: dict[int, Extreme]


def endpoint_paths(
    stdg: Stdg,
    endpoint: int,
    weight: Callable[[StdgNode], float],
    start_filter: Optional[Callable[[StdgNode], bool]] = None,
) -> EndpointPaths:
    interior, starts = endpoint_fanin(stdg, endpoint)
    lookup = suffix_extremes(stdg, endpoint, weight, interior)
    longest: dict[int, Extreme] = {}
    shortest: dict[int, Extreme] = {}
    for s in starts:
        node = stdg.nodes[s]
        if start_filter is not None and not start_filter(node):
            continue
        sub = lookup(s)
        if sub is None:
            continue
        longest[s] = Extreme(sub[0].delay, (node.name,) + sub[0].names)
        shortest[s] = Extreme(sub[1].delay, (node.name,) + sub[1].names)
    return EndpointPaths(longest, shortest)


# ---- setup / hold ---------------------------------------------------------


def _periods(stdg: Stdg, constraints: Iterable[ClockConstraint]) -> dict[str, float]:
    periods = {c.clock: c.period for c in constraints}
    for reg in stdg.registers():
        if reg.clock_domain not in periods:
            raise MissingClockConstraint(reg.clock_domain or "?")
    return periods


def _make_path(
    stdg: Stdg, vtype: str, end: StdgNode, start: StdgNode, path: Extreme,
    arrival: float, required: float, slack: float,
) -> TimingPath:
    return TimingPath(
        vtype=vtype,
        startpoint=start.name,
        endpoint=end.name,
        path=path.names,
        arrival=arrival,
        required=required,
        slack=slack,
        clock=end.clock_domain or "",
        start_clock=start.clock_domain if start.is_register else None,
        start_edge=(start.edge or "rising") if start.is_register else "rising",
        end_edge=end.edge or "rising",
    )


def endpoint_timing(
    stdg: Stdg, endpoint: StdgNode, model: DelayModel, period: float
) -> tuple[Optional[TimingPath], Optional[TimingPath]]:
    """Worst setup and hold paths into ``endpoint`` (slack sign not filtered)."""
    same_domain = lambda n: (not n.is_register) or n.clock_domain == endpoint.clock_domain  # noqa: E731
    paths = endpoint_paths(stdg, endpoint.id, model.node_delay, same_domain)
    if not paths.longest:
        return None, None
    required = period - model.t_su

    setup_start = _pick_start(stdg, paths.longest, longest=True)
    worst = paths.longest[setup_start]
    arrival = model.t_cq + worst.delay
    setup = _make_path(stdg, "setup", endpoint, stdg.nodes[setup_start], worst, arrival, required, required - arrival)

    hold_start = _pick_start(stdg, paths.shortest, longest=False)
    fastest = paths.shortest[hold_start]
    h_arrival = model.t_cq + fastest.delay
    hold = _make_path(stdg, "hold", endpoint, stdg.nodes[hold_start], fastest, h_arrival, model.t_h, h_arrival - model.t_h)
    return setup, hold


def _pick_start(stdg: Stdg, table: dict[int, Extreme], longest: bool) -> int:
    best = _pick(list(table.values()), longest)
    return next(s for s, e in table.items() if e is best)


def analyze_timing(stdg: Stdg, model: DelayModel, constraints: Iterable[ClockConstraint]) -> TimingReport:
    """Setup and hold violations (slack < 0) for every register endpoint."""
    periods = _periods(stdg, constraints)
    found: list[TimingPath] = []
    for reg in stdg.registers():
        setup, hold = endpoint_timing(stdg, reg, model, periods[reg.clock_domain])
        for p in (setup, hold):
            if p is not None and p.slack < -EPS:
                found.append(p)
    found.sort(key=TimingPath.sort_key)
    return TimingReport(paths=tuple(found))


# ---- clock domain crossings -----------------------------------------------


def _is_sync_pair(stdg: Stdg, first: StdgNode, second_id: int) -> bool:
    """``first`` -> ``second`` is the back end of a two-flop synchronizer."""
    second = stdg.nodes[second_id]
    if not second.is_register or second.clock_domain != first.clock_domain:
        return False
    if stdg.predecessors(second_id) != (first.id,):
        return False
    return stdg.successors(first.id) == (second_id,)


def synchronizer_stages(stdg: Stdg) -> dict[int, int]:
    """Map first-stage flop -> second-stage flop for every two-flop synchronizer.

    The first flop is fed directly (no logic) by a single register from a
    different domain and drives only the second flop, which it alone feeds.
    """
    out: dict[int, int] = {}
    for reg in stdg.registers():
        preds = stdg.predecessors(reg.id)
        if len(preds) != 1:
            continue
        src = stdg.nodes[preds[0]]
        if not src.is_register or src.clock_domain == reg.clock_domain:
            continue
        succs = stdg.successors(reg.id)
        if len(succs) == 1 and _is_sync_pair(stdg, reg, succs[0]):
            out[reg.id] = succs[0]
    return out


def _control_sources(stdg: Stdg, node_id: int) -> list[int]:
    return sorted({e.src for e in stdg.edges if e.dst == node_id and e.kind.value == "Control"})


def _traces_to_sync(stdg: Stdg, start: int, domain: Optional[str], sync_outputs: set[int]) -> bool:
    """Walk back from ``start`` through logic and same-domain registers."""
    seen: set[int] = set()
    stack = [start]
    while stack:
        v = stack.pop()
        if v in seen:
            continue
        seen.add(v)
        if v in sync_outputs:
            return True
        node = stdg.nodes[v]
        if node.is_register and node.clock_domain != domain:
            continue
        stack.extend(stdg.predecessors(v))
    return False


def detect_cdc(stdg: Stdg) -> list[CdcFinding]:
    """One finding per (source register, destination register) in different domains."""
    stages = synchronizer_stages(stdg)
    sync_outputs = set(stages.values())
    hop = lambda n: 1.0  # noqa: E731
    findings: list[CdcFinding] = []
    for dst in stdg.registers():
        cross = lambda n, d=dst: n.is_register and n.clock_domain != d.clock_domain  # noqa: E731
        paths = endpoint_paths(stdg, dst.id, hop, cross)
        if not paths.shortest:
            continue
        handshake = any(
            _traces_to_sync(stdg, c, dst.clock_domain, sync_outputs) for c in _control_sources(stdg, dst.id)
        )
        for src_id, route in sorted(paths.shortest.items(), key=lambda kv: stdg.nodes[kv[0]].name):
            src = stdg.nodes[src_id]
            if handshake:
                sync = "handshake"
            elif dst.id in stages and stdg.predecessors(dst.id) == (src_id,):
                sync = "two_flop"
            else:
                sync = "none"
            findings.append(
                CdcFinding(
                    source=src.name,
                    source_domain=src.clock_domain or "",
                    destination=dst.name,
                    dest_domain=dst.clock_domain or "",
                    width=src.width,
                    synchronizer=sync,
                    path=route.names,
                    source_edge=src.edge or "rising",
                    dest_edge=dst.edge or "rising",
                )
            )
    findings.sort(key=lambda f: (f.destination, f.source))
    return findings


def full_report(stdg: Stdg, model: DelayModel, constraints: Iterable[ClockConstraint]) -> TimingReport:
    """Setup/hold violations plus violating CDC findings."""
    timing = analyze_timing(stdg, model, constraints)
    violating = tuple(f for f in detect_cdc(stdg) if f.violating)
    return TimingReport(paths=timing.paths, cdc=violating)
