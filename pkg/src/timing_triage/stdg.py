"""Signal Timing Dependency Graph.

Nodes are signals (registers, wires, ports), constants and one operator
node per syntactic operator occurrence. Data edges run operand -> operator
-> assignment target; control edges run from an ``if``/``case`` condition
to every target assigned under it.
"""

from __future__ import annotations

import enum
from collections import defaultdict
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable, Optional

from timing_triage.frontend import ast as A
from timing_triage.frontend.parser import eval_const
from timing_triage.timing.report import CdcFinding, TimingReport, Violation


class NodeKind(str, enum.Enum):
    REGISTER = "Register"
    WIRE = "Wire"
    PORT = "Port"
    CONSTANT = "Constant"
    OPERATOR = "Operator"


class EdgeKind(str, enum.Enum):
    DATA = "Data"
    CONTROL = "Control"


UNARY_NAMES = {"~": "not", "!": "lnot", "-": "neg", "&": "rand", "|": "ror", "^": "rxor"}
BINARY_NAMES = {
    "&": "and", "|": "or", "^": "xor", "&&": "land", "||": "lor",
    "+": "add", "-": "sub", "*": "mul", "/": "div", "%": "mod",
    "<<": "shl", ">>": "shr",
    "==": "eq", "!=": "ne", "<": "lt", "<=": "le", ">": "gt", ">=": "ge",
}
_BOOLEAN_OPS = {"land", "lor", "lnot", "eq", "ne", "lt", "le", "gt", "ge", "rand", "ror", "rxor"}


@dataclass(frozen=True)
class ViolationInfo:
    vtype: str  # setup, hold or cdc
    slack: Optional[float]
    report_startpoint: str
    report_path: Optional[tuple[str, ...]] = None

    def __post_init__(self) -> None:
        if self.vtype == "cdc":
            if self.slack is not None:
                raise ValueError("cdc violations carry no slack")
        elif self.slack is None or not self.slack < 0:
            raise ValueError(f"{self.vtype} violation needs negative slack, got {self.slack}")

    def sort_key(self) -> tuple:
        return (self.vtype, self.slack or 0.0, self.report_startpoint, self.report_path or ())


@dataclass(frozen=True)
class StdgNode:
    id: int
    kind: NodeKind
    name: str
    width: int
    loc: A.SourceLoc = field(compare=False)
    clock_domain: Optional[str] = None
    op: Optional[str] = None  # operator name for Operator nodes
    direction: Optional[str] = None  # for Port nodes, as seen from inside the module
    edge: Optional[str] = None  # rising or falling, Register nodes only
    violations: tuple[ViolationInfo, ...] = ()

    @property
    def violation(self) -> Optional[ViolationInfo]:
        return self.violations[0] if self.violations else None

    @property
    def is_register(self) -> bool:
        return self.kind is NodeKind.REGISTER

    @property
    def is_source_port(self) -> bool:
        return self.kind is NodeKind.PORT and self.direction in ("input", "inout")

    @property
    def is_startpoint(self) -> bool:
        """Path expansion stops here: registers and module inputs."""
        return self.is_register or self.is_source_port


@dataclass(frozen=True)
class StdgEdge:
    src: int
    dst: int
    kind: EdgeKind


@dataclass(frozen=True)
class Stdg:
    nodes: tuple[StdgNode, ...]
    edges: tuple[StdgEdge, ...]
    clocks: tuple[str, ...] = ()
    module_name: str = ""

    @cached_property
    def by_name(self) -> dict[str, StdgNode]:
        return {n.name: n for n in self.nodes}

    @cached_property
    def preds(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = defaultdict(list)
        for e in self.edges:
            if e.src not in out[e.dst]:
                out[e.dst].append(e.src)
        return {k: tuple(v) for k, v in out.items()}

    @cached_property
    def succs(self) -> dict[int, tuple[int, ...]]:
        out: dict[int, list[int]] = defaultdict(list)
        for e in self.edges:
            if e.dst not in out[e.src]:
                out[e.src].append(e.dst)
        return {k: tuple(v) for k, v in out.items()}

    def node(self, key: int | str) -> StdgNode:
        if isinstance(key, int):
            return self.nodes[key]
        return self.by_name[key]

    def predecessors(self, node_id: int) -> tuple[int, ...]:
        return self.preds.get(node_id, ())

    def successors(self, node_id: int) -> tuple[int, ...]:
        return self.succs.get(node_id, ())

    def registers(self) -> list[StdgNode]:
        return [n for n in self.nodes if n.is_register]

    def edge_set(self) -> set[tuple[str, str, str]]:
        return {(self.nodes[e.src].name, self.nodes[e.dst].name, e.kind.value) for e in self.edges}

    def dump(self) -> str:
        """Adjacency listing used by the CLI's ``--dump-graph``."""
        lines = []
        for n in self.nodes:
            extra = f" clk={n.clock_domain}" if n.clock_domain else ""
            if n.violations:
                extra += " viol=" + ",".join(v.vtype for v in n.violations)
            lines.append(f"[{n.id}] {n.kind.value} {n.name} w={n.width}{extra}")
            for e in self.edges:
                if e.src == n.id:
                    lines.append(f"    -> {self.nodes[e.dst].name} ({e.kind.value})")
        return "\n".join(lines) + "\n"


class BuildError(Exception):
    pass


class CombinationalLoop(BuildError):
    def __init__(self, cycle: list[str]):
        self.cycle = cycle
        super().__init__("combinational loop: " + " -> ".join(cycle))


class MultipleDrivers(BuildError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"signal {name!r} has more than one driver")


class AnnotateError(Exception):
    pass


class UnknownEndpoint(AnnotateError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"report endpoint {name!r} matches no node")


class KindMismatch(AnnotateError):
    def __init__(self, name: str, kind: NodeKind):
        self.name = name
        super().__init__(f"report endpoint {name!r} is a {kind.value}, not a Register")


# ---- construction ---------------------------------------------------------


class _Builder:
    def __init__(self, mod: A.AstModule):
        self.mod = mod
        self.nodes: list[StdgNode] = []
        self.edges: dict[StdgEdge, None] = {}
        self.ids: dict[str, int] = {}
        self.counters: dict[str, int] = defaultdict(int)
        self.params = {p.name for p in mod.params}

    def add_node(self, kind: NodeKind, name: str, width: int, loc: A.SourceLoc, **kw) -> int:
        node_id = len(self.nodes)
        self.nodes.append(StdgNode(node_id, kind, name, max(1, width), loc, **kw))
        self.ids[name] = node_id
        return node_id

    def fresh(self, prefix: str) -> str:
        self.counters[prefix] += 1
        return f"{prefix}#{self.counters[prefix]}"

    def edge(self, src: int, dst: int, kind: EdgeKind = EdgeKind.DATA) -> None:
        self.edges[StdgEdge(src, dst, kind)] = None

    def const_value(self, expr: A.Expr) -> Optional[int]:
        names = A.referenced_names(expr)
        if any(n not in self.params for n in names):
            return None
        return eval_const(self.mod, expr)

    def width_of(self, node_id: int) -> int:
        return self.nodes[node_id].width

    # expressions build bottom-up so inner operators get lower counters
    def expr(self, e: A.Expr) -> int:
        if isinstance(e, A.Ident):
            if e.name in self.params:
                value = eval_const(self.mod, e)
                return self.add_node(NodeKind.CONSTANT, self.fresh("const"), max(1, value.bit_length()), e.loc)
            return self.ids[e.name]
        if isinstance(e, A.Number):
            width = e.width if e.width is not None else max(1, e.value.bit_length())
            return self.add_node(NodeKind.CONSTANT, self.fresh("const"), width, e.loc)
        if isinstance(e, A.Unary):
            src = self.expr(e.operand)
            op = UNARY_NAMES[e.op]
            width = 1 if op in _BOOLEAN_OPS else self.width_of(src)
            return self.operator(op, width, e.loc, [src])
        if isinstance(e, A.Binary):
            left = self.expr(e.left)
            right = self.expr(e.right)
            op = BINARY_NAMES[e.op]
            if op in _BOOLEAN_OPS:
                width = 1
            elif op in ("shl", "shr"):
                width = self.width_of(left)
            else:
                width = max(self.width_of(left), self.width_of(right))
            return self.operator(op, width, e.loc, [left, right])
        if isinstance(e, A.Ternary):
            cond = self.expr(e.cond)
            then = self.expr(e.then)
            other = self.expr(e.other)
            width = max(self.width_of(then), self.width_of(other))
            return self.operator("mux", width, e.loc, [cond, then, other])
        if isinstance(e, A.BitSelect):
            inputs = [self.ids[e.target]]
            if self.const_value(e.index) is None:
                inputs.append(self.expr(e.index))
            return self.operator("bitsel", 1, e.loc, inputs)
        if isinstance(e, A.PartSelect):
            msb, lsb = self.const_value(e.msb), self.const_value(e.lsb)
            inputs = [self.ids[e.target]]
            if msb is None or lsb is None:
                inputs += [self.expr(e.msb), self.expr(e.lsb)]
                width = self.width_of(inputs[0])
            else:
                width = abs(msb - lsb) + 1
            return self.operator("partsel", width, e.loc, inputs)
        if isinstance(e, A.Concat):
            inputs = [self.expr(p) for p in e.parts]
            return self.operator("concat", sum(self.width_of(i) for i in inputs), e.loc, inputs)
        raise TypeError(f"not an expression: {e!r}")

    def operator(self, op: str, width: int, loc: A.SourceLoc, inputs: list[int]) -> int:
        node_id = self.add_node(NodeKind.OPERATOR, self.fresh(op), width, loc, op=op)
        for src in inputs:
            self.edge(src, node_id)
        return node_id

    def lvalue_extras(self, lhs: A.LValue) -> list[int]:
        """Nodes feeding non-constant indices inside an lvalue."""
        out: list[int] = []
        if isinstance(lhs, A.Concat):
            for p in lhs.parts:
                out += self.lvalue_extras(p)
        elif isinstance(lhs, A.BitSelect) and self.const_value(lhs.index) is None:
            out.append(self.expr(lhs.index))
        elif isinstance(lhs, A.PartSelect):
            for bound in (lhs.msb, lhs.lsb):
                if self.const_value(bound) is None:
                    out.append(self.expr(bound))
        return out

    def assignment(self, lhs: A.LValue, rhs: A.Expr, controls: list[int]) -> None:
        root = self.expr(rhs)
        extras = self.lvalue_extras(lhs)
        for name in A.lvalue_targets(lhs):
            target = self.ids[name]
            self.edge(root, target)
            for x in extras:
                self.edge(x, target)
            for c in controls:
                self.edge(c, target, EdgeKind.CONTROL)

    def stmt(self, s: A.Stmt, controls: list[int]) -> None:
        if isinstance(s, A.Assign):
            self.assignment(s.lhs, s.rhs, controls)
        elif isinstance(s, A.Block):
            for sub in s.body:
                self.stmt(sub, controls)
        elif isinstance(s, A.If):
            cond = self.expr(s.cond)
            self.stmt(s.then, controls + [cond])
            if s.other is not None:
                self.stmt(s.other, controls + [cond])
        elif isinstance(s, A.Case):
            guard = [self.expr(s.subject)]
            for item in s.items:
                for label in item.labels:
                    if self.const_value(label) is None:
                        guard.append(self.expr(label))
            for item in s.items:
                self.stmt(item.body, controls + guard)


def _drivers(mod: A.AstModule) -> dict[str, list[str]]:
    """Map each driven signal to the list of constructs that drive it."""
    drivers: dict[str, list[str]] = defaultdict(list)
    for i, ca in enumerate(mod.assigns):
        for name in A.lvalue_targets(ca.lhs):
            drivers[name].append(f"assign#{i}")
    for i, blk in enumerate(mod.always_blocks):
        for name in A.assigned_names(blk.body):
            drivers[name].append(f"always#{i}")
    return drivers


def _instance_outputs(mod: A.AstModule, drivers: dict[str, list[str]]) -> set[tuple[str, str]]:
    """Instance pins that drive the parent.

    Submodule definitions are not available, so a pin connected to a bare
    parent net that nothing in the parent drives is taken as an output.
    """
    inputs = {p.name for p in mod.ports if p.direction != "output"}
    outs = set()
    for inst in mod.instances:
        for conn in inst.connections:
            if isinstance(conn.expr, A.Ident):
                name = conn.expr.name
                if name not in drivers and name not in inputs and mod.signal_width(name) is not None:
                    outs.add((inst.instance_name, conn.port))
    return outs


def build(mod: A.AstModule) -> Stdg:
    drivers = _drivers(mod)
    inst_outs = _instance_outputs(mod, drivers)
    for inst_name, port in sorted(inst_outs):
        inst = next(i for i in mod.instances if i.instance_name == inst_name)
        conn = next(c for c in inst.connections if c.port == port)
        drivers[conn.expr.name].append(f"{inst_name}.{port}")  # type: ignore[union-attr]
    for name, who in drivers.items():
        if len(set(who)) > 1:
            raise MultipleDrivers(name)

    reg_clock: dict[str, str] = {}
    reg_edge: dict[str, str] = {}
    for blk in mod.always_blocks:
        if blk.clock is not None:
            for name in A.assigned_names(blk.body):
                reg_clock[name] = blk.clock.signal
                reg_edge[name] = "rising" if blk.clock.edge == "posedge" else "falling"

    b = _Builder(mod)
    for port in mod.ports:
        if port.name in reg_clock:
            b.add_node(
                NodeKind.REGISTER, port.name, port.width, port.loc,
                clock_domain=reg_clock[port.name], edge=reg_edge[port.name],
            )
        else:
            b.add_node(NodeKind.PORT, port.name, port.width, port.loc, direction=port.direction)
    for net in mod.nets:
        if net.name in reg_clock:
            b.add_node(
                NodeKind.REGISTER, net.name, net.width, net.loc,
                clock_domain=reg_clock[net.name], edge=reg_edge[net.name],
            )
        else:
            b.add_node(NodeKind.WIRE, net.name, net.width, net.loc)

    pending_inputs: list[tuple[int, A.Expr]] = []
    for inst in mod.instances:
        for conn in inst.connections:
            if conn.expr is None:
                continue
            pin = f"{inst.instance_name}.{conn.port}"
            if (inst.instance_name, conn.port) in inst_outs:
                width = mod.signal_width(conn.expr.name) or 1  # type: ignore[union-attr]
                pin_id = b.add_node(NodeKind.PORT, pin, width, inst.loc, direction="input")
                b.edge(pin_id, b.ids[conn.expr.name])  # type: ignore[union-attr]
            else:
                pin_id = b.add_node(NodeKind.PORT, pin, 1, inst.loc, direction="output")
                pending_inputs.append((pin_id, conn.expr))

    for ca in mod.assigns:
        b.assignment(ca.lhs, ca.rhs, [])
    for blk in mod.always_blocks:
        b.stmt(blk.body, [])
    for pin_id, expr in pending_inputs:
        src = b.expr(expr)
        b.edge(src, pin_id)
        b.nodes[pin_id] = replace(b.nodes[pin_id], width=b.width_of(src))

    clocks = tuple(sorted(set(reg_clock.values())))
    graph = Stdg(tuple(b.nodes), tuple(b.edges), clocks, mod.name)
    _check_acyclic(graph)
    return graph


def _check_acyclic(graph: Stdg) -> None:
    """Raise CombinationalLoop if non-register nodes form a cycle."""
    white, grey, black = 0, 1, 2
    color = [white] * len(graph.nodes)

    def comb_succs(node_id: int) -> list[int]:
        return [s for s in graph.successors(node_id) if not graph.nodes[s].is_register]

    for root in range(len(graph.nodes)):
        if color[root] != white or graph.nodes[root].is_register:
            continue
        stack = [(root, iter(comb_succs(root)))]
        trail = [root]
        color[root] = grey
        while stack:
            node_id, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                color[node_id] = black
                stack.pop()
                trail.pop()
                continue
            if color[nxt] == grey:
                start = trail.index(nxt)
                cycle = [graph.nodes[i].name for i in trail[start:]] + [graph.nodes[nxt].name]
                raise CombinationalLoop(cycle)
            if color[nxt] == white:
                color[nxt] = grey
                trail.append(nxt)
                stack.append((nxt, iter(comb_succs(nxt))))


def expected_node_count(mod: A.AstModule) -> int:
    """Signals + operator applications + constant operands, counted on the AST.

    Used as an independent cross-check of :func:`build`.
    """
    params = {p.name for p in mod.params}

    def is_const(e: A.Expr) -> bool:
        return all(n in params for n in A.referenced_names(e))

    def count(e: A.Expr) -> int:
        if isinstance(e, A.Ident):
            return 1 if e.name in params else 0
        if isinstance(e, A.Number):
            return 1
        if isinstance(e, A.Unary):
            return 1 + count(e.operand)
        if isinstance(e, A.Binary):
            return 1 + count(e.left) + count(e.right)
        if isinstance(e, A.Ternary):
            return 1 + count(e.cond) + count(e.then) + count(e.other)
        if isinstance(e, A.BitSelect):
            return 1 + (0 if is_const(e.index) else count(e.index))
        if isinstance(e, A.PartSelect):
            if is_const(e.msb) and is_const(e.lsb):
                return 1
            return 1 + count(e.msb) + count(e.lsb)
        if isinstance(e, A.Concat):
            return 1 + sum(count(p) for p in e.parts)
        raise TypeError(e)

    def lhs_count(lhs: A.LValue) -> int:
        if isinstance(lhs, A.Concat):
            return sum(lhs_count(p) for p in lhs.parts)
        if isinstance(lhs, A.BitSelect) and not is_const(lhs.index):
            return count(lhs.index)
        if isinstance(lhs, A.PartSelect):
            return sum(count(b) for b in (lhs.msb, lhs.lsb) if not is_const(b))
        return 0

    total = len(mod.ports) + len(mod.nets)
    total += sum(1 for inst in mod.instances for c in inst.connections if c.expr is not None)
    for inst in mod.instances:
        for c in inst.connections:
            if c.expr is not None and not isinstance(c.expr, A.Ident):
                total += count(c.expr)
            elif isinstance(c.expr, A.Ident) and c.expr.name in params:
                total += 1
    for ca in mod.assigns:
        total += count(ca.rhs) + lhs_count(ca.lhs)
    for blk in mod.always_blocks:
        for s in A.iter_stmts(blk.body):
            if isinstance(s, A.Assign):
                total += count(s.rhs) + lhs_count(s.lhs)
            elif isinstance(s, A.If):
                total += count(s.cond)
            elif isinstance(s, A.Case):
                total += count(s.subject)
                total += sum(count(lbl) for item in s.items for lbl in item.labels if not is_const(lbl))
    return total


# ---- annotation -----------------------------------------------------------


def violation_info(v: Violation) -> ViolationInfo:
    if isinstance(v, CdcFinding):
        return ViolationInfo("cdc", None, v.source, v.path or None)
    return ViolationInfo(v.vtype, v.slack, v.startpoint, v.path or None)


def _infos(report: TimingReport) -> Iterable[tuple[str, ViolationInfo]]:
    for v in report.ordered():
        yield v.endpoint, violation_info(v)


def annotate(graph: Stdg, report: TimingReport) -> Stdg:
    """Attach each report violation to its endpoint register. Idempotent."""
    additions: dict[int, list[ViolationInfo]] = defaultdict(list)
    for endpoint, info in _infos(report):
        node = graph.by_name.get(endpoint)
        if node is None:
            raise UnknownEndpoint(endpoint)
        if not node.is_register:
            raise KindMismatch(endpoint, node.kind)
        additions[node.id].append(info)
    if not additions:
        return graph
    nodes = list(graph.nodes)
    for node_id, infos in additions.items():
        merged = set(nodes[node_id].violations) | set(infos)
        nodes[node_id] = replace(nodes[node_id], violations=tuple(sorted(merged, key=ViolationInfo.sort_key)))
    return Stdg(tuple(nodes), graph.edges, graph.clocks, graph.module_name)
