"""Fault injection: turn a clean seed design into a violating one.

The seed is the golden repair; the faulty design is the seed with one
subscenario-specific transform applied. ``complex`` difficulty renames every
internal net to ``n0, n1, ...`` and interleaves two unrelated always blocks,
identically in both versions.
"""

from __future__ import annotations

import json
import os
import tempfile
from collections import Counter
from dataclasses import asdict, dataclass, field, fields, is_dataclass, replace
from functools import reduce
from pathlib import Path
from typing import Any, Callable, Iterable, Optional

from timing_triage.analysis import analyze_source
from timing_triage.config import data_path
from timing_triage.frontend import ParseError, parse, print_source
from timing_triage.frontend import ast as A
from timing_triage.kb import SUBSCENARIOS, violation_type_of
from timing_triage.stdg import BuildError
from timing_triage.timing.engine import DelayModel, MissingClockConstraint
from timing_triage.timing.report import ClockConstraint, TimingPath

DIFFICULTIES = ("simple", "complex")
PERIODS = {"deep_mux": 4.0}
DEFAULT_PERIOD = 5.0
HOLD_T_H = 0.7
LIMITS = {"chain_length": (1, 64), "mux_depth": (2, 32), "bus_width": (2, 64)}


class InjectError(Exception):
    pass


class SeedShapeMismatch(InjectError):
    pass


class ParamOutOfRange(InjectError):
    pass


class ValidationFailure(Exception):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(detail)


@dataclass(frozen=True)
class InjectionSpec:
    subscenario: str
    difficulty: str = "simple"
    mode: str = "auto"
    target_module: Optional[str] = None
    target: Optional[str] = None
    chain_length: int = 8
    mux_depth: int = 6
    bus_width: int = 8
    index: int = 1
    period: Optional[float] = None

    def __post_init__(self) -> None:
        if self.subscenario not in SUBSCENARIOS:
            raise InjectError(f"unknown subscenario {self.subscenario!r}")
        if self.difficulty not in DIFFICULTIES:
            raise InjectError(f"difficulty must be simple or complex, got {self.difficulty!r}")
        if self.mode not in ("auto", "manual"):
            raise InjectError(f"mode must be auto or manual, got {self.mode!r}")
        if self.mode == "manual" and not self.target:
            raise InjectError("manual injection needs a target signal")
        for name, (lo, hi) in LIMITS.items():
            value = getattr(self, name)
            if not isinstance(value, int) or not lo <= value <= hi:
                raise ParamOutOfRange(f"{name}={value!r} outside [{lo}, {hi}]")
        if not 1 <= self.index <= 99:
            raise ParamOutOfRange(f"index={self.index} outside [1, 99]")
        if self.period is not None and self.period <= 0:
            raise ParamOutOfRange("period must be positive")

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "InjectionSpec":
        unknown = set(data) - {f.name for f in fields(cls)}
        if unknown:
            raise InjectError(f"unknown spec keys: {sorted(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict[str, Any]:
        return {k: v for k, v in asdict(self).items() if v is not None}

    @property
    def violation_type(self) -> str:
        return violation_type_of(self.subscenario)  # type: ignore[return-value]

    @property
    def clock_period(self) -> float:
        return self.period if self.period is not None else PERIODS.get(self.subscenario, DEFAULT_PERIOD)

    @property
    def delay_overrides(self) -> dict[str, float]:
        return {"t_h": HOLD_T_H} if self.subscenario == "short_logic_path" else {}


@dataclass(frozen=True)
class InjectedCase:
    case_id: str
    subscenario: str
    difficulty: str
    seed_name: str
    faulty: str
    golden: str
    expected: tuple[str, str]  # (violation type, endpoint)
    constraints: dict[str, float] = field(default_factory=dict)
    delay_overrides: dict[str, float] = field(default_factory=dict)
    spec: dict[str, Any] = field(default_factory=dict)
    reference_cause: str = ""

    @property
    def violation_type(self) -> str:
        return self.expected[0]

    def clock_constraints(self) -> list[ClockConstraint]:
        return [ClockConstraint(c, p) for c, p in sorted(self.constraints.items())]

    def delay_model(self, base: Optional[DelayModel] = None) -> DelayModel:
        return (base or DelayModel()).with_overrides(self.delay_overrides)

    def manifest(self) -> dict[str, Any]:
        return {
            "id": self.case_id,
            "violation_type": self.violation_type,
            "subscenario": self.subscenario,
            "difficulty": self.difficulty,
            "seed": self.seed_name,
            "spec": self.spec,
            "expected": {"vtype": self.expected[0], "endpoint": self.expected[1]},
            "constraints": self.constraints,
            "delay_model": self.delay_overrides,
            "reference_cause": self.reference_cause,
        }


# ---- AST helpers ------------------------------------------------------------


def _map_tree(node: Any, fn: Callable[[Any], Any]) -> Any:
    """Rebuild a frozen-dataclass tree bottom-up, applying ``fn`` to every node."""
    if isinstance(node, tuple):
        return tuple(_map_tree(n, fn) for n in node)
    if is_dataclass(node) and not isinstance(node, (A.SourceLoc, type)):
        changes = {}
        for f in fields(node):
            if f.name == "loc":
                continue
            old = getattr(node, f.name)
            new = _map_tree(old, fn)
            if new is not old:
                changes[f.name] = new
        if changes:
            node = replace(node, **changes)
        return fn(node)
    return node


def substitute(expr: A.Expr, mapping: dict[str, A.Expr]) -> A.Expr:
    return _map_tree(expr, lambda n: mapping.get(n.name, n) if isinstance(n, A.Ident) else n)


def rename(mod: A.AstModule, mapping: dict[str, str]) -> A.AstModule:
    """Rename nets everywhere they are declared, read or written."""

    def fn(n: Any) -> Any:
        if isinstance(n, (A.Ident, A.NetDecl)) and n.name in mapping:
            return replace(n, name=mapping[n.name])
        if isinstance(n, (A.BitSelect, A.PartSelect)) and n.target in mapping:
            return replace(n, target=mapping[n.target])
        return n

    return _map_tree(mod, fn)


def _top(blk: A.AlwaysBlock) -> tuple[A.Stmt, ...]:
    return blk.body.body if isinstance(blk.body, A.Block) else (blk.body,)


def _with_top(blk: A.AlwaysBlock, stmts: list[A.Stmt]) -> A.AlwaysBlock:
    if isinstance(blk.body, A.Block) or len(stmts) != 1:
        return replace(blk, body=A.Block(tuple(stmts)))
    return replace(blk, body=stmts[0])


def _read_names(mod: A.AstModule) -> Counter:
    """How often each name is read anywhere in the module."""
    reads: Counter = Counter()

    def expr(e: Optional[A.Expr]) -> None:
        if e is not None:
            reads.update(A.referenced_names(e))

    def lvalue_reads(lhs: A.LValue) -> None:
        for node in A.iter_expr(lhs):
            if isinstance(node, A.BitSelect):
                expr(node.index)

    for ca in mod.assigns:
        expr(ca.rhs)
        lvalue_reads(ca.lhs)
    for blk in mod.always_blocks:
        for s in A.iter_stmts(blk.body):
            if isinstance(s, A.Assign):
                expr(s.rhs)
                lvalue_reads(s.lhs)
            elif isinstance(s, A.If):
                expr(s.cond)
            elif isinstance(s, A.Case):
                expr(s.subject)
                for item in s.items:
                    for lbl in item.labels:
                        expr(lbl)
    for inst in mod.instances:
        for conn in inst.connections:
            expr(conn.expr)
    return reads


def _register_clocks(mod: A.AstModule) -> dict[str, str]:
    out = {}
    for blk in mod.always_blocks:
        if blk.clock is not None:
            for name in A.assigned_names(blk.body):
                out[name] = blk.clock.signal
    return out


@dataclass(frozen=True)
class _Site:
    block: int
    pos: int
    stmt: A.Stmt


def _top_assigns(mod: A.AstModule) -> list[_Site]:
    """Unconditional nonblocking assignments to a plain name in clocked blocks."""
    out = []
    for bi, blk in enumerate(mod.always_blocks):
        if blk.clock is None:
            continue
        for pi, s in enumerate(_top(blk)):
            if isinstance(s, A.Assign) and not s.blocking and isinstance(s.lhs, A.Ident):
                out.append(_Site(bi, pi, s))
    return out


def _edit(mod: A.AstModule, edits: dict[tuple[int, int], Optional[A.Stmt]]) -> A.AstModule:
    """Replace (or drop, for None) top-level statements by (block, position)."""
    touched = {bi for bi, _ in edits}
    blocks = []
    for bi, blk in enumerate(mod.always_blocks):
        if bi not in touched:
            blocks.append(blk)
            continue
        stmts = [edits.get((bi, pi), s) for pi, s in enumerate(_top(blk))]
        kept = [s for s in stmts if s is not None]
        if kept:
            blocks.append(_with_top(blk, kept))
    return replace(mod, always_blocks=tuple(blocks))


def _drop_nets(mod: A.AstModule, names: Iterable[str]) -> A.AstModule:
    drop = set(names)
    return replace(mod, nets=tuple(n for n in mod.nets if n.name not in drop))


def _stage_registers(mod: A.AstModule, site: _Site) -> dict[str, _Site]:
    """Internal registers read only by ``site`` and defined by one unconditional assign."""
    assert isinstance(site.stmt, A.Assign)
    clock = mod.always_blocks[site.block].clock
    reads = _read_names(mod)
    defs: dict[str, list[_Site]] = {}
    for s in _top_assigns(mod):
        defs.setdefault(s.stmt.lhs.name, []).append(s)  # type: ignore[union-attr]
    all_assigned = Counter(
        name for blk in mod.always_blocks for s in A.iter_stmts(blk.body) if isinstance(s, A.Assign)
        for name in A.lvalue_targets(s.lhs)
    )
    used_here = Counter(A.referenced_names(site.stmt.rhs))
    out = {}
    for name in used_here:
        if mod.net(name) is None or len(defs.get(name, ())) != 1 or all_assigned[name] != 1:
            continue
        d = defs[name][0]
        if mod.always_blocks[d.block].clock != clock or reads[name] != used_here[name]:
            continue
        out[name] = d
    return out


def _pick(sites: list[_Site], spec: InjectionSpec, what: str) -> _Site:
    if spec.target is not None:
        for s in sites:
            if _site_target(s) == spec.target:
                return s
        raise SeedShapeMismatch(f"target {spec.target!r} is not a {what}")
    if not sites:
        raise SeedShapeMismatch(f"seed has no {what}")
    return sites[0]


def _site_target(site: _Site) -> str:
    s = site.stmt
    if isinstance(s, A.If):
        s = s.then
    if isinstance(s, A.Assign):
        return A.lvalue_targets(s.lhs)[0]
    if isinstance(s, A.Case):
        return A.lvalue_targets(s.items[0].body.lhs)[0]  # type: ignore[union-attr]
    return ""


def _add_leaves(e: A.Expr) -> list[A.Expr]:
    if isinstance(e, A.Binary) and e.op == "+":
        return _add_leaves(e.left) + _add_leaves(e.right)
    return [e]


def _count_op(e: A.Expr, op: str) -> int:
    return sum(1 for n in A.iter_expr(e) if isinstance(n, A.Binary) and n.op == op)


# ---- transforms -------------------------------------------------------------


@dataclass(frozen=True)
class _Result:
    faulty: A.AstModule
    endpoint: str
    facts: dict[str, Any]


def _flatten_adders(mod: A.AstModule, spec: InjectionSpec) -> _Result:
    sites = []
    for s in _top_assigns(mod):
        stages = _stage_registers(mod, s)
        if _count_op(s.stmt.rhs, "+") and any(_count_op(d.stmt.rhs, "+") for d in stages.values()):  # type: ignore[union-attr]
            sites.append(s)
    site = _pick(sites, spec, "pipelined accumulation")
    stages = _stage_registers(mod, site)
    leaves: list[A.Expr] = []
    for leaf in _add_leaves(site.stmt.rhs):  # type: ignore[union-attr]
        if isinstance(leaf, A.Ident) and leaf.name in stages:
            leaves.extend(_add_leaves(stages[leaf.name].stmt.rhs))  # type: ignore[union-attr]
        else:
            leaves.append(leaf)
    adders = len(leaves) - 1
    if adders != spec.chain_length:
        raise ParamOutOfRange(f"chain_length={spec.chain_length} but the seed accumulates {adders + 1} operands")
    chain = reduce(lambda acc, x: A.Binary("+", acc, x), leaves)
    edits: dict[tuple[int, int], Optional[A.Stmt]] = {(d.block, d.pos): None for d in stages.values()}
    edits[(site.block, site.pos)] = replace(site.stmt, rhs=chain)
    faulty = _drop_nets(_edit(mod, edits), stages)
    return _Result(faulty, _site_target(site), {"adders": adders})


def _collapse_multiply(mod: A.AstModule, spec: InjectionSpec) -> _Result:
    sites = []
    for s in _top_assigns(mod):
        stages = _stage_registers(mod, s)
        if _count_op(s.stmt.rhs, "*") and any(_count_op(d.stmt.rhs, "*") for d in stages.values()):  # type: ignore[union-attr]
            sites.append(s)
    site = _pick(sites, spec, "two-stage multiply pipeline")
    stages = _stage_registers(mod, site)
    inlined = substitute(site.stmt.rhs, {n: d.stmt.rhs for n, d in stages.items()})  # type: ignore[union-attr]
    edits: dict[tuple[int, int], Optional[A.Stmt]] = {(d.block, d.pos): None for d in stages.values()}
    edits[(site.block, site.pos)] = replace(site.stmt, rhs=inlined)
    faulty = _drop_nets(_edit(mod, edits), stages)
    return _Result(faulty, _site_target(site), {"multipliers": _count_op(inlined, "*")})


def _case_sites(mod: A.AstModule) -> list[_Site]:
    out = []
    for bi, blk in enumerate(mod.always_blocks):
        for pi, s in enumerate(_top(blk)):
            if not isinstance(s, A.Case):
                continue
            bodies = [item.body for item in s.items]
            if not all(isinstance(b, A.Assign) and isinstance(b.lhs, A.Ident) for b in bodies):
                continue
            if len({b.lhs.name for b in bodies}) != 1:  # type: ignore[union-attr]
                continue
            if sum(item.is_default for item in s.items) != 1:
                continue
            if any(len(item.labels) > 1 for item in s.items):
                continue
            out.append(_Site(bi, pi, s))
    return out


def _nest_mux(mod: A.AstModule, spec: InjectionSpec) -> _Result:
    site = _pick(_case_sites(mod), spec, "flat case statement with a default arm")
    case = site.stmt
    assert isinstance(case, A.Case)
    arms = [item for item in case.items if not item.is_default]
    default = next(item for item in case.items if item.is_default)
    if len(arms) != spec.mux_depth:
        raise ParamOutOfRange(f"mux_depth={spec.mux_depth} but the case has {len(arms)} arms")
    expr: A.Expr = default.body.rhs  # type: ignore[union-attr]
    for item in reversed(arms):
        cond = A.Binary("==", case.subject, item.labels[0])
        expr = A.Ternary(cond, item.body.rhs, expr)  # type: ignore[union-attr]
    first = arms[0].body
    assert isinstance(first, A.Assign)
    faulty = _edit(mod, {(site.block, site.pos): A.Assign(first.lhs, expr, first.blocking)})
    return _Result(faulty, _site_target(site), {"mux_depth": len(arms)})


def _short_circuit(mod: A.AstModule, spec: InjectionSpec) -> _Result:
    clocks = _register_clocks(mod)
    sites = []
    for s in _top_assigns(mod):
        rhs = s.stmt.rhs  # type: ignore[union-attr]
        names = set(A.referenced_names(rhs))
        if isinstance(rhs, A.Ident) or len(names) != 1:
            continue
        (src,) = names
        if clocks.get(src) == mod.always_blocks[s.block].clock.signal:  # type: ignore[union-attr]
            sites.append(s)
    site = _pick(sites, spec, "register fed by logic from one same-domain register")
    (src,) = set(A.referenced_names(site.stmt.rhs))  # type: ignore[union-attr]
    faulty = _edit(mod, {(site.block, site.pos): replace(site.stmt, rhs=A.Ident(src))})
    return _Result(faulty, _site_target(site), {"source": src})


def _drop_synchronizer(mod: A.AstModule, spec: InjectionSpec) -> _Result:
    clocks = _register_clocks(mod)
    reads = _read_names(mod)
    by_target = {s.stmt.lhs.name: s for s in _top_assigns(mod)}  # type: ignore[union-attr]
    chains = []
    for s2_name, s2 in by_target.items():
        rhs2 = s2.stmt.rhs  # type: ignore[union-attr]
        if not isinstance(rhs2, A.Ident) or rhs2.name not in by_target:
            continue
        s1 = by_target[rhs2.name]
        rhs1 = s1.stmt.rhs  # type: ignore[union-attr]
        if not isinstance(rhs1, A.Ident) or rhs1.name not in clocks:
            continue
        src = rhs1.name
        if clocks[src] == clocks[s2_name] or clocks[s1.stmt.lhs.name] != clocks[s2_name]:  # type: ignore[union-attr]
            continue
        if reads[s1.stmt.lhs.name] != 1 or mod.net(s1.stmt.lhs.name) is None or mod.net(s2_name) is None:  # type: ignore[union-attr]
            continue
        consumers = [t for t, s in by_target.items() if s2_name in A.referenced_names(s.stmt.rhs)]  # type: ignore[union-attr]
        if len(consumers) != 1 or reads[s2_name] != 1:
            continue
        chains.append((consumers[0], src, s1, s2))
    if spec.target is not None:
        chains = [c for c in chains if c[0] == spec.target]
    if not chains:
        raise SeedShapeMismatch("seed has no two-flop synchronizer feeding a single consumer")
    consumer, src, s1, s2 = chains[0]
    if mod.signal_width(src) != 1:
        raise SeedShapeMismatch(f"synchronized signal {src!r} is not one bit wide")
    c_site = by_target[consumer]
    s2_name = s2.stmt.lhs.name  # type: ignore[union-attr]
    new_rhs = substitute(c_site.stmt.rhs, {s2_name: A.Ident(src)})  # type: ignore[union-attr]
    edits: dict[tuple[int, int], Optional[A.Stmt]] = {
        (s1.block, s1.pos): None,
        (s2.block, s2.pos): None,
        (c_site.block, c_site.pos): replace(c_site.stmt, rhs=new_rhs),
    }
    faulty = _drop_nets(_edit(mod, edits), [s1.stmt.lhs.name, s2_name])  # type: ignore[union-attr]
    return _Result(faulty, consumer, {"source": src})


def _drop_handshake(mod: A.AstModule, spec: InjectionSpec) -> _Result:
    clocks = _register_clocks(mod)
    sites = []
    for bi, blk in enumerate(mod.always_blocks):
        if blk.clock is None:
            continue
        for pi, s in enumerate(_top(blk)):
            if not (isinstance(s, A.If) and s.other is None and isinstance(s.then, A.Assign)):
                continue
            if not isinstance(s.then.lhs, A.Ident):
                continue
            srcs = [n for n in A.referenced_names(s.then.rhs) if n in clocks and clocks[n] != blk.clock.signal]
            if srcs:
                sites.append(_Site(bi, pi, s))
    site = _pick(sites, spec, "guarded cross-domain load")
    guard = site.stmt
    assert isinstance(guard, A.If) and isinstance(guard.then, A.Assign)
    target = _site_target(site)
    width = mod.signal_width(target)
    if width != spec.bus_width:
        raise ParamOutOfRange(f"bus_width={spec.bus_width} but {target!r} is {width} bits wide")
    src = next(n for n in A.referenced_names(guard.then.rhs) if n in clocks)
    faulty = _edit(mod, {(site.block, site.pos): guard.then})
    return _Result(faulty, target, {"source": src, "width": width})


TRANSFORMS: dict[str, Callable[[A.AstModule, InjectionSpec], _Result]] = {
    "long_comb_chain": _flatten_adders,
    "deep_mux": _nest_mux,
    "low_pipe_stage": _collapse_multiply,
    "short_logic_path": _short_circuit,
    "single_bit_trans": _drop_synchronizer,
    "multi_bits_trans": _drop_handshake,
}


# ---- complex difficulty -------------------------------------------------------


def obfuscation_map(seed: A.AstModule) -> dict[str, str]:
    return {net.name: f"n{i}" for i, net in enumerate(seed.nets)}


def _filler_blocks(seed: A.AstModule, first: int) -> tuple[list[A.NetDecl], list[A.AlwaysBlock]]:
    clock = next(blk.clock for blk in seed.always_blocks if blk.clock is not None)
    cnt, acc = f"n{first}", f"n{first + 1}"
    rng = A.Range(A.Number(7), A.Number(0))
    nets = [A.NetDecl(cnt, "reg", 8, rng), A.NetDecl(acc, "reg", 8, rng)]
    blocks = [
        A.AlwaysBlock(A.Assign(A.Ident(cnt), A.Binary("+", A.Ident(cnt), A.Number(1, 8, "d")), False), clock),
        A.AlwaysBlock(A.Assign(A.Ident(acc), A.Binary("^", A.Ident(acc), A.Ident(cnt)), False), clock),
    ]
    return nets, blocks


def complicate(mod: A.AstModule, mapping: dict[str, str], fillers) -> A.AstModule:
    nets, extra = fillers
    renamed = rename(mod, mapping)
    blocks = list(renamed.always_blocks)
    woven: list[A.AlwaysBlock] = []
    for i, blk in enumerate(blocks):
        woven.append(blk)
        if i < len(extra):
            woven.append(extra[i])
    woven.extend(extra[len(blocks):])
    return replace(renamed, nets=renamed.nets + tuple(nets), always_blocks=tuple(woven))


# ---- injection ------------------------------------------------------------------


def _cause_text(sub: str, endpoint: str, facts: dict[str, Any], violation, clocks: list[str]) -> str:
    slack = f"{violation.slack:.3f} ns" if isinstance(violation, TimingPath) else ""
    if sub == "long_comb_chain":
        n = facts["adders"]
        return (
            f"Setup slack {slack} at register `{endpoint}`: its input is a single-cycle combinational chain "
            f"of {n} adders, {n} logic levels deep, with no register between them."
        )
    if sub == "deep_mux":
        return (
            f"Setup slack {slack} at register `{endpoint}`: the value is selected through {facts['mux_depth']}-level "
            "nested mux logic built from ternary operators, so the last input passes every multiplexer."
        )
    if sub == "low_pipe_stage":
        return (
            f"Setup slack {slack} at register `{endpoint}`: {facts['multipliers']} multipliers are chained inside "
            "one cycle because the multiply datapath has only a single stage."
        )
    if sub == "short_logic_path":
        return (
            f"Hold slack {slack} at register `{endpoint}`: it is loaded straight from register "
            f"`{facts['source']}` with no logic in between, so the data path delay is too small."
        )
    src_clock, dst_clock = clocks
    if sub == "single_bit_trans":
        return (
            f"The 1-bit register `{facts['source']}` in clock {src_clock} is captured by `{endpoint}` in clock "
            f"domain {dst_clock} without a synchronizer."
        )
    return (
        f"The {facts['width']}-bit bus `{facts['source']}` crosses from {src_clock} into `{endpoint}` on {dst_clock} "
        "with no handshake; the destination loads it every cycle."
    )


def inject(seed: A.AstModule, spec: InjectionSpec, seed_name: str = "") -> InjectedCase:
    if spec.target_module is not None and spec.target_module != seed.name:
        raise SeedShapeMismatch(f"seed module is {seed.name!r}, spec targets {spec.target_module!r}")
    seed = parse(print_source(seed))  # canonical form, fresh locations
    result = TRANSFORMS[spec.subscenario](seed, spec)
    golden_mod, faulty_mod, endpoint, facts = seed, result.faulty, result.endpoint, dict(result.facts)
    if spec.difficulty == "complex":
        mapping = obfuscation_map(seed)
        fillers = _filler_blocks(seed, len(mapping))
        golden_mod = complicate(seed, mapping, fillers)
        faulty_mod = complicate(faulty_mod, mapping, fillers)
        endpoint = mapping.get(endpoint, endpoint)
        if "source" in facts:
            facts["source"] = mapping.get(facts["source"], facts["source"])
    golden, faulty = print_source(golden_mod), print_source(faulty_mod)

    vtype = spec.violation_type
    analysis = analyze_source(faulty, DelayModel().with_overrides(spec.delay_overrides), (), spec.clock_period)
    clocks = list(analysis.graph.clocks)
    constraints = {c: spec.clock_period for c in clocks}
    found = next((v for v in analysis.report.ordered() if (v.vtype, v.endpoint) == (vtype, endpoint)), None)
    if found is None:
        raise InjectError(f"transform did not produce a {vtype} violation at {endpoint!r}")
    if vtype == "cdc":
        clocks = [found.source_domain, found.dest_domain]  # type: ignore[union-attr]
    cause = _cause_text(spec.subscenario, endpoint, facts, found, clocks)
    case_id = f"{vtype}.{spec.subscenario}.{spec.difficulty}.{spec.index:02d}"
    return InjectedCase(
        case_id=case_id,
        subscenario=spec.subscenario,
        difficulty=spec.difficulty,
        seed_name=seed_name or seed.name,
        faulty=faulty,
        golden=golden,
        expected=(vtype, endpoint),
        constraints=constraints,
        delay_overrides=spec.delay_overrides,
        spec=spec.to_dict(),
        reference_cause=cause,
    )


def validate_case(case: InjectedCase, base_model: Optional[DelayModel] = None) -> None:
    """Faulty shows exactly the expected violation; golden is clean with the same ports."""
    model = case.delay_model(base_model)
    results = {}
    for which in ("faulty", "golden"):
        try:
            results[which] = analyze_source(getattr(case, which), model, case.clock_constraints())
        except (ParseError, BuildError, MissingClockConstraint) as exc:
            raise ValidationFailure(f"{which}: {exc}") from None
    faulty, golden = results["faulty"], results["golden"]
    keys = [(v.vtype, v.endpoint) for v in faulty.report.ordered()]
    if keys != [case.expected]:
        raise ValidationFailure(f"faulty design reports {keys}, expected exactly [{case.expected}]")
    if any((v.vtype, v.endpoint) == case.expected for v in golden.report.ordered()):
        raise ValidationFailure("violation persists in golden design")
    if golden.report:
        v = golden.report.ordered()[0]
        raise ValidationFailure(f"golden design has a {v.vtype} violation at {v.endpoint}")
    if faulty.module.port_signature() != golden.module.port_signature():
        raise ValidationFailure("golden design changes the port list")


# ---- seeds and dataset on disk ------------------------------------------------------


def seed_path(subscenario: str) -> Path:
    return data_path("seeds", f"{subscenario}.v")


def load_seed(subscenario: str) -> A.AstModule:
    path = seed_path(subscenario)
    return parse(path.read_text(encoding="utf-8"), file=str(path))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_case(root: str | Path, case: InjectedCase) -> Path:
    target = Path(root) / case.case_id
    _atomic_write(target / "faulty.v", case.faulty)
    _atomic_write(target / "golden.v", case.golden)
    _atomic_write(target / "case.json", json.dumps(case.manifest(), indent=2, sort_keys=True) + "\n")
    return target


def load_case(case_dir: str | Path) -> InjectedCase:
    case_dir = Path(case_dir)
    meta = json.loads((case_dir / "case.json").read_text(encoding="utf-8"))
    return InjectedCase(
        case_id=meta["id"],
        subscenario=meta["subscenario"],
        difficulty=meta["difficulty"],
        seed_name=meta.get("seed", ""),
        faulty=(case_dir / "faulty.v").read_text(encoding="utf-8"),
        golden=(case_dir / "golden.v").read_text(encoding="utf-8"),
        expected=(meta["expected"]["vtype"], meta["expected"]["endpoint"]),
        constraints={k: float(v) for k, v in meta.get("constraints", {}).items()},
        delay_overrides={k: float(v) for k, v in meta.get("delay_model", {}).items()},
        spec=meta.get("spec", {}),
        reference_cause=meta.get("reference_cause", ""),
    )


def build_dataset(root: str | Path) -> list[InjectedCase]:
    """Inject every subscenario at both difficulties, validate, and write the dataset."""
    cases = []
    for sub in SUBSCENARIOS:
        seed = load_seed(sub)
        for difficulty in DIFFICULTIES:
            case = inject(seed, InjectionSpec(sub, difficulty=difficulty), seed_name=f"{sub}.v")
            validate_case(case)
            cases.append(case)
    root = Path(root)
    for case in cases:
        write_case(root, case)
    manifest = {"cases": sorted(c.case_id for c in cases)}
    _atomic_write(root / "manifest.json", json.dumps(manifest, indent=2) + "\n")
    return cases
