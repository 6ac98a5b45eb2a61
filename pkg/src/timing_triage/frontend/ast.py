"""AST node types for the accepted Verilog subset.

Nodes are frozen dataclasses. ``loc`` fields are excluded from equality so
that two trees are structurally equal regardless of where they were parsed
from (this is what the print/parse round trip relies on).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional, Union


@dataclass(frozen=True)
class SourceLoc:
    file: str
    line: int
    column: int

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError(f"invalid source location {self.line}:{self.column}")

    def __str__(self) -> str:
        return f"{self.file}:{self.line}:{self.column}"


NOLOC = SourceLoc("<synthetic>", 1, 1)


def _loc() -> SourceLoc:
    return field(default=NOLOC, compare=False, repr=False)


# ---- expressions ----------------------------------------------------------


@dataclass(frozen=True)
class Ident:
    name: str
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class Number:
    value: int
    width: Optional[int] = None  # None for unsized decimal literals
    base: str = "d"  # one of b, o, d, h
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class Unary:
    op: str  # ~ ! - & | ^
    operand: "Expr"
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class Ternary:
    cond: "Expr"
    then: "Expr"
    other: "Expr"
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class BitSelect:
    target: str
    index: "Expr"
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class PartSelect:
    target: str
    msb: "Expr"
    lsb: "Expr"
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class Concat:
    parts: tuple["Expr", ...]
    loc: SourceLoc = _loc()


Expr = Union[Ident, Number, Unary, Binary, Ternary, BitSelect, PartSelect, Concat]
LValue = Union[Ident, BitSelect, PartSelect, Concat]


# ---- statements -----------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    """Procedural assignment; ``blocking`` distinguishes ``=`` from ``<=``."""

    lhs: LValue
    rhs: Expr
    blocking: bool
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class Block:
    body: tuple["Stmt", ...]
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class If:
    cond: Expr
    then: "Stmt"
    other: Optional["Stmt"] = None
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class CaseItem:
    labels: tuple[Expr, ...]  # empty tuple marks the default arm
    body: "Stmt"
    loc: SourceLoc = _loc()

    @property
    def is_default(self) -> bool:
        return not self.labels


@dataclass(frozen=True)
class Case:
    subject: Expr
    items: tuple[CaseItem, ...]
    loc: SourceLoc = _loc()


Stmt = Union[Assign, Block, If, Case]


# ---- module items ---------------------------------------------------------


@dataclass(frozen=True)
class Range:
    msb: Expr
    lsb: Expr


@dataclass(frozen=True)
class Port:
    name: str
    direction: str  # input, output, inout
    width: int
    is_reg: bool = False
    range: Optional[Range] = None
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class NetDecl:
    name: str
    kind: str  # wire or reg
    width: int
    range: Optional[Range] = None
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class Param:
    name: str
    value: Expr
    local: bool = False
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class ContinuousAssign:
    lhs: LValue
    rhs: Expr
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class Edge:
    signal: str
    edge: str  # posedge or negedge


@dataclass(frozen=True)
class AlwaysBlock:
    """``clock`` is None for combinational ``always @(*)`` blocks."""

    body: Stmt
    clock: Optional[Edge] = None
    reset: Optional[Edge] = None
    loc: SourceLoc = _loc()

    @property
    def is_sequential(self) -> bool:
        return self.clock is not None


@dataclass(frozen=True)
class PortConnection:
    port: str
    expr: Optional[Expr]


@dataclass(frozen=True)
class ModuleInstance:
    module_name: str
    instance_name: str
    connections: tuple[PortConnection, ...]
    params: tuple[tuple[str, Expr], ...] = ()
    loc: SourceLoc = _loc()


@dataclass(frozen=True)
class AstModule:
    name: str
    ports: tuple[Port, ...] = ()
    nets: tuple[NetDecl, ...] = ()
    params: tuple[Param, ...] = ()
    assigns: tuple[ContinuousAssign, ...] = ()
    always_blocks: tuple[AlwaysBlock, ...] = ()
    instances: tuple[ModuleInstance, ...] = ()
    loc: SourceLoc = _loc()

    def port(self, name: str) -> Optional[Port]:
        for p in self.ports:
            if p.name == name:
                return p
        return None

    def net(self, name: str) -> Optional[NetDecl]:
        for n in self.nets:
            if n.name == name:
                return n
        return None

    def signal_width(self, name: str) -> Optional[int]:
        decl = self.port(name) or self.net(name)
        return decl.width if decl is not None else None

    def port_signature(self) -> tuple[tuple[str, str, int], ...]:
        return tuple((p.name, p.direction, p.width) for p in self.ports)


# ---- traversal helpers ----------------------------------------------------


def iter_expr(expr: Expr) -> Iterator[Expr]:
    """Pre-order walk over an expression tree."""
    yield expr
    if isinstance(expr, Unary):
        yield from iter_expr(expr.operand)
    elif isinstance(expr, Binary):
        yield from iter_expr(expr.left)
        yield from iter_expr(expr.right)
    elif isinstance(expr, Ternary):
        yield from iter_expr(expr.cond)
        yield from iter_expr(expr.then)
        yield from iter_expr(expr.other)
    elif isinstance(expr, BitSelect):
        yield from iter_expr(expr.index)
    elif isinstance(expr, PartSelect):
        yield from iter_expr(expr.msb)
        yield from iter_expr(expr.lsb)
    elif isinstance(expr, Concat):
        for part in expr.parts:
            yield from iter_expr(part)


def referenced_names(expr: Expr) -> list[str]:
    names = []
    for node in iter_expr(expr):
        if isinstance(node, Ident):
            names.append(node.name)
        elif isinstance(node, (BitSelect, PartSelect)):
            names.append(node.target)
    return names


def lvalue_targets(lhs: LValue) -> list[str]:
    if isinstance(lhs, Ident):
        return [lhs.name]
    if isinstance(lhs, (BitSelect, PartSelect)):
        return [lhs.target]
    out: list[str] = []
    for part in lhs.parts:
        out.extend(lvalue_targets(part))
    return out


def iter_stmts(stmt: Stmt) -> Iterator[Stmt]:
    yield stmt
    if isinstance(stmt, Block):
        for s in stmt.body:
            yield from iter_stmts(s)
    elif isinstance(stmt, If):
        yield from iter_stmts(stmt.then)
        if stmt.other is not None:
            yield from iter_stmts(stmt.other)
    elif isinstance(stmt, Case):
        for item in stmt.items:
            yield from iter_stmts(item.body)


def assigned_names(stmt: Stmt) -> list[str]:
    out: list[str] = []
    for s in iter_stmts(stmt):
        if isinstance(s, Assign):
            for name in lvalue_targets(s.lhs):
                if name not in out:
                    out.append(name)
    return out
