"""Recursive-descent parser for the synthesizable Verilog-2001 subset.

Accepted: one module per input with ANSI-style ports, ``parameter`` /
``localparam`` with constant values, ``wire`` / ``reg`` declarations,
continuous ``assign``, ``always @(posedge clk [or <edge> rst])`` and
``always @(*)`` blocks built from ``begin``/``end``, ``if``/``else``,
``case``/``endcase`` and assignments, and single-level module instances with
named port connections.

Anything else raises :class:`UnsupportedConstruct` instead of being skipped.
"""

from __future__ import annotations

from typing import Optional

from timing_triage.frontend import ast as A
from timing_triage.frontend.errors import (
    BlockingInSequential,
    DeclarationError,
    NonblockingInCombinational,
    UnresolvedIdentifier,
    UnsupportedConstruct,
    VerilogSyntaxError,
)
from timing_triage.frontend.lexer import Token, tokenize

# binary operator -> precedence, higher binds tighter
BINARY_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "|": 3,
    "^": 4,
    "&": 5,
    "==": 6,
    "!=": 6,
    "<": 7,
    "<=": 7,
    ">": 7,
    ">=": 7,
    "<<": 8,
    ">>": 8,
    "+": 9,
    "-": 9,
    "*": 10,
    "/": 10,
    "%": 10,
}
UNARY_OPS = ("~", "!", "-", "&", "|", "^")


def _describe(tok: Token) -> str:
    return tok.text if tok.kind != "eof" else "end of input"


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    # ---- token navigation ----

    @property
    def cur(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        tok = self.cur
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect_op(self, op: str) -> Token:
        if not self.cur.is_op(op):
            raise VerilogSyntaxError(self.cur.loc, repr(op), _describe(self.cur))
        return self.advance()

    def expect_kw(self, kw: str) -> Token:
        if not self.cur.is_kw(kw):
            raise VerilogSyntaxError(self.cur.loc, repr(kw), _describe(self.cur))
        return self.advance()

    def expect_ident(self) -> Token:
        if self.cur.kind != "ident":
            raise VerilogSyntaxError(self.cur.loc, "identifier", _describe(self.cur))
        return self.advance()

    def accept_op(self, op: str) -> Optional[Token]:
        if self.cur.is_op(op):
            return self.advance()
        return None

    # ---- module ----

    def parse_module(self) -> A.AstModule:
        start = self.expect_kw("module")
        name = self.expect_ident().text
        params: list[A.Param] = []
        ports: list[A.Port] = []
        if self.cur.is_op("#"):
            self.advance()
            self.expect_op("(")
            params.extend(self._header_params())
            self.expect_op(")")
        if self.accept_op("("):
            if not self.cur.is_op(")"):
                ports.extend(self._ansi_ports())
            self.expect_op(")")
        self.expect_op(";")

        nets: list[A.NetDecl] = []
        assigns: list[A.ContinuousAssign] = []
        always: list[A.AlwaysBlock] = []
        instances: list[A.ModuleInstance] = []
        while not self.cur.is_kw("endmodule"):
            tok = self.cur
            if tok.kind == "eof":
                raise VerilogSyntaxError(tok.loc, "'endmodule'", "end of input")
            if tok.is_kw("wire", "reg"):
                decls, extra = self._net_decl()
                nets.extend(decls)
                assigns.extend(extra)
            elif tok.is_kw("parameter", "localparam"):
                params.extend(self._body_params())
            elif tok.is_kw("assign"):
                assigns.extend(self._continuous_assign())
            elif tok.is_kw("always"):
                always.append(self._always())
            elif tok.is_kw("input", "output", "inout"):
                raise UnsupportedConstruct("non-ANSI port declaration", tok.loc)
            elif tok.kind == "ident":
                instances.append(self._instance())
            elif tok.is_kw("module"):
                raise UnsupportedConstruct("nested module declaration", tok.loc)
            else:
                raise VerilogSyntaxError(tok.loc, "module item", _describe(tok))
        self.expect_kw("endmodule")
        if self.cur.kind != "eof":
            if self.cur.is_kw("module"):
                raise UnsupportedConstruct("multiple modules in one input", self.cur.loc)
            raise VerilogSyntaxError(self.cur.loc, "end of input", _describe(self.cur))
        return A.AstModule(
            name=name,
            ports=tuple(ports),
            nets=tuple(nets),
            params=tuple(params),
            assigns=tuple(assigns),
            always_blocks=tuple(always),
            instances=tuple(instances),
            loc=start.loc,
        )

    def _header_params(self) -> list[A.Param]:
        if self.cur.is_kw("localparam"):
            raise UnsupportedConstruct("localparam in parameter port list", self.cur.loc)
        first: Optional[Token] = self.expect_kw("parameter")
        out = [self._param_assignment(first, local=False)]
        while self.accept_op(","):
            if self.cur.is_kw("localparam"):
                raise UnsupportedConstruct("localparam in parameter port list", self.cur.loc)
            first = self.advance() if self.cur.is_kw("parameter") else None
            out.append(self._param_assignment(first, local=False))
        return out

    def _body_params(self) -> list[A.Param]:
        kw = self.advance()
        local = kw.text == "localparam"
        if self.cur.is_op("["):
            raise UnsupportedConstruct("ranged parameter", self.cur.loc)
        out = [self._param_assignment(kw, local)]
        while self.accept_op(","):
            out.append(self._param_assignment(None, local))
        self.expect_op(";")
        return out

    def _param_assignment(self, first: Optional[Token], local: bool) -> A.Param:
        if self.cur.is_op("["):
            raise UnsupportedConstruct("ranged parameter", self.cur.loc)
        name_tok = self.expect_ident()
        self.expect_op("=")
        value = self.expression()
        loc = first.loc if first is not None else name_tok.loc
        return A.Param(name_tok.text, value, local, loc=loc)

    def _range(self) -> Optional[A.Range]:
        if not self.accept_op("["):
            return None
        msb = self.expression()
        self.expect_op(":")
        lsb = self.expression()
        self.expect_op("]")
        return A.Range(msb, lsb)

    def _ansi_ports(self) -> list[A.Port]:
        ports: list[A.Port] = []
        direction: Optional[str] = None
        is_reg = False
        rng: Optional[A.Range] = None
        while True:
            first = self.cur
            if first.is_kw("input", "output", "inout"):
                direction = self.advance().text
                is_reg = False
                if self.cur.is_kw("wire"):
                    self.advance()
                elif self.cur.is_kw("reg"):
                    self.advance()
                    is_reg = True
                rng = self._range()
            elif direction is None:
                if first.kind == "ident":
                    raise UnsupportedConstruct("non-ANSI port list", first.loc)
                raise VerilogSyntaxError(first.loc, "port direction", _describe(first))
            name_tok = self.expect_ident()
            if self.cur.is_op("["):
                raise UnsupportedConstruct("memory array", self.cur.loc)
            if is_reg and direction != "output":
                raise DeclarationError(f"{direction} port {name_tok.text!r} cannot be reg", name_tok.loc)
            ports.append(
                A.Port(name_tok.text, direction, 0, is_reg, rng, loc=first.loc)
            )
            if not self.accept_op(","):
                return ports

    def _net_decl(self) -> tuple[list[A.NetDecl], list[A.ContinuousAssign]]:
        kw = self.advance()
        rng = self._range()
        decls: list[A.NetDecl] = []
        assigns: list[A.ContinuousAssign] = []
        first = True
        while True:
            name_tok = self.expect_ident()
            if self.cur.is_op("["):
                raise UnsupportedConstruct("memory array", self.cur.loc)
            decls.append(A.NetDecl(name_tok.text, kw.text, 0, rng, loc=kw.loc if first else name_tok.loc))
            if self.cur.is_op("="):
                if kw.text == "reg":
                    raise UnsupportedConstruct("reg initializer", self.cur.loc)
                self.advance()
                rhs = self.expression()
                assigns.append(A.ContinuousAssign(A.Ident(name_tok.text, loc=name_tok.loc), rhs, loc=name_tok.loc))
            first = False
            if not self.accept_op(","):
                break
        self.expect_op(";")
        return decls, assigns

    def _continuous_assign(self) -> list[A.ContinuousAssign]:
        kw = self.advance()
        if self.cur.is_op("#"):
            raise UnsupportedConstruct("delay control", self.cur.loc)
        out = []
        while True:
            lhs = self.lvalue()
            self.expect_op("=")
            rhs = self.expression()
            out.append(A.ContinuousAssign(lhs, rhs, loc=kw.loc))
            if not self.accept_op(","):
                break
        self.expect_op(";")
        return out

    def _always(self) -> A.AlwaysBlock:
        kw = self.advance()
        self.expect_op("@")
        edges: list[A.Edge] = []
        level = False
        if self.accept_op("*"):
            level = True
        else:
            self.expect_op("(")
            if self.accept_op("*"):
                level = True
            else:
                while True:
                    if self.cur.is_kw("posedge", "negedge"):
                        edge = self.advance().text
                        sig = self.expect_ident().text
                        edges.append(A.Edge(sig, edge))
                    else:
                        self.expect_ident()
                        level = True
                    if self.cur.is_kw("or") or self.cur.is_op(","):
                        self.advance()
                        continue
                    break
            self.expect_op(")")
        if edges and level:
            raise UnsupportedConstruct("mixed edge and level sensitivity", kw.loc)
        if len(edges) > 2:
            raise UnsupportedConstruct("more than one asynchronous control", kw.loc)
        body = self.statement()
        clock = edges[0] if edges else None
        reset = edges[1] if len(edges) > 1 else None
        return A.AlwaysBlock(body, clock, reset, loc=kw.loc)

    def _instance(self) -> A.ModuleInstance:
        mod_tok = self.advance()
        params: list[tuple[str, A.Expr]] = []
        if self.accept_op("#"):
            self.expect_op("(")
            while True:
                if not self.cur.is_op("."):
                    raise UnsupportedConstruct("positional parameter override", self.cur.loc)
                self.advance()
                pname = self.expect_ident().text
                self.expect_op("(")
                params.append((pname, self.expression()))
                self.expect_op(")")
                if not self.accept_op(","):
                    break
            self.expect_op(")")
        inst_tok = self.expect_ident()
        if self.cur.is_op("["):
            raise UnsupportedConstruct("instance array", self.cur.loc)
        self.expect_op("(")
        conns: list[A.PortConnection] = []
        if not self.cur.is_op(")"):
            while True:
                if not self.cur.is_op("."):
                    raise UnsupportedConstruct("positional port connection", self.cur.loc)
                self.advance()
                port = self.expect_ident().text
                self.expect_op("(")
                expr = None if self.cur.is_op(")") else self.expression()
                self.expect_op(")")
                conns.append(A.PortConnection(port, expr))
                if not self.accept_op(","):
                    break
        self.expect_op(")")
        self.expect_op(";")
        return A.ModuleInstance(mod_tok.text, inst_tok.text, tuple(conns), tuple(params), loc=mod_tok.loc)

    # ---- statements ----

    def statement(self) -> A.Stmt:
        tok = self.cur
        if tok.is_kw("begin"):
            self.advance()
            if self.cur.is_op(":"):
                raise UnsupportedConstruct("named block", self.cur.loc)
            body = []
            while not self.cur.is_kw("end"):
                if self.cur.kind == "eof":
                    raise VerilogSyntaxError(self.cur.loc, "'end'", "end of input")
                body.append(self.statement())
            self.advance()
            return A.Block(tuple(body), loc=tok.loc)
        if tok.is_kw("if"):
            self.advance()
            self.expect_op("(")
            cond = self.expression()
            self.expect_op(")")
            then = self.statement()
            other = None
            if self.cur.is_kw("else"):
                self.advance()
                other = self.statement()
            return A.If(cond, then, other, loc=tok.loc)
        if tok.is_kw("case"):
            return self._case()
        if tok.is_op(";"):
            self.advance()
            return A.Block((), loc=tok.loc)
        if tok.is_op("#"):
            raise UnsupportedConstruct("delay control", tok.loc)
        if tok.kind == "ident" or tok.is_op("{"):
            lhs = self.lvalue()
            if self.cur.is_op("="):
                blocking = True
            elif self.cur.is_op("<="):
                blocking = False
            else:
                raise VerilogSyntaxError(self.cur.loc, "'=' or '<='", _describe(self.cur))
            self.advance()
            if self.cur.is_op("#"):
                raise UnsupportedConstruct("intra-assignment delay", self.cur.loc)
            rhs = self.expression()
            self.expect_op(";")
            return A.Assign(lhs, rhs, blocking, loc=tok.loc)
        raise VerilogSyntaxError(tok.loc, "statement", _describe(tok))

    def _case(self) -> A.Case:
        kw = self.advance()
        self.expect_op("(")
        subject = self.expression()
        self.expect_op(")")
        items: list[A.CaseItem] = []
        seen_default = False
        while not self.cur.is_kw("endcase"):
            first = self.cur
            if first.kind == "eof":
                raise VerilogSyntaxError(first.loc, "'endcase'", "end of input")
            if first.is_kw("default"):
                if seen_default:
                    raise VerilogSyntaxError(first.loc, "at most one default arm", "default")
                seen_default = True
                self.advance()
                self.accept_op(":")
                labels: tuple[A.Expr, ...] = ()
            else:
                exprs = [self.expression()]
                while self.accept_op(","):
                    exprs.append(self.expression())
                self.expect_op(":")
                labels = tuple(exprs)
            body = self.statement()
            items.append(A.CaseItem(labels, body, loc=first.loc))
        self.advance()
        return A.Case(subject, tuple(items), loc=kw.loc)

    # ---- expressions ----

    def lvalue(self) -> A.LValue:
        tok = self.cur
        if tok.is_op("{"):
            self.advance()
            parts = [self.lvalue()]
            while self.accept_op(","):
                parts.append(self.lvalue())
            self.expect_op("}")
            return A.Concat(tuple(parts), loc=tok.loc)
        name = self.expect_ident()
        return self._selects(name)

    def _selects(self, name: Token) -> A.Expr:
        if not self.accept_op("["):
            return A.Ident(name.text, loc=name.loc)
        first = self.expression()
        if self.accept_op(":"):
            lsb = self.expression()
            self.expect_op("]")
            node: A.Expr = A.PartSelect(name.text, first, lsb, loc=name.loc)
        else:
            if self.cur.is_op("+", "-") and self.peek().is_op(":"):
                raise UnsupportedConstruct("indexed part-select", self.cur.loc)
            self.expect_op("]")
            node = A.BitSelect(name.text, first, loc=name.loc)
        if self.cur.is_op("["):
            raise UnsupportedConstruct("multi-dimensional select", self.cur.loc)
        return node

    def expression(self) -> A.Expr:
        cond = self._binary(1)
        if self.cur.is_op("?"):
            self.advance()
            then = self.expression()
            self.expect_op(":")
            other = self.expression()
            return A.Ternary(cond, then, other, loc=cond.loc)
        return cond

    def _binary(self, min_prec: int) -> A.Expr:
        left = self._unary()
        while True:
            tok = self.cur
            prec = BINARY_PRECEDENCE.get(tok.text) if tok.kind == "op" else None
            if prec is None or prec < min_prec:
                return left
            self.advance()
            right = self._binary(prec + 1)
            left = A.Binary(tok.text, left, right, loc=left.loc)

    def _unary(self) -> A.Expr:
        tok = self.cur
        if tok.kind == "op" and tok.text in UNARY_OPS:
            self.advance()
            return A.Unary(tok.text, self._unary(), loc=tok.loc)
        if tok.is_op("+"):
            raise UnsupportedConstruct("unary plus", tok.loc)
        return self._primary()

    def _primary(self) -> A.Expr:
        tok = self.cur
        if tok.kind == "number":
            self.advance()
            return A.Number(tok.value, tok.width, tok.base, loc=tok.loc)
        if tok.kind == "ident":
            self.advance()
            if self.cur.is_op("("):
                raise UnsupportedConstruct("function call", tok.loc)
            return self._selects(tok)
        if tok.is_op("("):
            self.advance()
            inner = self.expression()
            self.expect_op(")")
            return inner
        if tok.is_op("{"):
            self.advance()
            first = self.expression()
            if self.cur.is_op("{"):
                raise UnsupportedConstruct("replication", tok.loc)
            parts = [first]
            while self.accept_op(","):
                parts.append(self.expression())
            self.expect_op("}")
            return A.Concat(tuple(parts), loc=tok.loc)
        raise VerilogSyntaxError(tok.loc, "expression", _describe(tok))


# ---- semantic checks ------------------------------------------------------


class _ConstEval:
    def __init__(self, env: dict[str, int]):
        self.env = env

    def __call__(self, expr: A.Expr) -> int:
        if isinstance(expr, A.Number):
            return expr.value
        if isinstance(expr, A.Ident):
            if expr.name not in self.env:
                raise VerilogSyntaxError(expr.loc, "constant expression", expr.name)
            return self.env[expr.name]
        if isinstance(expr, A.Unary):
            v = self(expr.operand)
            return {"~": ~v, "!": int(not v), "-": -v}.get(expr.op, v)
        if isinstance(expr, A.Binary):
            a, b = self(expr.left), self(expr.right)
            if expr.op in ("/", "%") and b == 0:
                raise VerilogSyntaxError(expr.loc, "nonzero divisor", "0")
            ops = {
                "+": lambda: a + b, "-": lambda: a - b, "*": lambda: a * b,
                "/": lambda: int(a / b), "%": lambda: a % b,
                "<<": lambda: a << b, ">>": lambda: a >> b,
                "&": lambda: a & b, "|": lambda: a | b, "^": lambda: a ^ b,
                "==": lambda: int(a == b), "!=": lambda: int(a != b),
                "<": lambda: int(a < b), "<=": lambda: int(a <= b),
                ">": lambda: int(a > b), ">=": lambda: int(a >= b),
                "&&": lambda: int(bool(a) and bool(b)), "||": lambda: int(bool(a) or bool(b)),
            }
            return ops[expr.op]()
        if isinstance(expr, A.Ternary):
            return self(expr.then) if self(expr.cond) else self(expr.other)
        raise VerilogSyntaxError(expr.loc, "constant expression", type(expr).__name__)


def _width(rng: Optional[A.Range], ev: _ConstEval) -> int:
    if rng is None:
        return 1
    return abs(ev(rng.msb) - ev(rng.lsb)) + 1


def _check_names(expr: A.Expr, known: set[str]) -> None:
    for node in A.iter_expr(expr):
        if isinstance(node, A.Ident) and node.name not in known:
            raise UnresolvedIdentifier(node.name, node.loc)
        if isinstance(node, (A.BitSelect, A.PartSelect)) and node.target not in known:
            raise UnresolvedIdentifier(node.target, node.loc)


def _lvalue_nodes(lhs: A.LValue) -> list[A.Expr]:
    if isinstance(lhs, A.Concat):
        out: list[A.Expr] = []
        for p in lhs.parts:
            out.extend(_lvalue_nodes(p))
        return out
    return [lhs]


def _resolve(mod: A.AstModule) -> A.AstModule:
    env: dict[str, int] = {}
    ev = _ConstEval(env)
    seen: dict[str, A.SourceLoc] = {}

    def declare(name: str, loc: A.SourceLoc) -> None:
        if name in seen:
            raise DeclarationError(f"{name!r} already declared at {seen[name]}", loc)
        seen[name] = loc

    for p in mod.params:
        declare(p.name, p.loc)
        env[p.name] = ev(p.value)
    ports = []
    for port in mod.ports:
        declare(port.name, port.loc)
        ports.append(A.Port(port.name, port.direction, _width(port.range, ev), port.is_reg, port.range, loc=port.loc))
    nets = []
    for net in mod.nets:
        declare(net.name, net.loc)
        nets.append(A.NetDecl(net.name, net.kind, _width(net.range, ev), net.range, loc=net.loc))
    for inst in mod.instances:
        declare(inst.instance_name, inst.loc)

    signals = {p.name for p in ports} | {n.name for n in nets}
    known = signals | set(env)
    regs = {p.name for p in ports if p.is_reg} | {n.name for n in nets if n.kind == "reg"}
    inputs = {p.name for p in ports if p.direction == "input"}

    def check_target(node: A.Expr, procedural: bool, loc: A.SourceLoc) -> None:
        name = node.name if isinstance(node, A.Ident) else node.target  # type: ignore[union-attr]
        if name not in signals:
            if name in env:
                raise DeclarationError(f"cannot assign to parameter {name!r}", node.loc)
            raise UnresolvedIdentifier(name, node.loc)
        if name in inputs:
            raise DeclarationError(f"cannot assign to input port {name!r}", node.loc)
        if procedural and name not in regs:
            raise DeclarationError(f"procedural assignment to non-reg {name!r}", loc)
        if not procedural and name in regs:
            raise DeclarationError(f"continuous assignment to reg {name!r}", loc)
        if isinstance(node, A.BitSelect):
            _check_names(node.index, known)
        elif isinstance(node, A.PartSelect):
            _check_names(node.msb, known)
            _check_names(node.lsb, known)

    for ca in mod.assigns:
        for node in _lvalue_nodes(ca.lhs):
            check_target(node, False, ca.loc)
        _check_names(ca.rhs, known)

    for blk in mod.always_blocks:
        for edge in (blk.clock, blk.reset):
            if edge is not None and edge.signal not in signals:
                raise UnresolvedIdentifier(edge.signal, blk.loc)
        for stmt in A.iter_stmts(blk.body):
            if isinstance(stmt, A.Assign):
                if blk.is_sequential and stmt.blocking:
                    raise BlockingInSequential(stmt.loc)
                if not blk.is_sequential and not stmt.blocking:
                    raise NonblockingInCombinational(stmt.loc)
                for node in _lvalue_nodes(stmt.lhs):
                    check_target(node, True, stmt.loc)
                _check_names(stmt.rhs, known)
            elif isinstance(stmt, A.If):
                _check_names(stmt.cond, known)
            elif isinstance(stmt, A.Case):
                _check_names(stmt.subject, known)
                for item in stmt.items:
                    for label in item.labels:
                        _check_names(label, known)

    for inst in mod.instances:
        names = set()
        for conn in inst.connections:
            if conn.port in names:
                raise DeclarationError(f"port {conn.port!r} connected twice", inst.loc)
            names.add(conn.port)
            if conn.expr is not None:
                _check_names(conn.expr, known)
        for _, value in inst.params:
            ev(value)

    return A.AstModule(
        name=mod.name,
        ports=tuple(ports),
        nets=tuple(nets),
        params=mod.params,
        assigns=mod.assigns,
        always_blocks=mod.always_blocks,
        instances=mod.instances,
        loc=mod.loc,
    )


def parse(text: str, file: str = "<input>") -> A.AstModule:
    """Parse one module. Raises a :class:`ParseError` subclass on rejection."""
    parser = _Parser(tokenize(text, file))
    if parser.cur.kind == "eof":
        raise VerilogSyntaxError(parser.cur.loc, "'module'", "end of input")
    return _resolve(parser.parse_module())


def parse_file(path) -> A.AstModule:
    from pathlib import Path

    p = Path(path)
    return parse(p.read_text(encoding="utf-8"), str(p))


def eval_const(mod: A.AstModule, expr: A.Expr) -> int:
    """Evaluate a constant expression in the scope of ``mod``'s parameters."""
    env: dict[str, int] = {}
    ev = _ConstEval(env)
    for p in mod.params:
        env[p.name] = ev(p.value)
    return ev(expr)
