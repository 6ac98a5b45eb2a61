"""Canonical source printer.

One layout only: two-space indentation, one port per line, minimal
parentheses. ``parse(print_source(m))`` is structurally equal to ``m``.
"""

from __future__ import annotations

from timing_triage.frontend import ast as A
from timing_triage.frontend.parser import BINARY_PRECEDENCE

_INDENT = "  "
_RADIX_FMT = {"b": "b", "o": "o", "d": "d", "h": "x"}


def format_number(num: A.Number) -> str:
    if num.width is None and num.base == "d":
        return str(num.value)
    digits = format(num.value, _RADIX_FMT[num.base])
    size = "" if num.width is None else str(num.width)
    return f"{size}'{num.base}{digits}"


def format_expr(expr: A.Expr) -> str:
    if isinstance(expr, A.Ident):
        return expr.name
    if isinstance(expr, A.Number):
        return format_number(expr)
    if isinstance(expr, A.Unary):
        inner = format_expr(expr.operand)
        if isinstance(expr.operand, (A.Unary, A.Binary, A.Ternary)):
            inner = f"({inner})"
        return f"{expr.op}{inner}"
    if isinstance(expr, A.Binary):
        prec = BINARY_PRECEDENCE[expr.op]
        left = format_expr(expr.left)
        right = format_expr(expr.right)
        if _needs_parens(expr.left, prec, right_side=False):
            left = f"({left})"
        if _needs_parens(expr.right, prec, right_side=True):
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    if isinstance(expr, A.Ternary):
        cond = format_expr(expr.cond)
        if isinstance(expr.cond, A.Ternary):
            cond = f"({cond})"
        return f"{cond} ? {format_expr(expr.then)} : {format_expr(expr.other)}"
    if isinstance(expr, A.BitSelect):
        return f"{expr.target}[{format_expr(expr.index)}]"
    if isinstance(expr, A.PartSelect):
        return f"{expr.target}[{format_expr(expr.msb)}:{format_expr(expr.lsb)}]"
    if isinstance(expr, A.Concat):
        return "{" + ", ".join(format_expr(p) for p in expr.parts) + "}"
    raise TypeError(f"not an expression: {expr!r}")


def _needs_parens(child: A.Expr, parent_prec: int, right_side: bool) -> bool:
    if isinstance(child, A.Ternary):
        return True
    if isinstance(child, A.Binary):
        child_prec = BINARY_PRECEDENCE[child.op]
        return child_prec < parent_prec or (right_side and child_prec == parent_prec)
    return False


def _range(rng: A.Range | None) -> str:
    if rng is None:
        return ""
    return f"[{format_expr(rng.msb)}:{format_expr(rng.lsb)}] "


def _stmt_lines(stmt: A.Stmt, depth: int) -> list[str]:
    pad = _INDENT * depth
    if isinstance(stmt, A.Assign):
        op = "=" if stmt.blocking else "<="
        return [f"{pad}{format_expr(stmt.lhs)} {op} {format_expr(stmt.rhs)};"]
    if isinstance(stmt, A.Block):
        lines = [f"{pad}begin"]
        for s in stmt.body:
            lines.extend(_stmt_lines(s, depth + 1))
        lines.append(f"{pad}end")
        return lines
    if isinstance(stmt, A.If):
        return _if_lines(stmt, depth, pad)
    if isinstance(stmt, A.Case):
        lines = [f"{pad}case ({format_expr(stmt.subject)})"]
        for item in stmt.items:
            head = "default" if item.is_default else ", ".join(format_expr(lbl) for lbl in item.labels)
            lines.extend(_attach(f"{pad}{_INDENT}{head}:", item.body, depth + 1))
        lines.append(f"{pad}endcase")
        return lines
    raise TypeError(f"not a statement: {stmt!r}")


def _attach(head: str, body: A.Stmt, depth: int) -> list[str]:
    """Render ``head`` followed by ``body``; blocks and one-liners share the head line."""
    inner = _stmt_lines(body, depth + 1)
    if isinstance(body, (A.Block, A.Assign)):
        first = inner[0].lstrip()
        rest = [line[len(_INDENT):] for line in inner[1:]] if isinstance(body, A.Block) else []
        return [f"{head} {first}"] + rest
    return [head] + inner


def _if_lines(stmt: A.If, depth: int, pad: str) -> list[str]:
    lines = _attach(f"{pad}if ({format_expr(stmt.cond)})", stmt.then, depth)
    other = stmt.other
    while other is not None:
        if isinstance(other, A.If):
            chained = _attach(f"{pad}else if ({format_expr(other.cond)})", other.then, depth)
            lines.extend(_join_else(lines, chained))
            other = other.other
        else:
            lines.extend(_join_else(lines, _attach(f"{pad}else", other, depth)))
            other = None
    return lines


def _join_else(lines: list[str], chained: list[str]) -> list[str]:
    # "end else ..." stays on one line when the previous branch was a block
    if lines[-1].rstrip().endswith("end") and lines[-1].strip() == "end":
        last = lines.pop()
        return [f"{last} {chained[0].lstrip()}"] + chained[1:]
    return chained


def _sensitivity(blk: A.AlwaysBlock) -> str:
    if blk.clock is None:
        return "@(*)"
    parts = [f"{blk.clock.edge} {blk.clock.signal}"]
    if blk.reset is not None:
        parts.append(f"{blk.reset.edge} {blk.reset.signal}")
    return "@(" + " or ".join(parts) + ")"


def print_source(mod: A.AstModule) -> str:
    """Render ``mod`` as canonical Verilog text ending in a newline."""
    lines: list[str] = []
    header_params = _header_params(mod)
    head = f"module {mod.name}"
    if header_params:
        lines.append(head + " #(")
        for i, p in enumerate(header_params):
            sep = "," if i < len(header_params) - 1 else ""
            lines.append(f"{_INDENT}parameter {p.name} = {format_expr(p.value)}{sep}")
        head = ")"
    if mod.ports:
        lines.append(head + " (")
        for i, port in enumerate(mod.ports):
            sep = "," if i < len(mod.ports) - 1 else ""
            kind = "reg " if port.is_reg else ""
            lines.append(f"{_INDENT}{port.direction} {kind}{_range(port.range)}{port.name}{sep}")
        lines.append(");")
    else:
        lines.append(head + ";")

    body_params = mod.params[len(header_params):]
    sections: list[list[str]] = []
    if body_params:
        sections.append(
            [f"{_INDENT}{'localparam' if p.local else 'parameter'} {p.name} = {format_expr(p.value)};" for p in body_params]
        )
    if mod.nets:
        sections.append([f"{_INDENT}{n.kind} {_range(n.range)}{n.name};" for n in mod.nets])
    if mod.assigns:
        sections.append([f"{_INDENT}assign {format_expr(a.lhs)} = {format_expr(a.rhs)};" for a in mod.assigns])
    for blk in mod.always_blocks:
        sections.append(_attach(f"{_INDENT}always {_sensitivity(blk)}", blk.body, 1))
    for inst in mod.instances:
        sections.append(_instance_lines(inst))
    for section in sections:
        lines.append("")
        lines.extend(section)
    if sections:
        lines.append("")
    lines.append("endmodule")
    return "\n".join(lines) + "\n"


def _header_params(mod: A.AstModule) -> list[A.Param]:
    """Non-local parameters go in the header when they all precede the locals."""
    seen_local = False
    header: list[A.Param] = []
    for p in mod.params:
        if p.local:
            seen_local = True
        elif seen_local:
            return []
        else:
            header.append(p)
    return header


def _instance_lines(inst: A.ModuleInstance) -> list[str]:
    lines = []
    head = f"{_INDENT}{inst.module_name}"
    if inst.params:
        lines.append(head + " #(")
        for i, (name, value) in enumerate(inst.params):
            sep = "," if i < len(inst.params) - 1 else ""
            lines.append(f"{_INDENT * 2}.{name}({format_expr(value)}){sep}")
        head = f"{_INDENT})"
    if not inst.connections:
        lines.append(f"{head} {inst.instance_name} ();")
        return lines
    lines.append(f"{head} {inst.instance_name} (")
    for i, conn in enumerate(inst.connections):
        sep = "," if i < len(inst.connections) - 1 else ""
        expr = "" if conn.expr is None else format_expr(conn.expr)
        lines.append(f"{_INDENT * 2}.{conn.port}({expr}){sep}")
    lines.append(f"{_INDENT});")
    return lines
