from __future__ import annotations

import re
from dataclasses import dataclass

from timing_triage.frontend.ast import SourceLoc
from timing_triage.frontend.errors import UnsupportedConstruct, VerilogSyntaxError

KEYWORDS = frozenset(
    """
    module endmodule input output inout wire reg parameter localparam assign
    always posedge negedge or begin end if else case endcase default
    """.split()
)

# Reserved words that are valid Verilog (or SystemVerilog) but outside the subset.
UNSUPPORTED_KEYWORDS = frozenset(
    """
    generate endgenerate genvar function endfunction task endtask for while
    repeat forever initial integer real realtime time casex casez signed
    unsigned supply0 supply1 tri wand wor wait fork join specify endspecify
    primitive endprimitive defparam event disable deassign force release
    logic bit byte int shortint longint always_ff always_comb always_latch
    interface endinterface modport typedef enum struct union package
    endpackage import export class endclass unique priority automatic
    """.split()
)

OPERATORS = (
    "<<<", ">>>", "===", "!==",
    "==", "!=", "<=", ">=", "&&", "||", "<<", ">>", "~&", "~|", "~^", "^~", "**",
    "+", "-", "*", "/", "%", "&", "|", "^", "~", "!", "<", ">", "?", ":", "=",
    "(", ")", "[", "]", "{", "}", ",", ";", ".", "@", "#",
)
_UNSUPPORTED_OPS = {
    "<<<": "arithmetic shift",
    ">>>": "arithmetic shift",
    "===": "case equality",
    "!==": "case inequality",
    "**": "power operator",
    "~&": "reduction nand",
    "~|": "reduction nor",
    "~^": "xnor operator",
    "^~": "xnor operator",
}

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<line_comment>//[^\n]*)
  | (?P<block_comment>/\*.*?\*/)
  | (?P<open_comment>/\*)
  | (?P<based>(?:\d[\d_]*)?\s*'[sS]?[bBoOdDhH]\s*[0-9a-fA-FxXzZ?_]+)
  | (?P<sv_fill>'[01xXzZ])
  | (?P<real>\d[\d_]*\.\d[\d_]*(?:[eE][+-]?\d+)?)
  | (?P<decimal>\d[\d_]*)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<escaped>\\\S+)
  | (?P<system>\$[A-Za-z_][A-Za-z0-9_$]*)
  | (?P<directive>`[A-Za-z_]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<op>"""
    + "|".join(re.escape(op) for op in OPERATORS)
    + r""")
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # ident, keyword, number, op, eof
    text: str
    loc: SourceLoc
    value: int = 0
    width: int | None = None
    base: str = "d"

    def is_op(self, *ops: str) -> bool:
        return self.kind == "op" and self.text in ops

    def is_kw(self, *kws: str) -> bool:
        return self.kind == "keyword" and self.text in kws


def _parse_based(text: str, loc: SourceLoc) -> Token:
    compact = re.sub(r"\s+", "", text).replace("_", "")
    size, _, rest = compact.partition("'")
    if rest[0] in "sS":
        raise UnsupportedConstruct("signed literal", loc)
    base = rest[0].lower()
    digits = rest[1:]
    if re.search(r"[xXzZ?]", digits):
        raise UnsupportedConstruct("x/z literal", loc)
    radix = {"b": 2, "o": 8, "d": 10, "h": 16}[base]
    try:
        value = int(digits, radix)
    except ValueError:
        raise VerilogSyntaxError(loc, f"base-{radix} digits", digits) from None
    width = int(size) if size else None
    if width is not None and width < 1:
        raise VerilogSyntaxError(loc, "literal width >= 1", size)
    return Token("number", text, loc, value=value, width=width, base=base)


def tokenize(text: str, file: str = "<input>") -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    n = len(text)
    while pos < n:
        m = _TOKEN_RE.match(text, pos)
        loc = SourceLoc(file, line, pos - line_start + 1)
        if m is None:
            raise VerilogSyntaxError(loc, "a token", text[pos])
        kind = m.lastgroup
        chunk = m.group()
        if kind == "ident":
            if chunk in KEYWORDS:
                tokens.append(Token("keyword", chunk, loc))
            elif chunk in UNSUPPORTED_KEYWORDS:
                raise UnsupportedConstruct(chunk, loc)
            else:
                tokens.append(Token("ident", chunk, loc))
        elif kind == "decimal":
            tokens.append(Token("number", chunk, loc, value=int(chunk.replace("_", ""))))
        elif kind == "based":
            tokens.append(_parse_based(chunk, loc))
        elif kind == "op":
            if chunk in _UNSUPPORTED_OPS:
                raise UnsupportedConstruct(_UNSUPPORTED_OPS[chunk], loc)
            tokens.append(Token("op", chunk, loc))
        elif kind == "open_comment":
            raise VerilogSyntaxError(loc, "'*/'", "end of input")
        elif kind == "real":
            raise UnsupportedConstruct("real literal", loc)
        elif kind == "sv_fill":
            raise UnsupportedConstruct("SystemVerilog fill literal", loc)
        elif kind == "escaped":
            raise UnsupportedConstruct("escaped identifier", loc)
        elif kind == "system":
            raise UnsupportedConstruct(f"system task {chunk}", loc)
        elif kind == "directive":
            raise UnsupportedConstruct(f"compiler directive {chunk}", loc)
        elif kind == "string":
            raise UnsupportedConstruct("string literal", loc)
        # whitespace and comments fall through; track line numbers
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            line_start = m.start() + chunk.rfind("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", SourceLoc(file, line, pos - line_start + 1)))
    return tokens
