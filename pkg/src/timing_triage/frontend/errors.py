from __future__ import annotations

from typing import Optional

from timing_triage.frontend.ast import SourceLoc


class ParseError(Exception):
    """Base class for everything the frontend rejects."""

    def __init__(self, message: str, loc: Optional[SourceLoc] = None):
        self.message = message
        self.loc = loc
        where = f"{loc}: " if loc is not None else ""
        super().__init__(f"{where}{message}")


class VerilogSyntaxError(ParseError):
    def __init__(self, loc: SourceLoc, expected: str, found: str):
        self.expected = expected
        self.found = found
        super().__init__(f"expected {expected}, found {found!r}", loc)


class UnresolvedIdentifier(ParseError):
    def __init__(self, name: str, loc: SourceLoc):
        self.name = name
        super().__init__(f"unresolved identifier {name!r}", loc)


class UnsupportedConstruct(ParseError):
    def __init__(self, name: str, loc: SourceLoc):
        self.name = name
        super().__init__(f"unsupported construct: {name}", loc)


class BlockingInSequential(ParseError):
    def __init__(self, loc: SourceLoc):
        super().__init__("blocking assignment inside an edge-triggered always block", loc)


class NonblockingInCombinational(ParseError):
    def __init__(self, loc: SourceLoc):
        super().__init__("nonblocking assignment inside a combinational always block", loc)


class DeclarationError(ParseError):
    """Duplicate declarations and assignments to the wrong kind of signal."""
