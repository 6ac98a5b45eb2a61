"""Verilog subset frontend: lexer, parser, AST and canonical printer."""

from timing_triage.frontend.ast import AstModule, SourceLoc
from timing_triage.frontend.errors import (
    BlockingInSequential,
    DeclarationError,
    NonblockingInCombinational,
    ParseError,
    UnresolvedIdentifier,
    UnsupportedConstruct,
    VerilogSyntaxError,
)
from timing_triage.frontend.parser import parse, parse_file
from timing_triage.frontend.printer import print_source

__all__ = [
    "AstModule",
    "BlockingInSequential",
    "DeclarationError",
    "NonblockingInCombinational",
    "ParseError",
    "SourceLoc",
    "UnresolvedIdentifier",
    "UnsupportedConstruct",
    "VerilogSyntaxError",
    "parse",
    "parse_file",
    "print_source",
]
