from lustrehorn.frontend.ast import Program, Node
from lustrehorn.frontend.causality import check_causality
from lustrehorn.frontend.diagnostics import Diagnostic, LustreError
from lustrehorn.frontend.parser import parse_program
from lustrehorn.frontend.printer import print_program
from lustrehorn.frontend.typecheck import typecheck


def load_program(source: str, main: str | None = None) -> Program:
    """Parse, type-check and causality-check ``source``."""
    return check_causality(typecheck(parse_program(source, main)))


__all__ = [
    "Diagnostic", "LustreError", "Node", "Program", "check_causality",
    "load_program", "parse_program", "print_program", "typecheck",
]
