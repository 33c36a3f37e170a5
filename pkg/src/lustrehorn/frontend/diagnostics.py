from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Iterable


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    line: int | None = None
    column: int | None = None
    file: str | None = None

    def __str__(self):
        where = self.file or "<input>"
        if self.line is not None:
            where += f":{self.line}:{self.column}"
        return f"{where}: error[{self.code}]: {self.message}"

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def at(pos, code: str, message: str) -> Diagnostic:
    if pos is None:
        return Diagnostic(code, message)
    return Diagnostic(code, message, pos.line, pos.col)


class LustreError(Exception):
    """Frontend rejection carrying one or more diagnostics."""

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))

    def with_file(self, file: str) -> "LustreError":
        return type(self)(
            Diagnostic(d.code, d.message, d.line, d.column, file) for d in self.diagnostics
        )


class ParseError(LustreError):
    pass


class UnsupportedFeature(ParseError):
    pass


class TypeCheckError(LustreError):
    pass


class CausalityError(LustreError):
    def __init__(self, diagnostics, cycle: list[str] | None = None):
        super().__init__(diagnostics)
        self.cycle = cycle or []

    def with_file(self, file):
        err = super().with_file(file)
        err.cycle = self.cycle
        return err


class NormalizationError(LustreError):
    pass
