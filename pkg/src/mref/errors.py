from __future__ import annotations


class MrefError(Exception):
    """Base error. ``code`` is a stable machine-readable identifier."""

    def __init__(self, code: str, message: str = ""):
        super().__init__(f"{code}: {message}" if message else code)
        self.code = code
        self.message = message


class InstructionError(MrefError):
    pass


class CatalogError(MrefError):
    def __init__(self, code: str, message: str = "", line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(code, message)
        self.line = line


class WireError(MrefError):
    pass


class LinkError(MrefError):
    pass


class TelemetryError(MrefError):
    pass


class ScenarioError(MrefError):
    def __init__(self, code: str, message: str = "", line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(code, message)
        self.line = line
