"""Exception hierarchy shared by every keyscan stage."""

from typing import Optional


class KeyScanError(RuntimeError):
    """Base class for all keyscan failures."""


class ConfigError(KeyScanError):
    pass


class MalformedSmali(KeyScanError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptyApp(KeyScanError):
    def __init__(self, root: str):
        self.root = root
        super().__init__(f"no classes parsed under {root}")


class BadDescriptor(KeyScanError):
    def __init__(self, descriptor: str, reason: str = "invalid type descriptor"):
        self.descriptor = descriptor
        super().__init__(f"{reason}: {descriptor!r}")


class DuplicateApiId(KeyScanError):
    def __init__(self, api_id: str):
        self.api_id = api_id
        super().__init__(f"duplicate api_id {api_id!r} in signature database")


class UnknownMethod(KeyScanError):
    def __init__(self, method: str):
        self.method = method
        super().__init__(f"method not in call graph: {method}")


class MissingDeveloper(KeyScanError):
    def __init__(self, app_id: str):
        self.app_id = app_id
        super().__init__(f"no developer metadata for {app_id}")


class SchemaVersionMismatch(KeyScanError):
    def __init__(self, found, expected):
        self.found = found
        self.expected = expected
        super().__init__(f"schema_version {found!r} != {expected!r}")


class CorruptResult(KeyScanError):
    pass


class MalformedRecord(KeyScanError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class EmptyCorpus(KeyScanError):
    pass


class UnwritableOutput(KeyScanError):
    pass


class DuplicateSample(KeyScanError):
    def __init__(self, key: tuple, line: Optional[int] = None):
        self.key = key
        self.line = line
        super().__init__(f"duplicate sample {key} (line {line})")


class BadRow(KeyScanError):
    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")


class ScanTimeout(KeyScanError):
    def __init__(self, stage: str, limit_seconds: float):
        self.stage = stage
        self.limit_seconds = limit_seconds
        super().__init__(f"timed out during {stage} (limit {limit_seconds:.1f}s)")
