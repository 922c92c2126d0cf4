from typing import Optional


class DiskError(Exception):
    """Base class for all library errors."""


class InvalidArgumentError(DiskError, ValueError):
    """Argument outside its documented domain (zero dimension, bad shape, unknown mode)."""


class DegenerateDescriptorError(DiskError, ValueError):
    """Raw descriptor too short to normalize."""


class FieldFormatError(DiskError, ValueError):
    """Malformed DSKF tensor file or JSON artifact."""

    def __init__(self, message: str, offset: int = -1, path: Optional[str] = None):
        location = f" at byte {offset}" if offset >= 0 else ""
        source = f" in {path}" if path else ""
        super().__init__(f"{message}{location}{source}")
        self.offset = offset
        self.path = path


class ZeroBaselineError(DiskError, ValueError):
    """Relative translation between views vanishes; no epipolar geometry exists."""


class NonFiniteGradientError(DiskError, RuntimeError):
    """Training produced NaN/Inf; a diagnostic dump was written before raising."""

    def __init__(self, step: int, dump_path: str, detail: str = ""):
        message = f"Non-finite gradient at step {step}; diagnostics written to {dump_path}"
        if detail:
            message += f" ({detail})"
        super().__init__(message)
        self.step = step
        self.dump_path = dump_path
