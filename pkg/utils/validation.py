"""
Input Validation Utilities

Validation functions and the exception hierarchy shared by the imaging
types, the filters, the pipeline and the CLI.
"""
import logging
import math
from typing import Iterable, List, Optional, Sequence, Tuple

logger = logging.getLogger(__name__)


class ValidationError(ValueError):
    """Raised when input validation fails."""
    pass


class StructuralError(ValidationError):
    """Raised when lengths or dimensions of inputs do not agree."""
    pass


class ConfigError(ValidationError):
    """Raised when a parameter is outside its allowed range."""
    pass


class UnsupportedError(ValidationError):
    """Raised when an operation is not defined for the given input."""
    pass


class ImageIOError(OSError):
    """Raised when an image or depth file cannot be read or written."""

    def __init__(self, path, message: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {message}")


def validate_window(size: int, name: str = "window", minimum: int = 1) -> int:
    """
    Validate an odd square window size.

    Args:
        size: Window side length in pixels
        name: Parameter name for error messages
        minimum: Smallest accepted size

    Returns:
        The size as int

    Raises:
        ConfigError: If size is not an odd integer >= minimum
    """
    try:
        as_int = int(size)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be an integer, got: {size!r}")

    if as_int != size:
        raise ConfigError(f"{name} must be an integer, got: {size!r}")

    if as_int < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got: {as_int}")

    if as_int % 2 == 0:
        raise ConfigError(f"{name} must be odd, got: {as_int}")

    return as_int


def validate_fraction(value: float, name: str = "fraction") -> float:
    """
    Validate a value in the closed interval [0, 1].

    Raises:
        ConfigError: If value is not a finite number in [0, 1]
    """
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got: {value!r}")

    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ConfigError(f"{name} must be in [0, 1], got: {value}")

    return value


def validate_positive(value: float, name: str = "value") -> float:
    """
    Validate a strictly positive finite number.

    Raises:
        ConfigError: If value is not > 0
    """
    try:
        value = float(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got: {value!r}")

    if not math.isfinite(value) or value <= 0:
        raise ConfigError(f"{name} must be positive, got: {value}")

    return value


def validate_open_unit(value: float, name: str = "value") -> float:
    """
    Validate a value in the open interval (0, 1).

    Raises:
        ConfigError: If value is not strictly between 0 and 1
    """
    value = validate_positive(value, name)
    if value >= 1.0:
        raise ConfigError(f"{name} must be in (0, 1), got: {value}")
    return value


def validate_airlight(values: Sequence, name: str = "airlight") -> Tuple[float, ...]:
    """
    Validate airlight components: one (gray) or three (RGB), each in (0, 1].

    Raises:
        ConfigError: On a wrong component count or an out-of-range value
    """
    if len(values) not in (1, 3):
        raise ConfigError(f"{name} must have 1 or 3 components, got {len(values)}")

    components = tuple(validate_fraction(v, f"{name} component") for v in values)
    if any(v <= 0.0 for v in components):
        raise ConfigError(f"{name} components must be > 0, got: {components}")

    return components


def parse_airlight(text: str, channels: Optional[int] = None) -> Tuple[float, ...]:
    """
    Parse an ``R,G,B`` (or single gray value) airlight override.

    Args:
        text: Comma separated values in [0, 1]
        channels: Expected component count, if known

    Returns:
        Tuple of floats

    Raises:
        ConfigError: If the text is malformed or a value is out of range
    """
    if not text or not isinstance(text, str):
        raise ConfigError("Airlight must be a non-empty string like 0.9,0.9,0.9")

    parts = [p.strip() for p in text.split(",") if p.strip()]
    values = validate_airlight(parts, "airlight")

    if channels is not None and len(values) != channels:
        if len(values) == 1:
            values = values * channels
        else:
            raise ConfigError(
                f"Airlight has {len(values)} components but image has {channels} channels"
            )

    return values


def validate_choice(value, choices: Sequence, name: str = "value"):
    """Raise ConfigError unless value is one of choices."""
    if value not in choices:
        raise ConfigError(f"{name} must be one of {tuple(choices)}, got: {value!r}")
    return value


def validate_same_shape(first: Sequence[int], second: Sequence[int], what: str = "inputs") -> None:
    """
    Check that two shapes agree.

    Raises:
        StructuralError: If the shapes differ
    """
    if tuple(first) != tuple(second):
        raise StructuralError(
            f"Dimension mismatch between {what}: {tuple(first)} vs {tuple(second)}"
        )


def get_validation_errors(validation_functions: Iterable) -> List[str]:
    """
    Run multiple validation functions and collect all errors.

    Args:
        validation_functions: Iterable of (func, args) tuples

    Returns:
        List of error messages (empty if all validations pass)

    Example:
        errors = get_validation_errors([
            (validate_window, [35, "r", 3]),
            (validate_fraction, [0.02, "epsilon"]),
        ])
    """
    errors = []

    for func, args in validation_functions:
        try:
            if isinstance(args, (list, tuple)):
                func(*args)
            else:
                func(args)
        except ValidationError as e:
            errors.append(str(e))

    return errors
