"""Small input-validation helpers used at module boundaries."""

from __future__ import annotations

import math

from .exceptions import ConfigError, NonFinite


def check_finite(name: str, value) -> float:
    """Return ``value`` as a float, raising NonFinite for NaN/inf."""
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise NonFinite(f"{name} is not a real number: {value!r}") from exc
    if not math.isfinite(v):
        raise NonFinite(f"{name} must be finite, got {v!r}")
    return v


def check_positive(name: str, value) -> float:
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} is not a real number: {value!r}") from exc
    if not (math.isfinite(v) and v > 0.0):
        raise ConfigError(f"{name} must be finite and > 0, got {v!r}")
    return v


def check_contraction_gain(name: str, value) -> float:
    """Gains entering a Lyapunov contraction must satisfy |rho| < 1."""
    try:
        v = float(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} is not a real number: {value!r}") from exc
    if not (math.isfinite(v) and abs(v) < 1.0):
        raise ConfigError(f"{name} must satisfy |{name}| < 1, got {v!r}")
    return v


def check_count(name: str, value, minimum: int = 1) -> int:
    if isinstance(value, bool) or int(value) != value:
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    v = int(value)
    if v < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {v}")
    return v
