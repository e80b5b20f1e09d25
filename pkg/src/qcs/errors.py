"""Shared exception types.

The CLI maps these onto exit codes: config errors -> 2, numerical
divergence -> 3, stability-gate rejections -> 4.
"""

from __future__ import annotations

__all__ = [
    "QcsError",
    "ConfigError",
    "StabilityError",
    "DivergenceError",
    "DegeneracyError",
    "DecompositionError",
    "BelowOscillationError",
    "NoThresholdError",
]


class QcsError(Exception):
    """Base class for package errors."""


class ConfigError(QcsError):
    """Malformed or invalid run configuration."""


class StabilityError(QcsError):
    """Linearized analysis requested on an unstable mean-field background."""


class DivergenceError(QcsError):
    """A time integration produced non-finite fields."""


class DegeneracyError(QcsError):
    """Degenerate singular-value pair; generator formulas are ill-conditioned."""


class DecompositionError(QcsError):
    """Matrix factorization failed or missed its residual tolerance."""


class BelowOscillationError(QcsError):
    """No real steady comb intensity exists at this drive (discriminant < 0)."""


class NoThresholdError(QcsError):
    """Threshold undefined (vanishing nonlinear coupling or coupling rate)."""
