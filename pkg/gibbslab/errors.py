"""Exception taxonomy. Every class carries the CLI exit code it maps to."""
from __future__ import annotations

from typing import Any

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_UNSTABLE = 2
EXIT_INCONCLUSIVE = 3
EXIT_USAGE = 64
EXIT_DIVERGENT = 65
EXIT_REFUSED = 69
EXIT_NUMERICAL = 70


class GibbsLabError(Exception):
    exit_code = EXIT_NUMERICAL


# --- geometry / sections ---

class ZeroVector(GibbsLabError):
    """Both homogeneous coordinates vanish."""


class NotUnimodular(GibbsLabError):
    pass


class NotALineBundle(GibbsLabError):
    """-k(K+Delta) does not have integral degree."""
    exit_code = EXIT_USAGE


class Unsupported(GibbsLabError):
    exit_code = EXIT_USAGE


class DimensionMismatch(GibbsLabError):
    exit_code = EXIT_USAGE


class SingularMatrix(GibbsLabError):
    pass


class DegreeMismatch(GibbsLabError):
    exit_code = EXIT_USAGE


# --- log stability ---

class EmptyDivisor(GibbsLabError):
    exit_code = EXIT_USAGE


class WrongGenus(GibbsLabError):
    exit_code = EXIT_USAGE


class BadStratum(GibbsLabError):
    exit_code = EXIT_USAGE


class DegenerateFreeze(GibbsLabError):
    pass


class DivergentPartition(GibbsLabError):
    exit_code = EXIT_DIVERGENT


# --- ding ---

class NotPositiveDefinite(GibbsLabError):
    pass


class QuadratureUnderflow(GibbsLabError):
    pass


class MaxIterations(GibbsLabError):
    """Optimizer ran out of iterations; `report` holds the best point found."""

    def __init__(self, message: str, report: Any = None):
        super().__init__(message)
        self.report = report


# --- flows ---

class NonSmoothMetric(GibbsLabError):
    exit_code = EXIT_USAGE


class OnSingularLocus(GibbsLabError):
    """A configuration where the density is +inf, so invariance is undefined."""


# --- sampler ---

class UnstableTarget(GibbsLabError):
    exit_code = EXIT_REFUSED


class ChainCorruption(GibbsLabError):
    pass


# --- config ---

class ConfigError(GibbsLabError):
    exit_code = EXIT_USAGE
