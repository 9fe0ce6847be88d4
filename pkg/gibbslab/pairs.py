"""Log pairs (X, Delta) on curves and divisors with exact rational coefficients."""
from __future__ import annotations

from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .errors import Unsupported
from .geometry import SpherePoint, chordal

DISTINCT_TOL = 1e-12


def as_fraction(value: Fraction | int | str | float) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, float):
        return Fraction(value).limit_denominator(10**9)
    return Fraction(value)


def _check_distinct(points: Sequence[SpherePoint]) -> None:
    arr = np.array([p.as_array() for p in points])
    for i in range(len(points)):
        for j in range(i + 1, len(points)):
            if chordal(arr[i], arr[j]) < DISTINCT_TOL:
                raise ValueError(f"marked points {points[i].label()} and {points[j].label()} coincide")


@dataclass(frozen=True)
class CurveDivisor:
    """Finite sum of points with rational coefficients."""

    terms: tuple[tuple[SpherePoint, Fraction], ...]

    def __post_init__(self) -> None:
        _check_distinct([p for p, _ in self.terms])

    @classmethod
    def from_pairs(cls, terms: Iterable[tuple[SpherePoint | str | complex, Fraction | int | str]]) -> "CurveDivisor":
        parsed = []
        for point, coeff in terms:
            if not isinstance(point, SpherePoint):
                point = SpherePoint.from_chart(point)
            parsed.append((point, as_fraction(coeff)))
        return cls(tuple(parsed))

    @property
    def points(self) -> list[SpherePoint]:
        return [p for p, _ in self.terms]

    @property
    def coefficients(self) -> list[Fraction]:
        return [c for _, c in self.terms]

    @property
    def degree(self) -> Fraction:
        return sum(self.coefficients, Fraction(0))

    def scaled(self, factor: Fraction) -> "CurveDivisor":
        return CurveDivisor(tuple((p, c * factor) for p, c in self.terms))

    def __bool__(self) -> bool:
        return bool(self.terms)


@dataclass(frozen=True)
class LogPairCurve:
    """A curve of genus 0 or 1 with marked points p_a and weights w_a (Delta = sum w_a p_a)."""

    genus: int = 0
    marked_points: tuple[SpherePoint, ...] = ()
    weights: tuple[Fraction, ...] = ()

    def __post_init__(self) -> None:
        if self.genus not in (0, 1):
            raise Unsupported(f"genus {self.genus} curves are not supported")
        if len(self.marked_points) != len(self.weights):
            raise ValueError("marked_points and weights must have equal length")
        _check_distinct(self.marked_points)

    @classmethod
    def bare(cls) -> "LogPairCurve":
        return cls()

    @classmethod
    def from_chart(
        cls,
        points: Sequence[str | complex],
        weights: Sequence[Fraction | int | str],
        genus: int = 0,
    ) -> "LogPairCurve":
        return cls(
            genus=genus,
            marked_points=tuple(SpherePoint.from_chart(p) for p in points),
            weights=tuple(as_fraction(w) for w in weights),
        )

    @property
    def total_weight(self) -> Fraction:
        return sum(self.weights, Fraction(0))

    @property
    def is_ample(self) -> bool:
        """-(K + Delta) ample; genus 0: 2 - sum w > 0, genus 1: -sum w > 0."""
        return (2 - 2 * self.genus) - self.total_weight > 0

    @property
    def is_klt(self) -> bool:
        return all(w < 1 for w in self.weights)

    def anticanonical_degree(self) -> Fraction:
        """deg -(K_X + Delta)."""
        return (2 - 2 * self.genus) - self.total_weight

    def marked_array(self) -> np.ndarray:
        if not self.marked_points:
            return np.zeros((0, 2), dtype=complex)
        return np.array([p.as_array() for p in self.marked_points])

    def divisor(self) -> CurveDivisor:
        return CurveDivisor(tuple(zip(self.marked_points, self.weights)))

    def describe(self) -> str:
        if not self.marked_points:
            return f"genus {self.genus}, no marked points"
        terms = ", ".join(f"{w}@{p.label()}" for p, w in zip(self.marked_points, self.weights))
        return f"genus {self.genus}, Delta = {terms}"
