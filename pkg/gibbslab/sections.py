"""Section spaces H^0(P^1, -k(K + Delta)) = binary forms of degree d, and Slater determinants.

The basis is the monomials m_j = z0^{d-j} z1^j, j = 0..d. The Slater matrix has
rows indexed by basis sections and columns by configuration points. For this
basis det S equals the homogeneous Vandermonde product
prod_{i<j} (z0_i z1_j - z1_i z0_j), which gives a second, independent evaluation.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
import scipy.linalg
from scipy.special import gammaln

from .errors import DimensionMismatch, NotALineBundle, SingularMatrix, Unsupported
from .geometry import ReferenceMetric, SpherePoint, as_points, chordal, mobius_apply_array, normalize_array
from .pairs import LogPairCurve, as_fraction

logger = logging.getLogger(__name__)

COINCIDENCE_TOL = 1e-14


def _line_bundle_degree(pair: LogPairCurve, k: Fraction) -> Fraction:
    return k * pair.anticanonical_degree()


def dimension(pair: LogPairCurve, k: Fraction | int | str) -> int:
    """N_k = dim H^0(X, -k(K_X + Delta)) by Riemann-Roch on P^1 or an elliptic curve."""
    k = as_fraction(k)
    if k <= 0:
        raise ValueError(f"level k must be positive, got {k}")
    degree = _line_bundle_degree(pair, k)
    if degree.denominator != 1:
        raise NotALineBundle(f"-k(K+Delta) has degree {degree} at k = {k}; not a line bundle")
    if pair.genus == 0:
        if degree < 0:
            raise NotALineBundle(f"-k(K+Delta) has negative degree {degree}")
        return int(degree) + 1
    if pair.genus == 1:
        if degree <= 0:
            raise NotALineBundle(f"-k(K+Delta) has non-positive degree {degree} on a genus-1 curve")
        return int(degree)
    raise Unsupported(f"genus {pair.genus} is not supported")


@dataclass(frozen=True)
class SectionSpace:
    k: Fraction
    pair: LogPairCurve
    degree: int
    dimension: int

    @classmethod
    def for_pair(cls, pair: LogPairCurve, k: Fraction | int | str) -> "SectionSpace":
        k = as_fraction(k)
        n = dimension(pair, k)
        if pair.genus != 0:
            raise Unsupported("explicit section spaces are only built on P^1")
        return cls(k=k, pair=pair, degree=n - 1, dimension=n)

    @property
    def metric(self) -> ReferenceMetric:
        return ReferenceMetric(self.degree)

    def monomials(self, points: np.ndarray) -> np.ndarray:
        """Basis values m_j(x) for normalized points; shape (..., N)."""
        points = np.asarray(points)
        j = np.arange(self.dimension)
        z0 = points[..., 0, None]
        z1 = points[..., 1, None]
        return z0 ** (self.degree - j) * z1**j

    def evaluate(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """Value of sum_j c_j m_j at the given homogeneous representatives."""
        return self.monomials(points) @ np.asarray(coeffs)


def basis_log_scale(degree: int) -> np.ndarray:
    """log ||m_j||_{L^2(nu)} for the monomials of degree d; e_j = m_j / ||m_j|| is orthonormal."""
    j = np.arange(degree + 1)
    return 0.5 * (math.log(math.pi) + gammaln(degree - j + 1) + gammaln(j + 1) - gammaln(degree + 2))


@dataclass(frozen=True)
class Configuration:
    points: tuple[SpherePoint, ...]

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Configuration":
        return cls(tuple(SpherePoint.from_array(row) for row in np.asarray(arr)))

    @classmethod
    def from_chart(cls, values: Sequence[complex | str]) -> "Configuration":
        return cls(tuple(SpherePoint.from_chart(v) for v in values))

    def as_array(self) -> np.ndarray:
        return as_points(list(self.points))

    def __len__(self) -> int:
        return len(self.points)


def config_array(config: Configuration | np.ndarray) -> np.ndarray:
    if isinstance(config, Configuration):
        return config.as_array()
    return normalize_array(np.asarray(config))


@dataclass(frozen=True)
class LogValue:
    """|x| stored as log |x|, with an explicit zero flag."""

    log_abs: float
    is_zero: bool = False

    @classmethod
    def zero(cls) -> "LogValue":
        return cls(-math.inf, True)

    def __mul__(self, other: "LogValue") -> "LogValue":
        if self.is_zero or other.is_zero:
            return LogValue.zero()
        return LogValue(self.log_abs + other.log_abs)

    def __truediv__(self, other: "LogValue") -> "LogValue":
        if other.is_zero:
            raise ZeroDivisionError("division by a zero LogValue")
        if self.is_zero:
            return LogValue.zero()
        return LogValue(self.log_abs - other.log_abs)

    def __pow__(self, exponent: float) -> "LogValue":
        if self.is_zero:
            if exponent > 0:
                return LogValue.zero()
            raise ZeroDivisionError("non-positive power of a zero LogValue")
        return LogValue(self.log_abs * exponent)

    @property
    def value(self) -> float:
        return 0.0 if self.is_zero else math.exp(self.log_abs)


def slater_matrix(space: SectionSpace, points: np.ndarray) -> np.ndarray:
    """S[..., j, i] = m_j(x_i)."""
    return np.swapaxes(space.monomials(points), -1, -2)


def _check_length(space: SectionSpace, points: np.ndarray) -> None:
    if points.shape[-2] != space.dimension:
        raise DimensionMismatch(
            f"configuration has {points.shape[-2]} points, section space has dimension {space.dimension}"
        )


def pairwise_log_chordal(points: np.ndarray) -> np.ndarray:
    """sum_{i<j} log chordal(x_i, x_j) over the last-but-one axis."""
    n = points.shape[-2]
    iu, ju = np.triu_indices(n, 1)
    with np.errstate(divide="ignore"):
        return np.sum(np.log(chordal(points[..., iu, :], points[..., ju, :])), axis=-1)


def coincident(points: np.ndarray) -> np.ndarray:
    n = points.shape[-2]
    if n < 2:
        return np.zeros(points.shape[:-2], dtype=bool)
    iu, ju = np.triu_indices(n, 1)
    return np.min(chordal(points[..., iu, :], points[..., ju, :]), axis=-1) < COINCIDENCE_TOL


def slater_log_array(space: SectionSpace, points: np.ndarray, method: str = "lu") -> tuple[np.ndarray, np.ndarray]:
    """log ||det S|| for normalized points of shape (..., N, 2); returns (log_abs, is_zero).

    method "lu": per-column max-modulus scaling then an LU log-determinant.
    method "vandermonde": the homogeneous product formula.
    """
    points = normalize_array(points)
    _check_length(space, points)
    zero = coincident(points)
    if method == "vandermonde":
        log_abs = pairwise_log_chordal(points)
    elif method == "lu":
        mat = slater_matrix(space, points)
        scale = np.max(np.abs(mat), axis=-2, keepdims=True)
        _, logdet = np.linalg.slogdet(mat / scale)
        log_abs = logdet + np.sum(np.log(scale[..., 0, :]), axis=-1)
    else:
        raise ValueError(f"unknown Slater evaluation method {method!r}")
    log_abs = np.where(zero, -np.inf, log_abs)
    return log_abs, zero


def slater_log(
    space: SectionSpace,
    config: Configuration | np.ndarray,
    metric: ReferenceMetric | None = None,
    method: str = "lu",
) -> LogValue:
    """log of the pointwise norm of det S^(k) in the metric induced by phi_0.

    With normalized representatives the metric factors of phi_0 are all 1.
    """
    if metric is not None and metric.degree != space.degree:
        raise DimensionMismatch(f"metric on O({metric.degree}) used for sections of O({space.degree})")
    log_abs, zero = slater_log_array(space, config_array(config), method)
    if bool(zero):
        return LogValue.zero()
    return LogValue(float(log_abs))


def slater_det(space: SectionSpace, config: Configuration | np.ndarray) -> complex:
    """Complex determinant at the normalized representatives (small N only)."""
    points = config_array(config)
    _check_length(space, points)
    return complex(np.linalg.det(slater_matrix(space, points)))


def basis_change_law(space: SectionSpace, A: np.ndarray, config: Configuration | np.ndarray) -> float:
    """|log|det(A S)| - log|det S| - log|det A||; basis-independence up to the constant det A."""
    A = np.asarray(A, dtype=complex)
    if A.shape != (space.dimension, space.dimension):
        raise DimensionMismatch(f"basis change must be {space.dimension}x{space.dimension}")
    sign_a, logdet_a = np.linalg.slogdet(A)
    if sign_a == 0 or not np.isfinite(logdet_a):
        raise SingularMatrix("basis change matrix is singular")
    points = config_array(config)
    _check_length(space, points)
    mat = slater_matrix(space, points)
    _, logdet_s = np.linalg.slogdet(mat)
    _, logdet_as = np.linalg.slogdet(A @ mat)
    return float(abs(logdet_as - logdet_s - logdet_a))


def kodaira_array(space: SectionSpace, points: np.ndarray) -> np.ndarray:
    """Veronese image of normalized points, normalized in P^{N-1} with the same phase convention."""
    return projective_normalize(space.monomials(normalize_array(points)))


def projective_normalize(v: np.ndarray) -> np.ndarray:
    """Unit vectors of C^N whose first maximal-modulus entry is real positive."""
    v = np.asarray(v, dtype=complex)
    v = v / np.linalg.norm(v, axis=-1, keepdims=True)
    modulus = np.abs(v)
    # first coordinate of maximal modulus carries the real-positive phase
    idx = np.argmax(modulus >= np.max(modulus, axis=-1, keepdims=True) * (1 - 1e-14), axis=-1)
    lead = np.take_along_axis(v, idx[..., None], axis=-1)
    return v / (lead / np.abs(lead))


def kodaira_map(space: SectionSpace, p: SpherePoint) -> np.ndarray:
    """x -> [s_1(x) : ... : s_N(x)] as a normalized vector of C^N."""
    return kodaira_array(space, p.as_array())


def kodaira_rank(space: SectionSpace, p: SpherePoint, step: float = 1e-6, tol: float = 1e-6) -> int:
    """Complex rank of the differential of the Kodaira map in an affine chart (0 or 1)."""
    if space.degree == 0:
        return 0
    j = np.arange(1, space.degree + 1)
    if abs(p.z0) >= abs(p.z1):
        zeta = p.z1 / p.z0

        def affine(z):
            return z**j
    else:
        zeta = p.z0 / p.z1

        def affine(z):
            return z ** (space.degree - np.arange(space.degree))

    jac = (affine(zeta + step) - affine(zeta - step)) / (2 * step)
    return int(np.linalg.norm(jac) > tol)


def vanishing_sections(space: SectionSpace, config: Configuration | np.ndarray, rcond: float = 1e-10) -> np.ndarray:
    """Basis (columns) of sections vanishing at every configuration point."""
    points = config_array(config)
    return scipy.linalg.null_space(slater_matrix(space, points).T, rcond=rcond)


def equivariance_residual(space: SectionSpace, g: np.ndarray, config: Configuration | np.ndarray) -> float:
    """Diagonal action of unimodular g against the O(d) cocycle.

    log||det S||(g x) - log||det S||(x) must equal -d sum_i log|g x_i| where |g x_i| is
    the Euclidean norm of g applied to the normalized representative.
    """
    points = config_array(config)
    moved = mobius_apply_array(g, points)
    before, zero_before = slater_log_array(space, points)
    after, zero_after = slater_log_array(space, moved)
    if bool(zero_before) or bool(zero_after):
        return 0.0 if bool(zero_before) == bool(zero_after) else math.inf
    cocycle = -space.degree * np.sum(np.log(np.linalg.norm(points @ np.asarray(g).T, axis=-1)))
    return float(abs(after - before - cocycle))
