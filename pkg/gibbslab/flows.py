"""Holomorphic vector fields on P^1, their flows and lifts to O(d).

A field is stored as a traceless matrix A acting on column vectors (z0, z1);
in the chart z = z1/z0 it reads (a + b z + c z^2) d/dz with

    A = [[a11, a12], [a21, -a11]]  <->  a = a21, b = -2 a11, c = -a12.

So z d/dz is A = diag(-1/2, 1/2) and its flow exp(tau A) sends z to e^tau z.
The lift to O(d) is the symmetric power of the flow matrix, which acts on
binary forms of degree d (sections of -kK when d = 2k).
"""
from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as P

from .errors import DegreeMismatch, NonSmoothMetric, OnSingularLocus
from .geometry import SpherePoint, chordal, mobius_apply_array, normalize_array, singular_rule
from .pairs import LogPairCurve
from .sections import (
    Configuration,
    SectionSpace,
    basis_log_scale,
    config_array,
    kodaira_array,
    projective_normalize,
)
from .stability import DeformedDensityParams, form_zeros, log_density_array

logger = logging.getLogger(__name__)

TRACE_TOL = 1e-12
N_EPSILON_ORDER = 32
ZERO_MERGE_TOL = 1e-6
# holomorphic derivative by a circle average: radius times |A| and node count
CAUCHY_RADIUS = 0.1
CAUCHY_NODES = 16


@dataclass(frozen=True, eq=False)
class VectorFieldSL2:
    matrix: np.ndarray

    def __post_init__(self) -> None:
        a = np.asarray(self.matrix, dtype=complex)
        if a.shape != (2, 2):
            raise ValueError("a vector field is a 2x2 matrix")
        if abs(np.trace(a)) > TRACE_TOL:
            raise ValueError(f"sl(2) elements are traceless, trace = {np.trace(a):.3g}")
        object.__setattr__(self, "matrix", a)

    @classmethod
    def from_polynomial(cls, a: complex, b: complex, c: complex) -> "VectorFieldSL2":
        """Field (a + b z + c z^2) d/dz."""
        return cls(np.array([[-b / 2, -c], [a, b / 2]], dtype=complex))

    @classmethod
    def euler(cls) -> "VectorFieldSL2":
        """z d/dz."""
        return cls.from_polynomial(0, 1, 0)

    @classmethod
    def zero(cls) -> "VectorFieldSL2":
        return cls(np.zeros((2, 2), dtype=complex))

    def polynomial(self) -> tuple[complex, complex, complex]:
        a11, a12, a21 = self.matrix[0, 0], self.matrix[0, 1], self.matrix[1, 0]
        return complex(a21), complex(-2 * a11), complex(-a12)

    def chart_value(self, z: np.ndarray) -> np.ndarray:
        a, b, c = self.polynomial()
        return a + b * z + c * z**2

    @property
    def is_zero(self) -> bool:
        return not np.any(self.matrix)

    def zeros(self) -> list[SpherePoint]:
        """Zeros of the field: roots of a21 z0^2 - 2 a11 z0 z1 - a12 z1^2 (empty for the zero field)."""
        if self.is_zero:
            return []
        a, b, c = self.polynomial()
        points = [SpherePoint(0j, 1 + 0j)] if c == 0 else []
        # np.roots drops leading zeros, so the finite zeros come out for every degree
        for r in np.roots([c, b, a]):
            p = SpherePoint.from_chart(complex(r))
            if all(abs(p.z0 * q.z1 - p.z1 * q.z0) > 1e-12 for q in points):
                points.append(p)
        return points

    def vanishes_at(self, p: SpherePoint, tol: float = 1e-12) -> bool:
        x = p.as_array()
        ax = self.matrix @ x
        return abs(x[0] * ax[1] - x[1] * ax[0]) < tol


def flow_matrix(field: VectorFieldSL2, tau: complex) -> np.ndarray:
    """exp(tau A) (scaling and squaring)."""
    return scipy.linalg.expm(complex(tau) * field.matrix)


def three_zeros_vanish(field: VectorFieldSL2) -> bool:
    """A field with three distinct zeros on P^1 is zero; true iff the chart polynomial vanishes."""
    a, b, c = field.polynomial()
    return a == 0 and b == 0 and c == 0


def fields_vanishing_at(points: Sequence[SpherePoint]) -> list[VectorFieldSL2]:
    """Basis of the sl(2) fields vanishing at every given point."""
    rows = []
    for p in points:
        x = normalize_array(p.as_array())
        # det[x, A x] is linear in (a11, a12, a21)
        rows.append([-2 * x[0] * x[1], -x[1] ** 2, x[0] ** 2])
    if not rows:
        basis = np.eye(3, dtype=complex)
    else:
        basis = scipy.linalg.null_space(np.array(rows, dtype=complex), rcond=1e-10)
    return [VectorFieldSL2(np.array([[v[0], v[1]], [v[2], -v[0]]])) for v in basis.T]


# --- representations ---


def symmetric_power(g: np.ndarray, degree: int) -> np.ndarray:
    """Sigma_d(g) with v(g x) = Sigma_d(g) v(x), v_j(x) = x0^{d-j} x1^j."""
    g = np.asarray(g, dtype=complex)
    (a, b), (c, e) = g
    out = np.zeros((degree + 1, degree + 1), dtype=complex)
    for j in range(degree + 1):
        row = P.polymul(P.polypow([a, b], degree - j), P.polypow([c, e], j))
        out[j, : len(row)] = row
    return out


def orthonormal_power(g: np.ndarray, degree: int) -> np.ndarray:
    """Sigma_d(g) in the L^2(nu)-orthonormal basis e_j = m_j / n_j."""
    n = np.exp(basis_log_scale(degree))
    return symmetric_power(g, degree) * n[None, :] / n[:, None]


@dataclass(frozen=True, eq=False)
class LiftedFlow:
    """The flow of `field` at time tau with its action on binary forms of `degree`."""

    field: VectorFieldSL2
    tau: complex
    degree: int

    @cached_property
    def matrix(self) -> np.ndarray:
        return flow_matrix(self.field, self.tau)

    @cached_property
    def veronese(self) -> np.ndarray:
        return symmetric_power(self.matrix, self.degree)

    @cached_property
    def section_action(self) -> np.ndarray:
        """Coefficient map P -> P o g on the monomial basis."""
        return self.veronese.T

    def section_determinant(self) -> complex:
        """det of the induced action: (det g)^{d (d + 1) / 2} = 1."""
        return complex(np.linalg.det(self.section_action))

    def apply(self, points: np.ndarray) -> np.ndarray:
        return mobius_apply_array(self.matrix, points)

    def compose(self, other: "LiftedFlow") -> "LiftedFlow":
        if other.degree != self.degree or other.field is not self.field:
            raise ValueError("only flows of the same field and degree compose")
        return LiftedFlow(self.field, self.tau + other.tau, self.degree)


def act_on_section(flow: LiftedFlow, coeffs: np.ndarray) -> np.ndarray:
    """(F . s)(x) = s(F x) on homogeneous representatives, as monomial coefficients."""
    coeffs = np.asarray(coeffs, dtype=complex)
    if coeffs.shape[-1] != flow.degree + 1:
        raise DegreeMismatch(f"section of degree {coeffs.shape[-1] - 1} acted on by a degree-{flow.degree} lift")
    return coeffs @ flow.veronese


def intertwining_residual(space: SectionSpace, g: np.ndarray, points: np.ndarray) -> float:
    """max |Phi(g x) - [Sigma_d(g)] Phi(x)| over points, both projectively normalized."""
    points = normalize_array(points)
    lhs = kodaira_array(space, mobius_apply_array(g, points))
    rhs = projective_normalize(space.monomials(points) @ symmetric_power(g, space.degree).T)
    return float(np.max(np.abs(lhs - rhs)))


def pullback_metric(H: np.ndarray, g: np.ndarray, degree: int) -> np.ndarray:
    """F*H in the orthonormal basis: R* H R with R = Sigma_e(g^{-1})^T.

    As metrics on O(d), FS(F*H) at x equals FS(H) at g x.
    """
    r = orthonormal_power(np.linalg.inv(g), degree).T
    return r.conj().T @ np.asarray(H) @ r


def vector_field_ray(field: VectorFieldSL2, H: np.ndarray, degree: int, taus: Sequence[complex]) -> list[np.ndarray]:
    return [pullback_metric(H, flow_matrix(field, tau), degree) for tau in taus]


# --- invariance of the Gibbs measure ---


def mu_invariance_test(k: int, g: np.ndarray, config: Configuration | np.ndarray) -> float:
    """Diagonal invariance of the k-th Gibbs measure of bare P^1.

    Residual |log rho(g x) + log J_g(x) - log rho(x)|, where J_g = prod_i |g x_i|^{-4}
    is the Jacobian of g for the Fubini-Study measure.
    """
    params = DeformedDensityParams(LogPairCurve.bare(), k, 1)
    points = config_array(config)
    g = np.asarray(g, dtype=complex)
    moved = mobius_apply_array(g, points)
    before = float(log_density_array(params, points, method="lu"))
    after = float(log_density_array(params, moved, method="lu"))
    if not (math.isfinite(before) and math.isfinite(after)):
        raise OnSingularLocus("configuration lies on the singular locus")
    log_jac = -4 * float(np.sum(np.log(np.linalg.norm(points @ g.T, axis=-1))))
    return abs(after + log_jac - before)


# --- the N_epsilon functional ---


@dataclass(frozen=True)
class MetricSpec:
    """A weight on -K_{P^1}: Fubini-Study plus sum_a w_a log|s_a|^2 at marked points."""

    name: str
    points: tuple[SpherePoint, ...] = ()
    weights: tuple[float, ...] = ()

    @classmethod
    def fs(cls) -> "MetricSpec":
        return cls("fs")

    @classmethod
    def toric(cls) -> "MetricSpec":
        return cls("toric", (SpherePoint(1 + 0j, 0j), SpherePoint(0j, 1 + 0j)), (1.0, 1.0))

    @classmethod
    def from_pair(cls, pair: LogPairCurve) -> "MetricSpec":
        return cls("pair", pair.marked_points, tuple(float(w) for w in pair.weights))

    def log_factor(self, nodes: np.ndarray) -> np.ndarray:
        """-phi relative to Fubini-Study: -2 sum_a w_a log chordal(x, p_a)."""
        out = np.zeros(nodes.shape[:-1])
        for p, w in zip(self.points, self.weights):
            x = p.as_array()
            with np.errstate(divide="ignore"):
                out -= 2 * w * np.log(np.abs(nodes[..., 0] * x[1] - nodes[..., 1] * x[0]))
        return out


@dataclass
class NEpsilonResult:
    value: float
    divergent: bool
    integrals: list[float]
    exponents: list[float]

    def to_record(self) -> dict:
        return {
            "N_epsilon": "DIVERGENT" if self.divergent else self.value,
            "integrals": list(self.integrals),
            "local_exponents": list(self.exponents),
        }


def _local_exponents(coeffs: np.ndarray, epsilon: float, k: int, metric: MetricSpec) -> list[tuple[np.ndarray, float]]:
    """Points where the N_eps integrand behaves like t^{-beta}, t = chordal^2, with beta.

    A marked point of weight w contributes w (1 + eps), a zero of s of multiplicity m
    contributes -eps m / k; the two add where they meet.
    """
    terms = [(p.as_array(), w * (1 + epsilon)) for p, w in zip(metric.points, metric.weights) if w != 0]
    for point, mult in form_zeros(coeffs):
        beta = -epsilon * mult / k
        for idx, (center, b) in enumerate(terms):
            if chordal(center, point) < ZERO_MERGE_TOL:
                terms[idx] = (center, b + beta)
                break
        else:
            terms.append((point, beta))
    return terms


def n_epsilon(
    coeffs: np.ndarray,
    epsilon: float,
    k: int,
    metric: MetricSpec | None = None,
    order: int = N_EPSILON_ORDER,
) -> NEpsilonResult:
    """(integral of (|s|^2 e^{-k phi})^{eps/k} e^{-phi})^{k / (2 eps)} for s in H^0(-kK).

    DIVERGENT exactly when some local exponent reaches 1; otherwise the integral is
    taken with a singular rule about the marked points and the zeros of s, at `order`
    and at half of it.
    """
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    coeffs = np.asarray(coeffs, dtype=complex)
    if len(coeffs) != 2 * k + 1:
        raise DegreeMismatch(f"sections of -{k}K have {2 * k + 1} coefficients, got {len(coeffs)}")
    metric = metric or MetricSpec.fs()
    space_degree = 2 * k
    j = np.arange(space_degree + 1)
    terms = _local_exponents(coeffs, epsilon, k, metric)
    exponents = [float(b) for _, b in terms]
    if any(b >= 1 for b in exponents):
        logger.info("N_epsilon divergent for metric %s: local exponents %s", metric.name, exponents)
        return NEpsilonResult(math.inf, True, [], exponents)

    def integrand(nodes: np.ndarray) -> np.ndarray:
        s = np.sum(coeffs * nodes[..., 0, None] ** (space_degree - j) * nodes[..., 1, None] ** j, axis=-1)
        with np.errstate(divide="ignore"):
            log_s = np.log(np.abs(s) ** 2)
        log_phi = metric.log_factor(nodes)
        return np.exp((epsilon / k) * (log_s + k * log_phi) + log_phi)

    centers = [c for c, _ in terms]
    integrals = [singular_rule(centers, exponents, integrand, r).total_mass for r in (max(4, order // 2), order)]
    value = integrals[-1] ** (k / (2 * epsilon))
    logger.debug("N_epsilon for metric %s: integrals %s", metric.name, integrals)
    return NEpsilonResult(float(value), False, [float(v) for v in integrals], exponents)


# --- generalized Hamiltonians ---


def _fs_weight(degree: int) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    def phi(w, v):
        return degree * np.log(w[..., 0] * v[..., 0] + w[..., 1] * v[..., 1])

    return phi


def _perturbed_weight(degree: int) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    base = _fs_weight(degree)

    def phi(w, v):
        norm = w[..., 0] * v[..., 0] + w[..., 1] * v[..., 1]
        bump = 0.3 * (w[..., 1] * v[..., 1] - w[..., 0] * v[..., 0]) + 0.2 * (w[..., 0] * v[..., 1] + v[..., 0] * w[..., 1])
        return base(w, v) + bump / norm

    return phi


SMOOTH_METRICS = {"fs": _fs_weight, "perturbed": _perturbed_weight}


@dataclass
class HamiltonianResult:
    chart: np.ndarray
    h: np.ndarray
    residual: float
    max_imag: float

    def to_record(self) -> dict:
        return {"resolution": int(self.chart.shape[0]), "residual": self.residual, "max_imag_h": self.max_imag}


def _fd_weights(spacing: float) -> tuple[np.ndarray, np.ndarray]:
    first = np.array([1, -8, 0, 8, -1]) / (12 * spacing)
    second = np.array([-1, 16, -30, 16, -1]) / (12 * spacing**2)
    return first, second


def _stencil(values: np.ndarray, coeffs: np.ndarray, axis: int) -> np.ndarray:
    n = values.shape[axis]
    out = np.zeros_like(values[(slice(None),) * axis + (slice(2, n - 2),)])
    for offset, c in zip(range(-2, 3), coeffs):
        out = out + c * np.take(values, np.arange(2 + offset, n - 2 + offset), axis=axis)
    return out


def _holomorphic_derivative(phi, w: np.ndarray, v: np.ndarray, direction: np.ndarray, radius: float) -> np.ndarray:
    """d/de phi(w + e direction, v) at e = 0 as the mean of a difference quotient over |e| = radius."""
    base = phi(w, v)
    out = np.zeros(base.shape, dtype=complex)
    for angle in 2 * np.pi * np.arange(CAUCHY_NODES) / CAUCHY_NODES:
        step = radius * np.exp(1j * angle)
        out = out + (phi(w + step * direction, v) - base) / step
    return out / CAUCHY_NODES


def hamiltonian(field: VectorFieldSL2, metric: str = "fs", degree: int = 2, resolution: int = 256) -> HamiltonianResult:
    """h = d/dtau (F_tau)* phi at tau = 0, and the residual of h_{zbar} = v phi_{z zbar}.

    phi(w, wbar) is complexified with w and wbar independent. It is holomorphic in w,
    so h = d_w phi . (A w), taken as a contour average around each node. Residuals
    use fourth-order differences on the chart square [-1, 1]^2.
    """
    if metric not in SMOOTH_METRICS:
        raise NonSmoothMetric(f"metric {metric!r} is not a smooth weight; known: {sorted(SMOOTH_METRICS)}")
    if resolution < 8:
        raise ValueError("resolution must be at least 8")
    phi = SMOOTH_METRICS[metric](degree)
    axis = np.linspace(-1.0, 1.0, resolution)
    spacing = axis[1] - axis[0]
    zeta = axis[None, :] + 1j * axis[:, None]
    w = np.stack([np.ones_like(zeta), zeta], axis=-1)
    v = np.conj(w)
    A = field.matrix
    # |A w . v| <= |A| |w|^2 keeps w + e A w inside the half plane where log(w . v) is analytic
    radius = CAUCHY_RADIUS / max(1.0, float(np.linalg.norm(A, 2)))
    h = _holomorphic_derivative(phi, w, v, w @ A.T, radius)

    first, second = _fd_weights(spacing)
    phi_real = np.real(phi(w, v))
    # rows are y (imaginary part), columns are x
    h_x = _stencil(h, first, axis=1)[2:-2, :]
    h_y = _stencil(h, first, axis=0)[:, 2:-2]
    h_zbar = 0.5 * (h_x + 1j * h_y)
    lap = _stencil(phi_real, second, axis=1)[2:-2, :] + _stencil(phi_real, second, axis=0)[:, 2:-2]
    phi_zzbar = lap / 4
    v_chart = field.chart_value(zeta[2:-2, 2:-2])
    residual = float(np.max(np.abs(h_zbar - v_chart * phi_zzbar)))
    logger.debug("hamiltonian residual %.3g at resolution %d", residual, resolution)
    return HamiltonianResult(zeta, h, residual, float(np.max(np.abs(h.imag))))
