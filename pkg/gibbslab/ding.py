"""Hermitian metrics on H^0, the Fubini-Study map and the quantized Ding functional.

Matrices are written in the L^2(nu)-orthonormal basis e_j = m_j / n_j, so the
reference metric H_0 is the identity. With b(x) = conj(e(x)) at a normalized
representative,

    FS(H)(x) = k^-1 log( b* H^-1 b / N )                       (the Bergman potential u)
    D(H)     = log det H / (k N) - gamma^-1 log sum_x W_x exp(-gamma u(x))
    J(H)     = log det H / (k N) + sup_x u(x)

where W are the weights of a quadrature rule for the pair's reference measure.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg
from joblib import Parallel, delayed
from scipy.special import logsumexp

from .errors import DivergentPartition, MaxIterations, NotPositiveDefinite, QuadratureUnderflow, Unsupported
from .flows import VectorFieldSL2, flow_matrix, orthonormal_power, pullback_metric
from .geometry import QuadratureGrid, SpherePoint, polar_offset, singular_rule
from .pairs import LogPairCurve, as_fraction
from .sections import SectionSpace, basis_log_scale
from .stability import DeformedDensityParams, PartitionMethod, partition_estimate
from .utils import seed_streams, worker_count

logger = logging.getLogger(__name__)

SUP_TOP_NODES = 5
SUP_HALVINGS = 6
ARMIJO_C = 1e-4
DRIFT_TAUS = (0.5, 1.0, 1.5)
DRIFT_TOL = 1e-5
DEFAULT_RAY_TAUS = tuple(np.linspace(0.0, 2.0, 5))


@dataclass(frozen=True, eq=False)
class HermitianMetricMatrix:
    """Positive definite Hermitian N x N matrix with its lower Cholesky factor."""

    entries: np.ndarray

    def __post_init__(self) -> None:
        m = np.asarray(self.entries, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("a Hermitian metric is a square matrix")
        object.__setattr__(self, "entries", (m + m.conj().T) / 2)
        self.cholesky  # noqa: B018

    @classmethod
    def identity(cls, n: int) -> "HermitianMetricMatrix":
        return cls(np.eye(n, dtype=complex))

    @classmethod
    def from_cholesky(cls, lower: np.ndarray) -> "HermitianMetricMatrix":
        lower = np.asarray(lower, dtype=complex)
        return cls(lower @ lower.conj().T)

    @cached_property
    def cholesky(self) -> np.ndarray:
        try:
            lower = scipy.linalg.cholesky(self.entries, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NotPositiveDefinite(str(exc)) from exc
        if not np.all(np.real(np.diag(lower)) > 0):
            raise NotPositiveDefinite("Cholesky factor has a non-positive diagonal")
        return lower

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    @property
    def logdet(self) -> float:
        return float(2 * np.sum(np.log(np.real(np.diag(self.cholesky)))))

    def scaled(self, c: float) -> "HermitianMetricMatrix":
        """e^c H."""
        return HermitianMetricMatrix(math.exp(c) * self.entries)

    def conjugated(self, u: np.ndarray) -> "HermitianMetricMatrix":
        """U* H U."""
        u = np.asarray(u, dtype=complex)
        return HermitianMetricMatrix(u.conj().T @ self.entries @ u)

    def det_normalized(self) -> "HermitianMetricMatrix":
        return self.scaled(-self.logdet / self.dimension)

    def solve(self, b: np.ndarray) -> np.ndarray:
        return scipy.linalg.cho_solve((self.cholesky, True), b)


def orthonormal_values(space: SectionSpace, points: np.ndarray) -> np.ndarray:
    """e_j(x) at normalized points, shape (..., N)."""
    return space.monomials(points) * np.exp(-basis_log_scale(space.degree))


def _bergman(H: HermitianMetricMatrix, space: SectionSpace, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    b = np.conj(orthonormal_values(space, points)).T
    y = scipy.linalg.solve_triangular(H.cholesky, b, lower=True)
    return b, np.sum(np.abs(y) ** 2, axis=0)


def fs_potential(H: HermitianMetricMatrix, space: SectionSpace, points: np.ndarray) -> np.ndarray:
    """u = FS(H) - phi_0 at normalized points (flat array of points, shape (M, 2))."""
    if H.dimension != space.dimension:
        raise ValueError(f"metric of size {H.dimension} on a section space of dimension {space.dimension}")
    _, bergman = _bergman(H, space, points)
    return np.log(bergman / space.dimension) / float(space.k)


def fs_metric_log(H: HermitianMetricMatrix, space: SectionSpace, p: SpherePoint) -> float:
    """FS(H) at the normalized representative of p."""
    return float(fs_potential(H, space, p.as_array()[None, :])[0])


def pair_grid(pair: LogPairCurve, resolution: int) -> QuadratureGrid:
    """Rule for the reference measure prod_a chordal(x, p_a)^{-2 w_a} nu of the pair."""
    centers, exponents = [], []
    for p, w in zip(pair.marked_points, pair.weights):
        if w >= 1:
            raise Unsupported(f"weight {w} >= 1: the reference measure has infinite mass")
        if w > 0:
            centers.append(p.as_array())
            exponents.append(float(w))

    def density(nodes: np.ndarray) -> np.ndarray:
        out = np.ones(len(nodes))
        for p, w in zip(pair.marked_points, pair.weights):
            x = p.as_array()
            out = out * np.abs(nodes[:, 0] * x[1] - nodes[:, 1] * x[0]) ** (-2 * float(w))
        return out

    return singular_rule(centers, exponents, density, resolution)


def _log_integral(u: np.ndarray, gamma: float, grid: QuadratureGrid) -> float:
    value = float(logsumexp(-gamma * u, b=grid.weights))
    if not np.isfinite(value):
        raise QuadratureUnderflow(f"log of the Ding integral is {value}")
    return value


def ding_functional(H: HermitianMetricMatrix, gamma: float, space: SectionSpace, grid: QuadratureGrid) -> float:
    gamma = float(gamma)
    if not 0 < gamma <= 1:
        raise ValueError(f"gamma must lie in (0, 1], got {gamma}")
    u = fs_potential(H, space, grid.nodes)
    kn = float(space.k) * space.dimension
    return H.logdet / kn - _log_integral(u, gamma, grid) / gamma


def sup_potential(H: HermitianMetricMatrix, space: SectionSpace, grid: QuadratureGrid) -> float:
    """sup of u: grid scan, then a local search around the best nodes with the radius halved each round."""
    u = fs_potential(H, space, grid.nodes)
    best = float(np.max(u))
    radius = math.sqrt(math.pi / len(grid))
    angles = 2 * np.pi * np.arange(8) / 8
    for idx in np.argsort(u)[-SUP_TOP_NODES:]:
        center, value, r = grid.nodes[idx], float(u[idx]), radius
        for _ in range(SUP_HALVINGS):
            for _ in range(4):
                ring = polar_offset(center[None, :], min(r * r, 1.0), angles)
                values = fs_potential(H, space, ring)
                j = int(np.argmax(values))
                if values[j] <= value:
                    break
                center, value = ring[j], float(values[j])
            r /= 2
        best = max(best, value)
    return best


def j_functional(H: HermitianMetricMatrix, space: SectionSpace, grid: QuadratureGrid) -> float:
    kn = float(space.k) * space.dimension
    return H.logdet / kn + sup_potential(H, space, grid)


def l2_gram(space: SectionSpace, grid: QuadratureGrid) -> HermitianMetricMatrix:
    """Gram matrix sum_x W_x conj(e_i(x)) e_j(x) of the orthonormal basis against the grid measure."""
    values = orthonormal_values(space, grid.nodes)
    return HermitianMetricMatrix((np.conj(values).T * grid.weights) @ values)


def random_metric(rng: np.random.Generator, n: int, scale: float = 0.5) -> HermitianMetricMatrix:
    lower = np.tril(rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)), -1) * scale
    lower += np.diag(np.exp(scale * rng.normal(size=n)))
    return HermitianMetricMatrix.from_cholesky(lower)


# --- triangular parametrization and gradient ---


def metric_params(H: HermitianMetricMatrix) -> np.ndarray:
    """(log diag L, Re L_ij, Im L_ij) for i > j."""
    lower = H.cholesky
    rows, cols = np.tril_indices(H.dimension, -1)
    off = lower[rows, cols]
    return np.concatenate([np.log(np.real(np.diag(lower))), off.real, off.imag])


def metric_from_params(params: np.ndarray, n: int) -> HermitianMetricMatrix:
    rows, cols = np.tril_indices(n, -1)
    m = len(rows)
    lower = np.diag(np.exp(params[:n])).astype(complex)
    lower[rows, cols] = params[n : n + m] + 1j * params[n + m :]
    return HermitianMetricMatrix.from_cholesky(lower)


def _ding_measure(H: HermitianMetricMatrix, gamma: float, space: SectionSpace, grid: QuadratureGrid):
    b, bergman = _bergman(H, space, grid.nodes)
    u = np.log(bergman / space.dimension) / float(space.k)
    log_w = -gamma * u + np.log(grid.weights)
    mu = np.exp(log_w - logsumexp(log_w))
    return b, bergman, mu


def ding_gradient(H: HermitianMetricMatrix, gamma: float, space: SectionSpace, grid: QuadratureGrid) -> np.ndarray:
    """Gradient of D with respect to metric_params(H).

    dD = tr(G dH) with G = H^-1 / (kN) - k^-1 sum_x mu_x c c* / B_x, c = H^-1 b(x),
    and dH = dL L* + L dL*.
    """
    n = space.dimension
    k = float(space.k)
    b, bergman, mu = _ding_measure(H, float(gamma), space, grid)
    c = H.solve(b)
    G = H.solve(np.eye(n)) / (k * n) - ((c * (mu / bergman)) @ c.conj().T) / k
    lower = H.cholesky
    M = (lower.conj().T @ G).T
    rows, cols = np.tril_indices(n, -1)
    diag = 2 * np.real(np.diag(M)) * np.real(np.diag(lower))
    return np.concatenate([diag, 2 * np.real(M[rows, cols]), -2 * np.imag(M[rows, cols])])


def _projected(grad: np.ndarray, n: int) -> np.ndarray:
    out = grad.copy()
    out[:n] -= np.mean(out[:n])
    return out


def t_operator(H: HermitianMetricMatrix, gamma: float, space: SectionSpace, grid: QuadratureGrid) -> HermitianMetricMatrix:
    """N sum_x mu_x b b* / B_x, det-normalized; its fixed points are the critical points of D."""
    b, bergman, mu = _ding_measure(H, float(gamma), space, grid)
    gram = space.dimension * ((b * (mu / bergman)) @ b.conj().T)
    return HermitianMetricMatrix(gram).det_normalized()


# --- minimization ---


@dataclass
class DingSettings:
    max_iterations: int = 200
    rtol: float = 1e-8
    gtol: float = 1e-6
    armijo_halvings: int = 30
    restarts: int = 5

    @classmethod
    def from_dict(cls, data: dict | None) -> "DingSettings":
        data = data or {}
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def to_dict(self) -> dict:
        return {
            "max_iterations": self.max_iterations,
            "rtol": self.rtol,
            "gtol": self.gtol,
            "armijo_halvings": self.armijo_halvings,
            "restarts": self.restarts,
        }


@dataclass
class TraceRow:
    iteration: int
    D: float
    J: float
    grad_norm: float
    step: str


@dataclass
class DingReport:
    gamma: float
    k: str
    value: float
    j_value: float
    grad_norm: float
    iterations: int
    converged: bool
    metric: HermitianMetricMatrix
    trace: list[TraceRow] = field(default_factory=list)
    noncoercive: bool = False

    def to_record(self) -> dict:
        return {
            "gamma": self.gamma,
            "k": self.k,
            "D": self.value,
            "J": self.j_value,
            "grad_norm": self.grad_norm,
            "iterations": self.iterations,
            "converged": self.converged,
            "noncoercive": self.noncoercive,
        }

    def trace_rows(self) -> list[dict]:
        return [
            {"iter": r.iteration, "D": r.D, "J": r.J, "grad_norm": r.grad_norm, "step": r.step}
            for r in self.trace
        ]


def _armijo(
    H: HermitianMetricMatrix,
    value: float,
    grad: np.ndarray,
    gamma: float,
    space: SectionSpace,
    grid: QuadratureGrid,
    halvings: int,
) -> tuple[HermitianMetricMatrix, float] | None:
    params = metric_params(H)
    norm2 = float(grad @ grad)
    step = 1.0
    for _ in range(halvings):
        try:
            candidate = metric_from_params(params - step * grad, space.dimension).det_normalized()
            new_value = ding_functional(candidate, gamma, space, grid)
        except (NotPositiveDefinite, QuadratureUnderflow, FloatingPointError):
            new_value = math.inf
        if new_value <= value - ARMIJO_C * step * norm2:
            return candidate, new_value
        step /= 2
    return None


def vector_field_drift(
    H: HermitianMetricMatrix,
    gamma: float,
    space: SectionSpace,
    grid: QuadratureGrid,
    taus: Sequence[float] = DRIFT_TAUS,
) -> tuple[list[float], list[float]]:
    """D and J along tau -> F_tau* H for the flow of z d/dz, tau = 0 first."""
    euler = VectorFieldSL2.euler()
    d_values, j_values = [], []
    for tau in (0.0, *taus):
        moved = HermitianMetricMatrix(pullback_metric(H.entries, flow_matrix(euler, tau), space.degree))
        d_values.append(ding_functional(moved, gamma, space, grid))
        j_values.append(j_functional(moved, space, grid))
    return d_values, j_values


def _is_noncoercive(d_values: list[float], j_values: list[float]) -> bool:
    flat = max(abs(d - d_values[0]) for d in d_values) < DRIFT_TOL * max(1.0, abs(d_values[0]))
    growing = bool(np.all(np.diff(j_values) > 0)) and j_values[-1] - j_values[0] > 0.5
    return flat and growing


def minimize_ding(
    gamma: float,
    space: SectionSpace,
    grid: QuadratureGrid,
    settings: DingSettings | None = None,
    initial: HermitianMetricMatrix | None = None,
) -> DingReport:
    """Minimize D over det-normalized metrics.

    Each iteration tries the fixed-point map H <- t_operator(H); when that raises D
    a damped gradient step on the triangular parameters (Armijo halving) is taken
    instead. Stops when the relative change of D drops below rtol or the projected
    gradient norm below gtol.
    """
    settings = settings or DingSettings()
    gamma = float(gamma)
    n = space.dimension
    H = (initial or HermitianMetricMatrix.identity(n)).det_normalized()
    value = ding_functional(H, gamma, space, grid)
    trace: list[TraceRow] = []
    converged = False
    grad_norm = math.inf
    step_kind = "start"
    iteration = 0
    for iteration in range(settings.max_iterations):
        grad = _projected(ding_gradient(H, gamma, space, grid), n)
        grad_norm = float(np.linalg.norm(grad))
        trace.append(TraceRow(iteration, value, j_functional(H, space, grid), grad_norm, step_kind))
        logger.debug("iteration %d: D = %.12g, |grad| = %.3g (%s)", iteration, value, grad_norm, step_kind)
        if grad_norm < settings.gtol:
            converged = True
            break
        candidate = t_operator(H, gamma, space, grid)
        new_value = ding_functional(candidate, gamma, space, grid)
        step_kind = "fixed-point"
        if new_value > value:
            found = _armijo(H, value, grad, gamma, space, grid, settings.armijo_halvings)
            if found is None:
                logger.warning("no descent step found at iteration %d (|grad| = %.3g)", iteration, grad_norm)
                break
            candidate, new_value = found
            step_kind = "descent"
        change = abs(new_value - value) / max(1.0, abs(value))
        H, value = candidate, new_value
        if change < settings.rtol:
            grad_norm = float(np.linalg.norm(_projected(ding_gradient(H, gamma, space, grid), n)))
            trace.append(TraceRow(iteration + 1, value, j_functional(H, space, grid), grad_norm, step_kind))
            converged = True
            break

    report = DingReport(
        gamma=gamma,
        k=str(space.k),
        value=value,
        j_value=j_functional(H, space, grid),
        grad_norm=grad_norm,
        iterations=len(trace),
        converged=converged,
        metric=H,
        trace=trace,
    )
    d_values, j_values = vector_field_drift(H, gamma, space, grid)
    report.noncoercive = _is_noncoercive(d_values, j_values)
    if report.noncoercive:
        logger.info("D is constant along the z d/dz ray while J grows: NonCoercive")
    if not converged:
        raise MaxIterations(f"Ding minimization stopped after {len(trace)} iterations", report)
    logger.info("inf D = %.10g after %d iterations (|grad| = %.2g)", value, len(trace), grad_norm)
    return report


def minimize_ding_restarts(
    gamma: float,
    space: SectionSpace,
    grid: QuadratureGrid,
    settings: DingSettings | None = None,
    seed: int = 0,
    n_jobs: int | None = None,
) -> list[DingReport]:
    """Minimizations from `settings.restarts` random metrics, in seed-stream order."""
    settings = settings or DingSettings()
    starts = [random_metric(rng, space.dimension) for rng in seed_streams(seed, settings.restarts)]
    return Parallel(n_jobs=worker_count(n_jobs))(
        delayed(minimize_ding)(gamma, space, grid, settings, start) for start in starts
    )


# --- the partition inequality ---


@dataclass
class InequalityReport:
    lhs: float
    lhs_stderr: float
    rhs: float
    quadrature_tol: float
    holds: bool

    @property
    def gap(self) -> float:
        return self.rhs - self.lhs

    def to_record(self) -> dict:
        return {
            "lhs": self.lhs,
            "lhs_stderr": self.lhs_stderr,
            "rhs": self.rhs,
            "quadrature_tol": self.quadrature_tol,
            "gap": self.gap,
            "holds": self.holds,
        }


def inequality_check(
    k,
    gamma,
    pair: LogPairCurve,
    budget: int = 100_000,
    seeds: Sequence[int] = (0, 1, 2),
    resolution: int = 32,
    settings: DingSettings | None = None,
    n_jobs: int | None = None,
) -> InequalityReport:
    """-(1/(gamma N)) log Z <= inf D + log(N) / (k N), within the combined error bars."""
    params = DeformedDensityParams(pair, as_fraction(k), as_fraction(gamma))
    space = params.space
    n = space.dimension
    g = float(params.gamma)
    partition = partition_estimate(params, PartitionMethod.IMPORTANCE_MC, budget, seeds, n_jobs)
    if partition.divergent or not math.isfinite(partition.value) or partition.value <= 0:
        raise DivergentPartition(f"partition function of {params.describe()} did not stabilize")
    lhs = -math.log(partition.value) / (g * n)
    lhs_stderr = partition.stderr / (g * n * partition.value)

    grid = pair_grid(pair, resolution)
    report = minimize_ding(g, space, grid, settings)
    coarse = ding_functional(report.metric, g, space, pair_grid(pair, max(4, resolution // 2)))
    quad_tol = abs(report.value - coarse)
    rhs = report.value + math.log(n) / (float(space.k) * n)
    holds = lhs <= rhs + 2 * lhs_stderr + quad_tol
    logger.info("lhs = %.8g +- %.2g, rhs = %.8g, holds = %s", lhs, lhs_stderr, rhs, holds)
    return InequalityReport(lhs, lhs_stderr, rhs, quad_tol, holds)


# --- harmonicity and coercivity ---


@dataclass
class HarmonicityReport:
    laplacian_residual: float
    formula_residual: float
    integral_residual: float

    def to_record(self) -> dict:
        return {
            "laplacian_residual": self.laplacian_residual,
            "formula_residual": self.formula_residual,
            "integral_residual": self.integral_residual,
        }


def harmonicity_probe(
    vector_field: VectorFieldSL2,
    H0: HermitianMetricMatrix,
    space: SectionSpace,
    grid: QuadratureGrid,
    step: float = 0.25,
    center: complex = 0,
) -> HarmonicityReport:
    """Discrete Laplacian of tau -> D_{k,-1}(F_tau* H0) on a 3x3 stencil.

    Also compares D(F_tau* H0) - D(H0) with log|det R_tau|^2 / (kN) for the induced
    action R_tau, and the integral of e^{-FS} before and after the pull-back.
    """
    kn = float(space.k) * space.dimension
    base = ding_functional(H0, 1.0, space, grid)
    base_integral = _log_integral(fs_potential(H0, space, grid.nodes), 1.0, grid)
    values = np.empty((3, 3))
    formula, integral = 0.0, 0.0
    for a in range(3):
        for b in range(3):
            tau = center + step * ((a - 1) + 1j * (b - 1))
            g = flow_matrix(vector_field, tau)
            moved = HermitianMetricMatrix(pullback_metric(H0.entries, g, space.degree))
            values[a, b] = ding_functional(moved, 1.0, space, grid)
            r = orthonormal_power(np.linalg.inv(g), space.degree).T
            predicted = 2 * math.log(abs(np.linalg.det(r))) / kn
            if tau != 0:
                formula = max(formula, abs(values[a, b] - base - predicted))
                moved_integral = _log_integral(fs_potential(moved, space, grid.nodes), 1.0, grid)
                integral = max(integral, abs(math.expm1(moved_integral - base_integral)))
    # nine-point Laplacian
    edges = values[0, 1] + values[2, 1] + values[1, 0] + values[1, 2]
    corners = values[0, 0] + values[0, 2] + values[2, 0] + values[2, 2]
    laplacian = (4 * edges + corners - 20 * values[1, 1]) / (6 * step**2)
    return HarmonicityReport(abs(float(laplacian)), formula, integral)


@dataclass(frozen=True, eq=False)
class Ray:
    """H_tau = A* exp(tau Lambda) A with Lambda real, diagonal and traceless."""

    base: np.ndarray
    exponents: np.ndarray

    def metric(self, tau: float) -> HermitianMetricMatrix:
        scaled = np.exp(tau * self.exponents)[:, None] * self.base
        return HermitianMetricMatrix(self.base.conj().T @ scaled)


def euler_ray(degree: int) -> Ray:
    """The ray of z d/dz from the identity: Lambda_j = d - 2j."""
    return Ray(np.eye(degree + 1, dtype=complex), np.arange(degree, -degree - 1, -2, dtype=float))


def random_rays(rng: np.random.Generator, count: int, dimension: int) -> list[Ray]:
    rays = []
    for _ in range(count):
        base = random_metric(rng, dimension, scale=0.3).cholesky.conj().T
        lam = rng.normal(size=dimension)
        lam -= lam.mean()
        lam /= max(np.linalg.norm(lam), 1e-12)
        rays.append(Ray(base, lam))
    return rays


def _ray_profile(ray: Ray, taus: Sequence[float], space: SectionSpace, grid: QuadratureGrid) -> tuple[list[float], list[float]]:
    d_values, j_values = [], []
    for tau in taus:
        H = ray.metric(tau)
        d_values.append(ding_functional(H, 1.0, space, grid))
        j_values.append(j_functional(H, space, grid))
    return d_values, j_values


def _falling(profile: np.ndarray) -> bool:
    slopes = np.diff(profile)
    return bool(np.all(slopes < 0) and slopes[-1] < -1e-3 and slopes[-1] <= slopes[0] + 1e-6)


@dataclass
class CoercivityRow:
    epsilon: float
    profile: list[float]
    noncoercive: bool

    @property
    def minimum(self) -> float:
        return min(self.profile)

    def to_record(self) -> dict:
        return {
            "epsilon": self.epsilon,
            "profile": list(self.profile),
            "minimum": self.minimum,
            "noncoercive": self.noncoercive,
        }


def coercivity_probe(
    epsilon_grid: Sequence[float],
    rays: Sequence[Ray],
    space: SectionSpace,
    grid: QuadratureGrid,
    taus: Sequence[float] = DEFAULT_RAY_TAUS,
    n_jobs: int | None = None,
) -> list[CoercivityRow]:
    """min over rays of D_{k,-1} - eps J_k along each ray, one row per eps.

    A ray whose profile falls at every tau step without flattening is flagged
    NonCoercive; a bounded profile is reported, never certified.
    """
    profiles = Parallel(n_jobs=worker_count(n_jobs))(
        delayed(_ray_profile)(ray, taus, space, grid) for ray in rays
    )
    d = np.array([p[0] for p in profiles])
    j = np.array([p[1] for p in profiles])
    rows = []
    for eps in epsilon_grid:
        values = d - eps * j
        falling = any(_falling(v) for v in values)
        profile = np.min(values, axis=0)
        rows.append(CoercivityRow(float(eps), [float(v) for v in profile], falling))
    return rows
