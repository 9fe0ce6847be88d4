"""Points, the Fubini-Study reference metric and measure, quadrature and Moebius maps on P^1.

Points are normalized homogeneous pairs (z0, z1) with |z0|^2 + |z1|^2 = 1, so the
point at infinity [0:1] needs no special case. Arrays of points have shape (..., 2)
and complex dtype. The chart coordinate is z = z1 / z0.

The reference measure nu is the Fubini-Study area form of total mass pi; in the
chart its density against Lebesgue measure is (1 + |z|^2)^-2. In geodesic polar
coordinates about any centre c, with t = chordal(x, c)^2, nu = dt dtheta / 2.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import NotUnimodular, ZeroVector

logger = logging.getLogger(__name__)

NORM_TOL = 1e-12
UNIMODULAR_TOL = 1e-10


def normalize_array(z: np.ndarray) -> np.ndarray:
    """Vectorized `normalize` over the last axis."""
    z = np.asarray(z, dtype=complex)
    norm = np.sqrt(np.sum(np.abs(z) ** 2, axis=-1, keepdims=True))
    if np.any(norm == 0):
        raise ZeroVector("homogeneous coordinates (0, 0) do not define a point")
    z = z / norm
    lead = np.where(np.abs(z[..., :1]) >= np.abs(z[..., 1:]), z[..., :1], z[..., 1:])
    phase = lead / np.abs(lead)
    return z / phase


@dataclass(frozen=True)
class SpherePoint:
    z0: complex
    z1: complex

    @classmethod
    def from_chart(cls, z: complex | float | str) -> "SpherePoint":
        """Point with chart coordinate z; accepts math.inf or the string "inf"."""
        if isinstance(z, str):
            z = math.inf if z.strip().lower() in ("inf", "infinity", "∞") else complex(z.replace(" ", ""))
        if isinstance(z, float) and math.isinf(z):
            return cls(0j, 1 + 0j)
        return normalize(cls(1 + 0j, complex(z)))

    @classmethod
    def from_array(cls, z: np.ndarray) -> "SpherePoint":
        return cls(complex(z[0]), complex(z[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.z0, self.z1], dtype=complex)

    @property
    def is_infinity(self) -> bool:
        return self.z0 == 0

    def chart(self) -> complex:
        """Chart coordinate z1/z0 (complex infinity returned as inf+0j)."""
        if self.z0 == 0:
            return complex(math.inf, 0)
        return self.z1 / self.z0

    def label(self) -> str:
        if abs(self.z0) < NORM_TOL:
            return "inf"
        z = self.chart()
        return repr(z.real) if z.imag == 0 else repr(z)


def normalize(p: SpherePoint) -> SpherePoint:
    """Unit-norm representative with the larger-modulus coordinate real positive."""
    if p.z0 == 0 and p.z1 == 0:
        raise ZeroVector("homogeneous coordinates (0, 0) do not define a point")
    return SpherePoint.from_array(normalize_array(p.as_array()))


def as_points(points: Sequence[SpherePoint] | np.ndarray) -> np.ndarray:
    """Coerce SpherePoints or raw arrays to a normalized (..., 2) array."""
    if isinstance(points, np.ndarray):
        return normalize_array(points)
    return normalize_array(np.array([p.as_array() for p in points]))


def chordal(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Chordal (Fubini-Study) distance |x0 y1 - x1 y0| of normalized points, in [0, 1]."""
    x = np.asarray(x)
    y = np.asarray(y)
    return np.abs(x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0])


def bloch(x: np.ndarray) -> np.ndarray:
    """Unit-sphere coordinates (X, Y, Z) of normalized points; Z = 1 at z = 0."""
    w = np.conj(x[..., 0]) * x[..., 1]
    return np.stack(
        [2 * w.real, 2 * w.imag, np.abs(x[..., 0]) ** 2 - np.abs(x[..., 1]) ** 2],
        axis=-1,
    )


# --- reference metric ---


@dataclass(frozen=True)
class ReferenceMetric:
    """Fubini-Study metric on O(d); local weight phi_0 = d log(1 + |z|^2)."""

    degree: int = 2

    def log_weight(self, z: complex | np.ndarray) -> np.ndarray:
        return self.degree * np.log1p(np.abs(z) ** 2)

    def total_mass(self) -> float:
        """Mass of e^{-phi_0} against chart Lebesgue measure (finite for d >= 2)."""
        if self.degree < 2:
            return math.inf
        return math.pi / (self.degree - 1)

    def log_norm(self, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
        """log |s|^2_{phi_0} of the binary form sum_j c_j z0^{d-j} z1^j at any representatives."""
        points = np.asarray(points, dtype=complex)
        z0, z1 = points[..., 0], points[..., 1]
        j = np.arange(self.degree + 1)
        values = np.sum(coeffs * z0[..., None] ** (self.degree - j) * z1[..., None] ** j, axis=-1)
        scale = np.abs(z0) ** 2 + np.abs(z1) ** 2
        return np.log(np.abs(values) ** 2) - self.degree * np.log(scale)


def fs_log_density(metric: ReferenceMetric, p: SpherePoint, chart: int | None = None) -> float:
    """log of e^{-phi_0} against Lebesgue measure of the chosen chart at p.

    chart 0 uses z = z1/z0, chart 1 uses w = z0/z1; by default the chart in which
    p lies in the closed unit disc.
    """
    if chart is None:
        chart = 0 if abs(p.z0) >= abs(p.z1) else 1
    if chart == 0:
        if p.z0 == 0:
            return -math.inf
        return float(-metric.log_weight(p.z1 / p.z0))
    if p.z1 == 0:
        return -math.inf
    return float(-metric.log_weight(p.z0 / p.z1))


# --- quadrature ---


@dataclass(frozen=True)
class QuadratureGrid:
    """Nodes (M, 2) with positive weights for a measure on P^1."""

    nodes: np.ndarray
    weights: np.ndarray
    resolution: int = 0
    label: str = field(default="fs")

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(self.weights * values))

    def integrate_fn(self, fn: Callable[[np.ndarray], np.ndarray]) -> float:
        return self.integrate(fn(self.nodes))

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    def __len__(self) -> int:
        return len(self.weights)


def polar_offset(centers: np.ndarray, t: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """Points at chordal^2 = t and angle theta about each centre (all arrays broadcast)."""
    centers = np.asarray(centers)
    c0, c1 = centers[..., 0], centers[..., 1]
    v0 = np.sqrt(1 - t)
    v1 = np.sqrt(t) * np.exp(1j * theta)
    return normalize_array(np.stack([c0 * v0 - np.conj(c1) * v1, c1 * v0 + np.conj(c0) * v1], axis=-1))


def make_grid(resolution: int) -> QuadratureGrid:
    """Two-chart product rule for nu.

    Each chart covers its closed unit disc (t = chordal^2 to the chart centre in
    [0, 1/2]) with Gauss-Legendre in t and the trapezoid rule in the angle. The
    second chart's nodes are the images of the first under z -> 1/z. Bihomogeneous
    polynomials of bidegree (a, b) are integrated exactly when a + b < resolution.
    """
    if resolution < 2:
        raise ValueError("grid resolution must be >= 2")
    n_theta = resolution
    n_t = max(2, resolution // 2)
    x, w = leggauss(n_t)
    t = (x + 1) / 4
    wt = w / 4
    theta = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    tt, th = np.meshgrid(t, theta, indexing="ij")
    chart0 = np.stack([np.sqrt(1 - tt), np.sqrt(tt) * np.exp(1j * th)], axis=-1).reshape(-1, 2)
    chart1 = chart0[:, ::-1]
    nodes = normalize_array(np.concatenate([chart0, chart1]))
    w_one = (wt[:, None] * np.full(n_theta, np.pi / n_theta)[None, :]).reshape(-1)
    weights = np.concatenate([w_one, w_one])
    return QuadratureGrid(nodes=nodes, weights=weights, resolution=resolution)


def refine_integral(fn: Callable[[np.ndarray], np.ndarray], resolution: int) -> tuple[float, float]:
    """Integral of fn against nu at `resolution` and the doubling error estimate."""
    coarse = make_grid(max(2, resolution // 2)).integrate_fn(fn)
    fine = make_grid(resolution).integrate_fn(fn)
    return fine, abs(fine - coarse)


def singular_rule_batch(
    centers: np.ndarray,
    exponents: Sequence[float],
    density: Callable[[np.ndarray], np.ndarray],
    order: int,
) -> tuple[np.ndarray, np.ndarray]:
    """`singular_rule` for a batch of centre sets of shape (B, C, 2).

    Returns nodes (B, M, 2) and weights (B, M); `density` receives nodes of shape
    (B, M, 2). Weights vanish wherever the partition of unity does, including
    nodes that land exactly on another centre.
    """
    centers = np.asarray(centers, dtype=complex)
    if centers.ndim != 3 or centers.shape[1] != len(exponents):
        raise ValueError("centers must have shape (batch, len(exponents), 2)")
    x, w = leggauss(order)
    u = (x + 1) / 2
    wu = w / 2
    n_theta = 2 * order
    theta = 2 * np.pi * (np.arange(n_theta) + 0.5) / n_theta
    all_nodes, all_weights = [], []
    for j, beta in enumerate(exponents):
        if not beta < 1:
            raise ValueError(f"singular exponent {beta} is not below 1")
        t = u ** (1 / (1 - beta))
        jac = u ** (beta / (1 - beta)) / (1 - beta)
        tt, th = np.meshgrid(t, theta, indexing="ij")
        base = (jac * wu)[:, None] * np.full(n_theta, np.pi / n_theta)[None, :]
        nodes = polar_offset(centers[:, j : j + 1, :], tt.reshape(1, -1), th.reshape(1, -1))
        dist2 = chordal(nodes[:, :, None, :], centers[:, None, :, :]) ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = (dist2[..., j : j + 1] / dist2) ** 2
        ratio = np.where(np.isnan(ratio), 1.0, ratio)
        chi = 1.0 / np.sum(ratio, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            weights = np.where(chi > 0, base.reshape(1, -1) * chi * density(nodes), 0.0)
        all_nodes.append(nodes)
        all_weights.append(weights)
    return np.concatenate(all_nodes, axis=1), np.concatenate(all_weights, axis=1)


def singular_rule(
    centers: Sequence[np.ndarray],
    exponents: Sequence[float],
    density: Callable[[np.ndarray], np.ndarray],
    order: int,
) -> QuadratureGrid:
    """Nodes and weights for density * nu, density ~ chordal^{-2 beta_j} near centre j.

    A partition of unity chi_j = t_j^-2 / sum_l t_l^-2 isolates each singular point;
    about centre j the substitution t = u^{1/(1 - beta_j)} absorbs the singularity so
    Gauss-Legendre in u converges. Each exponent must be below 1; negative
    exponents describe zeros of the density.
    """
    centers = [np.asarray(c, dtype=complex) for c in centers]
    if not centers:
        grid = make_grid(order)
        return QuadratureGrid(grid.nodes, grid.weights * density(grid.nodes), order, "singular")
    nodes, weights = singular_rule_batch(np.stack(centers)[None], exponents, lambda x: density(x[0])[None], order)
    return QuadratureGrid(nodes=nodes[0], weights=weights[0], resolution=order, label="singular")


# --- group actions ---


def mobius_apply_array(g: np.ndarray, points: np.ndarray) -> np.ndarray:
    g = np.asarray(g, dtype=complex)
    if abs(np.linalg.det(g) - 1) >= UNIMODULAR_TOL:
        raise NotUnimodular(f"det g = {np.linalg.det(g):.6g} is not 1")
    return normalize_array(np.asarray(points) @ g.T)


def mobius_apply(g: np.ndarray, p: SpherePoint) -> SpherePoint:
    return SpherePoint.from_array(mobius_apply_array(g, p.as_array()))


def random_points(rng: np.random.Generator, shape: int | tuple[int, ...]) -> np.ndarray:
    """Independent nu-uniform points."""
    shape = (shape,) if isinstance(shape, int) else tuple(shape)
    t = rng.random(shape)
    theta = rng.uniform(0, 2 * np.pi, shape)
    return normalize_array(np.stack([np.sqrt(1 - t), np.sqrt(t) * np.exp(1j * theta)], axis=-1))


def random_su2(rng: np.random.Generator) -> np.ndarray:
    q = rng.normal(size=4)
    a, b, c, d = q / np.linalg.norm(q)
    return np.array([[a + 1j * b, -c + 1j * d], [c + 1j * d, a - 1j * b]], dtype=complex)


def random_unimodular(rng: np.random.Generator, scale: float = 1.0) -> np.ndarray:
    g = np.eye(2) + scale * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / 2
    det = np.linalg.det(g)
    while abs(det) < 1e-3:
        g = np.eye(2) + scale * (rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))) / 2
        det = np.linalg.det(g)
    return g / np.sqrt(det)


def geodesic_rotation(rng: np.random.Generator, angle: float) -> np.ndarray:
    """SU(2) element rotating the sphere by `angle` about a uniformly random axis."""
    axis = rng.normal(size=3)
    nx, ny, nz = axis / np.linalg.norm(axis)
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    return np.array(
        [[c - 1j * s * nz, -1j * s * nx - s * ny], [-1j * s * nx + s * ny, c + 1j * s * nz]],
        dtype=complex,
    )
