"""Log stability of pairs on curves.

Exact lct/klt arithmetic, the genus-0 weight criterion, one-cluster collision
strata of the deformed anticanonical divisor on (P^1)^N, partition function
estimates (tensor quadrature and importance Monte Carlo), the vanishing order
of det S along a root of an anticanonical section, and the genus-1 exponent
ledger.

The deformed Gibbs density relative to nu^N is

    rho(x) = ||det S||^{-2 gamma / k} * prod_i prod_a chordal(x_i, p_a)^{-2 c_a}

with det S taken in the L^2(nu)-orthonormal basis and c_a the local coefficients
(w_a for a log pair, plus (1 - gamma) times the multiplicities of a section S).
"""
from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from functools import cached_property

import numpy as np
from joblib import Parallel, delayed
from scipy.special import logsumexp

from .errors import (
    BadStratum,
    DegenerateFreeze,
    DegreeMismatch,
    EmptyDivisor,
    Unsupported,
    WrongGenus,
)
from .geometry import (
    SpherePoint,
    chordal,
    normalize_array,
    polar_offset,
    random_points,
    singular_rule,
    singular_rule_batch,
)
from .pairs import CurveDivisor, LogPairCurve, as_fraction
from .sections import (
    COINCIDENCE_TOL,
    Configuration,
    SectionSpace,
    basis_log_scale,
    config_array,
    dimension,
    slater_log_array,
)
from .utils import seed_streams, worker_count

logger = logging.getLogger(__name__)

__all__ = [
    "LogPairCurve",
    "CurveDivisor",
    "DeformedDensityParams",
    "DensityValue",
    "Stratum",
    "StratumResult",
    "Verdict",
    "StabilityReport",
    "PartitionMethod",
    "PartitionEstimate",
    "SeedDiagnostics",
    "VanishingOrder",
    "Genus1Ledger",
    "GlobalLctReport",
    "lct_curve_divisor",
    "is_klt_divisor",
    "weight_condition",
    "deformed_log_density",
    "log_density_array",
    "collision_exponent",
    "stratum_tail_index",
    "enumerate_strata",
    "gibbs_stable_probe",
    "parameterized_stability",
    "partition_estimate",
    "pair_reference_mass",
    "binary_form",
    "form_zeros",
    "root_multiplicities",
    "vanishing_order",
    "genus1_exponent_bookkeeping",
    "global_lct_probe",
]

# importance sampling
DEFAULT_CHUNK = 100_000
DOMINANCE_SHARE = 0.5
TAIL_INDEX_LIMIT = 0.9
HILL_FRACTION = 0.02
CHAIN_WEIGHT = 1 / 3
CHAIN_BETA = 0.5
DEFAULT_SEEDS = (0, 1, 2)

# tensor quadrature
TENSOR_BATCH = 256
TENSOR_ORDERS = {1: 32, 2: 24, 3: 8}

# vanishing order slope fit
VANISHING_RADII = (1e-2, 1e-3, 1e-4)
SLOPE_AGREEMENT = 0.1
FREEZE_SEPARATION = 1e-2

ROOT_CLUSTER_TOL = 0.05
ROOT_SEPARATION = 0.2


# --- exact divisor arithmetic ---


def lct_curve_divisor(divisor: CurveDivisor) -> Fraction | float:
    """Log canonical threshold of a divisor on a curve: 1 / max c_a (+inf if no c_a > 0).

    |z|^{-2tc} is locally integrable iff t c < 1, so the threshold is exact.
    """
    if not divisor:
        raise EmptyDivisor("lct of the empty divisor is undefined")
    top = max(divisor.coefficients)
    if top <= 0:
        return math.inf
    return 1 / top


def is_klt_divisor(divisor: CurveDivisor) -> bool:
    return all(c < 1 for c in divisor.coefficients)


def weight_condition(pair: LogPairCurve) -> bool | None:
    """Genus-0 criterion: sum w < 2 and w_a < sum_{b != a} w_b for every a.

    Returns None when there are no marked points (the quantifier is vacuous).
    """
    if pair.genus != 0:
        raise WrongGenus(f"the weight criterion is stated for genus 0, got genus {pair.genus}")
    if not pair.weights:
        return None
    total = pair.total_weight
    if not total < 2:
        return False
    return all(w < total - w for w in pair.weights)


# --- the deformed density ---


@dataclass(frozen=True)
class DeformedDensityParams:
    """Parameters of the (possibly gamma-deformed) Gibbs density on X^N.

    gamma = 0 is accepted and gives the product reference measure (f nu)^N.
    """

    pair: LogPairCurve
    k: Fraction
    gamma: Fraction = Fraction(1)
    section: CurveDivisor | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "k", as_fraction(self.k))
        object.__setattr__(self, "gamma", as_fraction(self.gamma))
        if self.k <= 0:
            raise ValueError(f"level k must be positive, got {self.k}")
        if not 0 <= self.gamma <= 1:
            raise ValueError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.section is not None:
            if self.section.degree != 2:
                raise DegreeMismatch(f"anticanonical section on P^1 has degree 2, got {self.section.degree}")
            if not 0 < self.gamma < 1:
                raise ValueError("the section deformation needs 0 < gamma < 1")

    @cached_property
    def space(self) -> SectionSpace:
        return SectionSpace.for_pair(self.pair, self.k)

    @property
    def dimension(self) -> int:
        return self.space.dimension

    @property
    def alpha(self) -> Fraction:
        """Exponent per pair of points: gamma / k."""
        return self.gamma / self.k

    @cached_property
    def local_terms(self) -> tuple[tuple[SpherePoint, Fraction], ...]:
        """Local coefficients c_a at every marked point, in marked-point order, then at
        the roots of S that are not marked. Stratum locations index this tuple."""
        terms: list[tuple[SpherePoint, Fraction]] = list(zip(self.pair.marked_points, self.pair.weights))
        if self.section is not None:
            for point, mult in self.section.terms:
                extra = (1 - self.gamma) * mult
                for idx, (p, c) in enumerate(terms):
                    if chordal(p.as_array(), point.as_array()) < COINCIDENCE_TOL:
                        terms[idx] = (p, c + extra)
                        break
                else:
                    terms.append((point, extra))
        return tuple(terms)

    @cached_property
    def singular_terms(self) -> tuple[tuple[SpherePoint, Fraction], ...]:
        """local_terms with zero coefficients dropped."""
        return tuple((p, c) for p, c in self.local_terms if c != 0)

    @cached_property
    def log_basis_scale(self) -> float:
        return float(np.sum(basis_log_scale(self.space.degree)))

    def describe(self) -> str:
        text = f"{self.pair.describe()}; k = {self.k}, gamma = {self.gamma}, N = {self.dimension}"
        if self.section is not None:
            roots = ", ".join(f"{c}@{p.label()}" for p, c in self.section.terms)
            text += f"; S = {roots}"
        return text


def _marked_log_factor(params: DeformedDensityParams, points: np.ndarray) -> np.ndarray:
    out = np.zeros(points.shape[:-2])
    for point, coeff in params.singular_terms:
        with np.errstate(divide="ignore"):
            logs = np.log(chordal(points, point.as_array()))
        out = out - 2 * float(coeff) * np.sum(logs, axis=-1)
    return out


def log_density_array(params: DeformedDensityParams, points: np.ndarray, method: str = "vandermonde") -> np.ndarray:
    """Unnormalized log rho for configurations of shape (..., N, 2); +inf on the singular locus."""
    points = normalize_array(points)
    log_det, _ = slater_log_array(params.space, points, method)
    alpha = float(params.alpha)
    if alpha == 0:
        out = np.zeros(points.shape[:-2])
    else:
        out = -2 * alpha * (log_det - params.log_basis_scale)
    with np.errstate(invalid="ignore"):
        out = out + _marked_log_factor(params, points)
    return np.where(np.isnan(out), np.inf, out)


@dataclass(frozen=True)
class DensityValue:
    """log rho at one configuration; is_infinite marks a hit on the singular locus."""

    log_value: float
    is_infinite: bool = False
    stratum: str | None = None


def _hit_stratum(params: DeformedDensityParams, points: np.ndarray) -> str | None:
    for idx, (point, coeff) in enumerate(params.local_terms):
        if coeff == 0:
            continue
        near = chordal(points, point.as_array()) < COINCIDENCE_TOL
        if np.any(near):
            return f"marked[{idx}]@{point.label()} m={int(np.sum(near))} c={coeff}"
    n = len(points)
    for i in range(n):
        close = chordal(points, points[i]) < COINCIDENCE_TOL
        if np.sum(close) > 1:
            return f"generic m={int(np.sum(close))}"
    return None


def deformed_log_density(params: DeformedDensityParams, config: Configuration | np.ndarray) -> DensityValue:
    points = config_array(config)
    value = float(log_density_array(params, points, method="lu"))
    if math.isinf(value) and value > 0:
        return DensityValue(math.inf, True, _hit_stratum(params, points))
    return DensityValue(value)


# --- collision strata ---


@dataclass(frozen=True)
class Stratum:
    """One cluster of m points, either generic or at singular point `marked`."""

    m: int
    marked: int | None = None
    label: str = ""

    @property
    def descriptor(self) -> str:
        if self.marked is None:
            return f"generic m={self.m}"
        return f"marked[{self.marked}]@{self.label} m={self.m}"


@dataclass(frozen=True)
class StratumResult:
    stratum: Stratum
    exponent: Fraction
    integrable: bool
    tail_index: Fraction

    def to_record(self) -> dict:
        return {
            "stratum": self.stratum.descriptor,
            "E": str(self.exponent),
            "integrable": self.integrable,
            "tail_index": str(self.tail_index),
        }


def _location_coefficient(params: DeformedDensityParams, location: int | str | None) -> Fraction | None:
    if location is None or location == "generic":
        return None
    if not isinstance(location, int) or not 0 <= location < len(params.local_terms):
        raise BadStratum(f"unknown marked point {location!r}")
    return params.local_terms[location][1]


def collision_exponent(m: int, location: int | str | None, params: DeformedDensityParams) -> tuple[Fraction, bool]:
    """Scaling exponent E of the stratum volume times density; integrable iff E > 0.

    Generic: E = 2(m - 1) - alpha m (m - 1).
    At a marked point with coefficient c: E = 2m - alpha m (m - 1) - 2 c m.
    """
    n = params.dimension
    alpha = params.alpha
    coeff = _location_coefficient(params, location)
    if coeff is None:
        if not 2 <= m <= n:
            raise BadStratum(f"generic cluster size must lie in [2, {n}], got {m}")
        exponent = 2 * (m - 1) - alpha * m * (m - 1)
    else:
        if not 1 <= m <= n:
            raise BadStratum(f"marked cluster size must lie in [1, {n}], got {m}")
        exponent = 2 * m - alpha * m * (m - 1) - 2 * coeff * m
    return Fraction(exponent), exponent > 0


def stratum_tail_index(m: int, location: int | str | None, params: DeformedDensityParams) -> Fraction:
    """Tail index xi of nu-uniform importance weights near the stratum: P(w > s) ~ s^{-1/xi}.

    xi >= 1 exactly when the stratum is non-integrable.
    """
    alpha = params.alpha
    coeff = _location_coefficient(params, location)
    if coeff is None:
        return alpha * m / 2
    return (alpha * m * (m - 1) + 2 * coeff * m) / (2 * m)


def enumerate_strata(params: DeformedDensityParams) -> list[StratumResult]:
    results = []
    n = params.dimension
    for m in range(2, n + 1):
        exponent, ok = collision_exponent(m, None, params)
        results.append(StratumResult(Stratum(m), exponent, ok, stratum_tail_index(m, None, params)))
    for idx, (point, coeff) in enumerate(params.local_terms):
        if coeff == 0:
            continue
        for m in range(1, n + 1):
            exponent, ok = collision_exponent(m, idx, params)
            stratum = Stratum(m, idx, point.label())
            results.append(StratumResult(stratum, exponent, ok, stratum_tail_index(m, idx, params)))
    return results


# --- partition functions ---


class PartitionMethod(str, Enum):
    TENSOR_QUADRATURE = "tensor"
    IMPORTANCE_MC = "mc"


@dataclass
class SeedDiagnostics:
    seed: int
    estimate: float
    stderr: float
    max_share: float
    tail_index: float
    running_max_share: list[float] = field(default_factory=list)

    @property
    def dominated(self) -> bool:
        return self.max_share > DOMINANCE_SHARE or self.tail_index >= TAIL_INDEX_LIMIT

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "estimate": self.estimate,
            "stderr": self.stderr,
            "max_share": self.max_share,
            "tail_index": self.tail_index,
            "running_max_share": list(self.running_max_share),
            "dominated": self.dominated,
        }


@dataclass
class PartitionEstimate:
    method: PartitionMethod
    value: float
    stderr: float
    divergent: bool = False
    n_samples: int = 0
    seeds: tuple[int, ...] = ()
    diagnostics: list[SeedDiagnostics] = field(default_factory=list)

    def to_record(self) -> dict:
        return {
            "method": self.method.value,
            "Z": "DIVERGENT" if self.divergent else self.value,
            "stderr": None if self.divergent else self.stderr,
            "n_samples": self.n_samples,
            "seeds": list(self.seeds),
            "diagnostics": [d.to_record() for d in self.diagnostics],
        }


class ClusterProposal:
    """Importance proposal on X^N built to reach the collision strata.

    Single points come from a mixture of nu/pi and cones t^{-c_a} about marked points
    with 0 < c_a < 1. Each further point, with probability CHAIN_WEIGHT, is drawn
    from a cone about its predecessor, which places mass on shrinking clusters.
    Densities are taken against (nu / pi)^N.
    """

    def __init__(self, params: DeformedDensityParams):
        self.n = params.dimension
        cones = [(p.as_array(), float(c)) for p, c in params.singular_terms if 0 < c < 1]
        self.centers = np.array([c for c, _ in cones]).reshape(-1, 2)
        self.betas = np.array([b for _, b in cones])
        if cones:
            self.mix = np.concatenate([[0.5], np.full(len(cones), 0.5 / len(cones))])
        else:
            self.mix = np.array([1.0])
        self.chain_weight = CHAIN_WEIGHT if self.n > 1 else 0.0

    def _sample_single(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comp = rng.choice(len(self.mix), size=size, p=self.mix)
        t = rng.random(size)
        theta = rng.uniform(0, 2 * np.pi, size)
        centers = np.tile(np.array([1 + 0j, 0j]), (size, 1))
        for a, beta in enumerate(self.betas):
            sel = comp == a + 1
            t[sel] = t[sel] ** (1 / (1 - beta))
            centers[sel] = self.centers[a]
        return polar_offset(centers, t, theta)

    def _log_single(self, points: np.ndarray) -> np.ndarray:
        density = np.full(points.shape[:-1], self.mix[0])
        for a, beta in enumerate(self.betas):
            t = chordal(points, self.centers[a]) ** 2
            with np.errstate(divide="ignore"):
                density = density + self.mix[a + 1] * (1 - beta) * t ** (-beta)
        return np.log(density)

    def sample(self, rng: np.random.Generator, size: int) -> tuple[np.ndarray, np.ndarray]:
        """Configurations (size, N, 2) and their log proposal densities."""
        points = np.empty((size, self.n, 2), dtype=complex)
        points[:, 0] = self._sample_single(rng, size)
        for i in range(1, self.n):
            fresh = self._sample_single(rng, size)
            t = rng.random(size) ** (1 / (1 - CHAIN_BETA))
            theta = rng.uniform(0, 2 * np.pi, size)
            chained = polar_offset(points[:, i - 1], t, theta)
            use_chain = rng.random(size) < self.chain_weight
            points[:, i] = np.where(use_chain[:, None], chained, fresh)
        return points, self.log_density(points)

    def log_density(self, points: np.ndarray) -> np.ndarray:
        single = self._log_single(points)
        out = single[..., 0].copy()
        for i in range(1, self.n):
            t = chordal(points[..., i, :], points[..., i - 1, :]) ** 2
            with np.errstate(divide="ignore"):
                chain = self.chain_weight * (1 - CHAIN_BETA) * t ** (-CHAIN_BETA)
            out = out + np.log(chain + (1 - self.chain_weight) * np.exp(single[..., i]))
        return out


def _hill_tail_index(log_weights: np.ndarray) -> float:
    finite = np.sort(log_weights[np.isfinite(log_weights)])[::-1]
    top = max(10, int(HILL_FRACTION * len(finite)))
    if len(finite) <= top:
        return math.nan
    return float(np.mean(finite[:top]) - finite[top])


def _mc_seed(params: DeformedDensityParams, budget: int, seed: int, chunk: int) -> SeedDiagnostics:
    rng = seed_streams(seed, 1)[0]
    proposal = ClusterProposal(params)
    n = params.dimension
    pieces = []
    done = 0
    while done < budget:
        size = min(chunk, budget - done)
        points, log_q = proposal.sample(rng, size)
        pieces.append(n * math.log(math.pi) + log_density_array(params, points) - log_q)
        done += size
    log_w = np.concatenate(pieces)
    if np.any(np.isposinf(log_w)):
        logger.warning("seed %d hit the singular locus", seed)
        return SeedDiagnostics(seed, math.inf, math.inf, 1.0, math.inf)

    top = float(np.max(log_w))
    scaled = np.exp(log_w - top)
    total = float(np.sum(scaled))
    scale = math.exp(top)
    estimate = math.exp(logsumexp(log_w) - math.log(len(log_w)))
    stderr = float(np.std(scaled, ddof=1)) / math.sqrt(len(scaled)) * scale
    running = []
    for frac in np.linspace(0.1, 1.0, 10):
        head = scaled[: max(1, int(frac * len(scaled)))]
        running.append(float(np.max(head) / np.sum(head)))
    diag = SeedDiagnostics(
        seed=seed,
        estimate=estimate,
        stderr=stderr,
        max_share=float(np.max(scaled) / total),
        tail_index=_hill_tail_index(log_w),
        running_max_share=running,
    )
    logger.debug(
        "seed %d: Z = %.6g +- %.2g, max share %.3g, tail index %.3g",
        seed, estimate, stderr, diag.max_share, diag.tail_index,
    )
    return diag


def _importance_mc(
    params: DeformedDensityParams,
    budget: int,
    seeds: Sequence[int],
    n_jobs: int | None,
    chunk: int,
) -> PartitionEstimate:
    if budget < 10_000:
        raise ValueError(f"Monte-Carlo budget must be at least 1e4 samples, got {budget}")
    diagnostics = Parallel(n_jobs=worker_count(n_jobs))(
        delayed(_mc_seed)(params, budget, seed, chunk) for seed in seeds
    )
    divergent = all(d.dominated for d in diagnostics)
    finite = [d for d in diagnostics if math.isfinite(d.estimate)]
    if finite:
        value = float(np.mean([d.estimate for d in finite]))
        stderr = math.sqrt(sum(d.stderr**2 for d in finite)) / len(finite)
    else:
        value, stderr, divergent = math.inf, math.inf, True
    logger.info("importance MC: Z = %.6g +- %.2g over %d seeds, divergent=%s", value, stderr, len(seeds), divergent)
    return PartitionEstimate(
        method=PartitionMethod.IMPORTANCE_MC,
        value=value,
        stderr=stderr,
        divergent=divergent,
        n_samples=budget * len(seeds),
        seeds=tuple(seeds),
        diagnostics=list(diagnostics),
    )


def _reference_factor(params: DeformedDensityParams):
    def density(nodes: np.ndarray) -> np.ndarray:
        return np.exp(_marked_log_factor(params, nodes[..., None, :]))

    return density


def _cone_terms(params: DeformedDensityParams) -> tuple[list[np.ndarray], list[float]]:
    centers, exponents = [], []
    for point, coeff in params.singular_terms:
        if coeff > 0:
            centers.append(point.as_array())
            exponents.append(float(coeff))
    return centers, exponents


def pair_reference_mass(params: DeformedDensityParams, order: int = 32) -> float:
    """Mass of f nu, f = prod_a chordal(x, p_a)^{-2 c_a}; +inf when some c_a >= 1."""
    centers, exponents = _cone_terms(params)
    if any(e >= 1 for e in exponents):
        return math.inf
    return singular_rule(centers, exponents, _reference_factor(params), order).total_mass


def _tensor_value(params: DeformedDensityParams, order: int) -> float:
    """Iterated singular rules: x_1 about the cone points, then each later point
    about the cone points and the points already placed."""
    density = _reference_factor(params)
    centers, exponents = _cone_terms(params)
    alpha = float(params.alpha)
    # -2 alpha log||det S|| with the orthonormal-basis normalization
    const = math.exp(2 * alpha * params.log_basis_scale)
    outer = singular_rule(centers, exponents, density, order)
    if params.dimension == 1:
        return const * outer.total_mass
    cones = np.array(centers, dtype=complex).reshape(-1, 2)
    total = 0.0
    for x1, w1 in zip(outer.nodes, outer.weights):
        if w1 == 0:
            continue
        placed = x1[None, None, :]
        nodes, weights = singular_rule_batch(
            _with_cones(placed, cones), [alpha, *exponents], _pair_density(density, placed, alpha), order
        )
        if params.dimension == 2:
            total += w1 * float(np.sum(weights))
            continue
        keep = weights[0] > 0
        second, w2 = nodes[0, keep], weights[0, keep]
        inner = np.empty(len(second))
        for start in range(0, len(second), TENSOR_BATCH):
            batch = second[start : start + TENSOR_BATCH]
            placed = np.stack([np.broadcast_to(x1, batch.shape), batch], axis=1)
            _, w3 = singular_rule_batch(
                _with_cones(placed, cones), [alpha, alpha, *exponents], _pair_density(density, placed, alpha), order
            )
            inner[start : start + len(batch)] = np.sum(w3, axis=1)
        total += w1 * float(np.sum(w2 * inner))
    return const * total


def _with_cones(placed: np.ndarray, cones: np.ndarray) -> np.ndarray:
    return np.concatenate([placed, np.broadcast_to(cones, (len(placed), *cones.shape))], axis=1)


def _pair_density(density, placed: np.ndarray, alpha: float):
    """density(x) * prod_i chordal(x, placed_i)^{-2 alpha} for a batch of placed points (B, P, 2)."""

    def pair_density(nodes: np.ndarray) -> np.ndarray:
        with np.errstate(divide="ignore"):
            dist = chordal(nodes[:, :, None, :], placed[:, None, :, :])
            return np.prod(dist, axis=-1) ** (-2 * alpha) * density(nodes)

    return pair_density


def _tensor_quadrature(params: DeformedDensityParams, order: int | None) -> PartitionEstimate:
    n = params.dimension
    if n not in TENSOR_ORDERS:
        raise Unsupported(f"tensor quadrature is implemented for N <= 3, got N = {n}")
    order = order or TENSOR_ORDERS[n]
    if any(not r.integrable for r in enumerate_strata(params)):
        return PartitionEstimate(PartitionMethod.TENSOR_QUADRATURE, math.inf, math.inf, divergent=True)
    fine = _tensor_value(params, order)
    coarse = _tensor_value(params, max(4, order // 2))
    logger.info("tensor quadrature: Z = %.10g (order %d), doubling error %.2g", fine, order, abs(fine - coarse))
    return PartitionEstimate(
        PartitionMethod.TENSOR_QUADRATURE,
        fine,
        abs(fine - coarse),
        n_samples=order,
    )


def partition_estimate(
    params: DeformedDensityParams,
    method: PartitionMethod | str = PartitionMethod.IMPORTANCE_MC,
    budget: int = 100_000,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    n_jobs: int | None = None,
    order: int | None = None,
    chunk: int = DEFAULT_CHUNK,
) -> PartitionEstimate:
    """Z = integral of rho over X^N against nu^N.

    Importance MC runs one estimate per seed and declares DIVERGENT when every seed
    is dominated by its largest weights (single-sample share above one half or a
    Hill tail index of at least TAIL_INDEX_LIMIT).
    """
    method = PartitionMethod(method)
    if method is PartitionMethod.TENSOR_QUADRATURE:
        return _tensor_quadrature(params, order)
    return _importance_mc(params, budget, seeds, n_jobs, chunk)


# --- the probe ---


class Verdict(str, Enum):
    STABLE_PROBE_PASSED = "StableProbePassed"
    UNSTABLE_WITNESS = "UnstableWitness"
    INCONCLUSIVE = "Inconclusive"


@dataclass
class StabilityReport:
    params: DeformedDensityParams
    weight_condition: bool | None
    strata: list[StratumResult]
    partition: PartitionEstimate | None
    verdict: Verdict

    @property
    def witnesses(self) -> list[StratumResult]:
        return [r for r in self.strata if not r.integrable]

    def to_record(self) -> dict:
        partition = self.partition
        if partition is None:
            z, stderr = None, None
        elif partition.divergent:
            z, stderr = "DIVERGENT", None
        else:
            z, stderr = partition.value, partition.stderr
        return {
            "pair": self.params.pair.describe(),
            "k": str(self.params.k),
            "gamma": str(self.params.gamma),
            "N": self.params.dimension,
            "verdict": self.verdict.value,
            "weight_condition": "NA" if self.weight_condition is None else self.weight_condition,
            "strata": [r.to_record() for r in self.strata],
            "Z": z,
            "stderr": stderr,
            "seeds": list(partition.seeds) if partition is not None else [],
        }


def _verdict(strata: list[StratumResult], criterion: bool | None, partition: PartitionEstimate | None) -> Verdict:
    if any(not r.integrable for r in strata):
        return Verdict.UNSTABLE_WITNESS
    if partition is None or partition.divergent or criterion is False:
        return Verdict.INCONCLUSIVE
    return Verdict.STABLE_PROBE_PASSED


def probe_params(
    params: DeformedDensityParams,
    budget: int = 100_000,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    n_jobs: int | None = None,
) -> StabilityReport:
    criterion = weight_condition(params.pair)
    strata = enumerate_strata(params)
    partition = None
    if budget > 0:
        partition = partition_estimate(params, PartitionMethod.IMPORTANCE_MC, budget, seeds, n_jobs)
    verdict = _verdict(strata, criterion, partition)
    for r in strata:
        if not r.integrable:
            logger.info("non-integrable stratum %s (E = %s)", r.stratum.descriptor, r.exponent)
    logger.info("%s: %s", params.describe(), verdict.value)
    return StabilityReport(params, criterion, strata, partition, verdict)


def gibbs_stable_probe(
    pair: LogPairCurve,
    k: Fraction | int | str,
    gamma: Fraction | int | str = 1,
    budget: int = 100_000,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    n_jobs: int | None = None,
) -> StabilityReport:
    """One-cluster probe of the klt property of the anticanonical divisor on X^N.

    A non-integrable stratum is an instability witness. Passing requires every
    stratum integrable and a non-divergent MC estimate; it is never a proof.
    """
    return probe_params(DeformedDensityParams(pair, as_fraction(k), as_fraction(gamma)), budget, seeds, n_jobs)


def parameterized_stability(
    section: CurveDivisor,
    k: Fraction | int | str,
    gamma: Fraction | int | str,
    budget: int = 100_000,
    seeds: Sequence[int] = DEFAULT_SEEDS,
    n_jobs: int | None = None,
) -> StabilityReport:
    """Gibbs stability of (P^1, S) with respect to gamma: the pair (P^1, (1 - gamma) S) at level k / gamma."""
    gamma = as_fraction(gamma)
    if section.degree != 2:
        raise DegreeMismatch(f"anticanonical section on P^1 has degree 2, got {section.degree}")
    if not 0 < gamma < 1:
        raise ValueError("gamma must lie in (0, 1)")
    pair = LogPairCurve(0, tuple(section.points), tuple((1 - gamma) * c for c in section.coefficients))
    return gibbs_stable_probe(pair, as_fraction(k) / gamma, 1, budget, seeds, n_jobs)


# --- vanishing order along an anticanonical section ---


@dataclass(frozen=True)
class VanishingOrder:
    order: int
    index: int
    root: str
    slopes: tuple[float, float]
    k: Fraction

    @property
    def below_level(self) -> bool:
        return self.order < self.k

    def local_exponent(self, gamma: Fraction | int | str) -> Fraction:
        """Exponent of |s(x_i)| in the gamma-deformed density: 1 - gamma + gamma l / k."""
        gamma = as_fraction(gamma)
        return 1 - gamma + gamma * self.order / self.k


def _log_det_at(space: SectionSpace, frozen: np.ndarray) -> float:
    log_abs, _ = slater_log_array(space, frozen, method="lu")
    return float(log_abs)


def vanishing_order(
    space: SectionSpace,
    section: CurveDivisor,
    index: int = 0,
    rng: np.random.Generator | None = None,
    root: int = 0,
    max_attempts: int = 8,
) -> VanishingOrder:
    """Order of vanishing of x -> det S(x_1, ..., x, ..., x_N) at a root of s.

    The i-th point approaches the root along a geodesic; the slope of log|det S|
    against log(distance) is fitted on two radius pairs, which must agree.
    """
    n = space.dimension
    if n < 2:
        raise ValueError("vanishing order needs N >= 2")
    if not 0 <= index < n:
        raise IndexError(f"point index {index} outside [0, {n})")
    if any(c != 1 for c in section.coefficients):
        raise ValueError("the section must have simple zeros")
    rng = rng or np.random.default_rng(0)
    center = section.points[root].as_array()
    logs = np.log(VANISHING_RADII)
    for attempt in range(max_attempts):
        frozen = random_points(rng, n)
        others = np.delete(frozen, index, axis=0)
        if np.min(chordal(others, center)) < FREEZE_SEPARATION:
            continue
        theta = rng.uniform(0, 2 * np.pi)
        values = []
        for r in VANISHING_RADII:
            frozen[index] = polar_offset(center, r**2, theta)
            values.append(_log_det_at(space, frozen))
        values = np.array(values)
        if not np.all(np.isfinite(values)):
            continue
        slopes = np.diff(values) / np.diff(logs)
        if abs(slopes[0] - slopes[1]) < SLOPE_AGREEMENT:
            order = int(round(slopes[1]))
            logger.debug("vanishing order %d at %s (slopes %s, attempt %d)", order, section.points[root].label(), slopes, attempt)
            return VanishingOrder(order, index, section.points[root].label(), (float(slopes[0]), float(slopes[1])), space.k)
    raise DegenerateFreeze(f"slope fit did not stabilize after {max_attempts} frozen configurations")


# --- genus 1 ---


@dataclass(frozen=True)
class Genus1Ledger:
    k: int
    dimension: int
    entries: tuple[tuple[str, Fraction], ...]

    @property
    def total(self) -> Fraction:
        return sum((e for _, e in self.entries), Fraction(0))

    @property
    def klt(self) -> bool:
        # |z|^e is locally integrable in one complex dimension iff e > -2
        return self.total > -2

    def to_record(self) -> dict:
        return {
            "k": self.k,
            "N": self.dimension,
            "entries": [{"factor": name, "exponent": str(e)} for name, e in self.entries],
            "total": str(self.total),
            "klt": self.klt,
        }


def genus1_exponent_bookkeeping(k: int, delta: Fraction | int | str = 0) -> Genus1Ledger:
    """Exponents of |z| at the marked point x of (E, -(1 + delta)/k x) on an elliptic curve.

    With delta = 0, N = 1 and det S is the unique section s, vanishing to order 1 at x.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    delta = as_fraction(delta)
    weight = -(1 + delta) / k
    pair = LogPairCurve(1, (SpherePoint(1 + 0j, 0j),), (weight,))
    n = dimension(pair, k)
    if n != 1:
        raise Unsupported(f"the ledger is written for N = 1, the perturbed bundle has N = {n}")
    entries = (
        ("|det S|^(-2/k), det S = s vanishing to order 1", Fraction(-2, k)),
        ("|s_Delta|^(-2), coefficient " + str(weight), -2 * weight),
    )
    ledger = Genus1Ledger(k, n, entries)
    logger.debug("genus-1 ledger at k = %d: total exponent %s", k, ledger.total)
    return ledger


# --- global lct ---


@dataclass
class GlobalLctReport:
    degree: int
    exact: Fraction
    sampled: list[Fraction] = field(default_factory=list)

    @property
    def minimum(self) -> Fraction:
        return min(self.sampled, default=self.exact)

    @property
    def consistent(self) -> bool:
        return all(s >= self.exact for s in self.sampled)

    def to_record(self) -> dict:
        return {
            "degree": self.degree,
            "exact": str(self.exact),
            "samples": len(self.sampled),
            "sampled_min": str(self.minimum),
            "consistent": self.consistent,
        }


def binary_form(roots: np.ndarray, multiplicities: Sequence[int]) -> np.ndarray:
    """Coefficients c_j (of z0^{e-j} z1^j) of prod_a (p_a1 z0 - p_a0 z1)^{m_a}."""
    coeffs = np.array([1 + 0j])
    for root, mult in zip(roots, multiplicities):
        linear = np.array([root[1], -root[0]], dtype=complex)
        for _ in range(mult):
            coeffs = np.convolve(coeffs, linear)
    return coeffs


def form_zeros(coeffs: np.ndarray, tol: float = ROOT_CLUSTER_TOL) -> list[tuple[np.ndarray, int]]:
    """Zeros of a binary form with multiplicities, clustering numerical roots by chordal distance.

    Cluster centers are normalized points; a zero at infinity comes from vanishing top coefficients.
    """
    coeffs = np.asarray(coeffs, dtype=complex)
    scale = np.max(np.abs(coeffs)) if len(coeffs) else 0.0
    if scale == 0:
        raise ValueError("the zero form has no isolated zeros")
    degree = len(coeffs) - 1
    small = np.abs(coeffs) < 1e-12 * scale
    top = degree
    while top > 0 and small[top]:
        top -= 1
    zeros = [(np.array([0j, 1 + 0j]), degree - top)] if top < degree else []
    if top == 0:
        return zeros
    roots = np.roots(coeffs[: top + 1][::-1])
    points = normalize_array(np.stack([np.ones_like(roots), roots], axis=-1))
    unassigned = list(range(len(points)))
    while unassigned:
        seed = unassigned.pop(0)
        cluster = [i for i in unassigned if chordal(points[i], points[seed]) < tol]
        unassigned = [i for i in unassigned if i not in cluster]
        center = normalize_array(np.stack([np.ones(1 + len(cluster)), roots[[seed, *cluster]]], axis=-1).mean(axis=0))
        zeros.append((center, 1 + len(cluster)))
    return zeros


def root_multiplicities(coeffs: np.ndarray, tol: float = ROOT_CLUSTER_TOL) -> list[int]:
    """Multiplicities of the zeros of a binary form."""
    return [m for _, m in form_zeros(coeffs, tol)]


def _random_composition(rng: np.random.Generator, total: int) -> list[int]:
    parts = int(rng.integers(1, total + 1))
    cuts = np.sort(rng.choice(np.arange(1, total), size=parts - 1, replace=False)) if parts > 1 else np.array([], int)
    bounds = np.concatenate([[0], cuts, [total]])
    return [int(b - a) for a, b in zip(bounds[:-1], bounds[1:])]


def _separated_roots(rng: np.random.Generator, count: int, tries: int = 200) -> np.ndarray:
    for _ in range(tries):
        roots = random_points(rng, count)
        if count == 1:
            return roots
        iu, ju = np.triu_indices(count, 1)
        if np.min(chordal(roots[iu], roots[ju])) > ROOT_SEPARATION:
            return roots
    raise DegenerateFreeze(f"could not place {count} roots at separation {ROOT_SEPARATION}")


def global_lct_probe(
    pair: LogPairCurve,
    degree: int,
    samples: int = 100,
    rng: np.random.Generator | None = None,
) -> GlobalLctReport:
    """lct(L) for a degree-e bundle on a curve is exactly 1/e (witness: a single e-fold zero).

    On P^1 random sections with random multiplicity patterns are factored numerically
    and each sampled threshold 1 / max multiplicity is checked against 1/e.
    """
    if degree < 1:
        raise ValueError("the bundle degree must be >= 1")
    report = GlobalLctReport(degree, Fraction(1, degree))
    if pair.genus != 0:
        return report
    rng = rng or np.random.default_rng(0)
    for _ in range(samples):
        multiplicities = _random_composition(rng, degree)
        roots = _separated_roots(rng, len(multiplicities))
        recovered = root_multiplicities(binary_form(roots, multiplicities))
        report.sampled.append(Fraction(1, max(recovered)))
    logger.info("global lct of degree %d: exact %s, sampled minimum %s", degree, report.exact, report.minimum)
    return report

