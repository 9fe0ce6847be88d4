"""Metropolis-Hastings sampling of the (deformed) Gibbs measure on (P^1)^N.

Proposals rotate a single point by an SU(2) element of geodesic size at most
step_scale about a uniformly random axis. The proposal is symmetric with respect
to the Fubini-Study reference measure, so acceptance only needs density ratios,
and those are computed incrementally from the moved point's pair terms.
"""
from __future__ import annotations

import logging
import math
from collections.abc import Iterator, Sequence
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from joblib import Parallel, delayed
from scipy.special import logsumexp

from .errors import ChainCorruption, UnstableTarget
from .geometry import bloch, chordal, geodesic_rotation, mobius_apply_array, normalize_array, random_points
from .pairs import CurveDivisor, LogPairCurve, as_fraction
from .stability import DeformedDensityParams, Verdict, log_density_array, probe_params
from .utils import seed_streams, worker_count

logger = logging.getLogger(__name__)

RECHECK_INTERVAL = 10_000
RECHECK_TOL = 1e-9
TUNE_INTERVAL = 100
TARGET_ACCEPTANCE = (0.2, 0.5)
MAX_STEP_SCALE = math.pi / 4
INITIAL_STEP_SCALE = 0.5
ACF_WINDOW = 5.0
MIN_BUDGET = 1_000
CSV_HEADER = ("chain", "step", "i", "z0_re", "z0_im", "z1_re", "z1_im")


# --- single-site Metropolis-Hastings ---


@dataclass(frozen=True)
class SiteTerms:
    """Per-point pieces of log rho: -2 alpha sum_j log chord(x_i, x_j) - 2 sum_a c_a log chord(x_i, p_a)."""

    pair_coeff: float
    marked: np.ndarray
    marked_coeffs: np.ndarray

    @classmethod
    def from_params(cls, params: DeformedDensityParams) -> "SiteTerms":
        terms = params.singular_terms
        if terms:
            marked = np.stack([p.as_array() for p, _ in terms])
            coeffs = np.array([2 * float(c) for _, c in terms])
        else:
            marked = np.zeros((0, 2), dtype=complex)
            coeffs = np.zeros(0)
        return cls(2 * float(params.alpha), marked, coeffs)

    def site(self, points: np.ndarray, i: int, candidate: np.ndarray) -> float:
        with np.errstate(divide="ignore"):
            total = 0.0
            if self.pair_coeff:
                others = np.delete(points, i, axis=0)
                total -= self.pair_coeff * float(np.sum(np.log(chordal(others, candidate))))
            if len(self.marked_coeffs):
                total -= float(np.dot(self.marked_coeffs, np.log(chordal(self.marked, candidate))))
        return total


@dataclass
class ChainState:
    """Current configuration of one chain.

    With `sites` set, proposals move a point to a uniformly chosen site instead of
    rotating it, and `site_index` tracks which site each point occupies.
    """

    points: np.ndarray
    log_density: float
    seed: int
    step_scale: float
    rng: np.random.Generator = field(repr=False)
    terms: SiteTerms = field(repr=False)
    steps: int = 0
    accepted: int = 0
    sites: np.ndarray | None = field(default=None, repr=False)
    site_index: np.ndarray | None = None

    @classmethod
    def start(
        cls,
        params: DeformedDensityParams,
        seed: int,
        rng: np.random.Generator | None = None,
        step_scale: float = INITIAL_STEP_SCALE,
        max_attempts: int = 100,
    ) -> "ChainState":
        """Chain at nu-uniform random points with finite density."""
        rng = rng if rng is not None else np.random.default_rng(seed)
        for _ in range(max_attempts):
            points = random_points(rng, params.dimension)
            value = float(log_density_array(params, points))
            if math.isfinite(value):
                return cls(points, value, seed, step_scale, rng, SiteTerms.from_params(params))
        raise ChainCorruption(f"no finite starting configuration after {max_attempts} draws")

    @classmethod
    def on_sites(
        cls,
        params: DeformedDensityParams,
        sites: np.ndarray,
        seed: int,
        max_attempts: int = 100,
    ) -> "ChainState":
        """Chain restricted to a finite set of sites, started at random distinct sites."""
        rng = np.random.default_rng(seed)
        sites = normalize_array(np.asarray(sites))
        if len(sites) < params.dimension:
            raise ValueError(f"{params.dimension} points need at least as many sites, got {len(sites)}")
        for _ in range(max_attempts):
            index = rng.choice(len(sites), size=params.dimension, replace=False)
            points = sites[index].copy()
            value = float(log_density_array(params, points))
            if math.isfinite(value):
                return cls(points, value, seed, 0.0, rng, SiteTerms.from_params(params), sites=sites, site_index=index)
        raise ChainCorruption(f"no finite starting configuration on the sites after {max_attempts} draws")


def acceptance_log_probability(log_current: float, log_proposed: float) -> float:
    """log of the Metropolis acceptance probability for a symmetric proposal."""
    if not math.isfinite(log_proposed):
        return -math.inf
    return min(0.0, log_proposed - log_current)


def detailed_balance_residual(params: DeformedDensityParams, points: np.ndarray, i: int, candidate: np.ndarray) -> float:
    """|log pi(x) a(x->y) - log pi(y) a(y->x)| for the move of point i; q(x->y) = q(y->x) cancels."""
    points = normalize_array(points)
    moved = points.copy()
    moved[i] = normalize_array(candidate)
    log_x = float(log_density_array(params, points))
    log_y = float(log_density_array(params, moved))
    forward = log_x + acceptance_log_probability(log_x, log_y)
    backward = log_y + acceptance_log_probability(log_y, log_x)
    return abs(forward - backward)


def verify_state(state: ChainState, params: DeformedDensityParams) -> None:
    fresh = float(log_density_array(params, state.points))
    drift = abs(fresh - state.log_density)
    if not drift <= RECHECK_TOL * max(1.0, abs(fresh)):
        raise ChainCorruption(f"stored log density {state.log_density!r} drifted from {fresh!r} at step {state.steps}")
    state.log_density = fresh


def mh_step(state: ChainState, params: DeformedDensityParams) -> ChainState:
    """One Metropolis-Hastings move of a single point; updates the state in place."""
    rng = state.rng
    i = int(rng.integers(params.dimension))
    site = None
    if state.sites is None:
        g = geodesic_rotation(rng, state.step_scale * rng.random())
        candidate = normalize_array(g @ state.points[i])
    else:
        site = int(rng.integers(len(state.sites)))
        candidate = state.sites[site]
    new_site = state.terms.site(state.points, i, candidate)
    state.steps += 1
    if math.isfinite(new_site):
        old_site = state.terms.site(state.points, i, state.points[i])
        log_acc = acceptance_log_probability(old_site, new_site)
        if rng.random() < math.exp(log_acc):
            state.points[i] = candidate
            state.log_density += new_site - old_site
            state.accepted += 1
            if site is not None:
                state.site_index[i] = site
    if state.steps % RECHECK_INTERVAL == 0:
        verify_state(state, params)
    return state


# --- chains ---


def autocorrelation_time(series: np.ndarray, window: float = ACF_WINDOW) -> float:
    """Integrated autocorrelation time from the FFT autocorrelation with a self-consistent window."""
    x = np.asarray(series, dtype=float)
    n = len(x)
    if n < 4 or np.var(x) == 0:
        return 1.0
    f = np.fft.rfft(x - x.mean(), n=2 * n)
    acf = np.fft.irfft(f * np.conj(f))[:n]
    acf = acf / acf[0]
    taus = 2 * np.cumsum(acf) - 1
    for m in range(1, n):
        if m >= window * taus[m]:
            return max(1.0, float(taus[m]))
    return max(1.0, float(taus[-1]))


@dataclass
class SampleBatch:
    """Thinned configurations of one chain with its diagnostics."""

    seed: int
    stream: int
    points: np.ndarray
    steps: np.ndarray
    acceptance_rate: float
    step_scale: float
    burn_in: int
    thin: int
    autocorrelation: dict[str, float]
    ess: dict[str, float]

    @property
    def n_kept(self) -> int:
        return len(self.points)

    @property
    def min_ess(self) -> float:
        return min(self.ess.values())

    def csv_rows(self, chain: int) -> Iterator[tuple]:
        for config, step in zip(self.points, self.steps):
            for i, (z0, z1) in enumerate(config):
                yield (chain, int(step), i, z0.real, z0.imag, z1.real, z1.imag)

    def to_record(self) -> dict:
        return {
            "seed": self.seed,
            "stream": self.stream,
            "kept": self.n_kept,
            "acceptance_rate": self.acceptance_rate,
            "step_scale": self.step_scale,
            "burn_in": self.burn_in,
            "thin": self.thin,
            "autocorrelation": dict(self.autocorrelation),
            "ess": dict(self.ess),
        }


def _tune(step_scale: float, rate: float) -> float:
    low, high = TARGET_ACCEPTANCE
    if rate < low:
        return step_scale * 0.7
    if rate > high:
        return min(step_scale * 1.4, MAX_STEP_SCALE)
    return step_scale


def check_target(params: DeformedDensityParams, force: bool = False) -> None:
    """Refuse targets with a non-integrable collision stratum unless forced."""
    report = probe_params(params, budget=0)
    if report.verdict is Verdict.UNSTABLE_WITNESS:
        witness = report.witnesses[0]
        message = f"{params.describe()} is not normalizable: {witness.stratum.descriptor} has E = {witness.exponent}"
        if not force:
            raise UnstableTarget(message)
        logger.warning("sampling anyway (forced): %s", message)


def sample_params(params: DeformedDensityParams, budget: int, seed: int, stream: int = 0) -> SampleBatch:
    if budget < MIN_BUDGET:
        raise ValueError(f"budget must be at least {MIN_BUDGET} steps, got {budget}")
    rng = seed_streams(seed, stream + 1)[stream]
    state = ChainState.start(params, seed, rng)
    n = params.dimension
    burn_in = budget // 10

    window_start = 0
    for _ in range(burn_in):
        mh_step(state, params)
        if state.steps % TUNE_INTERVAL == 0:
            rate = (state.accepted - window_start) / TUNE_INTERVAL
            state.step_scale = _tune(state.step_scale, rate)
            window_start = state.accepted
    logger.debug("seed %d stream %d: step scale frozen at %.4g", seed, stream, state.step_scale)

    accepted_before = state.accepted
    recorded, steps = [], []
    for step in range(budget - burn_in):
        mh_step(state, params)
        if (step + 1) % n == 0:
            recorded.append(state.points.copy())
            steps.append(state.steps)
    acceptance = (state.accepted - accepted_before) / (budget - burn_in)

    recorded = np.array(recorded)
    steps = np.array(steps)
    means = bloch(recorded).mean(axis=1)
    autocorrelation = {name: autocorrelation_time(means[:, j]) for j, name in enumerate("xyz")}
    thin = max(1, math.ceil(max(autocorrelation.values())))
    kept = recorded[::thin]
    ess = {name: min(len(recorded) / tau, float(len(kept))) for name, tau in autocorrelation.items()}
    logger.info(
        "seed %d stream %d: acceptance %.3f, thin %d, kept %d, min ESS %.1f",
        seed, stream, acceptance, thin, len(kept), min(ess.values()),
    )
    return SampleBatch(
        seed=seed,
        stream=stream,
        points=kept,
        steps=steps[::thin],
        acceptance_rate=acceptance,
        step_scale=state.step_scale,
        burn_in=burn_in,
        thin=thin,
        autocorrelation=autocorrelation,
        ess=ess,
    )


def run_chain(
    pair: LogPairCurve,
    k: Fraction | int | str,
    gamma: Fraction | int | str = 1,
    budget: int = 100_000,
    seed: int = 0,
    force: bool = False,
    section: CurveDivisor | None = None,
    stream: int = 0,
) -> SampleBatch:
    """Sample the Gibbs measure of the pair at level k; 10% burn-in, thinned by the autocorrelation time."""
    params = DeformedDensityParams(pair, as_fraction(k), as_fraction(gamma), section)
    check_target(params, force)
    return sample_params(params, budget, seed, stream)


def run_chains(
    pair: LogPairCurve,
    k: Fraction | int | str,
    gamma: Fraction | int | str = 1,
    budget: int = 100_000,
    seed: int = 0,
    n_chains: int = 2,
    force: bool = False,
    n_jobs: int | None = None,
) -> list[SampleBatch]:
    """Independent chains on streams 0..n_chains-1 of the seed, returned in stream order."""
    params = DeformedDensityParams(pair, as_fraction(k), as_fraction(gamma))
    check_target(params, force)
    jobs = worker_count(n_jobs) if n_chains > 1 else 1
    return Parallel(n_jobs=jobs)(delayed(sample_params)(params, budget, seed, s) for s in range(n_chains))


# --- push-forward histograms ---


@dataclass(frozen=True)
class Histogram:
    """Empirical 1-point measure on equal-FS-mass cells (Bloch-z bands x azimuth sectors)."""

    z_edges: np.ndarray
    phi_edges: np.ndarray
    mass: np.ndarray
    error: np.ndarray
    n_points: int
    n_eff: float

    @property
    def cell_mass(self) -> float:
        return 1.0 / self.mass.size

    def to_record(self) -> dict:
        return {
            "z_edges": [float(v) for v in self.z_edges],
            "phi_edges": [float(v) for v in self.phi_edges],
            "mass": self.mass.tolist(),
            "error": self.error.tolist(),
            "n_points": self.n_points,
            "n_eff": self.n_eff,
        }


def _as_batches(batch: SampleBatch | Sequence[SampleBatch]) -> list[SampleBatch]:
    return [batch] if isinstance(batch, SampleBatch) else list(batch)


def cell_index(points: np.ndarray, bands: int, sectors: int) -> tuple[np.ndarray, np.ndarray]:
    coords = bloch(points)
    band = np.clip(((coords[..., 2] + 1) / 2 * bands).astype(int), 0, bands - 1)
    phi = np.mod(np.arctan2(coords[..., 1], coords[..., 0]), 2 * np.pi)
    sector = np.clip((phi / (2 * np.pi) * sectors).astype(int), 0, sectors - 1)
    return band, sector


def pushforward_histogram(
    batch: SampleBatch | Sequence[SampleBatch],
    bands: int = 4,
    sectors: int = 6,
    transform: np.ndarray | None = None,
    point_index: int | None = None,
) -> Histogram:
    """Histogram of all pooled points (or of point `point_index` only).

    Equal Bloch-z widths have equal FS area, so every cell carries mass 1/(bands*sectors)
    under nu/pi. With `transform` g the cells are transported to g(cell). Error bars are
    sqrt(p(1-p)/n_eff) with n_eff the summed minimal configuration ESS, which bounds the
    variance of pooled indicator averages from above.
    """
    batches = _as_batches(batch)
    if not batches or any(b.n_kept == 0 for b in batches):
        raise ValueError("histogram of an empty sample batch")
    points = np.concatenate([b.points for b in batches])
    if point_index is not None:
        points = points[:, point_index : point_index + 1]
    points = points.reshape(-1, 2)
    if transform is not None:
        points = mobius_apply_array(np.linalg.inv(np.asarray(transform, dtype=complex)), points)
    band, sector = cell_index(points, bands, sectors)
    counts = np.bincount(band * sectors + sector, minlength=bands * sectors).reshape(bands, sectors)
    mass = counts / counts.sum()
    n_eff = float(sum(b.min_ess for b in batches))
    error = np.sqrt(mass * (1 - mass) / n_eff)
    return Histogram(
        z_edges=np.linspace(-1, 1, bands + 1),
        phi_edges=np.linspace(0, 2 * np.pi, sectors + 1),
        mass=mass,
        error=error,
        n_points=len(points),
        n_eff=n_eff,
    )


def histogram_discrepancy(a: Histogram, b: Histogram) -> np.ndarray:
    """Per-cell |a - b| in units of the combined error."""
    combined = np.sqrt(a.error**2 + b.error**2)
    return np.abs(a.mass - b.mass) / np.where(combined > 0, combined, np.inf)


def marked_mass(batch: SampleBatch | Sequence[SampleBatch], centers: np.ndarray, radius: float) -> tuple[float, float]:
    """Fraction of pooled points within chordal distance `radius` of any centre, with its error."""
    batches = _as_batches(batch)
    points = np.concatenate([b.points for b in batches]).reshape(-1, 2)
    centers = normalize_array(np.asarray(centers))
    near = np.any(chordal(points[:, None, :], centers[None, :, :]) < radius, axis=1)
    p = float(np.mean(near))
    n_eff = float(sum(b.min_ess for b in batches))
    return p, math.sqrt(p * (1 - p) / n_eff)


# --- finite toy targets ---


def discretize_density(params: DeformedDensityParams, sites: np.ndarray, cap_singular: bool = True) -> np.ndarray:
    """log rho on every N-tuple of sites.

    Coincident tuples get the largest finite value plus log 2, or -inf (zero mass)
    when `cap_singular` is off, which matches a chain that rejects them.
    """
    sites = normalize_array(np.asarray(sites))
    n, m = params.dimension, len(sites)
    grid = np.indices((m,) * n).reshape(n, -1).T
    values = log_density_array(params, sites[grid])
    finite = np.isfinite(values)
    fill = np.max(values[finite]) + math.log(2) if cap_singular else -math.inf
    values = np.where(finite, values, fill)
    return values.reshape((m,) * n)


def run_site_chain(
    params: DeformedDensityParams,
    sites: np.ndarray,
    n_steps: int,
    seed: int = 0,
    burn_in: int = 0,
) -> np.ndarray:
    """Visit counts over site tuples of `mh_step` restricted to `sites`, after burn-in."""
    state = ChainState.on_sites(params, sites, seed)
    counts = np.zeros((len(state.sites),) * params.dimension, dtype=np.int64)
    for step in range(n_steps):
        mh_step(state, params)
        if step >= burn_in:
            counts[tuple(state.site_index)] += 1
    logger.debug("site chain: acceptance %.3f over %d steps", state.accepted / max(1, state.steps), state.steps)
    return counts


def run_discrete_chains(
    log_target: np.ndarray,
    n_chains: int,
    n_steps: int,
    rng: np.random.Generator,
    burn_in: int = 0,
) -> np.ndarray:
    """Vectorized single-coordinate MH on a product of finite sets; returns visit counts after burn-in."""
    log_target = np.asarray(log_target, dtype=float)
    shape = np.array(log_target.shape)
    dims = len(shape)
    rows = np.arange(n_chains)
    state = np.stack([rng.integers(0, s, n_chains) for s in shape], axis=1)
    counts = np.zeros(log_target.size, dtype=np.int64)
    current = log_target[tuple(state.T)]
    for step in range(n_steps):
        coord = rng.integers(0, dims, n_chains)
        proposal = state.copy()
        proposal[rows, coord] = rng.integers(0, shape[coord])
        proposed = log_target[tuple(proposal.T)]
        accept = np.log(rng.random(n_chains)) < proposed - current
        state[accept] = proposal[accept]
        current = np.where(accept, proposed, current)
        if step >= burn_in:
            counts += np.bincount(np.ravel_multi_index(tuple(state.T), log_target.shape), minlength=log_target.size)
    return counts.reshape(log_target.shape)


def exact_distribution(log_target: np.ndarray) -> np.ndarray:
    log_target = np.asarray(log_target, dtype=float)
    return np.exp(log_target - logsumexp(log_target))


def total_variation(p: np.ndarray, q: np.ndarray, exchangeable: bool = False) -> float:
    """Total variation of two distributions on the same product space.

    With `exchangeable` both are first pushed forward to multisets (sorted tuples).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    p, q = p / p.sum(), q / q.sum()
    if exchangeable:
        idx = np.sort(np.indices(p.shape).reshape(p.ndim, -1), axis=0)
        key = np.ravel_multi_index(tuple(idx), p.shape)
        p = np.bincount(key, weights=p.ravel(), minlength=p.size)
        q = np.bincount(key, weights=q.ravel(), minlength=q.size)
    return 0.5 * float(np.sum(np.abs(p - q)))
