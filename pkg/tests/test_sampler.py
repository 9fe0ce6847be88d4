import math

import numpy as np
import pytest

from gibbslab.ding import pair_grid
from gibbslab.errors import ChainCorruption, UnstableTarget
from gibbslab.geometry import bloch, chordal, normalize_array, random_points
from gibbslab.pairs import LogPairCurve
from gibbslab.sampler import (
    CSV_HEADER,
    ChainState,
    autocorrelation_time,
    detailed_balance_residual,
    discretize_density,
    exact_distribution,
    histogram_discrepancy,
    marked_mass,
    mh_step,
    pushforward_histogram,
    run_chain,
    run_chains,
    run_discrete_chains,
    run_site_chain,
    sample_params,
    total_variation,
    verify_state,
)
from gibbslab.stability import DeformedDensityParams

# z -> e^{2 pi i / 3} z
ORDER_THREE = np.diag([np.exp(-1j * np.pi / 3), np.exp(1j * np.pi / 3)])


@pytest.fixture(scope="module")
def triple_half_chains(triple_half):
    return run_chains(triple_half, 2, 1, budget=20_000, seed=0, n_chains=2, n_jobs=1)


def test_uniform_target_accepts_everything(bare):
    batch = run_chain(bare, 1, gamma=0, budget=2_000, seed=3)
    assert batch.acceptance_rate == 1.0
    assert batch.step_scale == pytest.approx(math.pi / 4)


def test_detailed_balance(triple_half, rng):
    params = DeformedDensityParams(triple_half, 2)
    for _ in range(100):
        points = random_points(rng, 2)
        candidate = random_points(rng, 1)[0]
        assert detailed_balance_residual(params, points, int(rng.integers(2)), candidate) < 1e-12


def test_incremental_density_stays_exact(triple_half):
    params = DeformedDensityParams(triple_half, 4, "1/2")
    state = ChainState.start(params, seed=11)
    for _ in range(5_000):
        mh_step(state, params)
    verify_state(state, params)
    assert state.steps == 5_000


def test_corrupted_state_is_detected(triple_half):
    params = DeformedDensityParams(triple_half, 2)
    state = ChainState.start(params, seed=1)
    state.log_density += 1.0
    with pytest.raises(ChainCorruption):
        verify_state(state, params)


def test_discrete_chain_matches_exact_distribution(triple_half, rng):
    params = DeformedDensityParams(triple_half, 2)
    log_target = discretize_density(params, random_points(rng, 5))
    assert log_target.shape == (5, 5)
    assert np.all(np.isfinite(log_target))
    counts = run_discrete_chains(log_target, 2_000, 1_000, rng, burn_in=50)
    assert counts.sum() == 2_000 * 950
    assert total_variation(counts, exact_distribution(log_target), exchangeable=True) < 0.02


def test_site_chain_matches_exact_distribution(triple_half, rng):
    params = DeformedDensityParams(triple_half, 4)
    sites = random_points(rng, 4)
    exact = exact_distribution(discretize_density(params, sites, cap_singular=False))
    counts = run_site_chain(params, sites, 20_000, seed=1)
    assert counts.sum() == 20_000
    assert np.all(counts[exact == 0] == 0)
    assert total_variation(counts, exact, exchangeable=True) < 0.05
    with pytest.raises(ValueError):
        ChainState.on_sites(params, sites[:2], seed=0)


@pytest.mark.slow
def test_mh_step_on_a_discretized_toy_target(triple_half, rng):
    params = DeformedDensityParams(triple_half, 4)
    sites = random_points(rng, 12)
    exact = exact_distribution(discretize_density(params, sites, cap_singular=False))
    counts = run_site_chain(params, sites, 1_000_000, seed=7, burn_in=10_000)
    assert counts.shape == (12, 12, 12)
    assert np.all(counts[exact == 0] == 0)
    assert total_variation(counts, exact, exchangeable=True) < 0.02


def test_total_variation_on_multisets():
    p = np.array([[0.0, 1.0], [0.0, 0.0]])
    q = np.array([[0.0, 0.0], [1.0, 0.0]])
    assert total_variation(p, q) == pytest.approx(1.0)
    assert total_variation(p, q, exchangeable=True) == pytest.approx(0.0)


def test_unstable_target_is_refused(bare):
    with pytest.raises(UnstableTarget):
        run_chain(bare, 1, budget=1_000)
    batch = run_chain(bare, 1, budget=1_000, force=True)
    assert batch.n_kept > 0


def test_budget_floor(triple_half):
    with pytest.raises(ValueError):
        sample_params(DeformedDensityParams(triple_half, 2), 999, 0)


def test_reference_moments_at_gamma_zero(bare):
    batch = run_chain(bare, 1, gamma=0, budget=30_000, seed=5)
    z = bloch(batch.points.reshape(-1, 2))[:, 2]
    se = math.sqrt(1 / 3 / batch.min_ess)
    assert abs(z.mean()) < 3 * se
    assert abs(np.mean(z**2) - 1 / 3) < 4 * math.sqrt(4 / 45 / batch.min_ess)


def test_same_seed_same_chain(triple_half):
    a = run_chain(triple_half, 2, budget=2_000, seed=42)
    b = run_chain(triple_half, 2, budget=2_000, seed=42)
    np.testing.assert_array_equal(a.points, b.points)
    assert a.thin == b.thin
    c = run_chain(triple_half, 2, budget=2_000, seed=42, stream=1)
    assert not np.array_equal(a.points[:1], c.points[:1])


def test_independent_seeds_agree(triple_half, triple_half_chains):
    other = run_chains(triple_half, 2, 1, budget=20_000, seed=1, n_chains=2, n_jobs=1)
    a = pushforward_histogram(triple_half_chains, bands=2, sectors=3)
    b = pushforward_histogram(other, bands=2, sectors=3)
    assert a.mass.sum() == pytest.approx(1.0)
    assert float(np.sum(histogram_discrepancy(a, b) ** 2)) < 30


def test_order_three_symmetry(triple_half_chains):
    plain = pushforward_histogram(triple_half_chains, bands=2, sectors=3)
    rotated = pushforward_histogram(triple_half_chains, bands=2, sectors=3, transform=ORDER_THREE)
    assert np.max(histogram_discrepancy(plain, rotated)) < 3.5


def test_points_are_exchangeable(triple_half_chains):
    first = pushforward_histogram(triple_half_chains, bands=2, sectors=3, point_index=0)
    second = pushforward_histogram(triple_half_chains, bands=2, sectors=3, point_index=1)
    assert np.max(histogram_discrepancy(first, second)) < 3.5


def test_empty_histogram_is_rejected():
    with pytest.raises(ValueError):
        pushforward_histogram([])


def test_cone_points_attract_mass(cube_roots):
    """At gamma = 0 the points are independent with law prod chordal^{-2w} nu, so the cap mass is known."""
    centers = normalize_array(np.array([[1, complex(c)] for c in cube_roots]))
    radius = 0.3
    exact, sampled = [], []
    for w in ("1/5", "2/5", "3/5"):
        pair = LogPairCurve.from_chart(cube_roots, [w, w, w])
        grid = pair_grid(pair, 64)
        near = np.any(chordal(grid.nodes[:, None, :], centers[None, :, :]) < radius, axis=1)
        exact.append(float(np.sum(grid.weights[near]) / np.sum(grid.weights)))
        sampled.append(marked_mass(run_chain(pair, 5, gamma=0, budget=20_000, seed=2), centers, radius))
    assert exact[0] < exact[1] < exact[2]
    for value, (p, err) in zip(exact, sampled):
        assert abs(p - value) < 4 * err + 0.02


def test_autocorrelation_time(rng):
    assert autocorrelation_time(rng.normal(size=20_000)) < 1.3
    x = np.empty(100_000)
    x[0] = 0.0
    noise = rng.normal(size=len(x))
    for i in range(1, len(x)):
        x[i] = 0.9 * x[i - 1] + noise[i]
    assert 10 < autocorrelation_time(x) < 30
    assert autocorrelation_time(np.ones(50)) == 1.0


def test_csv_rows(triple_half):
    batch = run_chain(triple_half, 2, budget=2_000, seed=0)
    rows = list(batch.csv_rows(3))
    assert len(rows) == 2 * batch.n_kept
    assert all(len(r) == len(CSV_HEADER) and r[0] == 3 for r in rows)
    assert set(batch.to_record()) >= {"acceptance_rate", "thin", "ess", "autocorrelation"}
