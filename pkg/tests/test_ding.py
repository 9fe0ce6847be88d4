import numpy as np
import pytest

from gibbslab.ding import (
    DingSettings,
    HermitianMetricMatrix,
    coercivity_probe,
    ding_functional,
    ding_gradient,
    euler_ray,
    harmonicity_probe,
    inequality_check,
    j_functional,
    metric_from_params,
    metric_params,
    minimize_ding,
    minimize_ding_restarts,
    pair_grid,
    random_metric,
    t_operator,
)
from gibbslab.errors import NotPositiveDefinite, Unsupported
from gibbslab.flows import VectorFieldSL2, pullback_metric
from gibbslab.geometry import random_su2
from gibbslab.pairs import LogPairCurve
from gibbslab.sections import SectionSpace

RAY_TAUS = (0.0, 0.25, 0.5, 0.75, 1.0)


@pytest.fixture(scope="module")
def deformed(triple_half):
    """triple-half at k = 4: N = 3, run with gamma = 1/2."""
    return SectionSpace.for_pair(triple_half, 4), pair_grid(triple_half, 16)


def test_metric_must_be_positive_definite():
    with pytest.raises(NotPositiveDefinite):
        HermitianMetricMatrix(np.diag([1.0, -1.0]))
    with pytest.raises(ValueError):
        HermitianMetricMatrix(np.ones((2, 3)))


def test_metric_parameters_round_trip(rng):
    H = random_metric(rng, 4)
    np.testing.assert_allclose(metric_from_params(metric_params(H), 4).entries, H.entries, atol=1e-12)
    assert H.det_normalized().logdet == pytest.approx(0.0, abs=1e-12)


def test_pair_grid_rejects_infinite_mass():
    with pytest.raises(Unsupported):
        pair_grid(LogPairCurve.from_chart(["0", "inf"], ["1", "1"]), 16)


def test_ding_functional_is_gauge_invariant(deformed, rng):
    space, grid = deformed
    H = random_metric(rng, space.dimension)
    base = ding_functional(H, 0.5, space, grid)
    for c in (-1.3, 0.4, 2.0):
        assert abs(ding_functional(H.scaled(c), 0.5, space, grid) - base) < 1e-9
    with pytest.raises(ValueError):
        ding_functional(H, 0.0, space, grid)


@pytest.mark.parametrize("k", ["1/2", 1, 2])
def test_unitary_pullback_preserves_ding(bare, rng, k):
    space = SectionSpace.for_pair(bare, k)
    assert space.dimension in (2, 3, 5)
    grid = pair_grid(bare, 96)
    for _ in range(50):
        H = random_metric(rng, space.dimension, scale=0.3)
        base = ding_functional(H, 1.0, space, grid)
        moved = HermitianMetricMatrix(pullback_metric(H.entries, random_su2(rng), space.degree))
        assert moved.logdet == pytest.approx(H.logdet, abs=1e-10)
        assert abs(ding_functional(moved, 1.0, space, grid) - base) < 1e-10


def test_gradient_matches_finite_differences(deformed, rng):
    space, grid = deformed
    h = 1e-5
    for _ in range(10):
        H = random_metric(rng, space.dimension, scale=0.3)
        params = metric_params(H)
        grad = ding_gradient(H, 0.5, space, grid)
        fd = np.empty_like(params)
        for i in range(len(params)):
            step = np.zeros_like(params)
            step[i] = h
            up = ding_functional(metric_from_params(params + step, space.dimension), 0.5, space, grid)
            down = ding_functional(metric_from_params(params - step, space.dimension), 0.5, space, grid)
            fd[i] = (up - down) / (2 * h)
        assert np.linalg.norm(grad - fd) <= 1e-5 * np.linalg.norm(fd)


def test_minimizer_is_a_fixed_point(deformed):
    space, grid = deformed
    settings = DingSettings(max_iterations=2000, rtol=1e-15)
    report = minimize_ding(0.5, space, grid, settings)
    assert report.converged
    assert report.grad_norm < 1e-6
    assert report.metric.logdet == pytest.approx(0.0, abs=1e-9)
    np.testing.assert_allclose(t_operator(report.metric, 0.5, space, grid).entries, report.metric.entries, atol=1e-5)
    rows = report.trace_rows()
    assert rows[0]["iter"] == 0
    assert rows[-1]["D"] == pytest.approx(report.value)
    assert all(b["D"] <= a["D"] + 1e-12 for a, b in zip(rows, rows[1:]))


def test_restarts_agree(deformed):
    space, grid = deformed
    settings = DingSettings(max_iterations=2000, rtol=1e-15, restarts=3)
    reports = minimize_ding_restarts(0.5, space, grid, settings, seed=7, n_jobs=1)
    values = [r.value for r in reports]
    assert len(values) == 3
    assert max(values) - min(values) < 1e-5


def test_bare_sphere_is_noncoercive(bare):
    space = SectionSpace.for_pair(bare, 1)
    report = minimize_ding(1.0, space, pair_grid(bare, 32))
    assert report.converged
    assert report.noncoercive


def test_triple_half_is_not_flagged(triple_half):
    space = SectionSpace.for_pair(triple_half, 2)
    report = minimize_ding(1.0, space, pair_grid(triple_half, 24))
    assert not report.noncoercive


def test_harmonicity_of_the_zero_field(bare):
    space = SectionSpace.for_pair(bare, 1)
    report = harmonicity_probe(VectorFieldSL2.zero(), HermitianMetricMatrix.identity(3), space, pair_grid(bare, 24))
    assert report.laplacian_residual < 1e-12
    assert report.formula_residual == 0
    assert report.integral_residual == 0


def test_harmonicity_along_the_euler_flow(bare, rng):
    space = SectionSpace.for_pair(bare, 1)
    grid = pair_grid(bare, 32)
    for H0 in (HermitianMetricMatrix.identity(3), random_metric(rng, 3, scale=0.2)):
        report = harmonicity_probe(VectorFieldSL2.euler(), H0, space, grid)
        assert report.laplacian_residual < 1e-5
        assert report.formula_residual < 1e-7
        assert report.integral_residual < 1e-7


def test_euler_ray_falls_on_the_bare_sphere(bare):
    space = SectionSpace.for_pair(bare, 1)
    grid = pair_grid(bare, 32)
    (row,) = coercivity_probe([0.1], [euler_ray(space.degree)], space, grid, taus=RAY_TAUS, n_jobs=1)
    assert row.noncoercive
    assert row.profile[-1] < row.profile[0]


def test_euler_ray_is_bounded_for_a_stable_pair(triple_half):
    space = SectionSpace.for_pair(triple_half, 2)
    grid = pair_grid(triple_half, 24)
    rows = coercivity_probe([0.05, 0.1], [euler_ray(space.degree)], space, grid, taus=RAY_TAUS, n_jobs=1)
    assert [r.epsilon for r in rows] == [0.05, 0.1]
    assert not any(r.noncoercive for r in rows)


def test_j_functional_on_the_euler_ray(bare):
    space = SectionSpace.for_pair(bare, 1)
    grid = pair_grid(bare, 32)
    ray = euler_ray(space.degree)
    values = [j_functional(ray.metric(tau), space, grid) for tau in RAY_TAUS]
    np.testing.assert_allclose(np.diff(values), 0.5, atol=1e-4)


def test_settings_round_trip():
    settings = DingSettings(max_iterations=50, rtol=1e-9)
    assert DingSettings.from_dict(settings.to_dict()) == settings
    assert DingSettings.from_dict(None) == DingSettings()


@pytest.mark.slow
@pytest.mark.parametrize(("k", "gamma"), [(2, 1), (2, "1/2"), (4, 1)])
def test_partition_inequality_holds(triple_half, k, gamma):
    report = inequality_check(k, gamma, triple_half, budget=20_000, seeds=(0, 1), resolution=24, n_jobs=1)
    assert report.holds
    assert report.to_record()["gap"] == pytest.approx(report.rhs - report.lhs)
