import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from gibbslab.errors import BadStratum, EmptyDivisor, NotALineBundle, Unsupported, WrongGenus
from gibbslab.geometry import SpherePoint, polar_offset, random_points
from gibbslab.pairs import CurveDivisor, LogPairCurve
from gibbslab.sections import SectionSpace
from gibbslab.stability import (
    DeformedDensityParams,
    PartitionMethod,
    Verdict,
    binary_form,
    collision_exponent,
    deformed_log_density,
    enumerate_strata,
    form_zeros,
    genus1_exponent_bookkeeping,
    gibbs_stable_probe,
    global_lct_probe,
    is_klt_divisor,
    lct_curve_divisor,
    log_density_array,
    pair_reference_mass,
    parameterized_stability,
    partition_estimate,
    probe_params,
    root_multiplicities,
    stratum_tail_index,
    vanishing_order,
    weight_condition,
)

# weight vectors with 2 - sum(w) = p / q; the smallest level is k = q
WEIGHT_VECTORS = [
    ("1/2", "1/2", "1/2"),
    ("1/3", "1/3"),
    ("2/3", "1/3", "1/3"),
    ("1/5", "1/5", "1/5"),
    ("3/4", "1/4", "1/2"),
    ("1/2", "1/4"),
    ("5/6", "1/6", "1/3"),
    ("1/2", "1/2", "1/4", "1/4"),
    ("9/10", "1/10", "1/2"),
    ("1/2", "1/2"),
    ("3/5", "1/5"),
]

SPREAD_POINTS = ["0", "inf", "1", "-1", "1j", "-1j"]
FAR_POINTS = ["3", "-2j", "-3+1j", "0.4-0.3j", "5j", "-0.2+0.6j", "2-2j", "-1.5"]
GRID_WEIGHTS = [Fraction(i, 10) for i in range(1, 10)]


def _pair(weights) -> LogPairCurve:
    return LogPairCurve.from_chart(SPREAD_POINTS[: len(weights)], weights)


def _scaling_exponent(params: DeformedDensityParams, m: int, location: int | None) -> float:
    """Fitted exponent of volume times density for m points shrinking onto one centre."""
    n = params.dimension
    if location is None:
        center = SpherePoint.from_chart("1.7+1.1j").as_array()
    else:
        center = params.local_terms[location][0].as_array()
    radii = (1 + np.arange(m)) / m
    angles = 0.3 + 2 * np.pi * np.arange(m) / m
    others = np.array([SpherePoint.from_chart(z).as_array() for z in FAR_POINTS[: n - m]]).reshape(-1, 2)
    scales = np.geomspace(1e-3, 1e-5, 5)
    logs = []
    for eps in scales:
        cluster = polar_offset(center, (eps * radii) ** 2, angles)
        logs.append(float(log_density_array(params, np.concatenate([cluster, others]))))
    slope = np.polyfit(np.log(scales), logs, 1)[0]
    return slope + (2 * m if location is not None else 2 * (m - 1))


def test_lct_is_exact_on_a_rational_grid():
    for q in range(1, 13):
        for p in range(1, 2 * q + 1):
            c = Fraction(p, q)
            divisor = CurveDivisor.from_pairs([("0", c), ("1", c / 2)])
            assert lct_curve_divisor(divisor) == 1 / c
            assert is_klt_divisor(divisor) == (c < 1)


def test_lct_edge_cases():
    with pytest.raises(EmptyDivisor):
        lct_curve_divisor(CurveDivisor(()))
    assert lct_curve_divisor(CurveDivisor.from_pairs([("0", "-1/2"), ("inf", 0)])) == math.inf
    toric = CurveDivisor.from_pairs([("0", 1), ("inf", 1)])
    assert lct_curve_divisor(toric) == 1
    assert not is_klt_divisor(toric)


def test_weight_condition(triple_half, bare):
    assert weight_condition(triple_half) is True
    assert weight_condition(bare) is None
    assert weight_condition(_pair(["1/2", "1/4"])) is False
    assert weight_condition(_pair(["1", "1"])) is False
    assert weight_condition(_pair(["1/3", "1/3", "1/3"])) is True
    with pytest.raises(WrongGenus):
        weight_condition(LogPairCurve(1, (SpherePoint(1 + 0j, 0j),), (Fraction(-1, 2),)))


@pytest.mark.parametrize("weights", WEIGHT_VECTORS)
def test_strata_agree_with_the_weight_criterion(weights):
    pair = _pair(weights)
    q = pair.anticanonical_degree().denominator
    for k in (q, 2 * q):
        params = DeformedDensityParams(pair, k)
        n = params.dimension
        if n > 12:
            continue
        integrable = all(r.integrable for r in enumerate_strata(params))
        assert integrable == (weight_condition(pair) and n < 2 * k)


def test_one_cluster_condition_on_the_weight_grid():
    checked = 0
    for weights in itertools.product(GRID_WEIGHTS, repeat=3):
        total = sum(weights)
        if total >= 2:
            continue
        pair = _pair(weights)
        q = (2 - total).denominator
        for k in range(q, 100, q):
            params = DeformedDensityParams(pair, k)
            n = params.dimension
            if n > 9:
                break
            assert n - 1 == k * (2 - total)
            bound = 1 - Fraction(n - 1, 2 * k)
            assert bound == total / 2
            marked = [r for r in enumerate_strata(params) if r.stratum.marked is not None]
            assert all(r.integrable for r in marked) == all(w < bound for w in weights)
            integrable = all(r.integrable for r in enumerate_strata(params))
            assert integrable == (all(w < bound for w in weights) and n < 2 * k)
            assert (all(w < bound for w in weights)) == weight_condition(pair)
            checked += 1
    assert checked > 50


SCALING_CASES = [
    ("triple", 2, 1, 2, None),
    ("triple", 2, 1, 1, 0),
    ("triple", 2, 1, 2, 1),
    ("triple", 4, 1, 3, None),
    ("triple", 4, 1, 3, 2),
    ("triple", 4, 1, 2, 0),
    ("triple", 4, "1/2", 3, None),
    ("triple", 4, "1/2", 3, 0),
    ("bare", 1, 1, 3, None),
    ("skew", 2, 1, 2, 0),
]


@pytest.mark.parametrize(("which", "k", "gamma", "m", "location"), SCALING_CASES)
def test_radial_scaling_matches_collision_exponent(triple_half, bare, which, k, gamma, m, location):
    pair = {"triple": triple_half, "bare": bare, "skew": _pair(["3/4", "1/4", "1/2"])}[which]
    params = DeformedDensityParams(pair, k, gamma)
    exponent, integrable = collision_exponent(m, location, params)
    fitted = _scaling_exponent(params, m, location)
    assert fitted == pytest.approx(float(exponent), abs=0.05)
    if exponent != 0:
        assert (fitted > 0) == integrable


@pytest.mark.parametrize("k", [1, 2, 3])
def test_bare_sphere_has_an_unstable_witness(bare, k):
    report = gibbs_stable_probe(bare, k, budget=0)
    assert report.verdict is Verdict.UNSTABLE_WITNESS
    n = 2 * k + 1
    full = [r for r in report.witnesses if r.stratum.m == n and r.stratum.marked is None]
    assert full
    assert full[0].exponent == Fraction(-(n - 1), k)
    assert report.partition is None


def test_toric_boundary_is_not_klt():
    pair = LogPairCurve.from_chart(["0", "inf"], ["1", "1"])
    report = gibbs_stable_probe(pair, 1, budget=0)
    assert report.verdict is Verdict.UNSTABLE_WITNESS
    assert {r.stratum.m for r in report.witnesses} == {1}
    assert all(r.exponent == 0 for r in report.witnesses)


def test_collision_exponents(triple_half):
    params = DeformedDensityParams(triple_half, 2)
    assert params.dimension == 2
    assert params.alpha == Fraction(1, 2)
    assert collision_exponent(2, None, params) == (Fraction(1), True)
    assert collision_exponent(1, 0, params) == (Fraction(1), True)
    assert collision_exponent(2, 2, params) == (Fraction(1), True)
    deformed = DeformedDensityParams(triple_half, 4, "1/2")
    assert deformed.dimension == 3
    assert collision_exponent(3, None, deformed) == (Fraction(4) - Fraction(3, 4), True)


def test_strata_locations_follow_the_marked_points():
    pair = LogPairCurve.from_chart(["0", "1", "inf"], ["0", "1/2", "1/4"])
    params = DeformedDensityParams(pair, 4)
    assert params.dimension == 6
    assert collision_exponent(1, 2, params) == (Fraction(3, 2), True)
    assert collision_exponent(1, 1, params) == (Fraction(1), True)
    assert collision_exponent(1, 0, params) == (Fraction(2), True)
    assert {r.stratum.marked for r in enumerate_strata(params)} == {None, 1, 2}
    assert {r.stratum.label for r in enumerate_strata(params) if r.stratum.marked == 2} == {"inf"}
    with pytest.raises(BadStratum):
        collision_exponent(1, 3, params)


@pytest.mark.parametrize(("m", "location"), [(1, None), (3, None), (0, 0), (3, 1), (1, 7), (1, "x")])
def test_bad_strata(triple_half, m, location):
    params = DeformedDensityParams(triple_half, 2)
    with pytest.raises(BadStratum):
        collision_exponent(m, location, params)


@pytest.mark.parametrize("weights", WEIGHT_VECTORS)
def test_tail_index_marks_non_integrable_strata(weights):
    pair = _pair(weights)
    k = pair.anticanonical_degree().denominator
    params = DeformedDensityParams(pair, k)
    for r in enumerate_strata(params):
        location = r.stratum.marked
        assert stratum_tail_index(r.stratum.m, location, params) == r.tail_index
        assert (r.tail_index >= 1) == (not r.integrable)


def test_density_is_infinite_on_the_singular_locus(triple_half, rng):
    params = DeformedDensityParams(triple_half, 2)
    generic = random_points(rng, 2)
    assert math.isfinite(deformed_log_density(params, generic).log_value)

    clustered = np.array([generic[0], generic[0]])
    value = deformed_log_density(params, clustered)
    assert value.is_infinite
    assert value.stratum == "generic m=2"

    marked = np.array([SpherePoint.from_chart("1").as_array(), generic[1]])
    value = deformed_log_density(params, marked)
    assert value.is_infinite
    assert value.stratum.startswith("marked[0]")


def test_gamma_zero_density_is_the_reference_product(triple_half, rng):
    params = DeformedDensityParams(triple_half, 2, 0)
    points = random_points(rng, 2)
    marked = triple_half.marked_array()
    expected = -sum(np.sum(np.log(np.abs(points[:, 0] * p[1] - points[:, 1] * p[0]))) for p in marked)
    assert deformed_log_density(params, points).log_value == pytest.approx(expected)


def test_parameter_validation(triple_half):
    with pytest.raises(ValueError):
        DeformedDensityParams(triple_half, 2, "3/2")
    with pytest.raises(NotALineBundle):
        DeformedDensityParams(triple_half, 1).dimension


def test_parameterized_stability_toric_section():
    section = CurveDivisor.from_pairs([("0", 1), ("inf", 1)])
    report = parameterized_stability(section, 1, "1/2", budget=0)
    assert report.params.k == 2
    assert report.params.dimension == 3
    assert report.verdict is Verdict.UNSTABLE_WITNESS
    assert any(r.stratum.m == 3 and r.stratum.marked is not None for r in report.witnesses)


def test_vanishing_order_of_the_vandermonde(bare, rng):
    section = CurveDivisor.from_pairs([("0", 1), ("inf", 1)])
    space = SectionSpace.for_pair(bare, 1)
    result = vanishing_order(space, section, index=1, rng=rng)
    assert result.order == 0
    assert result.below_level
    assert result.local_exponent("1/2") == Fraction(1, 2)
    assert result.local_exponent(1) == 0


def test_vanishing_order_needs_simple_zeros(bare, rng):
    space = SectionSpace.for_pair(bare, 1)
    with pytest.raises(ValueError):
        vanishing_order(space, CurveDivisor.from_pairs([("0", 2)]), rng=rng)


def test_genus_one_ledger():
    for k in (1, 2, 5):
        ledger = genus1_exponent_bookkeeping(k)
        assert ledger.dimension == 1
        assert ledger.total == 0
        assert ledger.klt
    with pytest.raises(Unsupported):
        genus1_exponent_bookkeeping(1, 1)
    with pytest.raises(NotALineBundle):
        genus1_exponent_bookkeeping(1, "1/2")


def test_root_multiplicities():
    points = np.array([SpherePoint.from_chart("0").as_array(), SpherePoint.from_chart("inf").as_array()])
    assert sorted(root_multiplicities(binary_form(points, [2, 1]))) == [1, 2]
    assert root_multiplicities(binary_form(points[1:], [3])) == [3]


def test_binary_form_keeps_a_root_at_infinity():
    points = np.array([SpherePoint.from_chart("0").as_array(), SpherePoint.from_chart("inf").as_array()])
    coeffs = binary_form(points, [2, 1])
    assert len(coeffs) == 4
    np.testing.assert_allclose(coeffs, [0, 0, 1, 0])
    zeros = {SpherePoint.from_array(p).label(): m for p, m in form_zeros(coeffs)}
    assert zeros == {"0.0": 2, "inf": 1}
    assert len(binary_form(points[::-1], [1, 2])) == 4
    with pytest.raises(ValueError):
        form_zeros(np.zeros(3))


def test_global_lct_probe(bare, rng):
    report = global_lct_probe(bare, 4, samples=60, rng=rng)
    assert report.exact == Fraction(1, 4)
    assert report.consistent
    assert report.minimum == Fraction(1, 4)
    assert len(report.sampled) == 60
    with pytest.raises(ValueError):
        global_lct_probe(bare, 0)


def test_mc_budget_floor(triple_half):
    with pytest.raises(ValueError):
        partition_estimate(DeformedDensityParams(triple_half, 2), budget=100)


def test_tensor_quadrature_limits(bare, triple_half):
    assert DeformedDensityParams(triple_half, 6).dimension == 4
    with pytest.raises(Unsupported):
        partition_estimate(DeformedDensityParams(triple_half, 6), PartitionMethod.TENSOR_QUADRATURE)
    assert partition_estimate(DeformedDensityParams(bare, "1/2"), "tensor").divergent


def test_tensor_quadrature_is_finite_with_cone_points(triple_half):
    params = DeformedDensityParams(triple_half, 2)
    values = [partition_estimate(params, "tensor", order=order).value for order in (8, 12, 16)]
    assert all(math.isfinite(v) and v > 0 for v in values)
    assert values[2] == pytest.approx(values[1], rel=1e-2)


def test_tensor_quadrature_of_the_reference_product(triple_half):
    params = DeformedDensityParams(triple_half, 2, 0)
    mass = pair_reference_mass(params)
    estimate = partition_estimate(params, "tensor", order=16)
    assert abs(estimate.value - mass**2) <= estimate.stderr + 1e-4 * mass**2


@pytest.mark.slow
def test_three_point_tensor_of_the_reference_product(triple_half):
    params = DeformedDensityParams(triple_half, 4, 0)
    assert params.dimension == 3
    mass = pair_reference_mass(params)
    estimate = partition_estimate(params, "tensor")
    assert abs(estimate.value - mass**3) <= estimate.stderr + 1e-3 * mass**3


@pytest.mark.slow
def test_triple_half_passes_the_probe(triple_half):
    report = gibbs_stable_probe(triple_half, 2, budget=20_000)
    assert report.verdict is Verdict.STABLE_PROBE_PASSED
    assert not report.partition.divergent


@pytest.mark.slow
@pytest.mark.parametrize("k", [1, 2, 3])
def test_bare_sphere_monte_carlo_diverges(bare, k):
    report = probe_params(DeformedDensityParams(bare, k), budget=20_000)
    assert len(report.partition.diagnostics) == 3
    assert report.partition.divergent
    assert report.to_record()["Z"] == "DIVERGENT"


@pytest.mark.slow
def test_tensor_and_monte_carlo_agree(triple_half):
    params = DeformedDensityParams(triple_half, 2)
    tensor = partition_estimate(params, "tensor", order=24)
    mc = partition_estimate(params, "mc", budget=334_000)
    assert mc.n_samples >= 1_000_000
    assert not tensor.divergent
    assert not mc.divergent
    assert abs(tensor.value - mc.value) <= 2 * math.hypot(tensor.stderr, mc.stderr)


@pytest.mark.slow
def test_three_point_tensor_and_monte_carlo_agree(triple_half):
    params = DeformedDensityParams(triple_half, 4)
    tensor = partition_estimate(params, "tensor")
    mc = partition_estimate(params, "mc", budget=200_000)
    assert not mc.divergent
    assert abs(tensor.value - mc.value) <= 2 * math.hypot(tensor.stderr, mc.stderr)
