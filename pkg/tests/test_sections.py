import math
from fractions import Fraction

import numpy as np
import pytest

from gibbslab.errors import DimensionMismatch, NotALineBundle, SingularMatrix
from gibbslab.geometry import SpherePoint, random_points, random_unimodular
from gibbslab.pairs import LogPairCurve
from gibbslab.sections import (
    Configuration,
    LogValue,
    SectionSpace,
    basis_change_law,
    basis_log_scale,
    dimension,
    equivariance_residual,
    kodaira_map,
    kodaira_rank,
    slater_det,
    slater_log,
    slater_log_array,
    vanishing_sections,
)


def test_dimension_by_riemann_roch(bare, triple_half):
    assert dimension(bare, 1) == 3
    assert dimension(bare, 4) == 9
    assert dimension(triple_half, 2) == 2
    assert dimension(triple_half, 4) == 3
    with pytest.raises(NotALineBundle):
        dimension(triple_half, 1)


def test_genus_one_dimension():
    pair = LogPairCurve(1, (SpherePoint(1 + 0j, 0j),), (Fraction(-1, 2),))
    assert dimension(pair, 2) == 1
    assert dimension(pair, 4) == 2


@pytest.mark.parametrize(("k", "n", "rtol"), [(1, 3, 1e-10), (2, 5, 1e-10), (4, 9, 1e-10), (10, 21, 1e-8)])
def test_lu_matches_vandermonde(bare, rng, k, n, rtol):
    space = SectionSpace.for_pair(bare, k)
    assert space.dimension == n
    points = random_points(rng, (100, n))
    lu, _ = slater_log_array(space, points, "lu")
    vdm, _ = slater_log_array(space, points, "vandermonde")
    np.testing.assert_allclose(lu, vdm, rtol=rtol, atol=rtol)


def test_coincident_points_give_zero(bare, rng):
    space = SectionSpace.for_pair(bare, 1)
    points = random_points(rng, 3)
    points[2] = points[0]
    value = slater_log(space, points)
    assert value.is_zero
    assert value.value == 0.0


def test_complex_determinant_is_vandermonde(bare, rng):
    space = SectionSpace.for_pair(bare, 1)
    x = random_points(rng, 3)
    expected = np.prod([x[i, 0] * x[j, 1] - x[i, 1] * x[j, 0] for i in range(3) for j in range(i + 1, 3)])
    assert slater_det(space, x) == pytest.approx(expected)


def test_wrong_configuration_length(bare, rng):
    space = SectionSpace.for_pair(bare, 1)
    with pytest.raises(DimensionMismatch):
        slater_log(space, random_points(rng, 4))


def test_basis_change_law(bare, rng):
    space = SectionSpace.for_pair(bare, 2)
    for _ in range(50):
        A = rng.normal(size=(5, 5)) + 1j * rng.normal(size=(5, 5))
        assert basis_change_law(space, A, random_points(rng, 5)) < 1e-9
    with pytest.raises(SingularMatrix):
        basis_change_law(space, np.zeros((5, 5)), random_points(rng, 5))


def test_diagonal_equivariance(bare, rng):
    space = SectionSpace.for_pair(bare, 2)
    for _ in range(50):
        assert equivariance_residual(space, random_unimodular(rng), random_points(rng, 5)) < 1e-8


def test_log_value_arithmetic():
    a, b = LogValue(1.0), LogValue(-0.5)
    assert (a * b).log_abs == pytest.approx(0.5)
    assert (a / b).log_abs == pytest.approx(1.5)
    assert (b**-2).log_abs == pytest.approx(1.0)
    assert (a * LogValue.zero()).is_zero
    with pytest.raises(ZeroDivisionError):
        a / LogValue.zero()


def test_orthonormal_basis_scale(small_grid):
    degree = 4
    space = SectionSpace.for_pair(LogPairCurve.bare(), 2)
    values = space.monomials(small_grid.nodes) * np.exp(-basis_log_scale(degree))
    gram = (np.conj(values).T * small_grid.weights) @ values
    np.testing.assert_allclose(gram, np.eye(5), atol=1e-12)


def test_kodaira_map(bare, rng):
    space = SectionSpace.for_pair(bare, 2)
    p = SpherePoint.from_array(random_points(rng, 1)[0])
    assert np.linalg.norm(kodaira_map(space, p)) == pytest.approx(1.0)
    assert kodaira_rank(space, p) == 1
    assert kodaira_rank(space, SpherePoint.from_chart("inf")) == 1


def test_kodaira_rank_of_trivial_bundle():
    toric = LogPairCurve.from_chart(["0", "inf"], ["1", "1"])
    space = SectionSpace.for_pair(toric, 1)
    assert space.dimension == 1
    assert kodaira_rank(space, SpherePoint.from_chart(2)) == 0


def test_vanishing_sections(bare, rng):
    space = SectionSpace.for_pair(bare, 2)
    config = Configuration.from_array(random_points(rng, 4))
    basis = vanishing_sections(space, config)
    assert basis.shape == (5, 1)
    values = space.evaluate(basis[:, 0], config.as_array())
    np.testing.assert_allclose(values, 0.0, atol=1e-10)
    assert math.isclose(np.linalg.norm(basis[:, 0]), 1.0)
