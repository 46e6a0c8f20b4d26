from hypothesis import given, settings
from hypothesis import strategies as st
import numpy as np
import pytest
from scipy.stats import chi2

from qzk_lab.core.errors import StatError
from qzk_lab.core.stats import (
    align,
    at_most,
    binomial_ci,
    binomial_tolerance,
    chi2_gof,
    chi2_sf,
    chi2_test,
    histogram,
    mean_sigma,
    tv_distance,
    within,
)


def test_tv_distance():
    assert tv_distance([1, 0], [0, 1]) == 1.0
    assert tv_distance([3, 1], [30, 10]) == 0.0
    assert tv_distance([1, 1], [1, 3]) == pytest.approx(0.25)
    for a, b in [([], []), ([1], [1, 2]), ([0, 0], [1, 1])]:
        with pytest.raises(StatError):
            tv_distance(a, b)


@given(
    a=st.lists(st.integers(0, 50), min_size=3, max_size=3).filter(any),
    b=st.lists(st.integers(0, 50), min_size=3, max_size=3).filter(any),
)
@settings(max_examples=50, deadline=None)
def test_tv_distance_is_a_metric_value(a, b):
    d = tv_distance(a, b)
    assert 0.0 <= d <= 1.0
    assert d == pytest.approx(tv_distance(b, a))


@pytest.mark.parametrize("x,dof", [(0.5, 1), (3.0, 2), (10.0, 7), (40.0, 31)])
def test_chi2_sf_matches_scipy(x, dof):
    assert chi2_sf(x, dof) == pytest.approx(chi2.sf(x, dof))


def test_chi2_sf_without_dof():
    assert chi2_sf(12.0, 0) == 1.0


def test_chi2_gof():
    exact = chi2_gof([25, 25, 25, 25], [1, 1, 1, 1])
    assert exact.statistic == 0.0 and exact.dof == 3 and exact.p_value == pytest.approx(1.0)
    assert exact.passes()

    skewed = chi2_gof([100, 0, 0, 0], [1, 1, 1, 1])
    assert not skewed.passes()

    impossible = chi2_gof([5, 1], [1, 0])
    assert impossible.p_value == 0.0

    with pytest.raises(StatError):
        chi2_gof([], [])
    with pytest.raises(StatError):
        chi2_gof([0, 0], [1, 1])
    with pytest.raises(StatError):
        chi2_gof([1, 2], [1, 1, 1])


def test_chi2_homogeneity():
    same = chi2_test([10, 20, 30], [20, 40, 60])
    assert same.statistic == pytest.approx(0.0) and same.p_value == pytest.approx(1.0)

    apart = chi2_test([100, 0], [0, 100])
    assert apart.p_value < 1e-10

    assert chi2_test([5, 0], [7, 0]).p_value == 1.0

    with pytest.raises(StatError):
        chi2_test([3, 4], [0, 0])
    with pytest.raises(StatError):
        chi2_test([1, 2], [1, 2, 3])


def test_binomial_interval():
    lo, hi = binomial_ci(50, 100)
    assert lo < 0.5 < hi
    assert binomial_ci(0, 10)[0] == pytest.approx(0.0, abs=1e-12)
    assert binomial_ci(10, 10)[1] == pytest.approx(1.0, abs=1e-12)
    with pytest.raises(StatError):
        binomial_ci(11, 10)
    with pytest.raises(StatError):
        binomial_ci(0, 0)


def test_tolerances():
    assert binomial_tolerance(0.0, 100) == 0.01
    assert binomial_tolerance(0.5, 100) == pytest.approx(0.15)
    assert within(0.55, 0.5, 100)
    assert not within(0.7, 0.5, 100)
    assert at_most(0.05, 0.0, 100, sigmas=3.0) is False
    assert at_most(0.01, 0.0, 100)


def test_mean_sigma():
    assert mean_sigma([4.0]) == (4.0, 0.0)
    mean, se = mean_sigma([1.0, 3.0])
    assert mean == 2.0
    assert se == pytest.approx(np.sqrt(2.0) / np.sqrt(2.0))
    with pytest.raises(StatError):
        mean_sigma([])


def test_histogram_and_align():
    assert histogram(["a", 1, 1, (0, 1)]) == {"a": 1, "1": 2, "(0, 1)": 1}
    a, b = align({"x": 2, "y": 1}, {"y": 4, "z": 3})
    np.testing.assert_array_equal(a, [2, 1, 0])
    np.testing.assert_array_equal(b, [0, 4, 3])
