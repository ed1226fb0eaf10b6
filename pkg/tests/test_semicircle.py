import math
from itertools import product

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from rmtlab import semicircle
from rmtlab.errors import OddOrder, OrderTooLarge


def dyck_paths(k):
    """Count +-1 paths of length 2k that stay nonnegative and end at 0."""
    count = 0
    for steps in product((1, -1), repeat=2 * k):
        h = 0
        for s in steps:
            h += s
            if h < 0:
                break
        else:
            count += h == 0
    return count


def test_density_at_zero():
    assert abs(semicircle.density(0.0) - 1 / math.pi) <= 1e-15


def test_density_vanishes_outside_support():
    assert semicircle.density(np.array([-3.0, -2.0, 2.0, 2.5])).tolist() == [0, 0, 0, 0]


def test_density_integrates_to_one():
    total, _ = integrate.quad(semicircle.density, -2, 2, epsabs=1e-13)
    assert total == pytest.approx(1.0, abs=1e-12)


def test_cdf_matches_quadrature_on_grid():
    for x in np.linspace(-2, 2, 101):
        ref, _ = integrate.quad(semicircle.density, -2, x, epsabs=1e-13)
        assert abs(semicircle.cdf(x) - ref) <= 1e-10


def test_cdf_endpoints():
    assert semicircle.cdf(-2.0) == 0.0
    assert semicircle.cdf(0.0) == pytest.approx(0.5, abs=1e-15)
    assert semicircle.cdf(2.0) == 1.0
    assert semicircle.cdf(-7.0) == 0.0 and semicircle.cdf(9.0) == 1.0


@given(st.floats(-3, 3))
def test_cdf_symmetry(x):
    assert semicircle.cdf(-x) == pytest.approx(1 - semicircle.cdf(x), abs=1e-14)


@given(st.floats(-2.5, 2.5), st.floats(0, 1))
def test_cdf_monotone(x, h):
    assert semicircle.cdf(x + h) >= semicircle.cdf(x) - 1e-15


@given(st.floats(0.001, 0.999))
def test_quantile_inverts_cdf(p):
    assert semicircle.cdf(semicircle.quantile(p)) == pytest.approx(p, abs=1e-12)


def test_quantile_rejects_bad_probability():
    with pytest.raises(ValueError):
        semicircle.quantile(1.5)


def test_catalan_moments_small():
    assert [semicircle.moment(k) for k in (0, 2, 4, 6, 8)] == [1, 1, 2, 5, 14]


@pytest.mark.parametrize("k", range(0, 8))
def test_moments_count_dyck_paths(k):
    assert semicircle.moment(2 * k) == dyck_paths(k)


@pytest.mark.parametrize("k", [1, 2, 3, 5])
def test_moments_match_quadrature(k):
    ref, _ = integrate.quad(lambda x: x ** (2 * k) * semicircle.density(x), -2, 2, epsabs=1e-12)
    assert ref == pytest.approx(semicircle.moment(2 * k), rel=1e-10)


def test_moment_errors():
    with pytest.raises(OddOrder):
        semicircle.moment(3)
    with pytest.raises(OrderTooLarge):
        semicircle.moment(42)


def brute_ks(lam):
    lam = np.sort(lam)
    n = lam.size
    worst = 0.0
    for i, x in enumerate(lam):
        f = semicircle.cdf(x)
        below = np.count_nonzero(lam < x) / n
        upto = np.count_nonzero(lam <= x) / n
        worst = max(worst, abs(f - below), abs(f - upto))
    return worst


@given(st.lists(st.floats(-3, 3), min_size=1, max_size=40))
def test_ks_matches_brute_force(values):
    lam = np.array(values)
    assert semicircle.ks_distance(lam) == pytest.approx(brute_ks(lam), abs=1e-15)


def test_ks_of_quantiles_is_small():
    n = 1000
    lam = np.array([semicircle.quantile((i + 0.5) / n) for i in range(n)])
    assert semicircle.ks_distance(lam) == pytest.approx(0.5 / n, abs=1e-9)


def test_ks_point_mass():
    # all mass at 0: the jump straddles F(0) = 1/2
    assert semicircle.ks_distance(np.zeros(10)) == pytest.approx(0.5)


def test_ks_rejects_empty():
    with pytest.raises(ValueError):
        semicircle.ks_distance(np.array([]))


def test_law_object_exposes_functions():
    law = semicircle.SemicircleLaw()
    assert law.support == (-2.0, 2.0)
    assert law.moment(4) == 2
    assert law.cdf(0.0) == pytest.approx(0.5)
