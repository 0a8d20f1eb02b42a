import math

import numpy as np
import pytest

from netsteer.pointproc import CountDistribution


def test_bernoulli_psi_zero_moments():
    d = CountDistribution("bernoulli", psi=0.0)
    assert d.mean() == pytest.approx(0.5)
    assert d.variance() == pytest.approx(0.25)


def test_poisson_psi_zero_logpmf():
    d = CountDistribution("poisson", psi=0.0)  # rate 1
    assert d.logpmf(0) == pytest.approx(-1.0)


def test_negative_binomial_table_row():
    # direct evaluation: C(2,1) * 0.5 * 0.25 = 0.25
    d = CountDistribution("negative_binomial", psi=0.0, upsilon=2)
    assert d.logpmf(1) == pytest.approx(math.log(0.25))
    assert d.mean() == pytest.approx(2.0 * 1.0)  # upsilon * exp(psi)
    assert d.variance() == pytest.approx(2.0 / 0.5)


def test_binomial_row():
    d = CountDistribution("binomial", psi=0.3, upsilon=5)
    p = 1 / (1 + math.exp(-0.3))
    assert d.mean() == pytest.approx(5 * p)
    assert d.variance() == pytest.approx(5 * p * (1 - p))
    assert d.logpmf(2) == pytest.approx(
        math.log(math.comb(5, 2) * p**2 * (1 - p) ** 3)
    )


def test_out_of_support_is_neg_inf():
    assert CountDistribution("bernoulli", psi=0.0).logpmf(2) == float("-inf")
    assert CountDistribution("binomial", psi=0.0, upsilon=3).logpmf(4) == float("-inf")
    assert CountDistribution("poisson", psi=0.0).logpmf(-1) == float("-inf")


@pytest.mark.parametrize(
    "dist",
    [
        CountDistribution("poisson", psi=0.7),
        CountDistribution("poisson", psi=-1.2),
        CountDistribution("bernoulli", psi=0.4),
        CountDistribution("binomial", psi=-0.2, upsilon=7),
        CountDistribution("negative_binomial", psi=0.1, upsilon=3),
        CountDistribution("negative_binomial", psi=-0.5, upsilon=1.5),
    ],
)
def test_pmf_normalizes_over_truncated_support(dist):
    upper = dist.support_upper(tail=1e-12)
    total = sum(math.exp(dist.logpmf(x)) for x in range(upper + 1))
    assert abs(total - 1.0) <= 1e-9


@pytest.mark.parametrize(
    "dist",
    [
        CountDistribution("poisson", psi=0.5),
        CountDistribution("binomial", psi=0.3, upsilon=9),
        CountDistribution("negative_binomial", psi=-0.3, upsilon=4),
    ],
)
def test_moments_match_pmf_sums(dist):
    upper = dist.support_upper(tail=1e-13)
    xs = np.arange(upper + 1)
    pmf = np.array([math.exp(dist.logpmf(int(x))) for x in xs])
    mean = float(xs @ pmf)
    var = float(((xs - mean) ** 2) @ pmf)
    assert mean == pytest.approx(dist.mean(), rel=1e-6)
    assert var == pytest.approx(dist.variance(), rel=1e-5)


def test_invalid_family_and_upsilon():
    with pytest.raises(ValueError):
        CountDistribution("geometric", psi=0.0)
    with pytest.raises(ValueError):
        CountDistribution("binomial", psi=0.0)
