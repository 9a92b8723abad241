import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from cococat import Exponential, Gamma, Lognormal, compound_poisson_cdf, nfold_cdf
from cococat.aggregate import nfold_cdf_at, poisson_truncation
from cococat.errors import NumericalToleranceError, ParameterError


def test_poisson_truncation_tail_is_below_tolerance():
    n = poisson_truncation(7.0, 1e-12)
    assert stats.poisson.sf(n, 7.0) < 1e-12
    assert poisson_truncation(0.0) == 0


@pytest.mark.parametrize("n", [1, 2, 5, 10])
def test_erlang_closed_form(n):
    x = np.linspace(0.1, 20.0, 50)
    got = nfold_cdf(Exponential(1.3), n, x)
    assert np.max(np.abs(got - stats.gamma.cdf(x, n, scale=1 / 1.3))) < 1e-6


def test_gamma_convolution_is_gamma():
    x = np.array([0.5, 1.0, 3.0])
    got = nfold_cdf(Gamma(0.7, 0.4), 4, x)
    assert np.allclose(got, stats.gamma.cdf(x, 2.8, scale=0.4), atol=1e-6)


def test_zero_fold_is_point_mass_at_zero():
    assert nfold_cdf(Exponential(1.0), 0, 0.5) == 1.0


def test_table_rows_decrease_in_n():
    table = nfold_cdf_at([Lognormal(-2.4, 1.2)], [2.0], 30)[:, 0]
    assert table[0] == 1.0
    assert np.all(np.diff(table) <= 1e-15)


def test_richardson_guard_raises_on_coarse_lattice():
    with pytest.raises(NumericalToleranceError) as info:
        nfold_cdf(Lognormal(0.0, 2.5), 3, 0.05, grid_size=32, atol=1e-12)
    assert info.value.achieved > 1e-12


def test_invalid_arguments():
    with pytest.raises(ParameterError):
        nfold_cdf(Exponential(1.0), -1, 1.0)
    with pytest.raises(ParameterError):
        compound_poisson_cdf(-1.0, Exponential(1.0), 1.0)


def test_compound_poisson_exponential_matches_series():
    lam, rate, x = 3.0, 2.0, 1.7
    n = np.arange(60)
    want = stats.poisson.pmf(n, lam) @ np.where(n == 0, 1.0, stats.gamma.cdf(x, np.maximum(n, 1),
                                                                            scale=1 / rate))
    assert np.isclose(compound_poisson_cdf(lam, Exponential(rate), x), want, atol=1e-7)


@settings(max_examples=25, deadline=None)
@given(lam=st.floats(0.1, 10.0), x=st.floats(0.05, 5.0), dx=st.floats(0.01, 2.0))
def test_compound_cdf_is_monotone_and_bounded(lam, x, dx):
    sev = Lognormal(-1.5, 0.9)
    lo = compound_poisson_cdf(lam, sev, x, grid_size=2**11)
    hi = compound_poisson_cdf(lam, sev, x + dx, grid_size=2**11)
    assert np.exp(-lam) - 1e-12 <= lo <= hi + 1e-9 <= 1.0 + 1e-9
