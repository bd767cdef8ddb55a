import math
import warnings

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import beta_cdf_integer, beta_cdf_quadrature
from sapaug.betafn import BetaArgs, inc_beta, ln_gamma
from sapaug.errors import DomainError, InputError, PrecisionWarning

shapes = st.floats(min_value=0.05, max_value=200.0, allow_nan=False)
unit = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


def complementable(x):
    """Snap ``x`` so that ``1 - x`` is exact and the reflection pairs exact complements."""
    return 1.0 - (1.0 - x)


def ulp_tol(v):
    return max(1e-12, 2.0 * math.ulp(v))


@pytest.mark.parametrize("z, expected", [
    (1.0, 0.0),
    (2.0, 0.0),
    (5.0, math.log(24.0)),
    (0.5, 0.5 * math.log(math.pi)),
])
def test_ln_gamma_known_values(z, expected):
    assert abs(ln_gamma(z) - expected) <= 1e-12


def test_ln_gamma_exact_at_one():
    assert ln_gamma(1.0) == 0.0


def test_ln_gamma_against_mpmath():
    mpmath.mp.dps = 30
    rng = np.random.default_rng(11)
    zs = np.concatenate([np.exp(rng.uniform(math.log(1e-3), math.log(1e4), 400)), [1e-3, 0.5, 1.5, 10.0, 1e4]])
    for z in zs:
        ref = float(mpmath.loggamma(mpmath.mpf(float(z))))
        assert abs(ln_gamma(float(z)) - ref) <= ulp_tol(ref), z


@pytest.mark.parametrize("z", [0.0, -1.0, float("nan"), float("inf")])
def test_ln_gamma_domain(z):
    with pytest.raises(DomainError):
        ln_gamma(z)


@pytest.mark.parametrize("alpha, beta, x, expected", [
    (1.0, 1.0, 0.3, 0.3),
    (2.0, 2.0, 0.5, 0.5),
    (2.0, 3.0, 0.4, 0.5248),
    (7.0, 3.0, 1.0, 1.0),
])
def test_inc_beta_examples(alpha, beta, x, expected):
    assert abs(inc_beta(alpha, beta, x) - expected) <= 1e-12


def test_inc_beta_integer_shapes_match_binomial_sum():
    rng = np.random.default_rng(3)
    for _ in range(300):
        a, b = (int(v) for v in rng.integers(1, 40, size=2))
        x = float(rng.random())
        assert abs(inc_beta(a, b, x) - beta_cdf_integer(a, b, x)) <= 1e-12


def test_inc_beta_matches_quadrature_oracle():
    rng = np.random.default_rng(2024)
    for _ in range(150):
        a, b = np.exp(rng.uniform(math.log(0.05), math.log(200.0), 2))
        x = float(rng.random())
        assert abs(inc_beta(a, b, x) - beta_cdf_quadrature(a, b, x)) <= 1e-10, (a, b, x)


@given(shapes, shapes)
def test_boundaries_are_exact(a, b):
    assert inc_beta(a, b, 0.0) == 0.0
    assert inc_beta(a, b, 1.0) == 1.0


@given(shapes, shapes, unit)
def test_reflection(a, b, x):
    x = complementable(x)
    assert 1.0 - (1.0 - x) == x
    assert abs(inc_beta(a, b, x) + inc_beta(b, a, 1.0 - x) - 1.0) <= 1e-10


@given(shapes, shapes, unit, unit)
def test_monotone_in_x(a, b, x1, x2):
    lo, hi = sorted((x1, x2))
    assert inc_beta(a, b, lo) <= inc_beta(a, b, hi)


@given(shapes, shapes, unit)
def test_range(a, b, x):
    assert 0.0 <= inc_beta(a, b, x) <= 1.0


@pytest.mark.parametrize("args", [(0.0, 1.0, 0.5), (1.0, -2.0, 0.5), (1.0, 1.0, 1.5), (1.0, 1.0, -0.1),
                                  (float("nan"), 1.0, 0.5), (1.0, 1.0, float("nan"))])
def test_inc_beta_domain_errors(args):
    with pytest.raises(DomainError):
        inc_beta(*args)


def test_domain_error_is_input_error():
    assert issubclass(DomainError, InputError)


def test_beta_args_validate():
    assert BetaArgs(2.0, 3.0, 0.4).validate() == (2.0, 3.0, 0.4)
    with pytest.raises(DomainError):
        BetaArgs(2.0, 3.0, 2.0).validate()


@settings(max_examples=50)
@given(shapes, shapes, unit)
def test_no_precision_warning_in_range(a, b, x):
    with warnings.catch_warnings():
        warnings.simplefilter("error", PrecisionWarning)
        inc_beta(a, b, x)
