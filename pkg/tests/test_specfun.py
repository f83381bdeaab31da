import cmath
import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paramlc.errors import NonConvergence, PoleParameter
from paramlc.specfun import (
    SeriesResult,
    hyp1f1,
    hyp1f2,
    log_pochhammer,
    pochhammer,
    series_ratio,
)
from oracle_values import HYP1F2_LARGE_LOG, HYP1F2_ONES_2


def test_pochhammer_examples():
    assert pochhammer(3.7 - 2j, 0) == 1
    assert pochhammer(1, 4) == 24
    assert pochhammer(1 - 2j, 2) == pytest.approx(-2 - 6j, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(
    re=st.floats(-1e3, 1e3),
    im=st.floats(-1e3, 1e3),
    m=st.integers(0, 64),
)
def test_pochhammer_recurrence(re, im, m):
    z = complex(re, im)
    lhs = pochhammer(z, m + 1)
    rhs = pochhammer(z, m) * (z + m)
    assert abs(lhs - rhs) <= 1e-12 * max(abs(lhs), 1e-300)


def test_log_pochhammer_matches_direct():
    z = 0.5 - 3j
    for m in range(30):
        assert cmath.exp(log_pochhammer(z, m)) == pytest.approx(pochhammer(z, m), rel=1e-12)


def test_hyp1f2_zero_argument_is_exactly_one():
    r = hyp1f2(1, 1 - 1j, 1 + 1j, 0)
    assert complex(r) == 1
    assert r.terms_used >= 1


def test_hyp1f2_naive_sum():
    # naive 200-term summation
    naive = math.fsum(math.exp(m * math.log(2) - 2 * math.lgamma(m + 1)) for m in range(200))
    r = hyp1f2(1, 1, 1, 2)
    assert r.real() == pytest.approx(naive, rel=1e-13)
    assert r.real() == pytest.approx(HYP1F2_ONES_2, rel=1e-13)


def test_hyp1f2_large_argument_uses_log_scale():
    r = hyp1f2(1, 1 - 250j, 1 + 250j, 1e6)
    assert math.isfinite(r.log_abs)
    assert r.log_abs == pytest.approx(HYP1F2_LARGE_LOG, rel=1e-13)
    # conjugate-pair reality
    assert abs(r.value.imag) <= 10 * 1e-12 * abs(r.value)
    assert r.value.real > 0


def test_hyp1f2_against_mpmath_grid():
    rng = np.random.default_rng(3)
    for _ in range(15):
        a = rng.uniform(0.5, 5)
        b = complex(rng.uniform(0.5, 3), rng.uniform(-50, 50))
        x = 10 ** rng.uniform(-2, 4)
        r = hyp1f2(a, b, b.conjugate(), x)
        ref = mpmath.hyp1f2(a, b, b.conjugate(), x)
        assert r.log_abs == pytest.approx(float(mpmath.log(abs(ref))), rel=1e-11, abs=1e-11)


def test_truncation_estimate_below_tol():
    for tol in (1e-8, 1e-12):
        r = hyp1f2(2.0, 1 - 5j, 1 + 5j, 300.0, tol=tol)
        assert r.truncation_estimate <= tol


def test_doubling_budget_is_stable():
    rng = np.random.default_rng(11)
    for _ in range(10):
        a = rng.uniform(0.5, 5)
        b = complex(1, rng.uniform(-500, 500))
        x = 10 ** rng.uniform(0, 6)
        r1 = hyp1f2(a, b, b.conjugate(), x, max_terms=10**6)
        r2 = hyp1f2(a, b, b.conjugate(), x, max_terms=2 * 10**6)
        assert abs(series_ratio(r1, r2) - 1) < 2e-12


def test_poles_rejected():
    with pytest.raises(PoleParameter):
        hyp1f2(1, 0, 1, 1.0)
    with pytest.raises(PoleParameter):
        hyp1f2(1, 1, -3, 1.0)
    with pytest.raises(PoleParameter):
        hyp1f1(1, -2, 1.0)


def test_nonconvergence():
    with pytest.raises(NonConvergence):
        hyp1f2(1, 1, 1, 1e6, max_terms=50)


def test_hyp1f1_examples():
    assert hyp1f1(1, 1, 2).real() == pytest.approx(math.e**2, rel=1e-13)
    assert hyp1f1(2, 2, 2).real() == pytest.approx(math.e**2, rel=1e-13)
    assert complex(hyp1f1(1, 3, 0)) == 1


@settings(max_examples=50, deadline=None)
@given(
    a=st.floats(0.0, 5.0),
    im=st.floats(-500, 500),
    x=st.floats(0.0, 1e4),
)
def test_conjugate_pair_real_positive(a, im, x):
    b = complex(1.0, im)
    r = hyp1f2(a, b, b.conjugate(), x)
    assert r.value.real > 0
    assert abs(r.value.imag) <= 10 * 1e-12 * abs(r.value)


def test_series_result_complex_roundtrip():
    r = SeriesResult(value=2.0 + 0j, terms_used=1, truncation_estimate=0.0, log_scale=math.log(3.0))
    assert complex(r) == pytest.approx(6.0)
