import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paramlc import exact_ness as ex
from paramlc.errors import DegenerateState, InvalidParameters
from paramlc.exact_ness import Phase
from paramlc.model import ModelParams, canonical_coupling
from oracle_values import EXACT


def P(N=2, u=1.0, D=0.5, kappa=1.0, **kw):
    return ModelParams(N, u, D, kappa, **kw)


def brute_force(params, m_max=4000):
    """Direct sums over p_m = |c_m|^2 (N/2)_m m! in log space."""
    m = np.arange(m_max + 1)
    logp = ex._log_pair_weights(params, m)
    w = np.exp(logp - logp.max())
    w /= w.sum()
    mean = w @ m
    var = w @ m**2 - mean**2
    return mean, var


def test_descriptor_vacuum():
    d = ex.descriptor(P(D=0.0, N=3), m_max=5)
    assert d.norm_Z == 1.0
    c = d.coefficients
    assert c[0] == 1 and np.all(c[1:] == 0)


def test_descriptor_recursion_oracle():
    p = P(u=1.0, D=1.0, kappa=4.0)
    d = ex.descriptor(p, m_max=6)
    assert d.delta == 1 - 1j
    c = d.coefficients
    assert c[1] == pytest.approx((1 + 1j) / 2, abs=1e-15)
    for m in range(1, 7):
        lhs = m * (2 * m * p.u - 0.5j * p.kappa) * c[m]
        assert lhs == pytest.approx(2 * p.D * c[m - 1], rel=1e-13)


def test_descriptor_fig1b_point():
    d = ex.descriptor(P(u=0.02, D=1.0, kappa=1.0))
    assert d.lam == pytest.approx(2500.0)
    assert d.delta == pytest.approx(1 - 12.5j)
    assert math.isfinite(d.norm_Z) and d.norm_Z > 1
    assert d.pair_distribution.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("key", sorted(EXACT))
def test_against_extended_precision(key):
    N, u, D, k = key
    mean, F = EXACT[key]
    p = ModelParams(N, u, D, k)
    assert ex.mean_photon_number(p) == pytest.approx(mean, rel=1e-10)
    # Var(m) = <m(m-1)> + <m> - <m>^2 cancels by ~<m>^2/Var(m); ~2e3 at <m> = 1e3
    assert ex.fano(p) == pytest.approx(F, rel=1e-8)


def test_mean_photon_zero_drive():
    assert ex.mean_photon_number(P(D=0.0)) == 0.0
    assert tuple(ex.pair_moments(P(D=0.0))) == (0.0, 0.0, 0.0)


def test_mean_equals_pair_mean():
    p = P(u=0.3, D=0.8)
    assert ex.pair_moments(p).mean_m == ex.mean_photon_number(p)


def test_semiclassical_limit_of_mean():
    p = P(u=1e-3, D=1.0)
    assert ex.order_parameter(p) == pytest.approx(math.sqrt(15 / 16), rel=0.02)


def test_pair_moments_against_brute_force():
    p = P(u=1.0, D=1.0)
    mean, var = brute_force(p, 200)
    pm = ex.pair_moments(p)
    assert pm.mean_m == pytest.approx(mean, rel=1e-12)
    assert pm.var_m == pytest.approx(var, rel=1e-10)


def test_small_loss_pair_statistics():
    # p_m -> lambda^m / (m!)^2 as kappa -> 0: Poisson-like only for large lambda.
    # At D/u = 1 the ratio var/mean is ~0.735 (not 1/2), matched by brute force.
    p = P(u=1.0, D=1.0, kappa=1e-8)
    mean, var = brute_force(p, 200)
    pm = ex.pair_moments(p)
    assert pm.var_m / pm.mean_m == pytest.approx(var / mean, rel=1e-9)
    big = P(u=1.0, D=1e3, kappa=1e-8)
    pmb = ex.pair_moments(big)
    assert pmb.var_m / pmb.mean_m == pytest.approx(0.5, abs=1e-3)


def test_fano_examples():
    assert ex.fano(P(u=1e-3, D=1 / (2 * math.sqrt(2)))) == pytest.approx(1.5, abs=0.02)
    assert ex.fano(P(u=1e-3, D=1.0)) == pytest.approx(1 + 0.5 / 15, rel=0.01)
    assert ex.fano(P(u=1.0, D=1e3)) == pytest.approx(1.0, abs=1e-2)


def test_fano_errors():
    with pytest.raises(InvalidParameters):
        ex.fano(P(D=0.0))
    with pytest.raises(DegenerateState):
        ex.fano(P(u=1e3, D=1e-200))


def test_order_parameter_below_and_above():
    assert ex.order_parameter(P(u=1e-4, D=0.2)) < 0.02
    assert ex.order_parameter(P(u=1e-4, D=0.5)) == pytest.approx(math.sqrt(0.75), rel=0.02)
    assert ex.order_parameter(P(u=1.0, D=1e-6)) < 1e-5


def test_order_parameter_monotone_in_u():
    for D in (0.5, 1.0, 2.0):
        target = math.sqrt(1 - 1 / (16 * D * D))
        gaps = [abs(ex.order_parameter(P(u=u, D=D)) - target) for u in (1e-2, 1e-3, 1e-4)]
        assert gaps[0] > gaps[1] > gaps[2]


def test_classify_phase():
    assert ex.classify_phase(P(D=0.2, h=0.0)).phase is Phase.SYMMETRIC
    assert ex.classify_phase(P(D=1.0, h=0.0)).phase is Phase.SSB_STATIC
    assert ex.classify_phase(P(D=1.0, h=0.5)).phase is Phase.LIMIT_CYCLE_OR_TORUS
    edge = ex.classify_phase(P(D=0.25))
    assert edge.phase is Phase.SYMMETRIC and edge.at_threshold
    zeroK = P(D=1.0, h=0.5, K=np.zeros((2, 2)))
    assert ex.classify_phase(zeroK).phase is Phase.SSB_STATIC


def test_semiclassical_nss():
    assert ex.semiclassical_nss(P(u=0.02, D=1.0)) == pytest.approx(48.41229182759271, rel=1e-14)
    assert ex.semiclassical_nss(P(D=0.25)) == 0.0
    assert ex.semiclassical_nss(P(u=1.0, D=1.0, kappa=1e-12)) == pytest.approx(1.0)


def test_steady_state_independent_of_h_and_K():
    base = P(u=0.3, D=0.7)
    rng = np.random.default_rng(0)
    A = rng.standard_normal((2, 2))
    other = base.with_(h=1.3, K=A - A.T)
    assert ex.mean_photon_number(other) == ex.mean_photon_number(base)
    assert ex.fano(other) == ex.fano(base)


@settings(max_examples=40, deadline=None)
@given(
    N=st.integers(1, 6),
    u=st.floats(0.01, 2.0),
    D=st.floats(0.0, 3.0),
    kappa=st.floats(0.05, 4.0),
)
def test_norm_real_and_at_least_one(N, u, D, kappa):
    p = ModelParams(N, u, D, kappa)
    Z = ex.norm(p)
    assert abs(Z.value.imag) <= 1e-10 * abs(Z.value)
    assert Z.log_abs >= -1e-14
    if D == 0:
        assert Z.real() == 1.0


@settings(max_examples=30, deadline=None)
@given(u=st.floats(0.05, 2.0), D=st.floats(0.05, 2.0), kappa=st.floats(0.1, 3.0))
def test_closed_form_matches_sum_over_pairs(u, D, kappa):
    p = ModelParams(2, u, D, kappa)
    mean, var = brute_force(p, 400)
    assert ex.mean_photon_number(p) == pytest.approx(mean, rel=1e-9)
    assert ex.fano(p) == pytest.approx(var / mean + 0.5, rel=1e-8)


def test_model_validation():
    with pytest.raises(InvalidParameters):
        ModelParams(2, 0.0, 1.0, 1.0)
    with pytest.raises(InvalidParameters):
        ModelParams(2, 1.0, 1.0, 0.0)
    with pytest.raises(InvalidParameters):
        ModelParams(2, 1.0, -1.0, 1.0)
    with pytest.raises(InvalidParameters):
        ModelParams(2, 1.0, 1.0, 1.0, K=np.ones((2, 2)))
    p = ModelParams.from_dict(P(N=3, h=0.2).to_dict())
    assert np.array_equal(p.K, canonical_coupling(3))
    with pytest.raises(InvalidParameters):
        ModelParams.from_dict({"N": 2, "u": 1, "D": 1, "kappa": 1, "bogus": 0})
