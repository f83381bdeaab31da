import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from paramlc import vdp
from paramlc.errors import CutoffTooSmall, InvalidParameters
from paramlc.exact_ness import fano as main_fano
from paramlc.model import ModelParams
from paramlc.vdp import VdpParams


def moments(rho):
    m = np.arange(len(rho))
    mean = rho @ m
    return mean, (rho @ m**2 - mean**2) / mean


def test_params_derived():
    p = VdpParams(2.0, 6.0, 3.0)
    assert (p.a, p.b, p.alpha, p.beta) == (2 / 3, 2.0, 2.0, 8 / 3)
    assert p.to_dict() == {"kappa": 2.0, "gamma1": 6.0, "gamma2": 3.0}
    for bad in [(-1, 1, 1), (0, 0, 1), (0, 1, 0)]:
        with pytest.raises(InvalidParameters):
            VdpParams(*bad)


def test_equal_rates_mean_one():
    p = VdpParams(0.0, 1.0, 1.0)
    assert vdp.vdp_mean_photon(p) == pytest.approx(1.0, abs=1e-12)
    rho = vdp.vdp_fock_distribution(p, 40)
    assert moments(rho)[0] == pytest.approx(1.0, abs=1e-10)


def test_equal_rates_closed_form_populations():
    # alpha = beta = 1: rho_m = 1F1(1+m; 1+m; 1) / (m! 1F1(1;1;2)) = e^{-1} / m!
    rho = vdp.vdp_fock_distribution(VdpParams(0.0, 1.0, 1.0), 40)
    m = np.arange(41)
    expected = np.exp(-1.0 - np.array([math.lgamma(k + 1) for k in m]))
    np.testing.assert_allclose(rho, expected, rtol=1e-12, atol=1e-300)


def test_strong_gain_limits():
    p = VdpParams(0.0, 200.0, 1.0)
    assert vdp.vdp_mean_photon(p) == pytest.approx(100.0, rel=0.02)
    assert vdp.vdp_fano(p) == pytest.approx(1.5, rel=0.02)


def test_weak_gain_vacuum():
    p = VdpParams(1.0, 1e-6, 1.0)
    rho = vdp.vdp_fock_distribution(p, 10)
    assert rho[0] == pytest.approx(1.0, abs=1e-5)
    assert vdp.vdp_mean_photon(p) < 1e-5


def test_small_b_near_poisson():
    p = VdpParams(1.0, 1e-3, 1.0)
    F = vdp.vdp_fano(p)
    assert 1.0 <= F < 1.0 + 1e-2


def test_fano_increases_with_kappa():
    values = [vdp.vdp_fano(VdpParams(k, 50.0, 1.0)) for k in (0.0, 10.0, 25.0, 50.0)]
    assert np.all(np.diff(values) > 0)


@pytest.mark.parametrize("k,g1,g2", [(0, 1, 1), (0, 200, 1), (1, 1e-3, 1), (0, 50, 1), (50, 50, 1), (0.3, 7, 2)])
def test_closed_forms_match_distribution(k, g1, g2):
    p = VdpParams(k, g1, g2)
    rho = vdp.vdp_fock_distribution(p, vdp.auto_m_max(p))
    assert rho.sum() == pytest.approx(1.0, abs=1e-10)
    assert np.all(rho >= 0)
    mean, F = moments(rho)
    assert vdp.vdp_mean_photon(p) == pytest.approx(mean, rel=1e-8)
    assert vdp.vdp_fano(p) == pytest.approx(F, rel=1e-8)
    assert vdp.recursion_residual(p, rho) < 1e-8


@settings(max_examples=25, deadline=None)
@given(
    kappa=st.floats(0.0, 20.0),
    g1=st.floats(1e-2, 150.0),
    g2=st.floats(0.2, 5.0),
)
def test_recursion_path_agrees(kappa, g1, g2):
    p = VdpParams(kappa, g1, g2)
    M = vdp.auto_m_max(p)
    rho = vdp.vdp_fock_distribution(p, M)
    alt = vdp.vdp_recursion_distribution(p, M)
    assert np.max(np.abs(rho - alt)) < 1e-8
    assert vdp.recursion_residual(p, rho) < 1e-8


def test_rate_matrix_conserves_probability():
    G = vdp.rate_matrix(VdpParams(0.5, 3.0, 1.0), 30)
    np.testing.assert_allclose(np.asarray(G.sum(axis=0)).ravel(), 0.0, atol=1e-12)


def test_cutoff_too_small():
    with pytest.raises(CutoffTooSmall):
        vdp.vdp_fock_distribution(VdpParams(0.0, 200.0, 1.0), 100)
    with pytest.raises(InvalidParameters):
        vdp.vdp_fock_distribution(VdpParams(0.0, 1.0, 1.0), 0)


def test_contrast_with_main_model():
    F_vdp = vdp.vdp_fano(VdpParams(0.0, 200.0, 1.0))
    F_main = main_fano(ModelParams(2, 1.0, 1e3, 1.0))
    assert F_vdp - F_main > 0.4
