import time

import numpy as np
import pytest
import scipy.sparse as sp

from paramlc import exact_ness as ex
from paramlc import fockspace as fs
from paramlc import liouville as lv
from paramlc.errors import DegenerateKernel, DimensionOverflow, InvalidParameters
from paramlc.model import ModelParams

ORACLE = ModelParams(2, 1.0, 0.5, 1.0)


def random_hermitian(d, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    return X + X.conj().T


def test_generator_matches_direct_master_equation():
    p = ModelParams(2, 0.7, 0.4, 1.3, h=0.25)
    c = 3
    L = lv.build_liouvillian(p, c)
    H = lv.hamiltonian(p, c).toarray()
    a1, a2 = (a.toarray() for a in fs.mode_operators((c, c)))
    rho = random_hermitian((c + 1) ** 2, 5)
    direct = -1j * (H @ rho - rho @ H)
    for a in (a1, a2):
        ad = a.conj().T
        direct += p.kappa * (a @ rho @ ad - 0.5 * (ad @ a @ rho + rho @ ad @ a))
    np.testing.assert_allclose(L.apply(rho), direct, atol=1e-12)


def test_hamiltonian_hopping_term():
    p = ModelParams(2, 1.0, 0.0, 1.0, h=0.5)
    H = lv.hamiltonian(p, 2).toarray()
    a1, a2 = (a.toarray() for a in fs.mode_operators((2, 2)))
    n = a1.T @ a1 + a2.T @ a2
    expected = n @ n - 1j * 0.5 * (a1.T @ a2 - a2.T @ a1)
    np.testing.assert_allclose(H, expected, atol=1e-14)
    np.testing.assert_allclose(H, H.conj().T, atol=1e-14)


def test_trace_and_hermiticity_preservation():
    L = lv.build_liouvillian(ModelParams(2, 1.0, 0.5, 1.0, h=0.3), 6)
    d = L.hilbert_dim
    for seed in range(3):
        rho = random_hermitian(d, seed)
        out = L.apply(rho)
        assert abs(np.trace(out)) < 1e-10 * np.linalg.norm(rho)
        assert np.max(np.abs(out - out.conj().T)) < 1e-10 * np.max(np.abs(rho))


def test_left_null_vector_is_identity():
    L = lv.build_liouvillian(ORACLE, 6)
    d = L.hilbert_dim
    left = np.eye(d).ravel().conj() @ L.matrix
    assert np.max(np.abs(left)) < 1e-10


def test_vacuum_steady_state():
    rho = lv.steady_state(ModelParams(2, 1.0, 0.0, 1.0), 3)
    assert abs(rho.matrix[0, 0] - 1) < 1e-12
    assert np.max(np.abs(rho.matrix - np.diag(np.diag(rho.matrix)))) < 1e-12


@pytest.mark.parametrize("cutoff", [8, 10])
def test_photon_number_oracle(cutoff):
    rho = lv.steady_state(ORACLE, cutoff)
    assert rho.photon_number() == pytest.approx(ex.mean_photon_number(ORACLE), rel=1e-6)
    rho.check()


def test_hopping_does_not_change_steady_state():
    n0 = lv.steady_state(ORACLE, 8).photon_number()
    nh = lv.steady_state(ORACLE.with_(h=0.3), 8).photon_number()
    assert nh == pytest.approx(n0, rel=1e-6)


def test_cross_module_fano_and_negativity():
    rho = lv.steady_state(ORACLE, 10)
    assert rho.fano() == pytest.approx(ex.fano(ORACLE), rel=1e-5)
    ref = fs.log_negativity(fs.build_ness_density_matrix(ORACLE, 10))
    assert fs.log_negativity(rho) == pytest.approx(ref, rel=1e-5)


def test_cutoff_convergence_is_cauchy():
    ns = {c: lv.steady_state(ORACLE, c).photon_number() for c in range(6, 13)}
    diffs = [abs(ns[c] - ns[c + 2]) for c in range(6, 11)]
    assert all(b < a for a, b in zip(diffs, diffs[1:]))


def test_uniqueness_report():
    rho = lv.steady_state(ORACLE, 6)
    assert rho.meta["sigma2_lower_bound"] > 1e-8
    assert rho.meta["kernel_residual"] < 1e-12


def test_degenerate_kernel_detected():
    # pure dephasing-free unitary dynamics with a diagonal Hamiltonian: every
    # diagonal density matrix is stationary
    p = ModelParams(2, 1.0, 0.0, 1.0)
    d = 9
    H = sp.diags(np.arange(d, dtype=float) ** 2)
    eye = sp.identity(d)
    M = sp.csc_matrix(-1j * (sp.kron(H, eye) - sp.kron(eye, H.T)))
    L = lv.LiouvillianMatrix(d * d, M, p, 2)
    with pytest.raises(DegenerateKernel):
        lv.steady_state_nullvector(L)


def test_dimension_guard():
    with pytest.raises(DimensionOverflow):
        lv.build_liouvillian(ORACLE, 60)
    with pytest.raises(InvalidParameters):
        lv.build_liouvillian(ModelParams(3, 1.0, 0.5, 1.0), 4)


def test_sectors_cover_all_indices():
    L = lv.build_liouvillian(ORACLE.with_(h=0.3), 5)
    sectors = lv.invariant_sectors(L.matrix)
    allidx = np.sort(np.concatenate(sectors))
    np.testing.assert_array_equal(allidx, np.arange(L.dim))
    for s in sectors:
        mask = np.zeros(L.dim, bool)
        mask[s] = True
        assert L.matrix[mask][:, ~mask].nnz == 0


def test_runtime_budget():
    t0 = time.perf_counter()
    lv.steady_state(ORACLE, 10)
    lv.steady_state(ORACLE.with_(h=0.3), 10)
    assert time.perf_counter() - t0 < 60
