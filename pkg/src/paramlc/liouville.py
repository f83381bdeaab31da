"""Brute-force Lindblad steady state on a truncated two-mode Fock space.

Vectorisation is row-major, vec(A rho B) = (A kron B^T) vec(rho), so the
generator for drho/dt = -i[H, rho] + kappa sum_i D[a_i] rho reads

    L = -i (H kron 1 - 1 kron H^T)
        + kappa sum_i [a_i kron conj(a_i) - (n_i kron 1 + 1 kron n_i^T) / 2]

with real ladder matrices, so conj(a_i) = a_i.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .errors import DegenerateKernel, DimensionOverflow, InvalidParameters
from .fockspace import A_BASIS, DensityMatrix, mode_operators
from .model import ModelParams

MAX_HILBERT_DIM = 3000
UNIQUENESS_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class LiouvillianMatrix:
    dim: int
    matrix: sp.csc_matrix
    params: ModelParams
    cutoff: int

    @property
    def hilbert_dim(self) -> int:
        return math.isqrt(self.dim)

    def apply(self, rho: np.ndarray) -> np.ndarray:
        """L acting on a square density-like matrix."""
        d = self.hilbert_dim
        return (self.matrix @ np.asarray(rho, dtype=complex).ravel()).reshape(d, d)


def hamiltonian(params: ModelParams, cutoff: int) -> sp.csr_matrix:
    """H = u n^2 - D sum(a^2 + a^dag^2) - i h sum K_ij a_i^dag a_j (N = 2)."""
    a1, a2 = mode_operators((cutoff, cutoff))
    ops = (a1, a2)
    n = a1.T @ a1 + a2.T @ a2
    H = params.u * (n @ n)
    for a in ops:
        H = H - params.D * (a @ a + (a @ a).T)
    if params.h != 0:
        K = params.K
        for i in range(2):
            for j in range(2):
                if K[i, j] != 0:
                    H = H - 1j * params.h * K[i, j] * (ops[i].T @ ops[j])
    return sp.csr_matrix(H)


def build_liouvillian(params: ModelParams, cutoff: int) -> LiouvillianMatrix:
    """Sparse Lindblad generator for N = 2 at ``cutoff`` levels per mode.

    Raises
    ------
    DimensionOverflow
        If the Hilbert dimension (cutoff+1)^2 exceeds ``MAX_HILBERT_DIM``.
    """
    if params.N != 2:
        raise InvalidParameters("the Liouvillian oracle supports N = 2 only")
    if cutoff < 1:
        raise InvalidParameters("cutoff must be positive")
    d = (cutoff + 1) ** 2
    if d > MAX_HILBERT_DIM:
        raise DimensionOverflow(f"Hilbert dimension {d} exceeds {MAX_HILBERT_DIM}")
    eye = sp.identity(d, format="csr", dtype=complex)
    H = hamiltonian(params, cutoff)
    L = -1j * (sp.kron(H, eye) - sp.kron(eye, H.T))
    for a in mode_operators((cutoff, cutoff)):
        num = a.T @ a
        L = L + params.kappa * (
            sp.kron(a, a) - 0.5 * sp.kron(num, eye) - 0.5 * sp.kron(eye, num.T)
        )
    return LiouvillianMatrix(d * d, sp.csc_matrix(L), params, cutoff)


def invariant_sectors(L: sp.spmatrix) -> list[np.ndarray]:
    """Index sets of the decoupled blocks of ``L`` (connected components of its pattern)."""
    pattern = sp.csr_matrix((np.ones(L.nnz), L.nonzero()), shape=L.shape)
    n_comp, labels = connected_components(pattern, directed=False)
    order = np.argsort(labels, kind="stable")
    return np.split(order, np.flatnonzero(np.diff(labels[order])) + 1)


def _factor(A: sp.csc_matrix):
    # a weak pivot threshold keeps the minimum-degree ordering intact; the
    # kernel residual is checked afterwards
    return spla.splu(
        A, permc_spec="MMD_AT_PLUS_A", diag_pivot_thresh=0.01, options={"SymmetricMode": True}
    )


def _smallest_singular_value(lu, dim: int, iters: int = 200, rtol: float = 1e-6) -> float:
    """Inverse power iteration on (A^H A)^-1 with an existing LU of A."""
    rng = np.random.default_rng(0)
    x = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(iters):
        y = lu.solve(lu.solve(x, trans="H"))
        nrm = np.linalg.norm(y)
        if not np.isfinite(nrm) or nrm == 0:
            return 0.0
        prev, est = est, nrm
        x = y / nrm
        if prev and abs(est - prev) < rtol * est:
            break
    return 1.0 / math.sqrt(est)


def _norm_estimate(L: sp.spmatrix) -> float:
    # sqrt(||L||_1 ||L||_inf) bounds the spectral norm from above
    return float(spla.norm(L, 1) * spla.norm(L, np.inf)) ** 0.5


@dataclass(frozen=True)
class KernelReport:
    """Diagnostics of the null-space solve."""

    sigma2_lower_bound: float
    norm_L: float
    residual: float
    n_sectors: int


def solve_kernel(L: LiouvillianMatrix, check_unique: bool = True) -> tuple[np.ndarray, KernelReport]:
    """Unit-trace right kernel vector of ``L`` and its uniqueness diagnostics.

    ``L`` is split into its decoupled sectors.  In the sector holding the
    diagonal of rho one row is replaced by the trace functional; the solve of
    that bordered system gives the kernel vector.  Since the replacement is a
    rank-one change, Weyl's inequality gives sigma_min(replaced) <= sigma_2(L)
    within that sector, and every other sector must be nonsingular.  The
    minimum of these singular values is therefore a certified lower bound on
    the second-smallest singular value of L.
    """
    d = L.hilbert_dim
    M = L.matrix
    diag = np.arange(d) * (d + 1)
    sectors = invariant_sectors(M)
    home = [s for s in sectors if np.isin(diag, s).any()]
    if len(home) != 1:
        # diagonal spread over several sectors: solve on the full matrix
        home = [np.arange(M.shape[0])]
        sectors = home
    idx = home[0]
    on_diag = np.isin(idx, diag)
    A = sp.lil_matrix(M[idx][:, idx])
    A[0, :] = on_diag.astype(complex)
    rhs = np.zeros(len(idx), dtype=complex)
    rhs[0] = 1.0
    try:
        lu = _factor(sp.csc_matrix(A))
    except RuntimeError as exc:
        raise DegenerateKernel(f"bordered kernel system is singular: {exc}") from exc
    v = np.zeros(M.shape[0], dtype=complex)
    v[idx] = lu.solve(rhs)
    if not np.all(np.isfinite(v)):
        raise DegenerateKernel("kernel solve produced non-finite values")

    norm_L = _norm_estimate(M)
    sigma = math.inf
    if check_unique:
        sigma = _smallest_singular_value(lu, len(idx))
        for other in sectors:
            if other is idx:
                continue
            try:
                lu_o = _factor(sp.csc_matrix(M[other][:, other]))
            except RuntimeError:
                sigma = 0.0
                break
            sigma = min(sigma, _smallest_singular_value(lu_o, len(other)))
        if sigma < UNIQUENESS_RTOL * norm_L:
            raise DegenerateKernel(
                f"second singular value bound {sigma:.3e} below "
                f"{UNIQUENESS_RTOL:g}*||L|| = {UNIQUENESS_RTOL * norm_L:.3e}"
            )
    residual = float(np.linalg.norm(M @ v) / np.linalg.norm(v))
    return v, KernelReport(sigma, norm_L, residual, len(sectors))


def steady_state_nullvector(L: LiouvillianMatrix, check_unique: bool = True) -> DensityMatrix:
    """Unit-trace steady state from the kernel of ``L``.

    Raises
    ------
    DegenerateKernel
        If the second-smallest singular value is below 1e-8 * ||L|| or the
        solve fails.
    """
    d = L.hilbert_dim
    v, report = solve_kernel(L, check_unique)
    rho = v.reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    meta = {
        "params": L.params.to_dict(),
        "source": "liouvillian",
        "sigma2_lower_bound": report.sigma2_lower_bound,
        "kernel_residual": report.residual,
    }
    return DensityMatrix((L.cutoff, L.cutoff), A_BASIS, rho, meta)


def steady_state(params: ModelParams, cutoff: int) -> DensityMatrix:
    return steady_state_nullvector(build_liouvillian(params, cutoff))
