"""Steady state of the quantum van der Pol oscillator.

Master equation kappa D[a] + gamma1 D[a^dag] + gamma2 D[a^2].  With
alpha = gamma1/gamma2 and beta = (kappa + gamma1)/gamma2 the populations are

    rho_m = alpha^m / (beta)_m * 1F1(1+m; beta+m; alpha) / 1F1(1; beta; 2 alpha).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import CutoffTooSmall, InvalidParameters
from .specfun import hyp1f1, series_ratio

TAIL_LIMIT = 1e-8
SERIES_TOL = 1e-16


@dataclass(frozen=True)
class VdpParams:
    kappa: float
    gamma1: float
    gamma2: float

    def __post_init__(self):
        if self.kappa < 0:
            raise InvalidParameters("kappa must be >= 0")
        if self.gamma1 <= 0 or self.gamma2 <= 0:
            raise InvalidParameters("gamma1 and gamma2 must be > 0")

    @property
    def a(self) -> float:
        return self.kappa / self.gamma2

    @property
    def b(self) -> float:
        return self.gamma1 / self.gamma2

    @property
    def alpha(self) -> float:
        return self.gamma1 / self.gamma2

    @property
    def beta(self) -> float:
        return (self.kappa + self.gamma1) / self.gamma2

    def to_dict(self) -> dict:
        return {"kappa": self.kappa, "gamma1": self.gamma1, "gamma2": self.gamma2}


def _log_populations(params: VdpParams, m_max: int) -> np.ndarray:
    # accumulate log(alpha / (beta + k)) step by step: forming m log(alpha)
    # and log (beta)_m separately loses ~|m log alpha| * eps to cancellation
    al, be = params.alpha, params.beta
    m = np.arange(m_max + 1)
    steps = np.log(al / (be + m[:-1]))
    out = np.concatenate([[0.0], np.cumsum(steps)])
    out -= hyp1f1(1, be, 2 * al, tol=SERIES_TOL).log_abs
    for k in m:
        out[k] += hyp1f1(1 + k, be + k, al, tol=SERIES_TOL).log_abs
    return out


def vdp_fock_distribution(params: VdpParams, m_max: int) -> np.ndarray:
    """Closed-form populations rho_0 .. rho_m_max.

    Raises
    ------
    CutoffTooSmall
        If more than 1e-8 of the probability lies above ``m_max``.
    """
    if m_max < 1:
        raise InvalidParameters("m_max must be >= 1")
    rho = np.exp(_log_populations(params, m_max))
    tail = 1.0 - rho.sum()
    if tail > TAIL_LIMIT:
        raise CutoffTooSmall(f"m_max={m_max} leaves tail mass {tail:.3e}")
    return rho / rho.sum()


def auto_m_max(params: VdpParams) -> int:
    """Cutoff comfortably beyond the bulk of the distribution."""
    mean = vdp_mean_photon(params)
    return int(max(20, mean + 12 * math.sqrt(mean + 1) + 10 * math.log1p(mean) + 20))


def vdp_mean_photon(params: VdpParams) -> float:
    """<n> = (alpha/beta) 1F1(2; beta+1; 2 alpha) / 1F1(1; beta; 2 alpha)."""
    al, be = params.alpha, params.beta
    return al / be * series_ratio(hyp1f1(2, be + 1, 2 * al), hyp1f1(1, be, 2 * al)).real


def vdp_fano(params: VdpParams) -> float:
    """Var(n) / <n> from the closed-form factorial moments."""
    al, be = params.alpha, params.beta
    r1 = series_ratio(hyp1f1(2, be + 1, 2 * al), hyp1f1(1, be, 2 * al)).real
    r2 = series_ratio(hyp1f1(3, be + 2, 2 * al), hyp1f1(2, be + 1, 2 * al)).real
    return 1 + (al / be) * (2 * be / (be + 1) * r2 - r1)


def rate_matrix(params: VdpParams, m_max: int) -> sp.csr_matrix:
    """Generator G with d rho / dt = G rho on populations 0..m_max (truncated)."""
    k, g1, g2 = params.kappa, params.gamma1, params.gamma2
    m = np.arange(m_max + 1, dtype=float)
    # gain out of the top level is dropped so the truncated chain conserves probability
    gain_out = g1 * (m + 1)
    gain_out[-1] = 0.0
    diag = -(k * m + gain_out + g2 * m * (m - 1))
    G = sp.diags(diag, 0, shape=(m_max + 1,) * 2, format="lil")
    for j in range(m_max + 1):
        if j + 1 <= m_max:
            G[j, j + 1] += k * (j + 1)
            G[j + 1, j] += gain_out[j]
        if j + 2 <= m_max:
            G[j, j + 2] += g2 * (j + 2) * (j + 1)
    return G.tocsr()


def recursion_residual(params: VdpParams, rho) -> float:
    """max_m |steady-state balance at m| / max rho, over rows not touching the cutoff."""
    rho = np.asarray(rho, dtype=float)
    k, g1, g2 = params.kappa, params.gamma1, params.gamma2
    M = len(rho) - 1
    r = np.concatenate([[0.0], rho, [0.0, 0.0]])  # r[m+1] = rho_m, rho_-1 = 0
    res = []
    for m in range(0, M - 1):
        val = (
            k * (m + 1) * r[m + 2]
            + g1 * m * r[m]
            + g2 * (m + 1) * (m + 2) * r[m + 3]
            - (k * m + g1 * (m + 1) + g2 * m * (m - 1)) * r[m + 1]
        )
        res.append(abs(val))
    return float(max(res) / rho.max())


def vdp_recursion_distribution(params: VdpParams, m_max: int) -> np.ndarray:
    """Populations from the truncated balance equations (null vector of G)."""
    G = rate_matrix(params, m_max).tolil()
    G[0, :] = np.ones(m_max + 1)
    rhs = np.zeros(m_max + 1)
    rhs[0] = 1.0
    rho = spla.spsolve(G.tocsc(), rhs)
    return rho / rho.sum()
