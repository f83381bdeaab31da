"""Closed-form steady-state observables of the N-mode model.

The steady state is the partial trace of a pure pair condensate,

    |psi> = sum_m c_m (K_+)^m |0>,   c_m = (D/u)^m / (m! (delta)_m),

with delta = 1 - i kappa / 4u and K_+ = (1/2) sum_i alpha_i^dag^2 acting on
the symmetric combinations of system and auxiliary modes.  Every observable
below is a ratio of 1F2(N/2 + j; delta + j, delta* + j; lambda) values with
lambda = (D/u)^2.  None of them depends on h or K.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import DegenerateState, InvalidParameters
from .model import ModelParams
from .specfun import DEFAULT_TOL, SeriesResult, hyp1f2, log_pochhammer, series_ratio

_TAIL_FRACTION = 1e-14


class Phase(str, enum.Enum):
    SYMMETRIC = "symmetric"
    SSB_STATIC = "ssb_static"
    LIMIT_CYCLE_OR_TORUS = "limit_cycle_or_torus"


@dataclass(frozen=True)
class PhaseLabel:
    phase: Phase
    at_threshold: bool = False

    def __str__(self) -> str:
        return self.phase.value + ("*" if self.at_threshold else "")


@dataclass(frozen=True)
class NessDescriptor:
    """Derived exact-solution data.

    ``log_coefficients[m]`` is the principal log of c_m; ``coefficients``
    exponentiates it and overflows to inf once |c_m| > 1e308 (lambda beyond
    roughly 1e5).  ``pair_distribution`` is the normalised probability of m
    pairs, p_m = |c_m|^2 (N/2)_m m! / Z, and never overflows.
    """

    delta: complex
    lam: float
    log_norm_Z: float
    log_coefficients: np.ndarray
    pair_distribution: np.ndarray

    @property
    def norm_Z(self) -> float:
        return math.exp(self.log_norm_Z) if self.log_norm_Z < 709 else math.inf

    @property
    def coefficients(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_coefficients)

    @property
    def m_max(self) -> int:
        return len(self.log_coefficients) - 1


def _log_coefficients(params: ModelParams, m: np.ndarray) -> np.ndarray:
    # log c_m = m log(D/u) - log m! - log (delta)_m
    if params.D == 0:
        out = np.full(np.shape(m), -np.inf, dtype=complex)
        out[m == 0] = 0.0
        return out
    out = m * math.log(params.D / params.u) - gammaln(m + 1) - log_pochhammer(params.delta, m)
    out = np.asarray(out, dtype=complex)
    out[m == 0] = 0.0
    return out


def _log_pair_weights(params: ModelParams, m: np.ndarray) -> np.ndarray:
    logc = _log_coefficients(params, m)
    return 2 * logc.real + log_pochhammer(params.N / 2, m).real + gammaln(m + 1)


def _auto_m_max(params: ModelParams) -> int:
    if params.D == 0:
        return 1
    # grow in chunks until the remaining tail is negligible
    size = 64
    while True:
        m = np.arange(size + 1)
        logw = _log_pair_weights(params, m)
        w = np.exp(logw - logw.max())
        running = np.cumsum(w)
        ratio = w[1:] / np.where(w[:-1] > 0, w[:-1], 1.0)
        for k in range(1, size + 1):
            r = ratio[k - 1]
            if r < 1 and w[k] * r / (1 - r) < _TAIL_FRACTION * running[k]:
                return max(k, 1)
        size *= 2


def norm(params: ModelParams, tol: float = DEFAULT_TOL) -> SeriesResult:
    """Z = 1F2(N/2; delta, delta*; lambda), the purification norm."""
    d = params.delta
    return hyp1f2(params.N / 2, d, d.conjugate(), params.lam, tol=tol)


def descriptor(params: ModelParams, m_max: int | None = None) -> NessDescriptor:
    """Collect delta, lambda, Z and the purification coefficients c_m.

    ``m_max=None`` picks the truncation where the pair-number tail drops
    below 1e-14 of the accumulated norm.
    """
    if m_max is None:
        m_max = _auto_m_max(params)
    if m_max < 1:
        raise InvalidParameters("m_max must be >= 1")
    Z = norm(params)
    m = np.arange(m_max + 1)
    logc = _log_coefficients(params, m)
    if params.D == 0:
        logc[1:] = -np.inf
        pairs = np.zeros(m_max + 1)
        pairs[0] = 1.0
    else:
        pairs = np.exp(_log_pair_weights(params, m) - Z.log_abs)
    return NessDescriptor(
        delta=params.delta,
        lam=params.lam,
        log_norm_Z=Z.log_abs,
        log_coefficients=logc,
        pair_distribution=pairs,
    )


def _shifted_ratio(params: ModelParams, shift: int) -> float:
    """1F2(N/2+s; delta+s, delta*+s; lam) / 1F2(N/2; delta, delta*; lam)."""
    d = params.delta
    a = params.N / 2
    num = hyp1f2(a + shift, d + shift, d.conjugate() + shift, params.lam)
    den = hyp1f2(a, d, d.conjugate(), params.lam)
    return series_ratio(num, den).real


def mean_photon_number(params: ModelParams) -> float:
    """Exact total photon number <n> (identical to the mean pair number)."""
    if params.D == 0:
        return 0.0
    d = params.delta
    a = params.N / 2
    return params.lam * a / abs(d) ** 2 * _shifted_ratio(params, 1)


@dataclass(frozen=True)
class PairMoments:
    mean_m: float
    m_mminus1: float
    var_m: float

    def __iter__(self):
        return iter((self.mean_m, self.m_mminus1, self.var_m))


def pair_moments(params: ModelParams) -> PairMoments:
    """<m>, <m(m-1)> = lam^2 Z''/Z and Var(m) of the pair number."""
    if params.D == 0:
        return PairMoments(0.0, 0.0, 0.0)
    d = params.delta
    a = params.N / 2
    lam = params.lam
    mean = lam * a / abs(d) ** 2 * _shifted_ratio(params, 1)
    second = lam**2 * a * (a + 1) / (abs(d) ** 2 * abs(d + 1) ** 2) * _shifted_ratio(params, 2)
    return PairMoments(mean, second, second + mean - mean**2)


def fano(params: ModelParams) -> float:
    """Var(n)/<n> = Var(m)/<m> + 1/2.

    Var(m) is formed as <m(m-1)> + <m> - <m>^2, so the relative error grows
    like eps * <m>^2 / Var(m): about 1e-9 at <n> ~ 1e3.
    """
    if params.D <= 0:
        raise InvalidParameters("fano requires D > 0")
    moments = pair_moments(params)
    if moments.mean_m <= 0 or not math.isfinite(moments.mean_m):
        raise DegenerateState(f"<m> = {moments.mean_m!r}; Fano ratio undefined")
    return moments.var_m / moments.mean_m + 0.5


def order_parameter(params: ModelParams) -> float:
    """<n> / (D/u); tends to sqrt(1 - kappa^2/16D^2) above threshold as u -> 0."""
    if params.D <= 0:
        raise InvalidParameters("order_parameter requires D > 0")
    return mean_photon_number(params) / (params.D / params.u)


def classify_phase(params: ModelParams) -> PhaseLabel:
    threshold = params.kappa / 4.0
    if params.D < threshold:
        return PhaseLabel(Phase.SYMMETRIC)
    if params.D == threshold:
        return PhaseLabel(Phase.SYMMETRIC, at_threshold=True)
    if params.h == 0 or not np.any(params.K):
        return PhaseLabel(Phase.SSB_STATIC)
    return PhaseLabel(Phase.LIMIT_CYCLE_OR_TORUS)


def semiclassical_nss(params: ModelParams) -> float:
    """Mean-field attractor radius squared, (D/u) sqrt(1 - kappa^2/16D^2)."""
    if not params.above_threshold:
        return 0.0
    return params.D / params.u * math.sqrt(1.0 - params.kappa**2 / (16.0 * params.D**2))
