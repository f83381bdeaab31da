"""Phase diffusion on the two-mode limit cycle.

Linearised Langevin equations for the ring phase and the tangential
y-quadrature fluctuation:

    dphi/dt = h + 4u sqrt(n_ss) dy + sqrt(kappa / n_ss) xi_1
    d(dy)/dt = -kappa dy + sqrt(kappa) xi_2,      <xi_i xi_j> = delta_ij / 4

giving D_phi = kappa/(8 n_ss) + 2 u^2 n_ss / kappa = (kappa / 8 n_ss) r^2
with r = 4D/kappa.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.signal import lfilter

from .errors import BelowThreshold, InvalidParameters, StepTooLarge
from .exact_ness import semiclassical_nss
from .model import ModelParams

NOISE_VARIANCE = 0.25
MAX_DT_KAPPA = 0.1


def _require_two_mode_above(params: ModelParams) -> float:
    if params.N != 2:
        raise InvalidParameters("phase diffusion is implemented for N = 2 only")
    if not params.above_threshold:
        raise BelowThreshold("phase diffusion requires D > kappa/4")
    return semiclassical_nss(params)


def pump_ratio(params: ModelParams) -> float:
    """r = 4D / kappa."""
    return 4 * params.D / params.kappa


def analytic_phase_diffusion(params: ModelParams, amplitude_coupling: bool = True) -> float:
    """D_phi = (kappa / 8 n_ss)(1 + 16 u^2 n_ss^2 / kappa^2).

    With ``amplitude_coupling=False`` only the direct vacuum-noise part
    kappa / 8 n_ss is returned.
    """
    n = _require_two_mode_above(params)
    k = params.kappa
    direct = k / (8 * n)
    if not amplitude_coupling:
        return direct
    return direct * (1 + 16 * params.u**2 * n**2 / k**2)


def analytic_phase_diffusion_r_form(params: ModelParams) -> float:
    """Same quantity written as (kappa / 8 n_ss) r^2."""
    n = _require_two_mode_above(params)
    return params.kappa / (8 * n) * pump_ratio(params) ** 2


def schawlow_townes_ratio(params: ModelParams) -> float:
    """D_phi / (kappa / 4 n_ss) = r^2 / 2."""
    n = _require_two_mode_above(params)
    return analytic_phase_diffusion(params) / (params.kappa / (4 * n))


@dataclass(frozen=True, eq=False)
class DiffusionEstimate:
    """Monte Carlo phase-diffusion estimate.

    ``var_phi`` and ``mean_phi`` hold the ensemble statistics of
    phi(t) - phi(0) - h t at the sample times ``t``.
    """

    d_phi_hat: float
    stderr: float
    n_trajectories: int
    analytic: float
    seed: int
    mean_advance: float = 0.0
    advance_stderr: float = 0.0
    t: np.ndarray = field(default_factory=lambda: np.empty(0))
    var_phi: np.ndarray = field(default_factory=lambda: np.empty(0))
    mean_phi: np.ndarray = field(default_factory=lambda: np.empty(0))

    @property
    def z_score(self) -> float:
        if self.stderr == 0:
            return 0.0 if self.d_phi_hat == self.analytic else math.inf
        return (self.d_phi_hat - self.analytic) / self.stderr

    def summary(self) -> dict:
        return {
            "d_phi_hat": self.d_phi_hat,
            "stderr": self.stderr,
            "analytic": self.analytic,
            "n_trajectories": self.n_trajectories,
            "seed": self.seed,
            "mean_advance": self.mean_advance,
            "advance_stderr": self.advance_stderr,
        }


def trajectory_generator(seed: int, index: int) -> np.random.Generator:
    """Philox stream for trajectory ``index``: SeedSequence(seed, spawn_key=(index,))."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(index,))))


def _simulate_batch(
    indices: range,
    seed: int,
    n_steps: int,
    every: int,
    dt: float,
    drift: float,
    coupling: float,
    direct: float,
    kappa: float,
    noise_scale: float,
    chunk: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Sampled phi(t) - phi(0) for a batch and the final total advance."""
    B = len(indices)
    gens = [trajectory_generator(seed, i) for i in indices]
    sigma = noise_scale * math.sqrt(NOISE_VARIANCE * dt)
    # stationary start for the OU fluctuation: variance sigma_y^2 / (2 kappa) per unit noise
    y0 = np.array([g.standard_normal() for g in gens]) * noise_scale * math.sqrt(NOISE_VARIANCE / 2)
    a = 1.0 - kappa * dt
    n_samples = n_steps // every + 1
    samples = np.zeros((B, n_samples))
    phi = np.zeros(B)
    y = y0
    step = 0
    while step < n_steps:
        m = min(chunk, n_steps - step)
        # draw (xi1, xi2) pairs step by step so the stream is independent of chunking
        noise = np.stack([g.standard_normal((m, 2)) for g in gens])  # (B, m, 2)
        xi1, xi2 = noise[:, :, 0] * sigma, noise[:, :, 1] * sigma
        # y_{k+1} = a y_k + sqrt(kappa) xi2_k
        y_next, _ = lfilter([1.0], [1.0, -a], math.sqrt(kappa) * xi2, axis=1, zi=(a * y)[:, None])
        y_left = np.concatenate([y[:, None], y_next[:, :-1]], axis=1)
        dphi = drift * dt + coupling * dt * y_left + direct * xi1
        path = phi[:, None] + np.cumsum(dphi, axis=1)
        k = np.arange(step + 1, step + m + 1)
        hit = k % every == 0
        samples[:, k[hit] // every] = path[:, hit]
        phi = path[:, -1]
        y = y_next[:, -1]
        step += m
    return samples, phi


def simulate_phase_sde(
    params: ModelParams,
    n_traj: int,
    T: float,
    dt: float | None = None,
    seed: int = 0,
    noise_scale: float = 1.0,
    amplitude_coupling: bool = True,
    window_start: float | None = None,
    n_samples: int = 400,
    batch: int = 64,
    chunk: int = 20_000,
) -> DiffusionEstimate:
    """Euler-Maruyama ensemble of the linearised phase equations.

    Each trajectory draws from its own Philox stream keyed by (seed, index),
    so results do not depend on batching.  ``d_phi_hat`` is half the OLS
    slope of the ensemble variance of phi(t) - h t against t over
    [window_start, T] (default start 5/kappa); its standard error comes from
    the per-trajectory influence values of that linear statistic.

    Raises
    ------
    BelowThreshold
        If D <= kappa/4.
    StepTooLarge
        If dt * kappa > 0.1.
    """
    n_ss = _require_two_mode_above(params)
    kappa = params.kappa
    dt = 1e-3 / kappa if dt is None else dt
    if dt * kappa > MAX_DT_KAPPA:
        raise StepTooLarge(f"dt*kappa = {dt * kappa:g} exceeds {MAX_DT_KAPPA}")
    if n_traj < 2:
        raise InvalidParameters("need at least two trajectories")
    n_steps = int(round(T / dt))
    every = max(1, n_steps // n_samples)
    coupling = 4 * params.u * math.sqrt(n_ss) if amplitude_coupling else 0.0
    direct = math.sqrt(kappa / n_ss)

    blocks, finals = [], []
    for start in range(0, n_traj, batch):
        s, f = _simulate_batch(
            range(start, min(start + batch, n_traj)), seed, n_steps, every, dt,
            params.h, coupling, direct, kappa, noise_scale, chunk,
        )
        blocks.append(s)
        finals.append(f)
    phi = np.concatenate(blocks)
    final = np.concatenate(finals)
    t = np.arange(phi.shape[1]) * every * dt
    z = phi - params.h * t

    mean = z.mean(axis=0)
    dev = z - mean
    var = np.sum(dev**2, axis=0) / (n_traj - 1)

    t0 = 5.0 / kappa if window_start is None else window_start
    sel = t >= t0
    if sel.sum() < 2:
        raise InvalidParameters("regression window holds fewer than two samples")
    tw = t[sel]
    w = (tw - tw.mean()) / np.sum((tw - tw.mean()) ** 2)
    slope = float(w @ var[sel])
    influence = n_traj / (n_traj - 1) * (dev[:, sel] ** 2 @ w)
    stderr = float(np.std(influence, ddof=1) / math.sqrt(n_traj))

    advance = final - 0.0
    return DiffusionEstimate(
        d_phi_hat=max(slope / 2, 0.0),
        stderr=stderr / 2,
        n_trajectories=n_traj,
        analytic=analytic_phase_diffusion(params, amplitude_coupling),
        seed=seed,
        mean_advance=float(advance.mean()),
        advance_stderr=float(advance.std(ddof=1) / math.sqrt(n_traj)),
        t=t,
        var_phi=var,
        mean_phi=mean,
    )


# ---------------------------------------------------------------------------
# Lyapunov covariance


def drift_matrix(params: ModelParams) -> np.ndarray:
    n = _require_two_mode_above(params)
    w = 4 * params.u * n
    return np.array([[0.0, w], [-w, -params.kappa]])


def lyapunov_residual(params: ModelParams, C) -> float:
    A = drift_matrix(params)
    Q = params.kappa / 4 * np.eye(2)
    return float(np.max(np.abs(A @ C + C @ A.T + Q)))


def lyapunov_covariance(params: ModelParams) -> tuple[np.ndarray, float]:
    """Closed-form solution of A C + C A^T + (kappa/4) I = 0 for the radial block.

    Returns C and the semiclassical Fano factor 4 C_11
    = 1 + 1 / (2 (r^2 - 1)).
    """
    n = _require_two_mode_above(params)
    k = params.kappa
    w = 4 * params.u * n
    c12 = -k / (8 * w)
    c22 = 0.25
    c11 = 0.25 * (1 + k * k / (2 * w * w))
    C = np.array([[c11, c12], [c12, c22]])
    return C, 4 * c11


def lyapunov_covariance_numeric(params: ModelParams) -> np.ndarray:
    """Reference solution via scipy's Bartels-Stewart solver."""
    A = drift_matrix(params)
    return scipy.linalg.solve_continuous_lyapunov(A, -params.kappa / 4 * np.eye(2))
