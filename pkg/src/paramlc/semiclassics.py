"""Mean-field dynamics of the N-mode parametric oscillator.

Amplitudes obey

    da/dt = -2i u n a + 2i D conj(a) - (kappa/2) a - h K a,   n = |a|^2,

which is the classical limit of the Heisenberg equations for the model
Hamiltonian (the hopping term -i h a^dag K a contributes -h K a).  For the
two-mode pattern K = [[0, 1], [-1, 0]] this is +h J a with J the rotation
generator [[0, -1], [1, 0]], so the ring phase advances as phi = h t.

Quadratures are defined by a = exp(i theta) (x + i y) with
theta = arcsin(kappa / 4D) / 2, in which the attractor is y = 0,
|x|^2 = n_ss.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Sequence

import numpy as np
import scipy.linalg

from .errors import BelowThreshold, InvalidParameters, NotAntisymmetric, StepUnstable
from .exact_ness import semiclassical_nss
from .model import ModelParams

# rotation generator; the two-mode hopping pattern K equals -J
J2 = np.array([[0.0, -1.0], [1.0, 0.0]])


@dataclass(frozen=True)
class QuadratureState:
    x: np.ndarray
    y: np.ndarray
    theta: float

    @classmethod
    def from_amplitudes(cls, params: ModelParams, a) -> "QuadratureState":
        theta = params.frame_angle
        z = np.exp(-1j * theta) * np.asarray(a, dtype=complex)
        return cls(z.real.copy(), z.imag.copy(), theta)

    def to_amplitudes(self) -> np.ndarray:
        return np.exp(1j * self.theta) * (self.x + 1j * self.y)


@dataclass(frozen=True, eq=False)
class QuadratureTrajectory:
    """Sampled mean-field trajectory; ``a`` has shape (samples, N)."""

    t: np.ndarray
    a: np.ndarray
    theta: float
    n_ss: float

    @property
    def n(self) -> np.ndarray:
        return np.sum(np.abs(self.a) ** 2, axis=1)

    @property
    def x(self) -> np.ndarray:
        return (np.exp(-1j * self.theta) * self.a).real

    @property
    def y(self) -> np.ndarray:
        return (np.exp(-1j * self.theta) * self.a).imag

    def final(self) -> QuadratureState:
        return QuadratureState(self.x[-1], self.y[-1], self.theta)

    def attractor_residuals(self) -> tuple[float, float]:
        """(||y|| / sqrt(n_ss), | |x|^2 - n_ss | / n_ss) at the last sample."""
        x, y = self.x[-1], self.y[-1]
        scale = math.sqrt(self.n_ss)
        return float(np.linalg.norm(y) / scale), float(abs(x @ x - self.n_ss) / self.n_ss)

    def ring_phase(self) -> np.ndarray:
        """Unwrapped angle of x_1 + i x_2."""
        return np.unwrap(np.arctan2(self.x[:, 1], self.x[:, 0]))

    def rows(self) -> Iterator[list[float]]:
        x, y, n = self.x, self.y, self.n
        for k, t in enumerate(self.t):
            yield [t, *x[k], *y[k], n[k]]

    def header(self) -> list[str]:
        N = self.a.shape[1]
        return ["t"] + [f"x_{i+1}" for i in range(N)] + [f"y_{i+1}" for i in range(N)] + ["n"]


def complex_rhs(params: ModelParams, a) -> np.ndarray:
    """Mean-field right-hand side for the complex amplitudes."""
    a = np.asarray(a, dtype=complex)
    n = np.vdot(a, a).real
    out = (-2j * params.u * n - 0.5 * params.kappa) * a + 2j * params.D * np.conj(a)
    if params.h != 0:
        out = out - params.h * (params.K @ a)
    return out


def default_dt(params: ModelParams) -> float:
    """min(0.01/kappa, 0.01/(u n_ss), 0.05/h_max)."""
    dt = 0.01 / params.kappa
    n_ss = semiclassical_nss(params)
    if n_ss > 0:
        dt = min(dt, 0.01 / (params.u * n_ss))
    if params.h != 0:
        h_max = abs(params.h) * float(np.max(np.abs(np.linalg.eigvals(params.K))))
        if h_max > 0:
            dt = min(dt, 0.05 / h_max)
    return dt


def rk4(
    f: Callable[[np.ndarray], np.ndarray],
    y0: np.ndarray,
    T: float,
    dt: float,
    every: int = 1,
    guard: Callable[[np.ndarray], bool] | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Fixed-step classical Runge-Kutta; returns sample times and states."""
    if dt <= 0 or T < dt:
        raise InvalidParameters(f"need dt > 0 and T >= dt (got dt={dt}, T={T})")
    steps = int(round(T / dt))
    y = np.array(y0, dtype=complex if np.iscomplexobj(y0) else float)
    n_samples = steps // every + 1
    out = np.empty((n_samples,) + y.shape, dtype=y.dtype)
    out[0] = y
    for k in range(1, steps + 1):
        k1 = f(y)
        k2 = f(y + 0.5 * dt * k1)
        k3 = f(y + 0.5 * dt * k2)
        k4 = f(y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        if guard is not None and not guard(y):
            raise StepUnstable(f"state left the admissible region at t={k * dt:.6g} (dt={dt})")
        if k % every == 0:
            out[k // every] = y
    t = np.arange(n_samples) * dt * every
    return t, out


def integrate(
    params: ModelParams, a0, T: float, dt: float | None = None, every: int = 1
) -> QuadratureTrajectory:
    """Integrate the mean-field equations with fixed-step RK4.

    Raises
    ------
    StepUnstable
        If n(t) exceeds 1e3 times the larger of n_ss, |a0|^2 and 1.
    """
    a0 = np.asarray(a0, dtype=complex)
    if a0.shape != (params.N,):
        raise InvalidParameters(f"a0 must have shape ({params.N},)")
    dt = default_dt(params) if dt is None else dt
    n_ss = semiclassical_nss(params)
    ceiling = 1e3 * max(n_ss, float(np.vdot(a0, a0).real), 1.0)

    def guard(a):
        n = np.vdot(a, a).real
        return bool(np.isfinite(n) and n <= ceiling)

    t, a = rk4(lambda a: complex_rhs(params, a), a0, T, dt, every, guard)
    return QuadratureTrajectory(t, a, params.frame_angle, n_ss)


# ---------------------------------------------------------------------------
# linear stability


@dataclass(frozen=True)
class StabilityReport:
    """Spectrum of the rotating-frame Jacobian on the attractor."""

    zero_modes: np.ndarray
    damped_modes: np.ndarray
    radial_pair: np.ndarray
    n_ss: float

    @property
    def eigenvalues(self) -> np.ndarray:
        return np.concatenate([self.zero_modes, self.damped_modes, self.radial_pair]).astype(complex)


def jacobian(params: ModelParams, direction=None) -> np.ndarray:
    """Linearisation about x0 = sqrt(n_ss) * direction, y0 = 0 in the rotating frame.

    State ordering is (dx, dy).
    """
    n_ss = semiclassical_nss(params)
    N = params.N
    r = np.zeros(N) if direction is None else np.asarray(direction, float)
    if direction is None:
        r[0] = 1.0
    x0 = math.sqrt(n_ss) * r / np.linalg.norm(r)
    w = 4 * params.u * n_ss
    top = np.hstack([np.zeros((N, N)), w * np.eye(N)])
    bottom = np.hstack([-4 * params.u * np.outer(x0, x0), -params.kappa * np.eye(N)])
    return np.vstack([top, bottom])


def linear_stability(params: ModelParams) -> StabilityReport:
    """Closed-form spectrum: N-1 zeros, N-1 times -kappa, radial pair.

    Raises
    ------
    BelowThreshold
        If D <= kappa/4.
    """
    if not params.above_threshold:
        raise BelowThreshold("linear stability of the ring requires D > kappa/4")
    n_ss = semiclassical_nss(params)
    k = params.kappa
    disc = np.sqrt(complex(k * k - 64 * params.u**2 * n_ss**2))
    radial = np.array([(-k + disc) / 2, (-k - disc) / 2])
    if disc.imag == 0:
        radial = radial.real
    N = params.N
    return StabilityReport(np.zeros(N - 1), np.full(N - 1, -k), radial, n_ss)


# ---------------------------------------------------------------------------
# block canonical form


@dataclass(frozen=True, eq=False)
class BlockForm:
    """O K O^T = blockdiag(lambda_r [[0, 1], [-1, 0]], 0)."""

    O: np.ndarray
    lambdas: np.ndarray
    has_zero_mode: bool

    def canonical(self) -> np.ndarray:
        N = self.O.shape[0]
        S = np.zeros((N, N))
        for r, lam in enumerate(self.lambdas):
            S[2 * r, 2 * r + 1] = lam
            S[2 * r + 1, 2 * r] = -lam
        return S


def block_canonical_form(K, tol: float = 1e-10) -> BlockForm:
    """Orthogonal reduction of a real antisymmetric matrix to 2x2 blocks.

    For an eigenpair i K v = lam v with lam > 0 and v = p + i q, one has
    K p = lam q and K q = -lam p, so the rows (q, p)/|q| span a block
    lam [[0, 1], [-1, 0]].  Zero eigenvalues are completed by an orthonormal
    basis of the remaining complement.
    """
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise NotAntisymmetric("K must be square")
    scale = max(1.0, float(np.max(np.abs(K), initial=0.0)))
    if np.max(np.abs(K + K.T), initial=0.0) > tol * scale:
        raise NotAntisymmetric("K is not antisymmetric")
    N = K.shape[0]
    K = 0.5 * (K - K.T)
    w, V = np.linalg.eigh(1j * K)
    zero_tol = 1e-10 * scale * N
    order = np.argsort(-w)
    rows = []
    lambdas = []
    for k in order:
        if w[k] <= zero_tol or len(lambdas) == N // 2:
            break
        v = V[:, k]
        p, q = v.real, v.imag
        s = math.sqrt(2.0)
        rows.extend([s * q, s * p])
        lambdas.append(w[k])
    O = np.array(rows).reshape(-1, N)
    if O.shape[0] < N:
        rest = scipy.linalg.null_space(O) if O.size else np.eye(N)
        O = np.vstack([O, rest.T])
    lambdas += [0.0] * (N // 2 - len(lambdas))
    # re-orthonormalise against round-off without mixing blocks
    Q, R = np.linalg.qr(O.T)
    O = (Q * np.sign(np.diag(R))).T
    return BlockForm(O, np.array(lambdas), N % 2 == 1)


# ---------------------------------------------------------------------------
# tori


@dataclass(frozen=True)
class TorusState:
    rho: np.ndarray
    theta_r: np.ndarray
    sigma_leftover: float

    def norm_constraint(self) -> float:
        return float(self.rho @ self.rho + self.sigma_leftover**2)


@dataclass(frozen=True, eq=False)
class TorusTrajectory:
    """Block-coordinate view of a mean-field run."""

    t: np.ndarray
    rho: np.ndarray  # (samples, blocks)
    theta_r: np.ndarray  # unwrapped, (samples, blocks)
    sigma_leftover: np.ndarray
    n_ss: float
    block_form: BlockForm
    trajectory: QuadratureTrajectory

    def states(self) -> Iterator[TorusState]:
        for k in range(len(self.t)):
            yield TorusState(self.rho[k], self.theta_r[k], float(self.sigma_leftover[k]))

    def norm_constraint(self) -> np.ndarray:
        return np.sum(self.rho**2, axis=1) + self.sigma_leftover**2

    def frequencies(self, fraction: float = 0.5) -> np.ndarray:
        """Least-squares slopes of theta_r over the final ``fraction`` of the run."""
        start = int(len(self.t) * (1 - fraction))
        t = self.t[start:]
        return np.array([np.polyfit(t, self.theta_r[start:, r], 1)[0] for r in range(self.rho.shape[1])])

    def header(self) -> list[str]:
        R = self.rho.shape[1]
        return (
            self.trajectory.header()
            + [f"rho_{r+1}" for r in range(R)]
            + [f"theta_{r+1}" for r in range(R)]
        )

    def rows(self) -> Iterator[list[float]]:
        for k, row in enumerate(self.trajectory.rows()):
            yield row + list(self.rho[k]) + list(self.theta_r[k])


def to_block_coordinates(params: ModelParams, traj: QuadratureTrajectory, form: BlockForm | None = None) -> TorusTrajectory:
    form = block_canonical_form(params.K) if form is None else form
    z = traj.x @ form.O.T
    R = params.N // 2
    q1, q2 = z[:, 0 : 2 * R : 2], z[:, 1 : 2 * R : 2]
    rho = np.hypot(q1, q2)
    # nearest-branch continuation of each block angle
    theta_r = np.unwrap(np.arctan2(q2, q1), axis=0)
    sigma = z[:, -1] if form.has_zero_mode else np.zeros(len(traj.t))
    return TorusTrajectory(traj.t, rho, theta_r, sigma, traj.n_ss, form, traj)


def torus_trajectory(
    params: ModelParams, a0, T: float, dt: float | None = None, every: int = 1
) -> TorusTrajectory:
    """Integrate and express the run in the block coordinates of K.

    In block r the frame quadratures q_r rotate at angular velocity h lambda_r.
    """
    if params.N < 2:
        raise InvalidParameters("torus trajectories need N >= 2")
    if not params.above_threshold:
        raise BelowThreshold("torus trajectories need D > kappa/4")
    traj = integrate(params, a0, T, dt, every)
    return to_block_coordinates(params, traj)


def torus_classify(lambdas: Sequence[float], max_denominator: int = 10**6, tol: float = 1e-9) -> str:
    """'periodic' if every frequency ratio is rational with small denominator.

    A ratio x counts as p/q when q <= max_denominator and |q x - p| <= tol.
    Scaling the tolerance by q keeps irrational ratios from being matched by
    the dense set of large-denominator fractions.
    """
    lams = [float(v) for v in lambdas if v != 0]
    if len(lams) < 2:
        return "periodic"
    base = lams[0]
    for lam in lams[1:]:
        x = lam / base
        frac = Fraction(x).limit_denominator(max_denominator)
        if abs(frac.denominator * x - frac.numerator) > tol:
            return "quasiperiodic"
    return "periodic"


# ---------------------------------------------------------------------------
# Adler locking


def adler_amplitude(params: ModelParams, delta_u: float) -> float:
    if not params.above_threshold:
        raise BelowThreshold("Adler reduction requires D > kappa/4")
    n_ss = semiclassical_nss(params)
    return 2 * params.u * delta_u * n_ss**2 / params.kappa


def adler_rhs(params: ModelParams, delta_u: float, phi: float) -> float:
    """dphi/dt = h + (2 u delta_u / kappa) n_ss^2 sin(4 phi)."""
    return params.h + adler_amplitude(params, delta_u) * math.sin(4 * phi)


def locking_boundary(params: ModelParams, delta_u: float) -> float:
    """h* = |2 u delta_u n_ss^2 / kappa|; locking for |h| < h*."""
    return abs(adler_amplitude(params, delta_u))


@dataclass(frozen=True, eq=False)
class AdlerRun:
    t: np.ndarray
    phi: np.ndarray

    def winds(self) -> bool:
        """True if phi advanced by more than one period of sin(4 phi)."""
        return bool(abs(self.phi[-1] - self.phi[0]) > math.pi / 2)

    def locked(self, tol: float = 1e-6) -> bool:
        tail = self.phi[len(self.phi) * 3 // 4 :]
        return bool(np.ptp(tail) < tol and not self.winds())


def integrate_adler(
    params: ModelParams, delta_u: float, T: float, dt: float = 0.01, phi0: float = 0.0
) -> AdlerRun:
    A = adler_amplitude(params, delta_u)
    h = params.h
    t, phi = rk4(lambda p: h + A * np.sin(4 * p), np.array([phi0]), T, dt)
    return AdlerRun(t, phi[:, 0])


# ---------------------------------------------------------------------------
# mechanical analogy


def _mechanical_generator(params: ModelParams) -> np.ndarray:
    if params.N != 2:
        raise InvalidParameters("the mechanical analogy is two-dimensional (N = 2)")
    # -h K plays the role of h J
    return -params.h * params.K


def potential(params: ModelParams, x) -> float:
    """U(x) = (2/3) u^2 |x|^6 - [(2D cos 2theta)^2 + h_eff^2] |x|^2 / 2."""
    G = _mechanical_generator(params)
    h2 = -float((G @ G)[0, 0])
    r2 = float(np.dot(x, x))
    c = 2 * params.D * math.cos(2 * params.frame_angle)
    return (2.0 / 3.0) * params.u**2 * r2**3 - 0.5 * (c * c + h2) * r2


def potential_gradient(params: ModelParams, x) -> np.ndarray:
    G = _mechanical_generator(params)
    h2 = -float((G @ G)[0, 0])
    x = np.asarray(x, dtype=float)
    r2 = float(x @ x)
    c = 2 * params.D * math.cos(2 * params.frame_angle)
    return (4 * params.u**2 * r2 * r2 - (c * c + h2)) * x


def mechanical_rhs(params: ModelParams, x, xdot) -> np.ndarray:
    """Acceleration -grad U + kappa h J x + (-kappa + 2 h J) xdot."""
    G = _mechanical_generator(params)
    x = np.asarray(x, dtype=float)
    xdot = np.asarray(xdot, dtype=float)
    return -potential_gradient(params, x) + params.kappa * (G @ x) + (-params.kappa * xdot + 2 * (G @ xdot))


def integrate_mechanical(params: ModelParams, x0, v0, T: float, dt: float = 1e-3):
    """RK4 on the second-order system; returns (t, x, v)."""
    def f(s):
        return np.concatenate([s[2:], mechanical_rhs(params, s[:2], s[2:])])

    t, s = rk4(f, np.concatenate([np.asarray(x0, float), np.asarray(v0, float)]), T, dt)
    return t, s[:, :2], s[:, 2:]
