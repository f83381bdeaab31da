"""Physical parameters of the N-mode parametrically driven Kerr model."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any

import numpy as np

from .errors import InvalidParameters

ANTISYMMETRY_TOL = 1e-12


def canonical_coupling(n_modes: int, lambdas=None) -> np.ndarray:
    """Block-diagonal antisymmetric matrix with blocks ``lam * [[0, 1], [-1, 0]]``.

    With ``lambdas=None`` every block has unit strength.  For odd ``n_modes``
    the last row/column is zero.
    """
    n_blocks = n_modes // 2
    if lambdas is None:
        lambdas = [1.0] * n_blocks
    if len(lambdas) != n_blocks:
        raise InvalidParameters(f"need {n_blocks} block strengths, got {len(lambdas)}")
    K = np.zeros((n_modes, n_modes))
    for r, lam in enumerate(lambdas):
        K[2 * r, 2 * r + 1] = lam
        K[2 * r + 1, 2 * r] = -lam
    return K


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Parameters (N, u, D, kappa, h, K).

    ``K`` defaults to :func:`canonical_coupling`; for N=2 that is the
    two-mode hopping ``-ih (a1^dag a2 - a2^dag a1)``.
    """

    N: int
    u: float
    D: float
    kappa: float
    h: float = 0.0
    K: np.ndarray = field(default=None)

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise InvalidParameters(f"N must be a positive integer, got {self.N}")
        if not self.u > 0:
            raise InvalidParameters(f"u must be > 0, got {self.u}")
        if not self.kappa > 0:
            raise InvalidParameters(f"kappa must be > 0, got {self.kappa}")
        if not self.D >= 0:
            raise InvalidParameters(f"D must be >= 0, got {self.D}")
        K = canonical_coupling(self.N) if self.K is None else np.array(self.K, dtype=float)
        if K.shape != (self.N, self.N):
            raise InvalidParameters(f"K must be {self.N}x{self.N}, got {K.shape}")
        if np.max(np.abs(K + K.T), initial=0.0) > ANTISYMMETRY_TOL:
            raise InvalidParameters("K must be antisymmetric")
        K.setflags(write=False)
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "K", K)

    # derived quantities
    @property
    def delta(self) -> complex:
        return complex(1.0, -self.kappa / (4.0 * self.u))

    @property
    def lam(self) -> float:
        return (self.D / self.u) ** 2

    @property
    def above_threshold(self) -> bool:
        return self.D > self.kappa / 4.0

    @property
    def frame_angle(self) -> float:
        """theta = arcsin(kappa / 4D) / 2, clipped to pi/4 at and below threshold."""
        if self.D == 0:
            return math.pi / 4
        return 0.5 * math.asin(min(1.0, self.kappa / (4.0 * self.D)))

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return {
            "N": self.N,
            "u": self.u,
            "D": self.D,
            "kappa": self.kappa,
            "h": self.h,
            "K": self.K.tolist(),
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "ModelParams":
        known = {"N", "u", "D", "kappa", "h", "K"}
        unknown = set(data) - known
        if unknown:
            raise InvalidParameters(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**data)

    def __repr__(self) -> str:
        return (
            f"ModelParams(N={self.N}, u={self.u!r}, D={self.D!r}, "
            f"kappa={self.kappa!r}, h={self.h!r})"
        )
