"""Pochhammer symbols and the 1F2 / 1F1 hypergeometric series.

Both series are summed with the term-ratio recurrence

    t_{m+1} = t_m * prod(a + m) * x / (prod(b + m) * (m + 1))

so no factorial is ever formed.  For large arguments (x ~ 1e8 with
|Im b| ~ 1e3) the peak term overflows double precision; the partial sum is
then carried as ``value * exp(log_scale)`` and callers combine results with
:func:`series_ratio`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import loggamma

from .errors import NonConvergence, PoleParameter

DEFAULT_TOL = 1e-12
DEFAULT_MAX_TERMS = 1_000_000
_CONSECUTIVE_SMALL = 3


@dataclass(frozen=True)
class SeriesResult:
    """Outcome of a hypergeometric series evaluation.

    The series value is ``value * exp(log_scale)``.  ``log_scale`` stays 0
    unless the terms outgrew ``1e300 * tol``.
    """

    value: complex
    terms_used: int
    truncation_estimate: float
    log_scale: float = 0.0

    @property
    def log_abs(self) -> float:
        """Natural log of the modulus of the full value."""
        return math.log(abs(self.value)) + self.log_scale

    def __complex__(self) -> complex:
        if self.log_scale == 0.0:
            return complex(self.value)
        return complex(self.value) * math.exp(self.log_scale)

    def real(self) -> float:
        return complex(self).real


def series_ratio(num: SeriesResult, den: SeriesResult) -> complex:
    """Return num/den without forming either full value."""
    return num.value / den.value * math.exp(num.log_scale - den.log_scale)


def _is_pole(b: complex) -> bool:
    b = complex(b)
    return b.imag == 0.0 and b.real <= 0.0 and b.real == math.floor(b.real)


def pochhammer(z: complex, m: int) -> complex:
    """Rising factorial (z)_m = z (z+1) ... (z+m-1)."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    out = 1.0 + 0j
    for k in range(m):
        out *= z + k
    if isinstance(z, (int, float)) and not isinstance(z, bool):
        return out.real
    return out


def log_pochhammer(z, m):
    """Principal-branch log of (z)_m via log-gamma; vectorised over ``m``."""
    z = np.asarray(z, dtype=complex)
    m = np.asarray(m)
    return loggamma(z + m) - loggamma(z)


def _hypergeometric_series(
    upper: Sequence[complex],
    lower: Sequence[complex],
    x: float,
    tol: float,
    max_terms: int,
) -> SeriesResult:
    if tol <= 0:
        raise ValueError("tol must be positive")
    for b in lower:
        if _is_pole(b):
            raise PoleParameter(f"lower parameter {b} is a nonpositive integer")

    upper = [complex(a) for a in upper]
    lower = [complex(b) for b in lower]
    rescale_at = 1e300 * tol

    term = 1.0 + 0j
    total = 1.0 + 0j
    log_scale = 0.0
    small_run = 0
    m = 0
    while small_run < _CONSECUTIVE_SMALL:
        if m + 1 >= max_terms:
            raise NonConvergence(
                f"series not converged after {max_terms} terms "
                f"(last |t|/|S| = {abs(term) / abs(total):.3e})"
            )
        ratio = complex(x) / (m + 1)
        for a in upper:
            ratio *= a + m
        for b in lower:
            ratio /= b + m
        term *= ratio
        total += term
        m += 1

        mag = abs(term)
        if mag > rescale_at:
            term /= mag
            total /= mag
            log_scale += math.log(mag)
            mag = 1.0
        if mag < tol * abs(total):
            small_run += 1
        else:
            small_run = 0

    return SeriesResult(
        value=total,
        terms_used=m + 1,
        truncation_estimate=abs(term) / abs(total) if total != 0 else 0.0,
        log_scale=log_scale,
    )


def hyp1f2(
    a: complex,
    b: complex,
    c: complex,
    x: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> SeriesResult:
    """Sum 1F2(a; b, c; x) for real x >= 0.

    Raises
    ------
    PoleParameter
        If b or c is a nonpositive integer.
    NonConvergence
        If the stopping rule is not met within ``max_terms`` terms.
    """
    if x < 0:
        raise ValueError("hyp1f2 requires x >= 0")
    return _hypergeometric_series([a], [b, c], float(x), tol, max_terms)


def hyp1f1(
    a: complex,
    b: complex,
    x: float,
    tol: float = DEFAULT_TOL,
    max_terms: int = DEFAULT_MAX_TERMS,
) -> SeriesResult:
    """Sum the confluent series 1F1(a; b; x) for real x.

    Large negative x suffers cancellation; only x >= 0 is used in this
    package.
    """
    return _hypergeometric_series([a], [b], float(x), tol, max_terms)
