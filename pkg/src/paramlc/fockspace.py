"""Two-mode steady-state density matrices and entanglement diagnostics.

The N=2 steady state is the reduced state of a pure purification.  In the
a-basis the purification reads

    |psi> = sum_{i,j} A_ij |2i>_s1 |2j>_s2 |0,0>_anti,
    A_ij  = (D/2u)^(i+j) / (delta)_(i+j) * sqrt((2i)! (2j)!) / (i! j!)

where s/anti are the symmetric/antisymmetric combinations of system (L) and
auxiliary (R) copies.  Each |n>_s |0>_anti splits binomially over L and R.
In the rotated basis b1,2 = (a1 +- i a2)/sqrt(2) the same state collapses to
a single sum, sum_m (D/u)^m/(delta)_m |m, m>_B, so rho_b is block diagonal
in the charge n_b1 - n_b2.

Basis index convention: state |n1, n2> sits at n1 * (cutoff2 + 1) + n2.
"""
from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components
from scipy.special import gammaln

from . import exact_ness
from .errors import BadModeIndex, CutoffTooSmall, EigenFailure, Infeasible, InvalidParameters
from .model import ModelParams
from .specfun import log_pochhammer

A_BASIS = "a_basis"
B_BASIS = "b_basis"
DROPPED_WEIGHT_LIMIT = 1e-6
MAX_CUTOFF = 200

_MAGIC = b"PLCDM001"


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Dense density matrix over a truncated multi-mode Fock space."""

    mode_cutoffs: tuple[int, ...]
    basis_tag: str
    matrix: np.ndarray
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        dim = int(np.prod([c + 1 for c in self.mode_cutoffs]))
        if self.matrix.shape != (dim, dim):
            raise InvalidParameters(
                f"matrix shape {self.matrix.shape} does not match cutoffs {self.mode_cutoffs}"
            )
        if self.basis_tag not in (A_BASIS, B_BASIS):
            raise InvalidParameters(f"unknown basis tag {self.basis_tag!r}")
        self.matrix.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.mode_cutoffs)

    def trace(self) -> complex:
        return complex(np.trace(self.matrix))

    def expect(self, op) -> complex:
        """Tr(rho op) for a dense or sparse operator."""
        if sp.issparse(op):
            return complex((op.multiply(self.matrix.T)).sum())
        return complex(np.einsum("ij,ji->", op, self.matrix))

    def occupation(self, mode: int) -> np.ndarray:
        """Diagonal of n_mode as a vector over the basis (mode is 1-based)."""
        grids = np.meshgrid(*[np.arange(c + 1) for c in self.mode_cutoffs], indexing="ij")
        return grids[mode - 1].ravel().astype(float)

    def photon_number(self) -> float:
        diag = np.real(np.diag(self.matrix))
        total = sum(self.occupation(k + 1) for k in range(self.n_modes))
        return float(diag @ total)

    def photon_moments(self) -> tuple[float, float]:
        """(<n>, <n^2>) of the total photon number."""
        diag = np.real(np.diag(self.matrix))
        total = sum(self.occupation(k + 1) for k in range(self.n_modes))
        return float(diag @ total), float(diag @ total**2)

    def fano(self) -> float:
        mean, second = self.photon_moments()
        return (second - mean**2) / mean

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix, self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return _blockwise_eigvalsh(self.matrix)

    def check(self, herm_tol=1e-10, trace_tol=1e-8, psd_tol=1e-8) -> None:
        """Raise ValueError if Hermiticity, unit trace or positivity fail."""
        herm = np.max(np.abs(self.matrix - self.matrix.conj().T), initial=0.0)
        if herm > herm_tol:
            raise ValueError(f"not Hermitian: max deviation {herm:.3e}")
        tr = self.trace()
        if abs(tr - 1) > trace_tol:
            raise ValueError(f"trace {tr} differs from 1")
        lo = self.eigenvalues().min()
        if lo < -psd_tol:
            raise ValueError(f"negative eigenvalue {lo:.3e}")

    # binary dump
    def to_bytes(self) -> bytes:
        header = json.dumps(
            {
                "mode_cutoffs": list(self.mode_cutoffs),
                "basis_tag": self.basis_tag,
                "dim": self.dim,
                "meta": self.meta,
            },
            sort_keys=True,
        ).encode()
        buf = io.BytesIO()
        buf.write(_MAGIC)
        buf.write(struct.pack("<I", len(header)))
        buf.write(header)
        buf.write(np.ascontiguousarray(self.matrix, dtype="<c16").tobytes(order="C"))
        return buf.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "DensityMatrix":
        if data[:8] != _MAGIC:
            raise ValueError("not a paramlc density-matrix dump")
        (hlen,) = struct.unpack("<I", data[8:12])
        header = json.loads(data[12 : 12 + hlen])
        dim = header["dim"]
        body = np.frombuffer(data[12 + hlen :], dtype="<c16")
        if body.size != dim * dim:
            raise ValueError("truncated density-matrix dump")
        return cls(
            tuple(header["mode_cutoffs"]),
            header["basis_tag"],
            body.reshape(dim, dim).astype(complex),
            header.get("meta", {}),
        )

    def save(self, path) -> None:
        with open(path, "wb") as fh:
            fh.write(self.to_bytes())

    @classmethod
    def load(cls, path) -> "DensityMatrix":
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read())


# ---------------------------------------------------------------------------
# block utilities


def _blocks(matrix: np.ndarray) -> list[np.ndarray]:
    """Index sets of the connected components of the exact nonzero pattern."""
    pattern = sp.csr_matrix(matrix != 0)
    n_comp, labels = connected_components(pattern, directed=False)
    order = np.argsort(labels, kind="stable")
    splits = np.flatnonzero(np.diff(labels[order])) + 1
    return np.split(order, splits)


def _blockwise_eigvalsh(matrix: np.ndarray) -> np.ndarray:
    out = []
    for idx in _blocks(matrix):
        sub = matrix[np.ix_(idx, idx)]
        try:
            out.append(scipy.linalg.eigvalsh(sub, check_finite=True))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise EigenFailure(str(exc)) from exc
    return np.sort(np.concatenate(out))


# ---------------------------------------------------------------------------
# construction


def _check_two_mode(params: ModelParams, cutoff: int) -> None:
    if params.N != 2:
        raise InvalidParameters("Fock-space construction is implemented for N = 2 only")
    if cutoff < 1 or cutoff > MAX_CUTOFF:
        raise InvalidParameters(f"cutoff must be in [1, {MAX_CUTOFF}], got {cutoff}")


def _vacuum(cutoff: int, basis: str, params: ModelParams) -> DensityMatrix:
    dim = (cutoff + 1) ** 2
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    return DensityMatrix((cutoff, cutoff), basis, rho, {"params": params.to_dict()})


def _log_pair_amplitude(params: ModelParams, m: np.ndarray, log_norm: float) -> np.ndarray:
    """log[(D/u)^m / (delta)_m / sqrt(Z)] for integer arrays m."""
    return m * math.log(params.D / params.u) - log_pochhammer(params.delta, m) - 0.5 * log_norm


def _log_binomial_split(n: np.ndarray, k: np.ndarray) -> np.ndarray:
    """log of sqrt(C(n, k)) / 2^(n/2); -inf outside 0 <= k <= n."""
    valid = (k >= 0) & (k <= n)
    nn = np.where(valid, n, 0)
    kk = np.where(valid, k, 0)
    out = 0.5 * (gammaln(nn + 1) - gammaln(kk + 1) - gammaln(nn - kk + 1)) - 0.5 * nn * math.log(2)
    return np.where(valid, out, -np.inf)


def _finish(blocks, cutoff, basis, params, kept_weight) -> DensityMatrix:
    dropped = 1.0 - kept_weight
    if dropped > DROPPED_WEIGHT_LIMIT:
        raise CutoffTooSmall(
            f"cutoff {cutoff} drops weight {dropped:.3e} (> {DROPPED_WEIGHT_LIMIT:g}) "
            f"at D={params.D}, u={params.u}, kappa={params.kappa}"
        )
    dim = (cutoff + 1) ** 2
    rho = np.zeros((dim, dim), dtype=complex)
    for idx, block in blocks:
        rho[np.ix_(idx, idx)] = block
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    meta = {"params": params.to_dict(), "dropped_weight": max(dropped, 0.0)}
    return DensityMatrix((cutoff, cutoff), basis, rho, meta)


def build_ness_density_matrix(params: ModelParams, cutoff: int) -> DensityMatrix:
    """Exact N=2 steady state in the a-basis, truncated to n1, n2 <= cutoff.

    The auxiliary copy is truncated to the same box; the weight lost from
    both truncations is compared to ``DROPPED_WEIGHT_LIMIT`` before the
    matrix is renormalised.

    Raises
    ------
    CutoffTooSmall
        If more than 1e-6 of the purification weight lies outside the box.
    """
    _check_two_mode(params, cutoff)
    if params.D == 0:
        return _vacuum(cutoff, A_BASIS, params)
    log_norm = exact_ness.norm(params).log_abs

    levels = np.arange(cutoff + 1)
    blocks = []
    kept = 0.0
    for s1 in (0, 1):
        for s2 in (0, 1):
            k = levels[s1::2]  # system mode-1 levels of this parity
            p = levels[s2::2]
            # auxiliary levels share the parity of the matching system level
            r1 = levels[s1::2]
            r2 = levels[s2::2]
            # pair indices i = (k + r1)/2, j = (p + r2)/2
            i = (k[:, None] + r1[None, :]) // 2
            j = (p[:, None] + r2[None, :]) // 2
            # per-mode factor (1/2)^i sqrt((2i)!)/i! * sqrt(C(2i,k))/2^i
            f1 = (
                -i * math.log(2) + 0.5 * gammaln(2 * i + 1) - gammaln(i + 1)
                + _log_binomial_split(2 * i, k[:, None])
            )
            f2 = (
                -j * math.log(2) + 0.5 * gammaln(2 * j + 1) - gammaln(j + 1)
                + _log_binomial_split(2 * j, p[:, None])
            )
            m = i[:, None, :, None] + j[None, :, None, :]
            m_values = np.arange(2 * cutoff + 1)
            logG = _log_pair_amplitude(params, m_values, log_norm)
            logC = logG[m] + f1[:, None, :, None] + f2[None, :, None, :]
            C = np.exp(logC).reshape(len(k) * len(p), len(r1) * len(r2))
            kept += float(np.sum(np.abs(C) ** 2))
            idx = (k[:, None] * (cutoff + 1) + p[None, :]).ravel()
            blocks.append((idx, C @ C.conj().T))
    return _finish(blocks, cutoff, A_BASIS, params, kept)


def to_b_basis(params: ModelParams, cutoff: int) -> DensityMatrix:
    """Exact N=2 steady state in the basis b1,2 = (a1 +- i a2)/sqrt(2).

    Block diagonal in the charge q = n_b1 - n_b2.
    """
    _check_two_mode(params, cutoff)
    if params.D == 0:
        return _vacuum(cutoff, B_BASIS, params)
    log_norm = exact_ness.norm(params).log_abs
    levels = np.arange(cutoff + 1)
    logG = _log_pair_amplitude(params, np.arange(2 * cutoff + 1), log_norm)
    blocks = []
    kept = 0.0
    for q in range(-cutoff, cutoff + 1):
        # system states (k, k - q); auxiliary (r, r + q); pair number m = k + r
        k = levels[(levels - q >= 0) & (levels - q <= cutoff)]
        r = levels[(levels + q >= 0) & (levels + q <= cutoff)]
        m = k[:, None] + r[None, :]
        logC = logG[m] + _log_binomial_split(m, k[:, None]) + _log_binomial_split(m, (k - q)[:, None])
        C = np.exp(logC)
        kept += float(np.sum(np.abs(C) ** 2))
        idx = k * (cutoff + 1) + (k - q)
        blocks.append((idx, C @ C.conj().T))
    return _finish(blocks, cutoff, B_BASIS, params, kept)


# ---------------------------------------------------------------------------
# entanglement


def partial_transpose(rho: DensityMatrix, mode_index: int = 2) -> np.ndarray:
    """Transpose the Fock indices of one mode (1-based ``mode_index``)."""
    if rho.n_modes != 2:
        raise BadModeIndex("partial transpose is defined here for two-mode states")
    if mode_index not in (1, 2):
        raise BadModeIndex(f"mode_index must be 1 or 2, got {mode_index}")
    c1, c2 = (c + 1 for c in rho.mode_cutoffs)
    t = rho.matrix.reshape(c1, c2, c1, c2)
    axes = (0, 3, 2, 1) if mode_index == 2 else (2, 1, 0, 3)
    return np.ascontiguousarray(t.transpose(axes).reshape(c1 * c2, c1 * c2))


def trace_norm_hermitian(matrix: np.ndarray) -> float:
    return float(np.sum(np.abs(_blockwise_eigvalsh(matrix))))


def log_negativity(rho: DensityMatrix, mode_index: int = 2) -> float:
    """E_N = log2 ||rho^{T_mode}||_1; tiny negative round-off is reported as 0."""
    value = math.log2(trace_norm_hermitian(partial_transpose(rho, mode_index)))
    return max(0.0, value)


@dataclass(frozen=True)
class TmstReference:
    r: float
    n_th: float
    E_N: float


def tmst_reference(purity: float, total_photons: float) -> TmstReference:
    """Thermal two-mode squeezed state matching purity and total photon number."""
    if not 0 < purity <= 1:
        raise Infeasible(f"purity must lie in (0, 1], got {purity}")
    if total_photons < 0:
        raise Infeasible("total_photons must be nonnegative")
    sq = math.sqrt(purity)
    n_th = (1.0 / sq - 1.0) / 2.0
    cosh2r = sq * (total_photons + 1.0)
    if cosh2r < 1.0 - 1e-12:
        raise Infeasible(
            f"cosh(2r) = {cosh2r:.6g} < 1: no squeezing matches purity={purity}, "
            f"photons={total_photons}"
        )
    r = 0.5 * math.acosh(max(cosh2r, 1.0))
    E_N = max(0.0, (2 * r - math.log(2 * n_th + 1)) / math.log(2))
    return TmstReference(r, n_th, E_N)


def _ladder(cutoff: int) -> sp.csr_matrix:
    n = np.arange(1, cutoff + 1)
    return sp.diags(np.sqrt(n), 1, shape=(cutoff + 1, cutoff + 1), format="csr")


def mode_operators(cutoffs) -> tuple[sp.csr_matrix, sp.csr_matrix]:
    """Annihilation operators a1, a2 on the two-mode truncated space."""
    c1, c2 = cutoffs
    a1 = sp.kron(_ladder(c1), sp.identity(c2 + 1), format="csr")
    a2 = sp.kron(sp.identity(c1 + 1), _ladder(c2), format="csr")
    return a1, a2


@dataclass(frozen=True)
class IntermodeCovariances:
    a1a2: complex
    a1a2dag: complex
    a1: complex
    a2: complex

    def max_abs(self) -> float:
        return max(abs(self.a1a2), abs(self.a1a2dag), abs(self.a1), abs(self.a2))


def intermode_covariances(rho: DensityMatrix) -> IntermodeCovariances:
    a1, a2 = mode_operators(rho.mode_cutoffs)
    return IntermodeCovariances(
        a1a2=rho.expect(a1 @ a2),
        a1a2dag=rho.expect(a1 @ a2.conj().T),
        a1=rho.expect(a1),
        a2=rho.expect(a2),
    )


# ---------------------------------------------------------------------------
# reference states


def pure_state(psi: np.ndarray, cutoffs, basis=A_BASIS, meta=None) -> DensityMatrix:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return DensityMatrix(tuple(cutoffs), basis, np.outer(psi, psi.conj()), meta or {})


def two_mode_squeezed_state(r: float, cutoff: int) -> DensityMatrix:
    """Pure state sum_n tanh(r)^n / cosh(r) |n, n>."""
    psi = np.zeros((cutoff + 1, cutoff + 1), dtype=complex)
    n = np.arange(cutoff + 1)
    psi[n, n] = np.tanh(r) ** n / np.cosh(r)
    return pure_state(psi, (cutoff, cutoff), meta={"r": r})


def coherent_product_state(alpha: complex, beta: complex, cutoff: int) -> DensityMatrix:
    n = np.arange(cutoff + 1)
    log_fact = 0.5 * gammaln(n + 1)

    def coherent(z):
        if z == 0:
            v = np.zeros(cutoff + 1, dtype=complex)
            v[0] = 1.0
            return v
        return np.exp(-abs(z) ** 2 / 2 + n * np.log(complex(z)) - log_fact)

    return pure_state(np.kron(coherent(alpha), coherent(beta)), (cutoff, cutoff))


def ness_entanglement_row(params: ModelParams, cutoff: int) -> dict[str, float]:
    """E_N in both partitions plus the TMST comparison at one parameter point."""
    rho_a = build_ness_density_matrix(params, cutoff)
    photons = rho_a.photon_number()
    purity = rho_a.purity()
    e_a = log_negativity(rho_a)
    e_b = log_negativity(to_b_basis(params, cutoff)) if params.D > 0 else 0.0
    try:
        ref = tmst_reference(purity, photons)
        ratio = e_a / ref.E_N if ref.E_N > 0 else math.nan
    except Infeasible:
        ratio = math.nan
    return {
        "D": params.D,
        "E_N_a": e_a,
        "E_N_b": e_b,
        "E_N_ratio_to_TMST": ratio,
        "purity": purity,
        "photons": photons,
    }
