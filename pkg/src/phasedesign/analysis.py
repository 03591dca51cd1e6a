"""Diagnostics linking a measurement matrix back to information-theoretic quantities."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kron import hermitian_part, row_wise_krp
from .soi import RngLike, SoiModel, as_generator

MMSE_MAX_N = 4
MMSE_MAX_M = 6
MMSE_MIN_OUTER = 100
MMSE_MIN_INNER = 100
MMSE_MIN_ESS = 20.0


def lmmse_matrix(lifted: np.ndarray, c_x: np.ndarray, sigma_w_sq: float) -> np.ndarray:
    """Error covariance of the LMMSE estimate of the lifted signal.

    ``C - C T^H (2 sigma^2 I + T C T^H)^{-1} T C`` for lifted matrix ``T``.
    """
    t = np.asarray(lifted, dtype=complex)
    c = np.asarray(c_x, dtype=complex)
    m = t.shape[0]
    tc = t @ c
    inner = 2.0 * sigma_w_sq * np.eye(m) + tc @ t.conj().T
    e = c - tc.conj().T @ np.linalg.solve(hermitian_part(inner), tc)
    return hermitian_part(e)


def mi_low_snr_proxy(lifted: np.ndarray, c_x: np.ndarray, sigma_w_sq: float) -> float:
    """Low-SNR mutual information approximation ``Tr(T C T^H) / (2 sigma^2)``."""
    t = np.asarray(lifted, dtype=complex)
    val = np.einsum("ij,jk,ik->", t, np.asarray(c_x, dtype=complex), t.conj()).real
    return float(max(val, 0.0) / (2.0 * sigma_w_sq))


def kron_sym_trace(a: np.ndarray, c_u: np.ndarray) -> float:
    """``sum_k (a_k^H conj(C) a_k)^2`` with ``a_k`` the rows of ``A``.

    Equals ``Tr(T (C (x) conj(C)) T^H)`` for ``T = row_wise_krp(A)`` without
    forming any ``n^2``-sized object.
    """
    a = np.asarray(a, dtype=complex)
    q = np.einsum("ki,ij,kj->k", a.conj(), np.asarray(c_u, dtype=complex).conj(), a).real
    return float(np.sum(q ** 2))


def dense_kron_sym_trace(a: np.ndarray, c_u: np.ndarray) -> float:
    t = row_wise_krp(a)
    c_x = np.kron(c_u, np.conj(c_u))
    return float(np.trace(t @ c_x @ t.conj().T).real)


# --------------------------------------------------------------------------- necessary condition


@dataclass
class NecessaryConditionReport:
    per_row_lambda: np.ndarray
    per_row_residual: np.ndarray
    lambda_dispersion: float
    rows: np.ndarray              # indices of the nonzero rows that were evaluated
    skipped_rows: np.ndarray = field(default_factory=lambda: np.zeros(0, int))


def condition_matrix(a_row: np.ndarray, e: np.ndarray) -> np.ndarray:
    """``(I (x) a^T) E^T (I (x) conj(a)) + (a^T (x) I) E (conj(a) (x) I)`` for one row ``a``."""
    a_row = np.asarray(a_row, dtype=complex).reshape(-1, 1)
    n = a_row.shape[0]
    eye = np.eye(n)
    left = np.kron(eye, a_row.T)
    right = np.kron(a_row.T, eye)
    return left @ e.T @ left.conj().T + right @ e @ right.conj().T


def necessary_condition_residual(a: np.ndarray, e: np.ndarray, zero_tol: float = 1e-14) -> NecessaryConditionReport:
    """Check how far each row of ``A`` is from being an eigenvector of its condition matrix.

    ``lambda_k`` is the Rayleigh quotient and the residual is
    ``||H_k a_k - lambda_k a_k|| / ||a_k||``; zero rows are skipped.
    """
    a = np.asarray(a, dtype=complex)
    e = np.asarray(e, dtype=complex)
    n = a.shape[1]
    if e.shape != (n * n, n * n):
        raise ValueError("E must be n^2 x n^2")
    norms = np.linalg.norm(a, axis=1)
    scale = norms.max() if norms.size else 0.0
    rows = np.flatnonzero(norms > zero_tol * max(scale, 1e-300)) if scale > 0 else np.zeros(0, int)
    lam = np.empty(rows.size)
    res = np.empty(rows.size)
    for i, k in enumerate(rows):
        ak = a[k]
        h = condition_matrix(ak, e)
        ha = h @ ak
        lam[i] = (np.vdot(ak, ha) / norms[k] ** 2).real
        res[i] = np.linalg.norm(ha - lam[i] * ak) / norms[k]
    disp = float(lam.max() - lam.min()) if lam.size else 0.0
    skipped = np.setdiff1d(np.arange(a.shape[0]), rows)
    return NecessaryConditionReport(lam, res, disp, rows, skipped)


@dataclass
class ModeConditionReport:
    """How closely a lifted target satisfies the fixed-point structure for an error covariance."""

    per_row_eigenvalue: np.ndarray
    per_row_residual: np.ndarray
    dispersion: float


def mode_condition_report(lifted_target: np.ndarray, error_cov: np.ndarray, zero_tol: float = 1e-12) -> ModeConditionReport:
    """Each active row direction of ``T`` should be an eigenvector of ``error_cov`` with a shared eigenvalue.

    With ``error_cov = lmmse_matrix(T, c_x, sigma^2)`` and ``T`` from
    waterfilling, the shared eigenvalue is ``2 sigma^2 / water_level``. Any
    other error covariance (e.g. a Monte Carlo MMSE estimate) may be injected;
    no pass/fail judgment is made.
    """
    t = np.asarray(lifted_target, dtype=complex)
    e = np.asarray(error_cov, dtype=complex)
    norms = np.linalg.norm(t, axis=1)
    active = norms > zero_tol * max(norms.max(), 1e-300)
    dirs = t[active].conj() / norms[active, None]
    ev = dirs @ e.T  # rows: (E v)^T
    lam = np.einsum("ki,ki->k", dirs.conj(), ev).real
    res = np.linalg.norm(ev - lam[:, None] * dirs, axis=1)
    disp = float(lam.max() - lam.min()) if lam.size else 0.0
    return ModeConditionReport(lam, res, disp)


# --------------------------------------------------------------------------- MMSE oracle


@dataclass
class MmseEstimate:
    matrix: np.ndarray
    num_samples: tuple[int, int]      # (outer, inner)
    std_error_proxy: float            # 1 / sqrt(min effective sample size)
    min_ess: float = math.inf
    low_ess: bool = False


def mmse_matrix_importance_sampling(a: np.ndarray, model: SoiModel, sigma_w_sq: float,
                                    num_outer: int, num_inner: int, rng: RngLike,
                                    chunk: int = 256) -> MmseEstimate:
    """Monte Carlo MMSE error covariance of the lifted signal given ``y``.

    For each outer draw ``(u, y)`` the posterior mean of ``u (x) conj(u)`` is
    a self-normalized average over a shared bank of ``num_inner`` prior draws
    weighted by the Gaussian likelihood ``exp(-||y - |A u_i|^2||^2 / 2 sigma^2)``.
    Only meant for tiny problems (``n <= 4``, ``m <= 6``).
    """
    a = np.asarray(a, dtype=complex)
    m, n = a.shape
    if n > MMSE_MAX_N or m > MMSE_MAX_M:
        raise ValueError(f"MMSE oracle limited to n <= {MMSE_MAX_N}, m <= {MMSE_MAX_M}")
    if num_outer < MMSE_MIN_OUTER or num_inner < MMSE_MIN_INNER:
        raise ValueError(f"need num_outer >= {MMSE_MIN_OUTER} and num_inner >= {MMSE_MIN_INNER}")
    gen = as_generator(rng)
    bank = model.sample(gen, size=num_inner)
    bank_x = (bank[:, :, None] * bank.conj()[:, None, :]).reshape(num_inner, n * n)
    bank_i = np.abs(bank @ a.T) ** 2                 # num_inner x m
    u = model.sample(gen, size=num_outer)
    x = (u[:, :, None] * u.conj()[:, None, :]).reshape(num_outer, n * n)
    y = np.abs(u @ a.T) ** 2 + math.sqrt(sigma_w_sq) * gen.standard_normal((num_outer, m))
    acc = np.zeros((n * n, n * n), complex)
    min_ess = math.inf
    bank_sq = np.sum(bank_i ** 2, axis=1)
    for start in range(0, num_outer, chunk):
        yc = y[start:start + chunk]
        d2 = np.sum(yc ** 2, axis=1)[:, None] + bank_sq[None, :] - 2.0 * yc @ bank_i.T
        logw = -np.clip(d2, 0.0, None) / (2.0 * sigma_w_sq)
        logw -= logw.max(axis=1, keepdims=True)
        w = np.exp(logw)
        w /= w.sum(axis=1, keepdims=True)
        ess = 1.0 / np.sum(w ** 2, axis=1)
        min_ess = min(min_ess, float(ess.min()))
        err = x[start:start + chunk] - w @ bank_x
        acc += err.T @ err.conj()
    est = hermitian_part(acc / num_outer)
    low = min_ess < MMSE_MIN_ESS
    if low:
        warnings.warn(f"importance sampling effective sample size fell to {min_ess:.1f}",
                      RuntimeWarning, stacklevel=2)
    return MmseEstimate(est, (num_outer, num_inner), 1.0 / math.sqrt(min_ess), min_ess, low)
