"""Kronecker / Khatri-Rao machinery for the lifted phase retrieval model.

The quadratic observation ``|A u|^2`` is linear in the lifted signal
``x = u (x) conj(u)``::

    |A u|^2 = row_wise_krp(A) @ lift_signal(u)

All vectorization is column-major (``vec`` stacks columns), so
``unvec(u (x) conj(u)) = conj(u) u^T`` and its transpose is ``u u^H``.
"""

from __future__ import annotations

import numpy as np


class NotRankOneError(ValueError):
    """Raised when a lifted vector is not (numerically) ``u (x) conj(u)``."""

    def __init__(self, message: str, second_singular_value: float):
        super().__init__(message)
        self.second_singular_value = second_singular_value


def _as_square(m: np.ndarray, name: str = "matrix") -> np.ndarray:
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"{name} must be square, got shape {m.shape}")
    return m


def _check_finite(a: np.ndarray, name: str) -> None:
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains NaN or Inf")


def vec(m: np.ndarray) -> np.ndarray:
    """Stack the columns of a square matrix into a vector."""
    m = _as_square(m)
    return m.reshape(-1, order="F")


def unvec(x: np.ndarray, n: int | None = None) -> np.ndarray:
    """Inverse of :func:`vec`; ``n`` is inferred when omitted."""
    x = np.asarray(x).ravel()
    if n is None:
        n = int(round(np.sqrt(x.size)))
    if n * n != x.size:
        raise ValueError(f"length {x.size} is not n^2 for n={n}")
    return x.reshape(n, n, order="F")


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; vectors are treated as columns."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.ndim == 1 and b.ndim == 1:
        return np.kron(a, b)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    if b.ndim == 1:
        b = b.reshape(-1, 1)
    return np.kron(a, b)


def selection_matrix(m: int) -> np.ndarray:
    """The ``m x m^2`` 0/1 matrix picking entries ``(k-1)m + k`` (1-based)."""
    s = np.zeros((m, m * m))
    s[np.arange(m), np.arange(m) * (m + 1)] = 1.0
    return s


def row_wise_krp(a: np.ndarray) -> np.ndarray:
    """Row-wise Khatri-Rao product of ``A`` with ``conj(A)``.

    Row ``p`` of the result is ``kron(A[p], conj(A[p]))``, so entry
    ``(p, k*n + l)`` (0-based) equals ``A[p, k] * conj(A[p, l])``.
    """
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2:
        raise ValueError("expected a 2-D matrix")
    _check_finite(a, "A")
    m, n = a.shape
    return (a[:, :, None] * a.conj()[:, None, :]).reshape(m, n * n)


def lift_signal(u: np.ndarray) -> np.ndarray:
    """Return ``u (x) conj(u)``."""
    u = np.asarray(u, dtype=complex).ravel()
    _check_finite(u, "u")
    return np.kron(u, u.conj())


def unlift_signal(x: np.ndarray, rtol: float = 1e-8) -> np.ndarray:
    """Recover ``u`` (up to a global phase) from ``x = u (x) conj(u)``.

    The phase is fixed so that the largest-magnitude entry is real and
    positive. Raises :class:`NotRankOneError` if ``unvec(x)^T`` is not
    numerically a rank-one PSD matrix.
    """
    x = np.asarray(x, dtype=complex).ravel()
    outer = unvec(x).T  # u u^H
    s = np.linalg.svd(outer, compute_uv=False)
    if s[0] <= 0:
        raise NotRankOneError("lifted vector is zero", float(s[1]) if s.size > 1 else 0.0)
    second = float(s[1]) if s.size > 1 else 0.0
    herm_err = np.linalg.norm(outer - outer.conj().T)
    if second > rtol * s[0] or herm_err > rtol * s[0]:
        raise NotRankOneError(
            f"lifted vector is not rank-one Hermitian (sigma_2={second:.3e}, "
            f"sigma_1={s[0]:.3e})", second)
    w, v = np.linalg.eigh(hermitian_part(outer))
    if w[-1] < -rtol * s[0]:
        raise NotRankOneError("lifted vector is negative definite", second)
    u = np.sqrt(max(w[-1], 0.0)) * v[:, -1]
    return fix_phase(u)


def fix_phase(v: np.ndarray) -> np.ndarray:
    """Rotate ``v`` so its largest-magnitude entry (lowest index on ties) is real positive."""
    v = np.asarray(v, dtype=complex)
    if v.size == 0:
        return v
    mag = np.abs(v)
    k = int(np.argmax(mag >= mag.max() * (1 - 1e-12)))
    if mag[k] == 0:
        return v
    return v * (np.conj(v[k]) / mag[k])


def hermitian_part(m: np.ndarray) -> np.ndarray:
    """``(M + M^H) / 2``."""
    m = _as_square(m)
    return 0.5 * (m + m.conj().T)


def apply_lifted_fast(a: np.ndarray, q: np.ndarray) -> np.ndarray:
    """Compute ``row_wise_krp(A) @ q`` without forming the ``m x n^2`` matrix.

    Uses ``row_wise_krp(A) q = conj(diag(A conj(Q) A^H))`` with
    ``Q = unvec(q)``.
    """
    a = np.asarray(a, dtype=complex)
    q = np.asarray(q, dtype=complex).ravel()
    n = a.shape[1]
    if q.size != n * n:
        raise ValueError(f"q has length {q.size}, expected {n * n}")
    qm = unvec(q, n)
    # entry p: sum_{k,l} A[p,k] conj(A[p,l]) Q[l,k]
    return np.einsum("pk,lk,pl->p", a, qm, a.conj())


def eigh_descending(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Hermitian eigendecomposition, eigenvalues descending, phase-fixed eigenvectors."""
    w, v = np.linalg.eigh(hermitian_part(m))
    w = w[::-1]
    v = v[:, ::-1]
    for j in range(v.shape[1]):
        v[:, j] = fix_phase(v[:, j])
    return w, v


def top_eigenpair(m: np.ndarray) -> tuple[float, np.ndarray]:
    """Largest eigenvalue and its unit eigenvector (phase-fixed) of ``hermitian_part(m)``."""
    w, v = np.linalg.eigh(hermitian_part(m))
    return float(w[-1]), fix_phase(v[:, -1])
