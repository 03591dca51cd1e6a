"""Measurement matrix design by lifted-channel waterfilling and structured projection.

Pipeline (unconstrained or masked Fourier)::

    c_x --waterfill_lifted--> T (m x n^2 target)
        --nearest_krp_rows / masked_fourier_masks (fixed V)--> A_hat
        --procrustes_align (fixed A_hat)--> V
        ... alternate ...
        --finalize_norm--> A with ||A||^2 = P

The objective minimized by the alternation is ``||V T - row_wise_krp(A)||_F``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .kron import (fix_phase, hermitian_part, row_wise_krp, top_eigenpair)
from .soi import RngLike, as_generator, check_hermitian_psd, proper_normal


class DesignCollapsedError(ArithmeticError):
    """The structured projection produced an all-zero matrix."""


class EigenvalueTieError(ValueError):
    """The leading eigenvalue of a covariance is not strictly separated."""


@dataclass(frozen=True)
class DesignBudget:
    p: float
    m: int
    n: int
    sigma_w_sq: float = 1.0

    def __post_init__(self):
        if not (self.n >= 1 and self.n <= self.m <= self.n * self.n):
            raise ValueError(f"need n <= m <= n^2, got m={self.m}, n={self.n}")
        if not self.p > 0:
            raise ValueError("power budget p must be positive")
        if not self.sigma_w_sq > 0:
            raise ValueError("noise variance must be positive")

    @classmethod
    def from_snr_db(cls, m: int, n: int, snr_db: float, p: float | None = None) -> "DesignBudget":
        """Budget with ``P = m`` (unit average row power) and ``sigma^2 = 10^(-snr/10)``."""
        return cls(float(m) if p is None else p, m, n, 10.0 ** (-snr_db / 10.0))


@dataclass
class MeasurementMatrix:
    """A labelled ``m x n`` complex matrix with its power budget."""

    entries: np.ndarray
    label: str = ""
    budget: float | None = None

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    def to_dict(self) -> dict:
        e = np.asarray(self.entries, dtype=complex)
        return {
            "m": int(e.shape[0]),
            "n": int(e.shape[1]),
            "budget": None if self.budget is None else float(self.budget),
            "label": self.label,
            "entries": [[float(z.real), float(z.imag)] for z in e.ravel(order="C")],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "MeasurementMatrix":
        m, n = int(d["m"]), int(d["n"])
        vals = np.array(d["entries"], dtype=float).reshape(-1, 2)
        if vals.shape[0] != m * n:
            raise ValueError(f"expected {m * n} entries, got {vals.shape[0]}")
        e = (vals[:, 0] + 1j * vals[:, 1]).reshape(m, n)
        return cls(e, d.get("label", ""), d.get("budget"))

    @classmethod
    def from_json(cls, text: str) -> "MeasurementMatrix":
        return cls.from_dict(json.loads(text))


# --------------------------------------------------------------------------- waterfilling


@dataclass
class WaterfillResult:
    lifted_target: np.ndarray   # m x n^2
    allocations: np.ndarray     # m, squared diagonal gains
    water_level: float
    eigen_basis: np.ndarray     # n^2 x n^2, columns in descending eigenvalue order
    eigenvalues: np.ndarray     # n^2, descending


def waterfill_levels(gains: np.ndarray, noise: float, total: float,
                     zero_tol: float = 1e-12) -> tuple[np.ndarray, float]:
    """Classic waterfilling ``a_k = (eta - noise/g_k)^+`` with ``sum a_k = total``.

    ``gains`` must be sorted in descending order. Gains below
    ``zero_tol * gains[0]`` get no power. Returns ``(allocations, eta)``.
    """
    g = np.asarray(gains, dtype=float)
    if g.size == 0 or g[0] <= 0:
        raise ValueError("no positive mode gain to allocate power on")
    if np.any(np.diff(g) > 1e-12 * g[0]):
        raise ValueError("gains must be sorted in descending order")
    usable = g > zero_tol * g[0]
    floors = np.full(g.shape, np.inf)
    floors[usable] = noise / g[usable]
    k_max = int(usable.sum())
    csum = np.cumsum(floors[:k_max])
    eta = None
    # largest active set whose water level clears every floor in it
    for k in range(k_max, 0, -1):
        level = (total + csum[k - 1]) / k
        if level > floors[k - 1]:
            eta = level
            break
    if eta is None:  # unreachable for total > 0
        eta = total + floors[0]
    alloc = np.clip(eta - floors, 0.0, None)
    alloc[~usable] = 0.0
    return alloc, float(eta)


def _kron_eigen(c_u: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    du, vu = np.linalg.eigh(hermitian_part(c_u))
    d = np.kron(du, du)
    v = np.kron(vu, vu.conj())
    order = np.argsort(-d, kind="stable")
    v = v[:, order]
    for j in range(v.shape[1]):
        v[:, j] = fix_phase(v[:, j])
    return d[order], v


def lifted_eigen(c_x: np.ndarray, c_u: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Descending eigendecomposition of ``c_x``.

    When ``c_u`` is given and ``c_x == c_u (x) conj(c_u)``, the Kronecker
    eigenbasis ``V_u (x) conj(V_u)`` is used, which pins down a basis inside
    the (always present) degenerate eigenspaces.
    """
    c_x = np.asarray(c_x, dtype=complex)
    if c_u is not None:
        c_u = np.asarray(c_u, dtype=complex)
        ref = np.kron(c_u, c_u.conj())
        if ref.shape == c_x.shape and np.allclose(c_x, ref, rtol=0, atol=1e-12 * max(np.abs(ref).max(), 1)):
            return _kron_eigen(c_u)
    w, v = np.linalg.eigh(hermitian_part(c_x))
    w = w[::-1].copy()
    v = v[:, ::-1].copy()
    for j in range(v.shape[1]):
        v[:, j] = fix_phase(v[:, j])
    return w, v


def waterfill_lifted(c_x: np.ndarray, budget: DesignBudget,
                     c_u: np.ndarray | None = None) -> WaterfillResult:
    """Waterfilling over the top ``m`` eigenmodes of the lifted covariance.

    Mode ``k`` gets squared gain ``(eta - 2 sigma^2 / d_k)^+`` with the water
    level ``eta`` set so the gains sum to ``P^2 / m``. The target is
    ``diag(sqrt(gains)) V_x^H`` restricted to ``m`` rows.
    """
    n, m = budget.n, budget.m
    c_x = np.asarray(c_x, dtype=complex)
    if c_x.shape != (n * n, n * n):
        raise ValueError(f"c_x must be {n * n}x{n * n}")
    check_hermitian_psd(c_x, "c_x", herm_tol=1e-10)
    d, v = lifted_eigen(c_x, c_u)
    d = np.clip(d, 0.0, None)
    top = d[:m]
    if top[0] <= 0:
        raise ValueError("c_x has no positive eigenvalue; nothing to allocate")
    alloc, eta = waterfill_levels(top, 2.0 * budget.sigma_w_sq, budget.p ** 2 / m)
    target = np.sqrt(alloc)[:, None] * v[:, :m].conj().T
    return WaterfillResult(target, alloc, eta, v, d)


def _leading_eigvec(c_u: np.ndarray, gap_tol: float = 1e-10) -> tuple[float, np.ndarray]:
    w, v = np.linalg.eigh(hermitian_part(np.asarray(c_u, dtype=complex)))
    if w.size > 1 and w[-1] - w[-2] < gap_tol * abs(w[-1]):
        raise EigenvalueTieError(
            f"leading eigenvalue {w[-1]:.6g} is tied with {w[-2]:.6g}")
    return float(w[-1]), fix_phase(v[:, -1])


def low_snr_lifted_target(c_u: np.ndarray, budget: DesignBudget) -> np.ndarray:
    """Single-mode target ``(P/sqrt(m)) e_1 (v (x) conj(v))^H`` for the top eigenvector ``v``."""
    check_hermitian_psd(np.asarray(c_u), "c_u")
    _, v = _leading_eigvec(c_u)
    n, m = budget.n, budget.m
    t = np.zeros((m, n * n), complex)
    t[0] = budget.p / math.sqrt(m) * np.kron(v, v.conj()).conj()
    return t


# --------------------------------------------------------------------------- projections


def _row_hermitian_blocks(b: np.ndarray, n: int) -> np.ndarray:
    # unvec(row) = row.reshape(n, n).T for column-major vec
    mk = b.reshape(b.shape[0], n, n).transpose(0, 2, 1)
    return 0.5 * (mk + mk.conj().transpose(0, 2, 1))


def _top_eig_batch(h: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    w, v = np.linalg.eigh(h)
    top = v[:, :, -1]
    mag = np.abs(top)
    idx = np.argmax(mag >= mag.max(axis=1, keepdims=True) * (1 - 1e-12), axis=1)
    pivot = top[np.arange(top.shape[0]), idx]
    phase = np.where(np.abs(pivot) > 0, pivot.conj() / np.where(np.abs(pivot) > 0, np.abs(pivot), 1), 1)
    return w[:, -1], top * phase[:, None]


def objective(v: np.ndarray, lifted_target: np.ndarray, a: np.ndarray) -> float:
    """``||V T - row_wise_krp(A)||_F``."""
    return float(np.linalg.norm(v @ lifted_target - row_wise_krp(a)))


def nearest_krp_rows(lifted_target: np.ndarray, v: np.ndarray | None = None) -> np.ndarray:
    """Closest ``A`` (in the row-wise KRP sense) to ``V T``, solved row by row.

    Row ``k`` is ``sqrt(max(mu, 0)) * conj(w)`` where ``(mu, w)`` is the top
    eigenpair of the Hermitian part of ``unvec((V T)[k])``.
    """
    t = np.asarray(lifted_target, dtype=complex)
    m, nn = t.shape
    n = int(round(math.sqrt(nn)))
    if n * n != nn:
        raise ValueError("target must have n^2 columns")
    b = t if v is None else _check_unitary(v, m) @ t
    mu, w = _top_eig_batch(_row_hermitian_blocks(b, n))
    return np.sqrt(np.clip(mu, 0.0, None))[:, None] * w.conj()


def _check_unitary(v: np.ndarray, m: int, tol: float = 1e-10) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.shape != (m, m):
        raise ValueError(f"V must be {m}x{m}")
    if np.linalg.norm(v.conj().T @ v - np.eye(m)) > tol * math.sqrt(m):
        raise ValueError("V is not unitary")
    return v


def dft_matrix(n: int) -> np.ndarray:
    """Unitary DFT, ``F[k, p] = exp(-2j pi k p / n) / sqrt(n)`` (0-based)."""
    k = np.arange(n)
    return np.exp(-2j * np.pi * np.outer(k, k) / n) / math.sqrt(n)


@dataclass
class MaskSet:
    masks: np.ndarray  # b x n, row l is g_l

    @property
    def b(self) -> int:
        return self.masks.shape[0]

    @property
    def n(self) -> int:
        return self.masks.shape[1]


def masked_fourier_masks(lifted_target: np.ndarray, v: np.ndarray | None, b: int, n: int) -> MaskSet:
    """Optimal masks for a masked-Fourier matrix closest to ``V T``.

    Mask ``l`` is ``sqrt(n max(mu, 0)) conj(w)`` for the top eigenpair of
    ``sum_k Fk M_{l,k} Fk^*`` where ``Fk = diag(F[k])`` and ``M_{l,k}`` is the
    Hermitian part of row ``l*n + k`` of ``V T``.
    """
    t = np.asarray(lifted_target, dtype=complex)
    m = t.shape[0]
    if m != b * n:
        raise ValueError(f"m={m} is not b*n={b * n}")
    if t.shape[1] != n * n:
        raise ValueError("target must have n^2 columns")
    bt = t if v is None else _check_unitary(v, m) @ t
    mk = _row_hermitian_blocks(bt, n).reshape(b, n, n, n)  # l, k, p, q
    f = dft_matrix(n)
    h = np.einsum("kp,lkpq,kq->lpq", f, mk, f.conj())
    h = 0.5 * (h + h.conj().transpose(0, 2, 1))
    mu, w = _top_eig_batch(h)
    return MaskSet(np.sqrt(n * np.clip(mu, 0.0, None))[:, None] * w.conj())


def assemble_masked_fourier(masks: MaskSet | np.ndarray) -> np.ndarray:
    """Stack ``F diag(g_l)`` for each mask ``g_l``; ``m = b n`` rows."""
    g = masks.masks if isinstance(masks, MaskSet) else np.atleast_2d(np.asarray(masks))
    b, n = g.shape
    f = dft_matrix(n)
    return (f[None, :, :] * g[:, None, :]).reshape(b * n, n)


def procrustes_align(a: np.ndarray, lifted_target: np.ndarray) -> np.ndarray:
    """Unitary ``V`` minimizing ``||V T - row_wise_krp(A)||``: ``U W^H`` from the SVD of ``krp(A) T^H``."""
    c = row_wise_krp(a) @ np.asarray(lifted_target, dtype=complex).conj().T
    u, _, wh = np.linalg.svd(c)
    return u @ wh


# --------------------------------------------------------------------------- alternating design


UNCONSTRAINED = "unconstrained"
MASKED_FOURIER = "masked_fourier"


@dataclass
class DesignOutput:
    matrix: np.ndarray          # finalized, ||A||^2 = P
    alignment: np.ndarray       # V paired with the last structured fit
    objective_trace: list[float]
    iterations: int
    termination: str            # "converged" or "max_iters"
    a_hat: np.ndarray = field(repr=False, default=None)   # before normalization
    lifted_target: np.ndarray = field(repr=False, default=None)
    masks: np.ndarray | None = field(repr=False, default=None)

    @property
    def final_objective(self) -> float:
        return self.objective_trace[-1]


def finalize_norm(a_hat: np.ndarray, p: float) -> np.ndarray:
    """Rescale to squared Frobenius norm ``p``."""
    a_hat = np.asarray(a_hat, dtype=complex)
    nrm = np.linalg.norm(a_hat)
    if not nrm > 0:
        raise DesignCollapsedError("design collapsed to the zero matrix")
    return a_hat * (math.sqrt(p) / nrm)


def _structured_fit(target, v, constraint, b, n):
    if constraint == UNCONSTRAINED:
        return nearest_krp_rows(target, v), None
    masks = masked_fourier_masks(target, v, b, n)
    return assemble_masked_fourier(masks), masks.masks


def haar_unitary(m: int, rng: RngLike) -> np.ndarray:
    q, r = np.linalg.qr(proper_normal(as_generator(rng), (m, m)))
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def design_from_target(lifted_target: np.ndarray, p: float, n: int,
                       constraint: str = UNCONSTRAINED, b: int | None = None,
                       max_iters: int = 200, tol: float = 1e-8,
                       v0: np.ndarray | None = None) -> DesignOutput:
    """Alternate structured fits and Procrustes alignments against a fixed target."""
    t = np.asarray(lifted_target, dtype=complex)
    m = t.shape[0]
    if constraint not in (UNCONSTRAINED, MASKED_FOURIER):
        raise ValueError(f"unknown constraint {constraint!r}")
    if constraint == MASKED_FOURIER:
        b = m // n if b is None else b
        if b * n != m:
            raise ValueError(f"masked Fourier needs m = b n, got m={m}, n={n}")
    v = np.eye(m, dtype=complex) if v0 is None else _check_unitary(v0, m)
    a, masks = _structured_fit(t, v, constraint, b, n)
    trace = [objective(v, t, a)]
    termination = "max_iters"
    it = 0
    for it in range(1, max_iters + 1):
        v = procrustes_align(a, t)
        trace.append(objective(v, t, a))
        a, masks = _structured_fit(t, v, constraint, b, n)
        trace.append(objective(v, t, a))
        prev = trace[-3]
        if prev - trace[-1] <= tol * max(prev, 1e-300):
            termination = "converged"
            break
    else:
        it = max_iters
    return DesignOutput(finalize_norm(a, p), v, trace, it, termination,
                        a_hat=a, lifted_target=t, masks=masks)


def alternating_design(c_x: np.ndarray, budget: DesignBudget, constraint: str = UNCONSTRAINED,
                       b: int | None = None, max_iters: int = 200, tol: float = 1e-8,
                       multi_start: int = 1, rng: RngLike | None = None,
                       c_u: np.ndarray | None = None,
                       noise_cov: np.ndarray | None = None) -> DesignOutput:
    """Waterfill the lifted covariance, then alternate structured fit / Procrustes.

    Start 0 uses ``V0 = I``; further starts (``multi_start > 1``) draw Haar
    unitary ``V0`` from ``rng`` and the lowest final objective wins (ties go
    to the lowest start index). With ``noise_cov`` the target is whitened
    first (see :func:`whiten_for_colored_noise`).
    """
    wf = waterfill_lifted(c_x, budget, c_u=c_u)
    target = wf.lifted_target
    if noise_cov is not None:
        target = whiten_for_colored_noise(noise_cov, target).target
    best = None
    gen = None
    for s in range(max(1, multi_start)):
        v0 = None
        if s > 0:
            if gen is None:
                gen = as_generator(0 if rng is None else rng)
            v0 = haar_unitary(budget.m, gen)
        out = design_from_target(target, budget.p, budget.n, constraint, b,
                                 max_iters=max_iters, tol=tol, v0=v0)
        if best is None or out.final_objective < best.final_objective:
            best = out
    return best


# --------------------------------------------------------------------------- closed forms and baselines


def default_low_snr_weights(m: int, p: float) -> np.ndarray:
    """``c_k = sqrt(P/m) exp(2j pi (k-1)/m)``."""
    return math.sqrt(p / m) * np.exp(2j * np.pi * np.arange(m) / m)


def low_snr_optimal_matrix(c_u: np.ndarray, budget: DesignBudget,
                           c: np.ndarray | None = None) -> np.ndarray:
    """Rank-one optimum ``c v_max^H`` for a Kronecker-symmetric SOI at low SNR."""
    check_hermitian_psd(np.asarray(c_u), "c_u")
    if c is None:
        c = default_low_snr_weights(budget.m, budget.p)
    c = np.asarray(c, dtype=complex).ravel()
    if c.size != budget.m:
        raise ValueError(f"c must have length m={budget.m}")
    if abs(np.vdot(c, c).real - budget.p) > 1e-9 * budget.p:
        raise ValueError("||c||^2 must equal P")
    _, v = _leading_eigvec(c_u)
    return np.outer(c, v.conj())


def random_gaussian_matrix(budget: DesignBudget, rng: RngLike) -> np.ndarray:
    """i.i.d. CN(0, 1/n) entries, so rows have unit expected squared norm."""
    return proper_normal(as_generator(rng), (budget.m, budget.n)) / math.sqrt(budget.n)


OCTANARY_PHASES = np.array([1, -1, 1j, -1j])
OCTANARY_MAGS = np.array([math.sqrt(2) / 2, math.sqrt(3)])


def octanary_masks(b: int, n: int, rng: RngLike) -> np.ndarray:
    """i.i.d. ``d1 * d2`` with ``d1`` uniform on {1,-1,j,-j}, ``d2`` = sqrt(2)/2 (p=4/5) or sqrt(3) (p=1/5)."""
    gen = as_generator(rng)
    d1 = OCTANARY_PHASES[gen.integers(0, 4, size=(b, n))]
    d2 = np.where(gen.random((b, n)) < 0.8, OCTANARY_MAGS[0], OCTANARY_MAGS[1])
    return d1 * d2


def coded_diffraction_matrix(b: int, n: int, rng: RngLike) -> np.ndarray:
    """Masked Fourier matrix with random octanary masks."""
    return assemble_masked_fourier(MaskSet(octanary_masks(b, n, rng)))


def is_masked_fourier(a: np.ndarray, n: int, tol: float = 1e-10) -> bool:
    """True if every ``n``-row block of ``a`` equals ``F diag(g)`` for some ``g``."""
    a = np.asarray(a)
    if a.shape[1] != n or a.shape[0] % n:
        return False
    f = dft_matrix(n)
    blocks = a.reshape(-1, n, n)
    g = blocks[:, 0, :] * math.sqrt(n)  # first DFT row is 1/sqrt(n)
    rebuilt = f[None] * g[:, None, :]
    return bool(np.abs(rebuilt - blocks).max() <= tol * max(np.abs(a).max(), 1.0))


# --------------------------------------------------------------------------- colored noise


@dataclass
class WhitenedTarget:
    target: np.ndarray       # C_W^{1/2} T
    whitener: np.ndarray     # C_W^{-1/2}, applied to observations
    sqrt_cov: np.ndarray     # C_W^{1/2}


def whiten_for_colored_noise(c_w: np.ndarray, lifted_target: np.ndarray) -> WhitenedTarget:
    """Fold a colored noise covariance into the design target."""
    c_w = np.asarray(c_w, dtype=complex)
    check_hermitian_psd(c_w, "c_w")
    w, u = np.linalg.eigh(hermitian_part(c_w))
    if w[0] <= 1e-12 * max(w[-1], 0.0) or w[-1] <= 0:
        raise ValueError("noise covariance is singular")
    half = (u * np.sqrt(w)) @ u.conj().T
    inv_half = (u / np.sqrt(w)) @ u.conj().T
    return WhitenedTarget(half @ np.asarray(lifted_target, dtype=complex), inv_half, half)
