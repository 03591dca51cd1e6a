"""Forward model, noisy observation and phase recovery.

``y = |A u|^2 + w`` with real white Gaussian ``w``. Recovery works on
amplitudes ``psi = sqrt(max(y, 0))``; negative noisy intensities are clamped.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .kron import apply_lifted_fast, lift_signal
from .soi import RngLike, as_generator

INIT_FRACTION = 6          # initialization set size is ceil(m / 6)
POWER_ITERS = 100


@dataclass
class Observation:
    y: np.ndarray
    sigma_w_sq: float
    matrix_label: str = ""
    truth: np.ndarray | None = field(default=None, repr=False)

    @property
    def amplitudes(self) -> np.ndarray:
        return np.sqrt(np.clip(self.y, 0.0, None))


@dataclass
class RecoveryResult:
    estimate: np.ndarray
    iterations: int
    final_objective: float
    algorithm: str
    loss_trace: list[float] | None = field(default=None, repr=False)


def forward_observe(a: np.ndarray, u: np.ndarray, sigma_w_sq: float, rng: RngLike | None = None,
                    label: str = "") -> Observation:
    """Noisy squared-magnitude observation of ``u`` through ``a``."""
    a = np.asarray(a, dtype=complex)
    u = np.asarray(u, dtype=complex).ravel()
    if a.shape[1] != u.size:
        raise ValueError(f"A has {a.shape[1]} columns but u has length {u.size}")
    if sigma_w_sq < 0:
        raise ValueError("noise variance must be nonnegative")
    clean = apply_lifted_fast(a, lift_signal(u)).real
    y = clean
    if sigma_w_sq > 0:
        if rng is None:
            raise ValueError("rng required for noisy observations")
        y = clean + math.sqrt(sigma_w_sq) * as_generator(rng).standard_normal(clean.shape)
    return Observation(y, float(sigma_w_sq), label, u)


def phase_aligned_error(u: np.ndarray, u_hat: np.ndarray) -> float:
    """``min_{|c|=1} ||u - c u_hat|| / ||u||``."""
    u = np.asarray(u, dtype=complex).ravel()
    u_hat = np.asarray(u_hat, dtype=complex).ravel()
    nu = np.linalg.norm(u)
    if nu == 0:
        raise ValueError("truth vector is zero")
    inner = np.vdot(u_hat, u)  # u_hat^H u
    # best unit c is inner/|inner|; any unit c is optimal when inner == 0
    c = inner / abs(inner) if abs(inner) > 0 else 1.0
    return float(np.linalg.norm(u - c * u_hat) / nu)


def _phase(z: np.ndarray) -> np.ndarray:
    mag = np.abs(z)
    return np.where(mag > 0, z / np.where(mag > 0, mag, 1.0), 1.0)


def spectral_init(a: np.ndarray, psi: np.ndarray, iters: int = POWER_ITERS) -> np.ndarray:
    """Orthogonality-promoting initialization.

    Takes the ``ceil(m/6)`` rows with the largest normalized amplitude
    ``psi_i / ||a_i||``, finds the leading eigenvector of the sum of their
    normalized outer products by power iteration from the all-ones vector,
    and scales it by the least-squares norm estimate.
    """
    m, n = a.shape
    if not np.any(psi > 0):
        return np.zeros(n, complex)
    row_norms = np.linalg.norm(a, axis=1)
    safe = np.where(row_norms > 0, row_norms, 1.0)
    score = np.where(row_norms > 0, psi / safe, -np.inf)
    k = min(m, math.ceil(m / INIT_FRACTION))
    sel = np.argsort(-score, kind="stable")[:k]
    rows = a[sel] / safe[sel, None]
    y0 = rows.conj().T @ rows  # sum of a_i a_i^H with a_i^H = rows[i]
    z = np.ones(n, complex) / math.sqrt(n)
    for _ in range(iters):
        z2 = y0 @ z
        nz = np.linalg.norm(z2)
        if nz == 0:
            break
        z = z2 / nz
    az = np.linalg.norm(a @ z)
    if az == 0:
        return np.zeros(n, complex)
    return z * (np.linalg.norm(psi) / az)


def amplitude_loss(a: np.ndarray, psi: np.ndarray, z: np.ndarray) -> float:
    return float(0.5 * np.sum((np.abs(a @ z) - psi) ** 2))


def taf_recover(a: np.ndarray, observation: Observation | np.ndarray, max_iters: int = 600,
                step: float = 1.0, gamma: float = 0.9) -> RecoveryResult:
    """Truncated amplitude flow.

    Gradient steps on ``0.5 sum_i (|a_i^H z| - psi_i)^2`` restricted to the
    summands with ``|a_i^H z| >= psi_i / (1 + gamma)``. The step is scaled by
    ``1 / ||A||_2^2`` so ``step = 1`` is a safe, scale-free choice. Returns
    the iterate with the smallest amplitude loss.
    """
    a = np.asarray(a, dtype=complex)
    y = observation.y if isinstance(observation, Observation) else np.asarray(observation, float)
    m, n = a.shape
    if m < n:
        raise ValueError("need m >= n")
    psi = np.sqrt(np.clip(y, 0.0, None))
    z = spectral_init(a, psi)
    lip = np.linalg.norm(a, 2) ** 2
    if lip == 0 or not np.any(psi > 0):
        return RecoveryResult(np.zeros(n, complex), 0, amplitude_loss(a, psi, z), "taf")
    mu = step / lip
    thresh = psi / (1.0 + gamma)
    best_z, best_loss = z, amplitude_loss(a, psi, z)
    for it in range(1, max_iters + 1):
        az = a @ z
        keep = np.abs(az) >= thresh
        if it == 1 and not keep.any():
            warnings.warn("TAF truncation set is empty after initialization", RuntimeWarning, stacklevel=2)
        resid = np.where(keep, az - psi * _phase(az), 0.0)
        z = z - mu * (a.conj().T @ resid)
        loss = amplitude_loss(a, psi, z)
        if loss < best_loss:
            best_z, best_loss = z, loss
    return RecoveryResult(best_z, max_iters, best_loss, "taf")


def altmin_recover(a: np.ndarray, observation: Observation | np.ndarray, max_iters: int = 600,
                   tol: float = 0.0) -> RecoveryResult:
    """Alternating projections: ``z <- pinv(A) (psi * phase(A z))``."""
    a = np.asarray(a, dtype=complex)
    y = observation.y if isinstance(observation, Observation) else np.asarray(observation, float)
    m, n = a.shape
    if m < n:
        raise ValueError("need m >= n")
    psi = np.sqrt(np.clip(y, 0.0, None))
    z = spectral_init(a, psi)
    if not np.any(psi > 0):
        return RecoveryResult(np.zeros(n, complex), 0, 0.0, "altmin")
    pinv = np.linalg.pinv(a)
    trace = [amplitude_loss(a, psi, z)]
    it = 0
    for it in range(1, max_iters + 1):
        z = pinv @ (psi * _phase(a @ z))
        trace.append(amplitude_loss(a, psi, z))
        if trace[-2] - trace[-1] <= tol * trace[-2]:
            break
    return RecoveryResult(z, it, trace[-1], "altmin", trace)


RECOVERY = {"taf": taf_recover, "altmin": altmin_recover}
