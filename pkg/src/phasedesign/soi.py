"""Signal-of-interest models, seeded random streams and covariances.

Two models are provided:

* :class:`SumExponentials` -- ``u_k = sum_l M_l exp(j*pi*Phi_l*k)``, ``k = 1..n``
  with ``M_l ~ N(0, 1)`` and ``Phi_l ~ U[0, pi]``.
* :class:`ProperGaussian` -- zero-mean proper complex Gaussian with a given
  covariance (by default the exponentially decaying profile of
  :func:`gaussian_covariance_expdecay`).

Randomness always flows through :class:`RngStream`, a ``(master_seed,
stream_index)`` pair mapped onto a counter-based Philox generator; equal
pairs give bit-identical draws regardless of call order elsewhere.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .kron import hermitian_part

ANALYTIC = "analytic_kron_symmetric"
EMPIRICAL = "empirical"


@dataclass(frozen=True)
class RngStream:
    """Reproducible random stream keyed by ``(master_seed, stream_index)``.

    Uses ``SeedSequence(master_seed, spawn_key=(stream_index,))`` feeding a
    Philox counter-based bit generator. Normal variates come from numpy's
    ``Generator.standard_normal`` (ziggurat transform).
    """

    master_seed: int
    stream_index: int = 0

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(int(self.master_seed) % 2**64,
                                    spawn_key=(int(self.stream_index) % 2**64,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *labels) -> "RngStream":
        """Derive an independent stream from this one and some labels."""
        return RngStream(self.master_seed, stable_hash(self.stream_index, *labels))


def stable_hash(*parts) -> int:
    """64-bit hash of ``repr(parts)`` that does not depend on ``PYTHONHASHSEED``."""
    digest = hashlib.blake2b(repr(parts).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


RngLike = Union[RngStream, np.random.Generator, int]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    return RngStream(int(rng)).generator()


def proper_normal(gen: np.random.Generator, shape) -> np.ndarray:
    """i.i.d. CN(0, 1): independent real/imaginary parts, each N(0, 1/2)."""
    z = gen.standard_normal(tuple(np.atleast_1d(shape)) + (2,))
    return (z[..., 0] + 1j * z[..., 1]) / np.sqrt(2.0)


# --------------------------------------------------------------------------- models


@dataclass(frozen=True)
class SumExponentials:
    n: int
    num_components: int = 6
    amplitude_variance: float = 1.0

    @property
    def name(self) -> str:
        return "sum_exponentials"

    def sample(self, rng: RngLike, size: int | None = None) -> np.ndarray:
        return sample_sum_exponentials(self.n, rng, size=size,
                                       num_components=self.num_components,
                                       amplitude_variance=self.amplitude_variance)

    def analytic_covariance(self) -> np.ndarray:
        """Closed-form ``E{u u^H}``; used as a cross-check of the sampler."""
        k = np.arange(1, self.n + 1)
        d = (k[:, None] - k[None, :]).astype(float)
        # E exp(j*pi*Phi*d) with pi*Phi ~ U[0, pi^2]
        w = np.pi ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            e = np.where(d == 0, 1.0 + 0j, (np.exp(1j * w * d) - 1) / (1j * w * d))
        return self.num_components * self.amplitude_variance * e


@dataclass(frozen=True)
class ProperGaussian:
    n: int
    covariance: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        c = self.covariance
        if c is None:
            c = gaussian_covariance_expdecay(self.n)
        c = np.array(c, dtype=complex)
        if c.shape != (self.n, self.n):
            raise ValueError(f"covariance shape {c.shape} does not match n={self.n}")
        check_hermitian_psd(c, "covariance")
        c.setflags(write=False)
        object.__setattr__(self, "covariance", c)

    @property
    def name(self) -> str:
        return "proper_gaussian"

    def sample(self, rng: RngLike, size: int | None = None) -> np.ndarray:
        return sample_pc_gaussian(self.covariance, rng, size=size)

    def analytic_covariance(self) -> np.ndarray:
        return np.array(self.covariance)


SoiModel = Union[SumExponentials, ProperGaussian]


def check_hermitian_psd(c: np.ndarray, name: str = "matrix", herm_tol: float = 1e-12,
                        psd_tol: float = 1e-10) -> None:
    """Raise ``ValueError`` unless ``c`` is Hermitian PSD within tolerance."""
    c = np.asarray(c)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ValueError(f"{name} must be square")
    if not np.all(np.isfinite(c)):
        raise ValueError(f"{name} contains NaN or Inf")
    scale = max(np.abs(c).max(), 1.0)
    if np.abs(c - c.conj().T).max() > herm_tol * scale:
        raise ValueError(f"{name} is not Hermitian")
    w = np.linalg.eigvalsh(hermitian_part(c))
    tr = abs(np.trace(c).real)
    if w.size and w[0] < -psd_tol * max(tr, 1e-300):
        raise ValueError(f"{name} is not PSD (min eigenvalue {w[0]:.3e})")


# --------------------------------------------------------------------------- samplers


def sample_sum_exponentials(n: int, rng: RngLike, size: int | None = None,
                            num_components: int = 6,
                            amplitude_variance: float = 1.0) -> np.ndarray:
    """Draw the sum-of-exponentials signal; shape ``(n,)`` or ``(size, n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = as_generator(rng)
    count = 1 if size is None else int(size)
    amps = gen.standard_normal((count, num_components)) * np.sqrt(amplitude_variance)
    phis = gen.uniform(0.0, np.pi, (count, num_components))
    k = np.arange(1, n + 1)
    u = np.einsum("sl,slk->sk", amps, np.exp(1j * np.pi * phis[:, :, None] * k))
    return u[0] if size is None else u


def gaussian_covariance_expdecay(n: int) -> np.ndarray:
    """``C[k, l] = 6 exp(-|k-l| + 2j*pi*(k-l)/n)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    k = np.arange(1, n + 1)
    d = k[:, None] - k[None, :]
    return 6.0 * np.exp(-np.abs(d) + 2j * np.pi * d / n)


def _psd_factor(c: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(hermitian_part(c))
    return v * np.sqrt(np.clip(w, 0.0, None))


def sample_pc_gaussian(c_u: np.ndarray, rng: RngLike, size: int | None = None) -> np.ndarray:
    """Proper complex Gaussian ``u = F z`` with ``F F^H = c_u``."""
    c_u = np.asarray(c_u, dtype=complex)
    check_hermitian_psd(c_u, "c_u")
    gen = as_generator(rng)
    n = c_u.shape[0]
    count = 1 if size is None else int(size)
    z = proper_normal(gen, (count, n))
    u = z @ _psd_factor(c_u).T
    return u[0] if size is None else u


# --------------------------------------------------------------------------- covariances


@dataclass(frozen=True)
class CovariancePair:
    """Covariance of the SOI (``c_u``) and of its lift ``u (x) conj(u)`` (``c_x``)."""

    c_u: np.ndarray
    c_x: np.ndarray
    provenance: str = ANALYTIC
    num_samples: int | None = None
    seed: int | None = None

    @property
    def n(self) -> int:
        return self.c_u.shape[0]


def lifted_covariance_kron_symmetric(c_u: np.ndarray) -> np.ndarray:
    """Covariance of the lifted signal for a Kronecker-symmetric SOI: ``c_u (x) conj(c_u)``."""
    c_u = np.asarray(c_u, dtype=complex)
    return np.kron(c_u, c_u.conj())


def analytic_pair(c_u: np.ndarray) -> CovariancePair:
    c_u = np.asarray(c_u, dtype=complex)
    return CovariancePair(c_u, lifted_covariance_kron_symmetric(c_u), ANALYTIC)


def empirical_lifted_covariance(model: SoiModel, num_samples: int, rng: RngLike,
                                chunk: int = 20000) -> CovariancePair:
    """Sample covariances of ``u`` and of ``u (x) conj(u)`` from i.i.d. draws."""
    n = model.n
    if num_samples < 10 * n * n:
        raise ValueError(f"need at least {10 * n * n} samples for n={n}, got {num_samples}")
    gen = as_generator(rng)
    s1u = np.zeros(n, complex)
    s2u = np.zeros((n, n), complex)
    s1x = np.zeros(n * n, complex)
    s2x = np.zeros((n * n, n * n), complex)
    done = 0
    while done < num_samples:
        b = min(chunk, num_samples - done)
        u = model.sample(gen, size=b)
        x = (u[:, :, None] * u.conj()[:, None, :]).reshape(b, n * n)
        s1u += u.sum(0)
        s2u += u.T @ u.conj()
        s1x += x.sum(0)
        s2x += x.T @ x.conj()
        done += b
    nn = float(num_samples)
    mu_u = s1u / nn
    mu_x = s1x / nn
    c_u = (s2u - nn * np.outer(mu_u, mu_u.conj())) / (nn - 1)
    c_x = (s2x - nn * np.outer(mu_x, mu_x.conj())) / (nn - 1)
    seed = rng.master_seed if isinstance(rng, RngStream) else None
    return CovariancePair(hermitian_part(c_u), hermitian_part(c_x), EMPIRICAL,
                          num_samples=num_samples, seed=seed)


def kron_symmetry_deviation(pair: CovariancePair) -> float:
    """Relative Frobenius distance of ``c_x`` from ``c_u (x) conj(c_u)``."""
    n = pair.c_u.shape[0]
    if pair.c_x.shape != (n * n, n * n):
        raise ValueError("c_x dimensions do not match c_u")
    ref = lifted_covariance_kron_symmetric(pair.c_u)
    denom = np.linalg.norm(ref)
    if denom == 0:
        raise ZeroDivisionError("c_u (x) conj(c_u) is zero")
    return float(np.linalg.norm(pair.c_x - ref) / denom)
