"""Fast self-checks of the core identities on seeded random instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .analysis import kron_sym_trace, necessary_condition_residual, dense_kron_sym_trace
from .design import (DesignBudget, low_snr_optimal_matrix, nearest_krp_rows, objective,
                     waterfill_levels)
from .kron import lift_signal, row_wise_krp, selection_matrix
from .soi import RngStream, proper_normal


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    worst: float
    tolerance: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: worst={self.worst:.3e} tol={self.tolerance:.0e}"


def _random_psd(gen, n):
    g = proper_normal(gen, (n, n))
    return g @ g.conj().T + 0.1 * np.eye(n)


def check_lifting(seed: int = 0, count: int = 100) -> Check:
    gen = RngStream(seed, 1).generator()
    worst = 0.0
    for _ in range(count):
        n = int(gen.integers(1, 7))
        m = int(gen.integers(n, n * n + 1))
        a = proper_normal(gen, (m, n))
        u = proper_normal(gen, n)
        y = np.abs(a @ u) ** 2
        lhs = row_wise_krp(a) @ lift_signal(u)
        worst = max(worst, np.linalg.norm(y - lhs) / np.linalg.norm(y),
                    np.abs(row_wise_krp(a) - selection_matrix(m) @ np.kron(a, a.conj())).max())
    return Check("lifting identity", worst <= 1e-10, worst, 1e-10)


def check_trace_identity(seed: int = 0, count: int = 50) -> Check:
    gen = RngStream(seed, 2).generator()
    worst = 0.0
    for _ in range(count):
        n = int(gen.integers(1, 5))
        a = proper_normal(gen, (int(gen.integers(n, n * n + 1)), n))
        c = _random_psd(gen, n)
        ref = dense_kron_sym_trace(a, c)
        worst = max(worst, abs(kron_sym_trace(a, c) - ref) / abs(ref))
    return Check("Kronecker trace identity", worst <= 1e-10, worst, 1e-10)


def check_waterfilling(seed: int = 0, count: int = 50) -> Check:
    gen = RngStream(seed, 3).generator()
    worst = 0.0
    for _ in range(count):
        d = np.sort(gen.exponential(size=int(gen.integers(1, 30))))[::-1]
        noise = float(gen.uniform(0.01, 5.0))
        total = float(gen.uniform(0.1, 50.0))
        a, eta = waterfill_levels(d, noise, total)
        act = a > 0
        kkt = np.abs(a[act] - (eta - noise / d[act])).max() if act.any() else 0.0
        worst = max(worst, abs(a.sum() - total) / total, kkt / eta)
    return Check("waterfilling KKT", worst <= 1e-9, worst, 1e-9)


def check_krp_projection(seed: int = 0, count: int = 20) -> Check:
    gen = RngStream(seed, 4).generator()
    worst = 0.0
    for _ in range(count):
        n = int(gen.integers(1, 6))
        m = int(gen.integers(n, n * n + 1))
        t = row_wise_krp(proper_normal(gen, (m, n)))
        a = nearest_krp_rows(t)
        worst = max(worst, objective(np.eye(m), t, a) / np.linalg.norm(t))
    return Check("nearest KRP exactness", worst <= 1e-10, worst, 1e-10)


def check_low_snr_optimum(seed: int = 0, count: int = 10) -> Check:
    gen = RngStream(seed, 5).generator()
    worst = 0.0
    for _ in range(count):
        n = int(gen.integers(2, 5))
        m = int(gen.integers(n, n * n + 1))
        c = _random_psd(gen, n)
        a = low_snr_optimal_matrix(c, DesignBudget(float(m), m, n))
        rep = necessary_condition_residual(a, np.kron(c, c.conj()))
        scale = max(1.0, np.abs(rep.per_row_lambda).max())
        worst = max(worst, rep.per_row_residual.max() / scale, rep.lambda_dispersion / scale)
    return Check("low-SNR optimum stationarity", worst <= 1e-8, worst, 1e-8)


def run_all(seed: int = 0) -> list[Check]:
    return [check_lifting(seed), check_trace_identity(seed), check_waterfilling(seed),
            check_krp_projection(seed), check_low_snr_optimum(seed)]
