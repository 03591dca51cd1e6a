"""The rank-one low-SNR matrix and how the proxy depends on its row weights.

The proxy for a Gaussian signal is sum_k (a_k^H conj(C) a_k)^2. A rank-one
matrix c v_max^H reaches mu_max^2 sum_k |c_k|^4, so for a fixed Frobenius
budget the weights decide the value: equal weights give mu^2 P^2 / m and a
single active row gives mu^2 P^2.
"""

import numpy as np

from phasedesign import DesignBudget, kron_sym_trace, low_snr_optimal_matrix
from phasedesign.analysis import necessary_condition_residual
from phasedesign.soi import gaussian_covariance_expdecay

rng = np.random.default_rng(1)
for n, m in [(10, 60), (2, 3)]:
    c_u = gaussian_covariance_expdecay(n)
    mu = np.linalg.eigvalsh(c_u)[-1]
    budget = DesignBudget(float(m), m, n)
    spread = low_snr_optimal_matrix(c_u, budget)
    one_hot = low_snr_optimal_matrix(c_u, budget, c=np.sqrt(m) * np.eye(m)[0])

    draws = rng.standard_normal((1000, m, n)) + 1j * rng.standard_normal((1000, m, n))
    draws *= np.sqrt(m) / np.linalg.norm(draws, axis=(1, 2), keepdims=True)
    rand = np.array([kron_sym_trace(a, c_u) for a in draws])

    print(f"n={n} m={m}: mu_max={mu:.3f}")
    print(f"  equal weights  {kron_sym_trace(spread, c_u):12.2f}  (mu^2 P^2 / m = {mu**2 * m:.2f})")
    print(f"  one active row {kron_sym_trace(one_hot, c_u):12.2f}  (mu^2 P^2     = {mu**2 * m * m:.2f})")
    print(f"  random, best of 1000 {rand.max():10.2f}; beat equal weights {np.sum(rand > kron_sym_trace(spread, c_u))} times")

    rep = necessary_condition_residual(spread, np.kron(c_u, c_u.conj()))
    print(f"  eigenvector residual {rep.per_row_residual.max():.1e}, lambda spread {rep.lambda_dispersion:.1e}")
