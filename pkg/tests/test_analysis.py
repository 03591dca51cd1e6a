import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import cnormal, random_psd
from phasedesign.analysis import (condition_matrix, dense_kron_sym_trace, kron_sym_trace,
                                  lmmse_matrix, mi_low_snr_proxy, mmse_matrix_importance_sampling,
                                  mode_condition_report, necessary_condition_residual)
from phasedesign.design import DesignBudget, low_snr_optimal_matrix, waterfill_lifted
from phasedesign.kron import row_wise_krp
from phasedesign.soi import ProperGaussian, RngStream, lifted_covariance_kron_symmetric


def test_lmmse_examples(gen):
    np.testing.assert_allclose(lmmse_matrix(np.array([[1.0]]), np.array([[2.0]]), 1.0), [[1.0]])
    c = random_psd(gen, 4)
    np.testing.assert_allclose(lmmse_matrix(np.zeros((3, 4)), c, 1.0), c, atol=1e-14)
    t = cnormal(gen, (3, 4))
    np.testing.assert_allclose(lmmse_matrix(t, c, 1e9), c, atol=1e-6 * np.linalg.norm(c))


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.floats(1e-3, 1e3))
def test_lmmse_dominance(seed, n, s2):
    gen = np.random.default_rng(seed)
    c = random_psd(gen, n * n)
    t = row_wise_krp(cnormal(gen, (int(gen.integers(1, n * n + 1)), n)))
    e = lmmse_matrix(t, c, s2)
    np.testing.assert_allclose(e, e.conj().T, atol=1e-12)
    scale = np.linalg.norm(c)
    assert np.linalg.eigvalsh(e)[0] >= -1e-8 * scale
    assert np.linalg.eigvalsh(c - e)[0] >= -1e-8 * scale


def test_proxy_examples(gen):
    c = random_psd(gen, 4)
    assert mi_low_snr_proxy(np.zeros((2, 4)), c, 1.0) == 0.0
    t = cnormal(gen, (2, 4))
    assert mi_low_snr_proxy(t, c, 0.5) == pytest.approx(2 * mi_low_snr_proxy(t, c, 1.0))
    c_u = random_psd(gen, 2)
    a = cnormal(gen, (3, 2))
    got = mi_low_snr_proxy(row_wise_krp(a), lifted_covariance_kron_symmetric(c_u), 0.7)
    assert got == pytest.approx(kron_sym_trace(a, c_u) / 1.4, rel=1e-10)


def test_kron_sym_trace_examples():
    assert kron_sym_trace(np.eye(2), np.diag([2.0, 1.0])) == pytest.approx(5.0)
    assert kron_sym_trace(np.zeros((3, 2)), np.eye(2)) == 0.0


def test_trace_identity_random_instances():
    gen = np.random.default_rng(36)
    for _ in range(200):
        n = int(gen.integers(1, 5))
        a = cnormal(gen, (int(gen.integers(1, 7)), n))
        c_u = random_psd(gen, n)
        fast, dense = kron_sym_trace(a, c_u), dense_kron_sym_trace(a, c_u)
        assert abs(fast - dense) <= 1e-10 * dense


def test_condition_matrix_identity_error(gen):
    a = cnormal(gen, (4, 3))
    rep = necessary_condition_residual(a, np.eye(9))
    np.testing.assert_allclose(rep.per_row_residual, 0, atol=1e-12)
    np.testing.assert_allclose(rep.per_row_lambda, 2 * np.linalg.norm(a, axis=1) ** 2)
    np.testing.assert_allclose(condition_matrix(a[0], np.eye(9)),
                               2 * np.linalg.norm(a[0]) ** 2 * np.eye(3), atol=1e-12)


def test_condition_matrix_low_snr_closed_form(gen):
    c_u = random_psd(gen, 3)
    a_row = cnormal(gen, 3)
    h = condition_matrix(a_row, np.kron(c_u, c_u.conj()))
    q = (a_row @ c_u @ a_row.conj()).real
    np.testing.assert_allclose(h, 2 * q * c_u.conj(), atol=1e-10)


def test_necessary_condition_at_rank_one_optimum(gen):
    c_u = random_psd(gen, 4)
    a = low_snr_optimal_matrix(c_u, DesignBudget(6.0, 6, 4))
    rep = necessary_condition_residual(a, np.kron(c_u, c_u.conj()))
    assert rep.per_row_residual.max() < 1e-8
    assert rep.lambda_dispersion < 1e-8


def test_necessary_condition_zero_rows():
    rep = necessary_condition_residual(np.zeros((3, 2)), np.eye(4))
    assert rep.per_row_lambda.size == 0 and rep.lambda_dispersion == 0.0
    assert list(rep.skipped_rows) == [0, 1, 2]
    a = np.array([[1.0, 0.0], [0.0, 0.0]])
    rep = necessary_condition_residual(a, np.eye(4))
    assert list(rep.rows) == [0] and list(rep.skipped_rows) == [1]
    with pytest.raises(ValueError):
        necessary_condition_residual(a, np.eye(3))


def test_mode_condition_holds_for_waterfilled_target(gen):
    c_x = random_psd(gen, 9)
    budget = DesignBudget(5.0, 5, 3, 0.3)
    wf = waterfill_lifted(c_x, budget)
    e = lmmse_matrix(wf.lifted_target, c_x, budget.sigma_w_sq)
    rep = mode_condition_report(wf.lifted_target, e)
    np.testing.assert_allclose(rep.per_row_residual, 0, atol=1e-9)
    np.testing.assert_allclose(rep.per_row_eigenvalue, 2 * budget.sigma_w_sq / wf.water_level, rtol=1e-8)


MODEL = ProperGaussian(2)
C_X = lifted_covariance_kron_symmetric(MODEL.covariance)


def _low_snr_mmse(outer, inner, seed=0):
    # SNR -40 dB with unit average row norm
    a = cnormal(np.random.default_rng(5), (3, 2)) / np.sqrt(2)
    return mmse_matrix_importance_sampling(a, MODEL, 1e4, outer, inner, RngStream(seed))


def test_mmse_low_snr_close_to_prior():
    est = _low_snr_mmse(4000, 400)
    c_x = C_X
    # uncentered second moment: a centered error covariance must not land here
    mean = MODEL.covariance.reshape(-1, order="F").conj()
    second = c_x + np.outer(mean, mean.conj())
    assert np.linalg.norm(est.matrix - est.matrix.conj().T) < 1e-8
    assert np.all(np.diag(est.matrix).real >= 0)
    assert np.linalg.norm(est.matrix - c_x) / np.linalg.norm(c_x) < 0.1
    assert not est.low_ess and est.num_samples == (4000, 400)
    assert np.linalg.norm(est.matrix - second) > np.linalg.norm(est.matrix - c_x)


def test_mmse_zero_matrix_is_prior():
    model = ProperGaussian(2)
    est = mmse_matrix_importance_sampling(np.zeros((2, 2)), model, 1.0, 4000, 400, RngStream(1))
    c_x = lifted_covariance_kron_symmetric(model.covariance)
    assert np.linalg.norm(est.matrix - c_x) / np.linalg.norm(c_x) < 0.1


def test_mmse_converges_across_doublings():
    c_x = C_X
    errs = []
    for k in range(4):
        outer, inner = 500 * 2 ** k, 100 * 2 ** k
        vals = [np.linalg.norm(_low_snr_mmse(outer, inner, s).matrix - c_x) for s in range(4)]
        errs.append(np.mean(vals))
    assert all(e1 < e0 for e0, e1 in zip(errs, errs[1:]))


def test_mmse_limits_and_ess_warning():
    with pytest.raises(ValueError):
        mmse_matrix_importance_sampling(np.eye(5), ProperGaussian(5), 1.0, 100, 100, RngStream(0))
    with pytest.raises(ValueError):
        mmse_matrix_importance_sampling(np.eye(2), ProperGaussian(2), 1.0, 10, 100, RngStream(0))
    with pytest.warns(RuntimeWarning):
        est = mmse_matrix_importance_sampling(10 * np.eye(2), ProperGaussian(2), 1e-6, 100, 100,
                                              RngStream(0))
    assert est.low_ess and est.std_error_proxy > 1 / np.sqrt(20)
