import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import cnormal
from phasedesign.kron import (NotRankOneError, apply_lifted_fast, eigh_descending, fix_phase,
                              hermitian_part, kron, lift_signal, row_wise_krp, selection_matrix,
                              top_eigenpair, unlift_signal, unvec, vec)
from phasedesign.retrieval import phase_aligned_error

seeds = st.integers(0, 2**32 - 1)


def test_vec_examples():
    np.testing.assert_array_equal(vec(np.array([[1, 3], [2, 4]])), [1, 2, 3, 4])
    np.testing.assert_array_equal(vec(np.eye(2)), [1, 0, 0, 1])
    np.testing.assert_array_equal(unvec(np.array([1, 2, 3, 4]), 2), [[1, 3], [2, 4]])
    np.testing.assert_array_equal(unvec(np.zeros(9)), np.zeros((3, 3)))


def test_vec_rejects_bad_shapes():
    with pytest.raises(ValueError):
        vec(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        unvec(np.zeros(5))
    with pytest.raises(ValueError):
        unvec(np.zeros(9), 2)


@given(seeds, st.integers(1, 6))
def test_vec_roundtrip(seed, n):
    m = cnormal(np.random.default_rng(seed), (n, n))
    np.testing.assert_array_equal(unvec(vec(m)), m)
    x = vec(m)
    np.testing.assert_array_equal(vec(unvec(x, n)), x)


def test_kron_examples(gen):
    np.testing.assert_array_equal(kron(np.array([1, 2]), np.array([1, 0])), [1, 0, 2, 0])
    np.testing.assert_array_equal(kron(np.eye(2), np.eye(2)), np.eye(4))
    a, b, c, d = (cnormal(gen, (2, 2)) for _ in range(4))
    np.testing.assert_allclose(kron(a, b) @ kron(c, d), kron(a @ c, b @ d), atol=1e-13)


def test_kron_entry_layout(gen):
    a = cnormal(gen, (2, 3))
    b = cnormal(gen, (4, 2))
    k = kron(a, b)
    for p1 in range(2):
        for p2 in range(3):
            for q1 in range(4):
                for q2 in range(2):
                    assert k[p1 * 4 + q1, p2 * 2 + q2] == pytest.approx(a[p1, p2] * b[q1, q2], rel=1e-15)


def test_selection_matrix():
    s = selection_matrix(3)
    assert s.shape == (3, 9)
    assert s.sum() == 3
    for k in range(3):
        assert s[k, k * 3 + k] == 1


def test_row_wise_krp_examples(gen):
    np.testing.assert_array_equal(row_wise_krp(np.eye(2)), [[1, 0, 0, 0], [0, 0, 0, 1]])
    np.testing.assert_array_equal(row_wise_krp(np.array([[1, 1j]])), [[1, -1j, 1j, 1]])
    a = cnormal(gen, (3, 2))
    np.testing.assert_array_equal(row_wise_krp(a), selection_matrix(3) @ np.kron(a, a.conj()))


@given(seeds, st.integers(1, 4), st.integers(1, 6))
def test_row_wise_krp_equals_selected_kron(seed, n, m):
    a = cnormal(np.random.default_rng(seed), (m, n))
    assert np.abs(row_wise_krp(a) - selection_matrix(m) @ np.kron(a, a.conj())).max() <= 1e-14


def test_lift_examples():
    np.testing.assert_array_equal(lift_signal([1, 0]), [1, 0, 0, 0])
    np.testing.assert_array_equal(lift_signal([0, 1j]), [0, 0, 0, 1])


@given(seeds, st.integers(1, 6), st.integers(1, 12))
def test_lifting_identity(seed, n, m):
    gen = np.random.default_rng(seed)
    a = cnormal(gen, (m, n))
    u = cnormal(gen, n)
    lifted = row_wise_krp(a) @ lift_signal(u)
    y = np.abs(a @ u) ** 2
    assert np.abs(lifted.imag).max() <= 1e-12 * max(1.0, y.max())
    np.testing.assert_allclose(lifted.real, y, rtol=1e-10, atol=1e-12)


@given(seeds, st.integers(1, 6))
def test_unvec_of_lift_is_rank_one_psd(seed, n):
    u = cnormal(np.random.default_rng(seed), n)
    outer = unvec(lift_signal(u)).T
    np.testing.assert_allclose(outer, np.outer(u, u.conj()), atol=1e-13)
    np.testing.assert_allclose(unvec(lift_signal(u)), np.outer(u.conj(), u), atol=1e-13)
    w = np.linalg.eigvalsh(hermitian_part(outer))
    assert w[0] >= -1e-12 * w[-1]
    assert w[-2] <= 1e-12 * w[-1] if n > 1 else True


def test_unlift_examples():
    u = np.array([1, 2j, -1])
    got = unlift_signal(lift_signal(u))
    assert phase_aligned_error(u, got) < 1e-12
    # largest-magnitude entry is real positive
    assert abs(got[1].imag) < 1e-12 and got[1].real > 0
    with pytest.raises(NotRankOneError):
        unlift_signal(np.zeros(4))


@given(seeds, st.integers(1, 6))
def test_unlift_roundtrip(seed, n):
    u = cnormal(np.random.default_rng(seed), n)
    assert phase_aligned_error(u, unlift_signal(lift_signal(u))) <= 1e-10


def test_unlift_rejects_rank_two(gen):
    x = lift_signal(cnormal(gen, 3)) + lift_signal(cnormal(gen, 3))
    with pytest.raises(NotRankOneError) as info:
        unlift_signal(x)
    assert info.value.second_singular_value > 0


def test_hermitian_part_examples(gen):
    h = cnormal(gen, (3, 3))
    h = h + h.conj().T
    np.testing.assert_array_equal(hermitian_part(h), h)
    np.testing.assert_array_equal(hermitian_part(np.array([[0, 2], [0, 0]])), [[0, 1], [1, 0]])
    with pytest.raises(ValueError):
        hermitian_part(np.zeros((2, 3)))


def test_hermitian_part_minimizer_matches_grid():
    # over rank-one conj(v) v^T, M and hermitian_part(M) share the minimizer
    gen = np.random.default_rng(11)
    m = cnormal(gen, (2, 2))
    grid = []
    for r1 in np.linspace(0, 2, 21):
        for r2 in np.linspace(0, 2, 21):
            for ph in np.linspace(0, 2 * np.pi, 24, endpoint=False):
                grid.append(np.array([r1, r2 * np.exp(1j * ph)]))
    cand = np.array(grid)
    outers = cand.conj()[:, :, None] * cand[:, None, :]
    d_full = np.linalg.norm(m[None] - outers, axis=(1, 2))
    d_herm = np.linalg.norm(hermitian_part(m)[None] - outers, axis=(1, 2))
    assert np.argmin(d_full) == np.argmin(d_herm)


def test_apply_lifted_fast_examples(gen):
    q = vec(np.diag([3.0, 5.0]).astype(complex))
    np.testing.assert_allclose(apply_lifted_fast(np.eye(2), q), [3, 5])
    a = cnormal(gen, (5, 3))
    u = cnormal(gen, 3)
    np.testing.assert_allclose(apply_lifted_fast(a, lift_signal(u)), np.abs(a @ u) ** 2, rtol=1e-12)
    with pytest.raises(ValueError):
        apply_lifted_fast(a, np.zeros(8))


@given(seeds, st.integers(1, 5), st.integers(1, 10))
def test_apply_lifted_fast_matches_dense(seed, n, m):
    gen = np.random.default_rng(seed)
    a = cnormal(gen, (m, n))
    q = cnormal(gen, n * n)
    dense = row_wise_krp(a) @ q
    fast = apply_lifted_fast(a, q)
    assert np.linalg.norm(fast - dense) <= 1e-12 * max(1.0, np.linalg.norm(dense))


def test_kron_distance_equals_matrix_distance(gen):
    for _ in range(200):
        n = int(gen.integers(1, 5))
        x1, x2, x3 = cnormal(gen, n * n), cnormal(gen, n), cnormal(gen, n)
        lhs = np.linalg.norm(x1 - np.kron(x2, x3.conj())) ** 2
        rhs = np.linalg.norm(unvec(x1, n) - np.outer(x3.conj(), x2)) ** 2
        assert abs(lhs - rhs) <= 1e-12 * lhs


def test_kron_contraction_identities(gen):
    for _ in range(200):
        n = int(gen.integers(1, 5))
        x = cnormal(gen, n)
        mm = cnormal(gen, (n * n, n * n))
        eye = np.eye(n)
        lhs1 = np.kron(eye, x[None, :]) @ mm @ np.kron(x, x.conj())
        lhs2 = np.kron(x[None, :], eye) @ mm.conj() @ np.kron(x.conj(), x)
        t = mm.reshape(n, n, n, n)  # [k, q2, p1, q1] for row (k,q2) and column (p1,q1)
        rhs1 = np.einsum("q,kqpr,p,r->k", x, t, x, x.conj())
        t2 = mm.conj().reshape(n, n, n, n)  # [p2, k, p1, q1]
        rhs2 = np.einsum("s,skpr,p,r->k", x, t2, x.conj(), x)
        assert np.linalg.norm(lhs1 - rhs1) <= 1e-10 * np.linalg.norm(lhs1)
        assert np.linalg.norm(lhs2 - rhs2) <= 1e-10 * np.linalg.norm(lhs2)


def test_phase_convention():
    v = np.array([0.5j, -2.0, 1.0])
    f = fix_phase(v)
    assert f[1] == pytest.approx(2.0)
    # ties go to the lowest index
    f = fix_phase(np.array([1j, -1.0]))
    assert f[0] == pytest.approx(1.0)


def test_eigen_helpers_residual(gen):
    h = cnormal(gen, (6, 6))
    h = h + h.conj().T
    w, v = eigh_descending(h)
    assert np.all(np.diff(w) <= 0)
    assert np.linalg.norm(h @ v - v * w) <= 1e-10 * np.linalg.norm(h)
    lam, top = top_eigenpair(h)
    assert lam == pytest.approx(w[0])
    assert np.linalg.norm(h @ top - lam * top) <= 1e-10 * np.linalg.norm(h)


def test_constructors_reject_nonfinite():
    with pytest.raises(ValueError):
        row_wise_krp(np.array([[np.nan, 1.0]]))
    with pytest.raises(ValueError):
        lift_signal([np.inf, 1.0])
