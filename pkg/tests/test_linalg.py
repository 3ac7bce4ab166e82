import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qerkit import linalg as la


def rand_c(rng, *shape):
    return rng.normal(size=shape) + 1j * rng.normal(size=shape)


dims = st.integers(min_value=1, max_value=4)


@settings(max_examples=60, deadline=None)
@given(dims, dims, dims, dims, st.integers(0, 2**31 - 1))
def test_double_ket_sandwich_identity(a, b, c, d, seed):
    rng = np.random.default_rng(seed)
    m, n, x = rand_c(rng, a, b), rand_c(rng, c, d), rand_c(rng, b, d)
    lhs = np.kron(m, n.conj()) @ la.vectorize(x)
    assert np.allclose(lhs, la.vectorize(m @ x @ n.conj().T))


@settings(max_examples=60, deadline=None)
@given(dims, dims, st.integers(0, 2**31 - 1))
def test_double_ket_inner_product_is_hilbert_schmidt(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rand_c(rng, a, b), rand_c(rng, a, b)
    assert np.isclose(la.vectorize(x).conj() @ la.vectorize(y), np.trace(x.conj().T @ y))


def test_vectorize_is_row_major():
    a = np.arange(6).reshape(2, 3)
    v = la.vectorize(a)
    assert v[1 * 3 + 2] == a[1, 2]
    assert np.array_equal(la.devectorize(v, 2, 3), a)
    with pytest.raises(ValueError):
        la.devectorize(v, 4, 2)


@settings(max_examples=40, deadline=None)
@given(dims, dims, st.integers(0, 2**31 - 1))
def test_partial_trace_of_double_ket_outer_product(a, b, seed):
    rng = np.random.default_rng(seed)
    x, y = rand_c(rng, a, b), rand_c(rng, a, b)
    m = np.outer(la.vectorize(x), la.vectorize(y).conj())
    assert np.allclose(la.partial_trace(m, (a, b), 0), np.conj(x.conj().T @ y))
    assert np.allclose(la.partial_trace(m, (a, b), 1), x @ y.conj().T)


def test_partial_trace_of_product():
    rng = np.random.default_rng(3)
    a, b = rand_c(rng, 2, 2), rand_c(rng, 3, 3)
    k = np.kron(a, b)
    assert np.allclose(la.partial_trace(k, (2, 3), 0), np.trace(a) * b)
    assert np.allclose(la.partial_trace(k, (2, 3), 1), np.trace(b) * a)
    with pytest.raises(ValueError):
        la.partial_trace(k, (3, 3), 0)


def test_symmetrize_rejects_non_hermitian():
    with pytest.raises(ValueError):
        la.symmetrize(np.array([[0, 1], [0, 0]]))
    h = la.symmetrize(np.array([[1, 1j], [-1j, 2]]))
    assert np.allclose(h, h.conj().T)


def test_hermitian_eig_descending_and_reconstructs():
    rng = np.random.default_rng(0)
    g = rand_c(rng, 6, 6)
    h = g + g.conj().T
    dec = la.hermitian_eig(h)
    assert np.all(np.diff(dec.eigenvalues) <= 0)
    assert np.allclose(dec.reconstruct(), h)


def test_top_and_bottom_eigenpairs_match_full_solve():
    rng = np.random.default_rng(1)
    g = rand_c(rng, 100, 100)
    h = g + g.conj().T
    w = np.linalg.eigvalsh(h)
    top, vt = la.top_eigenpairs(h, 3)
    bot, vb = la.bottom_eigenpairs(h, 3)
    assert np.allclose(top, w[::-1][:3])
    assert np.allclose(bot, w[:3])
    assert np.allclose(h @ vt[:, 0], top[0] * vt[:, 0])
    assert np.isclose(la.min_eigenvalue(h), w[0])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.integers(1, 5), st.integers(0, 2**31 - 1))
def test_closest_isometry_dominates_random_isometries(d_out, d_in, seed):
    rng = np.random.default_rng(seed)
    x = rand_c(rng, d_out, d_in)
    r = min(d_out, d_in)
    best = la.closest_isometry(x, r)
    # partial isometry: singular values are one
    assert np.allclose(np.linalg.svd(best, compute_uv=False), 1.0)
    d_best = np.linalg.norm(x - best)
    for _ in range(20):
        q, _ = np.linalg.qr(rand_c(rng, max(d_out, d_in), max(d_out, d_in)))
        cand = q[:d_out, :d_in]
        u, _, vh = np.linalg.svd(cand, full_matrices=False)
        cand = u @ vh
        assert d_best <= np.linalg.norm(x - cand) + 1e-10


def test_closest_isometry_rank_checked():
    with pytest.raises(ValueError):
        la.closest_isometry(np.eye(2), 3)


def test_schmidt_decomposition_reconstructs():
    rng = np.random.default_rng(4)
    v = rand_c(rng, 6)
    s, left, right = la.schmidt_decompose(v, 2, 3)
    rebuilt = sum(s[i] * np.kron(left[:, i], right[:, i]) for i in range(len(s)))
    assert np.allclose(rebuilt, v)


def test_orthonormal_span_rank_and_empty():
    a = np.array([[1, 1], [0, 0], [0, 0]], dtype=complex)
    q = la.orthonormal_span(a)
    assert q.shape == (3, 1)
    assert la.orthonormal_span([]).size == 0


def test_psd_sqrt_and_inverse_sqrt():
    rng = np.random.default_rng(5)
    g = rand_c(rng, 4, 4)
    p = g @ g.conj().T + np.eye(4)
    r = la.psd_sqrt(p)
    assert np.allclose(r @ r, p)
    assert np.allclose(la.psd_inv_sqrt(p) @ r, np.eye(4))
    with pytest.raises(np.linalg.LinAlgError):
        la.psd_inv_sqrt(-np.eye(2))


def test_conj_sandwich_left_matches_explicit_kron():
    rng = np.random.default_rng(6)
    d_s, d_c, q = 2, 5, 3
    g = rand_c(rng, d_s * d_c, d_s * d_c)
    c = g @ g.conj().T
    basis, _ = np.linalg.qr(rand_c(rng, d_c, q))
    left = np.kron(np.eye(d_s), basis.T)
    expected = left @ c @ left.conj().T
    assert np.allclose(la.conj_sandwich_left(c, d_s, basis), expected)
