"""Dense complex linear algebra shared by every other module.

Operators are plain ``numpy`` arrays. The double-ket of an operator ``A``
(``d_out x d_in``) is its row-major flattening, so that

    vec(A)[i * d_in + j] == A[i, j]
    (M kron conj(N)) @ vec(C) == vec(M @ C @ N^dagger)
    vec(A)^dagger @ vec(B) == trace(A^dagger @ B)
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

HERMITIAN_ERROR_TOL = 1e-8


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Return ``a`` as a finite 2-D complex array."""
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def vectorize(a) -> np.ndarray:
    """Row-major double-ket of an operator."""
    return as_matrix(a).reshape(-1).copy()


def devectorize(v, d_out: int, d_in: int) -> np.ndarray:
    v = np.asarray(v, dtype=complex)
    if v.size != d_out * d_in:
        raise ValueError(f"vector of length {v.size} cannot be a {d_out}x{d_in} operator")
    return v.reshape(d_out, d_in).copy()


def partial_trace(m, dims: tuple[int, int], traced: int) -> np.ndarray:
    """Trace out factor ``traced`` (0 = first/left, 1 = second/right) of a bipartite operator.

    With the row-major double-ket, tracing the first factor of
    ``|A>><<B|`` gives ``conj(A^dagger B)`` and tracing the second gives ``A B^dagger``.
    """
    m = as_matrix(m)
    da, db = dims
    if m.shape != (da * db, da * db):
        raise ValueError(f"operator of shape {m.shape} does not match dims {dims}")
    t = m.reshape(da, db, da, db)
    if traced == 0:
        return np.einsum("ijik->jk", t)
    if traced == 1:
        return np.einsum("ijkj->ik", t)
    raise ValueError("traced must be 0 or 1")


def symmetrize(h, name: str = "matrix") -> np.ndarray:
    """Hermitian part of ``h``; raises if ``h`` is far from Hermitian."""
    h = as_matrix(h, name)
    if h.shape[0] != h.shape[1]:
        raise ValueError(f"{name} must be square, got {h.shape}")
    asym = np.linalg.norm(h - dagger(h))
    scale = max(np.linalg.norm(h), 1e-300)
    if asym > HERMITIAN_ERROR_TOL * scale and asym > 1e-14:
        raise ValueError(f"{name} is not Hermitian (relative asymmetry {asym / scale:.2e})")
    return 0.5 * (h + dagger(h))


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns aligned with eigenvalues

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ dagger(v)


def hermitian_eig(h) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending."""
    h = symmetrize(h)
    w, v = np.linalg.eigh(h)
    return SpectralDecomposition(w[::-1].copy(), v[:, ::-1].copy())


def top_eigenpairs(h: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Largest ``count`` eigenpairs of a Hermitian matrix, descending.

    Uses a subset solve when only a few pairs are needed from a large matrix.
    """
    n = h.shape[0]
    count = min(count, n)
    h = 0.5 * (h + dagger(h))
    if n > 64 and count < n // 4:
        w, v = sla.eigh(h, subset_by_index=(n - count, n - 1), driver="evr")
    else:
        w, v = np.linalg.eigh(h)
        w, v = w[n - count:], v[:, n - count:]
    return w[::-1].copy(), v[:, ::-1].copy()


def bottom_eigenpairs(h: np.ndarray, count: int) -> tuple[np.ndarray, np.ndarray]:
    """Smallest ``count`` eigenpairs of a Hermitian matrix, ascending."""
    n = h.shape[0]
    count = min(count, n)
    h = 0.5 * (h + dagger(h))
    if n > 64 and count < n // 4:
        return sla.eigh(h, subset_by_index=(0, count - 1), driver="evr")
    w, v = np.linalg.eigh(h)
    return w[:count].copy(), v[:, :count].copy()


def min_eigenvalue(h: np.ndarray) -> float:
    return float(bottom_eigenpairs(h, 1)[0][0])


def svd(a) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Full SVD ``a = U diag(s) Vdag`` with descending singular values."""
    a = as_matrix(a)
    u, s, vh = np.linalg.svd(a, full_matrices=True)
    return u, s, vh


def closest_isometry(x, rank: int) -> np.ndarray:
    """Rank-``rank`` partial isometry nearest to ``x`` in Frobenius norm.

    Keeps the leading ``rank`` singular directions of ``x`` with unit weight.
    """
    x = as_matrix(x)
    if rank < 0 or rank > min(x.shape):
        raise ValueError(f"rank {rank} exceeds min dimension {min(x.shape)}")
    u, _, vh = np.linalg.svd(x, full_matrices=False)
    return u[:, :rank] @ vh[:rank, :]


def schmidt_decompose(v, d_s: int, d_c: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Schmidt form ``v = sum_i lam_i left[:, i] kron right[:, i]``."""
    v = np.asarray(v, dtype=complex).reshape(-1)
    if v.size != d_s * d_c:
        raise ValueError(f"vector of length {v.size} is not on a {d_s}x{d_c} space")
    u, s, vh = np.linalg.svd(v.reshape(d_s, d_c), full_matrices=False)
    return s, u, vh.T


def orthonormal_span(vectors, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal basis (as columns) for the span of the given column vectors."""
    if vectors is None or len(vectors) == 0:
        return np.zeros((0, 0), dtype=complex)
    a = np.asarray(vectors, dtype=complex)
    if isinstance(vectors, (list, tuple)):
        a = np.column_stack([np.asarray(x, dtype=complex).reshape(-1) for x in vectors])
    if a.size == 0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    u, s, _ = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return np.zeros((a.shape[0], 0), dtype=complex)
    r = int(np.sum(s > tol * s[0]))
    return u[:, :r]


def psd_sqrt(h: np.ndarray) -> np.ndarray:
    """Square root of a PSD matrix with negative eigenvalues clamped to zero."""
    w, v = np.linalg.eigh(0.5 * (h + dagger(h)))
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ dagger(v)


def psd_inv_sqrt(h: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(0.5 * (h + dagger(h)))
    if w[0] <= 0:
        raise np.linalg.LinAlgError("matrix is not positive definite")
    return (v / np.sqrt(w)) @ dagger(v)


def kron_all(mats) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def conj_sandwich_left(c: np.ndarray, d_s: int, basis: np.ndarray) -> np.ndarray:
    """Compress ``c`` on ``H_S (x) H_C*`` to ``H_S (x) span(basis)*``.

    Returns ``(I kron basis^T) c (I kron conj(basis))``; a recovery ``R'`` on the
    compressed space corresponds to ``R' basis^dagger`` on the full space.
    """
    d_c, q = basis.shape
    t = c.reshape(d_s, d_c, d_s, d_c)
    t = np.einsum("ca,sctd,db->satb", basis, t, np.conj(basis), optimize=True)
    return t.reshape(d_s * q, d_s * q)
