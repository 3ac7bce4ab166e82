"""Recoveries built from a projective syndrome measurement: EigQER, BlockEigQER, OrderQER.

All algorithms work in a shrinking orthonormal basis ``Q`` of the not-yet-covered
part of ``H_C``. Compressing the data matrix to ``H_S (x) span(Q)*`` is the same
as deflating it with ``(I - I kron conj(P))`` on both sides, but keeps the
eigenproblems small.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .linalg import conj_sandwich_left, orthonormal_span, top_eigenpairs
from .quantum_ops import DataMatrix, QuantumChannel
from .sdp import solve_trace_sdp

RANK_THRESHOLD = 0.05
TRUNCATION = 1e-6


@dataclass(frozen=True)
class SyndromeBlock:
    """One measured subspace with its correction.

    ``basis`` (d_C x r) spans the subspace; ``kraus`` (K, d_S, d_C) are supported
    on it; ``dual`` is the subspace-optimal dual in block coordinates when known.
    ``gain`` is the deflated top eigenvalue that selected the block (EigQER only).
    """

    basis: np.ndarray
    kraus: np.ndarray
    contribution: float
    dual: np.ndarray | None = None
    form: str = "isometry"
    gain: float | None = None

    @property
    def rank(self) -> int:
        return self.basis.shape[1]


@dataclass(frozen=True)
class StructuredRecovery:
    blocks: tuple
    residual_basis: np.ndarray
    d_s: int
    d_c: int
    name: str = ""
    info: dict = field(default_factory=dict, compare=False)

    @property
    def complete(self) -> bool:
        return self.residual_basis.shape[1] == 0

    @property
    def fidelity(self) -> float:
        """Sum of recorded contributions; the residual space counts as zero."""
        return float(sum(b.contribution for b in self.blocks))

    @property
    def gains(self) -> list[float | None]:
        return [b.gain for b in self.blocks]

    @property
    def contributions(self) -> list[float]:
        return [b.contribution for b in self.blocks]

    def kraus(self, completed: bool = True) -> np.ndarray:
        ops = [k for b in self.blocks for k in b.kraus]
        if completed:
            ops.extend(_completion(self.residual_basis, self.d_s))
        return np.array(ops)

    def channel(self) -> QuantumChannel:
        return QuantumChannel(self.kraus(True), check=False)

    def partition(self) -> list[np.ndarray]:
        """Block bases covering ``H_C``; the residual space is the last block."""
        parts = [b.basis for b in self.blocks]
        if not self.complete:
            parts.append(self.residual_basis)
        return parts

    def manifest(self) -> dict:
        return {"name": self.name, "ranks": [b.rank for b in self.blocks],
                "contributions": self.contributions, "complete": self.complete,
                "residual_rank": int(self.residual_basis.shape[1])}


def _completion(basis: np.ndarray, d_s: int) -> list[np.ndarray]:
    """Kraus operators ``E_b Q_b^dag`` that make a partial recovery trace preserving."""
    out = []
    m = basis.shape[1]
    for start in range(0, m, d_s):
        qb = basis[:, start:start + d_s]
        e = np.eye(d_s, qb.shape[1], dtype=complex)
        out.append(e @ qb.conj().T)
    return out


def _complement(v: np.ndarray, m: int) -> np.ndarray:
    """Orthonormal basis of the orthogonal complement of ``span(v)`` in ``C^m``."""
    if v.shape[1] == 0:
        return np.eye(m, dtype=complex)
    u, _, _ = np.linalg.svd(v, full_matrices=True)
    return u[:, v.shape[1]:]


def _support(vec: np.ndarray, d_s: int, m: int, threshold: float):
    """Closest-isometry correction and its support for one eigenvector."""
    mat = vec.reshape(d_s, m)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    s2 = s ** 2 / max(np.sum(s ** 2), 1e-300)
    r = max(1, int(np.sum(s2 >= threshold)))
    r_red = u[:, :r] @ vh[:r]
    return r_red, vh[:r].conj().T


def _kernel(c) -> tuple[np.ndarray, int, int]:
    if isinstance(c, DataMatrix):
        return c.matrix, c.d_s, c.d_c
    raise TypeError("expected a DataMatrix")


def eigqer(kernel: DataMatrix, rank_threshold: float = RANK_THRESHOLD,
           truncation: float = TRUNCATION, max_blocks: int | None = None) -> StructuredRecovery:
    """Greedy eigenvector recovery.

    Each step takes the top eigenvector of the deflated data matrix, turns it into
    the nearest partial isometry of rank ``#{sigma^2 >= rank_threshold}`` and
    removes its support from the code space.
    """
    c, d_s, d_c = _kernel(kernel)
    q = np.eye(d_c, dtype=complex)
    cr = c
    blocks = []
    while q.shape[1] > 0 and (max_blocks is None or len(blocks) < max_blocks):
        m = q.shape[1]
        w, v = top_eigenpairs(cr, 1)
        if w[0] <= 0:
            break
        r_red, supp = _support(v[:, 0], d_s, m, rank_threshold)
        vec = r_red.reshape(-1)
        contrib = float(np.real(vec.conj() @ cr @ vec))
        if contrib < truncation:
            break
        blocks.append(SyndromeBlock(q @ supp, (r_red @ q.conj().T)[None], contrib, gain=float(w[0])))
        comp = _complement(supp, m)
        q = q @ comp
        cr = conj_sandwich_left(cr, d_s, comp) if comp.shape[1] else cr[:0, :0]
    return StructuredRecovery(tuple(blocks), q, d_s, d_c, "eigqer")


def _as_basis(p: np.ndarray) -> np.ndarray:
    p = np.asarray(p, dtype=complex)
    if p.shape[0] == p.shape[1] and np.allclose(p @ p, p, atol=1e-9) and np.allclose(p, p.conj().T, atol=1e-9):
        w, v = np.linalg.eigh(p)
        return v[:, w > 0.5]
    return p


@dataclass(frozen=True)
class ReducedSolution:
    kraus: np.ndarray  # full-space Kraus (K, d_S, d_C)
    value: float
    dual: np.ndarray  # block coordinates (r x r)
    dual_full: np.ndarray  # conj(B) Y' B^T on H_C*
    basis: np.ndarray
    gap: float


def reduced_sdp(kernel: DataMatrix, subspace: np.ndarray, tol: float = 1e-7) -> ReducedSolution:
    """Optimal recovery restricted to input subspace ``S_q``.

    ``subspace`` is an orthonormal basis (d_C x r) or a projector onto it.
    """
    c, d_s, d_c = _kernel(kernel)
    b = _as_basis(subspace)
    cq = conj_sandwich_left(c, d_s, b)
    return _solve_block(cq, d_s, b, tol)


def _solve_block(cq: np.ndarray, d_s: int, b: np.ndarray, tol: float = 1e-7) -> ReducedSolution:
    r = b.shape[1]
    res = solve_trace_sdp(cq, d_s, r, tol=tol)
    w, v = np.linalg.eigh(res.x)
    keep = w > 1e-12 * max(w[-1], 1e-300)
    ops = [np.sqrt(lam) * v[:, i].reshape(d_s, r) @ b.conj().T
           for i, lam in zip(np.flatnonzero(keep), w[keep])]
    y_full = b.conj() @ res.y @ b.T
    return ReducedSolution(np.array(ops), res.primal_value, res.y, y_full, b, res.gap)


def block_eigqer(kernel: DataMatrix, m: int = 2, rank_threshold: float = RANK_THRESHOLD,
                 truncation: float = TRUNCATION) -> StructuredRecovery:
    """Blocked variant: union the supports of the top ``m`` eigenvectors and solve the
    reduced SDP there. ``m = 1`` is EigQER itself.
    """
    if m < 1:
        raise ValueError("block size M must be at least 1")
    if m == 1:
        rec = eigqer(kernel, rank_threshold, truncation)
        return StructuredRecovery(rec.blocks, rec.residual_basis, rec.d_s, rec.d_c, "block_eigqer(1)")
    c, d_s, d_c = _kernel(kernel)
    q = np.eye(d_c, dtype=complex)
    cr = c
    blocks = []
    while q.shape[1] > 0:
        dim = q.shape[1]
        w, v = top_eigenpairs(cr, m)
        supports = [_support(v[:, i], d_s, dim, rank_threshold)[1]
                    for i in range(len(w)) if w[i] > 0]
        if not supports:
            break
        wb = orthonormal_span(np.concatenate(supports, axis=1), tol=1e-8)
        sol = _solve_block(conj_sandwich_left(cr, d_s, wb), d_s, wb)
        if sol.value < truncation:
            break
        basis = q @ wb
        kraus = np.einsum("kab,cb->kac", sol.kraus, q.conj())
        blocks.append(SyndromeBlock(basis, kraus, sol.value, sol.dual, "subspace-cptp"))
        comp = _complement(wb, dim)
        q = q @ comp
        cr = conj_sandwich_left(cr, d_s, comp) if comp.shape[1] else cr[:0, :0]
    return StructuredRecovery(tuple(blocks), q, d_s, d_c, f"block_eigqer({m})")


def damping_kraus_orders(n: int, k_single: int = 2) -> np.ndarray:
    """Number of damping factors in each Kraus index of an n-fold two-element channel."""
    idx = np.arange(k_single ** n)
    digits = (idx[:, None] // (k_single ** np.arange(n - 1, -1, -1))[None, :]) % k_single
    return np.sum(digits != 0, axis=1)


def orderqer(kernel: DataMatrix, encoded: QuantumChannel, n: int, max_order: int = 1,
             residual: str = "eigqer", truncation: float = TRUNCATION) -> StructuredRecovery:
    """Recovery on the subspaces reached by zero/one (and optionally two) dampings.

    ``encoded`` is the n-fold channel composed with the encoder, with the per-qubit
    Kraus pair ordered (no damping, damping) so that digit 1 marks a damping.
    """
    if max_order not in (1, 2):
        raise ValueError("max_order must be 1 or 2")
    if residual not in ("eigqer", "none"):
        raise ValueError("residual policy must be 'eigqer' or 'none'")
    if len(encoded) != 2 ** n:
        raise ValueError("channel lacks the two-element (no damping, damping) structure")
    c, d_s, d_c = _kernel(kernel)
    orders = damping_kraus_orders(n)
    blocks, covered = [], np.zeros((d_c, 0), dtype=complex)
    per_order = {}
    for order in range(1, max_order + 1):
        sel = (orders <= 1) if order == 1 else (orders == order)
        vecs = np.concatenate(list(encoded.kraus[sel]), axis=1)
        if covered.shape[1]:
            vecs = vecs - covered @ (covered.conj().T @ vecs)
        sub = orthonormal_span(vecs, tol=1e-9)
        if sub.shape[1] == 0:
            continue
        sol = reduced_sdp(kernel, sub)
        blocks.append(SyndromeBlock(sub, sol.kraus, sol.value, sol.dual, "subspace-cptp"))
        per_order[order] = sol.value
        covered = np.concatenate([covered, sub], axis=1)
    rest = _complement(covered, d_c)
    if residual == "eigqer" and rest.shape[1]:
        cr = conj_sandwich_left(c, d_s, rest)
        sub_rec = eigqer(DataMatrix(cr, d_s, rest.shape[1]), truncation=truncation)
        for b in sub_rec.blocks:
            blocks.append(SyndromeBlock(rest @ b.basis, np.einsum("kab,cb->kac", b.kraus, rest.conj()),
                                        b.contribution, gain=b.gain))
        per_order["residual"] = sub_rec.fidelity
        rest = rest @ sub_rec.residual_basis
    return StructuredRecovery(tuple(blocks), rest, d_s, d_c, f"orderqer({max_order})",
                              {"per_order": per_order})
