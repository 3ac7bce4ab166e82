"""Certified upper bounds on recovery fidelity from dual feasible points."""

from __future__ import annotations

import time
from typing import Sequence

import numpy as np

from .linalg import bottom_eigenpairs, conj_sandwich_left, min_eigenvalue, top_eigenpairs
from .optimal import DualCertificate, certificate
from .quantum_ops import DataMatrix
from .sdp import MAX_PRODUCT_DIM, MAX_SCHUR_DIM, SdpConvergenceError, solve_trace_sdp

TIE_TOL = 1e-12


class DualRepairError(RuntimeError):
    def __init__(self, message: str, y: np.ndarray):
        super().__init__(message)
        self.y = y


def is_dual_feasible(y: np.ndarray, kernel: DataMatrix, tol: float = 1e-7) -> tuple[bool, float]:
    """``(I kron Y - C >= -tol, lambda_min)``."""
    y = np.asarray(y, dtype=complex)
    if y.shape != (kernel.d_c, kernel.d_c):
        raise ValueError(f"dual point of shape {y.shape} does not act on a {kernel.d_c}-dim space")
    lam = min_eigenvalue(np.kron(np.eye(kernel.d_s), y) - kernel.matrix)
    return lam >= -tol, lam


def _check_partition(parts: Sequence[np.ndarray], d_c: int) -> None:
    basis = np.concatenate(parts, axis=1)
    if basis.shape[1] != d_c or np.linalg.norm(basis.conj().T @ basis - np.eye(d_c)) > 1e-8:
        raise ValueError("partition is not a complete orthonormal decomposition of the code space")


def _partition_bases(partition) -> list[np.ndarray]:
    if hasattr(partition, "partition"):
        return partition.partition()
    if hasattr(partition, "bases"):
        return list(partition.bases)
    return [np.asarray(p, dtype=complex) for p in partition]


def _weighted_dual(parts, weights) -> np.ndarray:
    return sum(w * (b.conj() @ b.T) for w, b in zip(weights, parts))


def gersgorin_bound(kernel: DataMatrix, partition) -> DualCertificate:
    """Dual point ``sum_q w_q conj(P_q)`` with ``w_q`` the largest absolute row sum in block q.

    Rows are taken in a block-aligned basis that diagonalizes each diagonal block
    of ``C``, so the within-block Gershgorin radii vanish.
    """
    parts = _partition_bases(partition)
    d_s, d_c = kernel.d_s, kernel.d_c
    _check_partition(parts, d_c)
    cols = []
    for b in parts:
        cq = conj_sandwich_left(kernel.matrix, d_s, b)
        _, v = np.linalg.eigh(cq)
        lift = np.einsum("cb,sbk->sck", b.conj(), v.reshape(d_s, b.shape[1], -1))
        cols.append(lift.reshape(d_s * d_c, -1))
    t = np.concatenate(cols, axis=1)
    rows = np.sum(np.abs(t.conj().T @ kernel.matrix @ t), axis=1)
    weights, start = [], 0
    for b in parts:
        size = d_s * b.shape[1]
        weights.append(float(np.max(rows[start:start + size])))
        start += size
    return certificate(_weighted_dual(parts, weights), kernel, source="gersgorin", weights=weights)


def svd_dual_point(kernel: DataMatrix, partition) -> DualCertificate:
    """Dual candidate with ``w_q = sigma_max((I kron conj(P_q)) C)``; not always feasible."""
    parts = _partition_bases(partition)
    d_s, d_c = kernel.d_s, kernel.d_c
    _check_partition(parts, d_c)
    c4 = kernel.matrix.reshape(d_s, d_c, d_s * d_c)
    weights = []
    for b in parts:
        rows = np.einsum("cb,scj->sbj", b, c4).reshape(-1, d_s * d_c)
        weights.append(float(np.linalg.norm(rows, 2)))
    return certificate(_weighted_dual(parts, weights), kernel, source="svd", weights=weights)


def lambda_max_init(kernel: DataMatrix, partition) -> np.ndarray:
    """``Y0 = sum_q lambda_max((C)_qq) conj(P_q)``."""
    parts = _partition_bases(partition)
    weights = [float(top_eigenpairs(conj_sandwich_left(kernel.matrix, kernel.d_s, b), 1)[0][0])
               for b in parts]
    return _weighted_dual(parts, weights)


def _most_negative(z: np.ndarray, d_s: int, d_c: int):
    w, v = bottom_eigenpairs(z, 2) if z.shape[0] > 1 else np.linalg.eigh(z)
    best = 0
    if len(w) > 1 and abs(w[1] - w[0]) <= TIE_TOL:
        s = [np.linalg.svd(v[:, i].reshape(d_s, d_c), compute_uv=False)[0] for i in (0, 1)]
        best = int(np.argmax(s))
    return float(w[best]), v[:, best]


def _repair(y: np.ndarray, c: np.ndarray, d_s: int, tol: float, max_iters: int, log: dict | None = None):
    """Rank-one dual updates until ``I kron Y - C >= -tol``; works in any coordinates."""
    d_c = y.shape[0]
    ident = np.eye(d_s)
    for it in range(max_iters + 1):
        z = np.kron(ident, y) - c
        lam, x = _most_negative(z, d_s, d_c)
        if log is not None:
            log.setdefault("lambda_min", []).append(lam)
            log.setdefault("trace", []).append(float(np.real(np.trace(y))))
            log.setdefault("negatives", []).append(int(np.sum(np.linalg.eigvalsh(z) < -tol)))
        if lam >= -tol:
            return y, it
        _, s, vh = np.linalg.svd(x.reshape(d_s, d_c), full_matrices=False)
        xt = vh[0]
        y = y + (abs(lam) / s[0] ** 2) * np.outer(xt, xt.conj())
        y = 0.5 * (y + y.conj().T)
        if log is not None:
            # <<x| I kron Y' - C |x>> after the update
            log.setdefault("contract", []).append(float(np.real(x.conj() @ (np.kron(ident, y) - c) @ x)))
    raise DualRepairError(f"dual repair did not finish in {max_iters} updates", y)


def iterative_dual(y0: np.ndarray, kernel: DataMatrix, tol: float = 1e-10,
                   max_iters: int | None = None) -> DualCertificate:
    """Make ``y0`` dual feasible by repeatedly lifting the most negative direction of ``Z``."""
    d_s, d_c = kernel.d_s, kernel.d_c
    max_iters = 4 * d_s * d_c if max_iters is None else max_iters
    y0 = np.asarray(y0, dtype=complex)
    log: dict = {}
    y, iters = _repair(0.5 * (y0 + y0.conj().T), kernel.matrix, d_s, tol, max_iters, log)
    return certificate(y, kernel, source="iterative", iterations=iters, log=log)


def subspace_dual(kernel: DataMatrix, basis: np.ndarray) -> np.ndarray:
    """Optimal dual of the reduced SDP on one block, in block coordinates.

    Blocks too large for the dense solver fall back to ``lambda_max((C)_qq) I``.
    """
    cq = conj_sandwich_left(kernel.matrix, kernel.d_s, basis)
    r = basis.shape[1]
    if kernel.d_s * r <= MAX_PRODUCT_DIM and r * r <= MAX_SCHUR_DIM:
        try:
            return solve_trace_sdp(cq, kernel.d_s, r).y
        except SdpConvergenceError as err:
            return err.y
    lam = float(top_eigenpairs(cq, 1)[0][0])
    return max(lam, 0.0) * np.eye(r, dtype=complex)


def block_dual_init(blocks: Sequence[tuple[np.ndarray, np.ndarray]]) -> np.ndarray:
    """Block-diagonal ``Y0 = sum_q conj(B_q) Y_q B_q^T`` from ``(basis, dual)`` pairs."""
    return sum(b.conj() @ y @ b.T for b, y in blocks)


def _blocks_from(kernel: DataMatrix, source) -> list[tuple[np.ndarray, np.ndarray]]:
    if hasattr(source, "blocks") and hasattr(source, "residual_basis"):
        out = []
        for blk in source.blocks:
            y = blk.dual if blk.dual is not None else subspace_dual(kernel, blk.basis)
            out.append((blk.basis, y))
        if not source.complete:
            out.append((source.residual_basis, subspace_dual(kernel, source.residual_basis)))
        return out
    out = []
    for item in source:
        if isinstance(item, tuple):
            out.append(item)
        else:
            out.append((item, subspace_dual(kernel, item)))
    return out


def iterated_block_dual(kernel: DataMatrix, source, tol: float = 1e-10,
                        max_iters: int | None = None) -> DualCertificate:
    """Block-diagonal subspace duals repaired on merged blocks, then on the full space.

    ``source`` is a StructuredRecovery or a list of bases / ``(basis, dual)`` pairs
    forming a complete partition. Adjacent groups are merged pairwise and repaired
    in their compressed coordinates until one group remains.
    """
    d_s, d_c = kernel.d_s, kernel.d_c
    blocks = _blocks_from(kernel, source)
    _check_partition([b for b, _ in blocks], d_c)
    t0 = time.perf_counter()
    y = block_dual_init(blocks)
    groups = [b for b, _ in blocks]
    updates, rounds = 0, 0
    while len(groups) > 1:
        merged = []
        for i in range(0, len(groups), 2):
            if i + 1 == len(groups):
                merged.append(groups[i])
                continue
            u = np.concatenate([groups[i], groups[i + 1]], axis=1)
            if u.shape[1] < d_c:
                cu = conj_sandwich_left(kernel.matrix, d_s, u)
                yu = u.T @ y @ u.conj()
                yu_new, it = _repair(yu, cu, d_s, tol, 4 * d_s * u.shape[1])
                y = y + u.conj() @ (yu_new - yu) @ u.T
                updates += it
            merged.append(u)
        groups = merged
        rounds += 1
    max_iters = 4 * d_s * d_c if max_iters is None else max_iters
    y, it = _repair(0.5 * (y + y.conj().T), kernel.matrix, d_s, tol, max_iters)
    updates += it
    return certificate(y, kernel, source="iterated_block", updates=updates, rounds=rounds,
                       seconds=time.perf_counter() - t0)
