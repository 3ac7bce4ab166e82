"""Optimal channel-adapted recovery and encoding via the recovery SDP."""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .linalg import dagger, min_eigenvalue, partial_trace
from .quantum_ops import (
    ChoiMatrix,
    DataMatrix,
    Ensemble,
    QuantumChannel,
    choi_to_kraus,
    data_matrix,
)
from .sdp import SdpConvergenceError, solve_trace_sdp

__all__ = [
    "SdpProblem", "SdpSolution", "DualCertificate", "OptimalityReport", "SdpConvergenceError",
    "solve_optimal_recovery", "recovery_from_choi", "dual_from_primal", "certificate",
    "verify_optimality", "robust_data_matrix", "encoding_kernel", "solve_optimal_encoding",
    "iterate_encoding_recovery", "write_arrays", "read_arrays", "save_solution",
]


@dataclass(frozen=True)
class SdpProblem:
    kernel: DataMatrix

    def __post_init__(self):
        c = self.kernel.matrix
        n = self.kernel.d_s * self.kernel.d_c
        if c.shape != (n, n):
            raise ValueError(f"kernel shape {c.shape} inconsistent with d_S*d_C = {n}")
        if min_eigenvalue(c) < -1e-9 * max(1.0, np.abs(c).max()):
            raise ValueError("kernel is not positive semidefinite")

    @property
    def d_s(self) -> int:
        return self.kernel.d_s

    @property
    def d_c(self) -> int:
        return self.kernel.d_c


@dataclass(frozen=True)
class SdpSolution:
    x: ChoiMatrix
    y: np.ndarray
    primal_value: float
    dual_value: float
    iterations: int

    @property
    def gap(self) -> float:
        return self.dual_value - self.primal_value

    def recovery(self) -> QuantumChannel:
        return recovery_from_choi(self.x)


@dataclass(frozen=True)
class DualCertificate:
    """Dual point ``Y`` with bound ``tr Y``; valid when ``I kron Y - C`` is PSD to within 1e-7."""

    y: np.ndarray
    bound: float
    residual: float
    asymmetry: float = 0.0
    info: dict = field(default_factory=dict, compare=False)

    @property
    def valid(self) -> bool:
        return self.residual <= 1e-7


def _as_kernel(problem) -> DataMatrix:
    return problem.kernel if isinstance(problem, SdpProblem) else problem


def certificate(y: np.ndarray, kernel: DataMatrix, **info) -> DualCertificate:
    """Evaluate a candidate dual point against ``kernel``."""
    y = np.asarray(y, dtype=complex)
    asym = float(np.linalg.norm(y - dagger(y)))
    yh = 0.5 * (y + dagger(y))
    z = np.kron(np.eye(kernel.d_s), yh) - kernel.matrix
    lam = min_eigenvalue(z)
    return DualCertificate(yh, float(np.real(np.trace(yh))), max(0.0, -lam), asym, dict(info))


def solve_optimal_recovery(problem, tol: float = 1e-7, max_iter: int = 100) -> SdpSolution:
    """Maximize ``tr(X C)`` over recovery Choi matrices; returns a primal-dual pair."""
    kernel = _as_kernel(problem)
    res = solve_trace_sdp(kernel.matrix, kernel.d_s, kernel.d_c, tol=tol, max_iter=max_iter)
    x = ChoiMatrix(res.x, kernel.d_c, kernel.d_s)
    return SdpSolution(x, res.y, res.primal_value, res.dual_value, res.iterations)


def recovery_from_choi(x, d_s: int | None = None, d_c: int | None = None,
                       tol: float = 1e-6) -> QuantumChannel:
    """Kraus decoding map ``d_C -> d_S`` from a recovery Choi matrix."""
    if not isinstance(x, ChoiMatrix):
        x = ChoiMatrix(np.asarray(x, dtype=complex), d_c, d_s)
    w = np.linalg.eigvalsh(0.5 * (x.matrix + dagger(x.matrix)))
    t = partial_trace(x.matrix, (x.d_out, x.d_in), 0)
    if w[0] < -tol or np.linalg.norm(t - np.eye(x.d_in)) > tol:
        raise ValueError("Choi matrix is not a feasible recovery")
    return choi_to_kraus(x)


def dual_from_primal(recovery: QuantumChannel, channel: QuantumChannel,
                     ensemble: Ensemble | None = None, kernel: DataMatrix | None = None) -> DualCertificate:
    """Dual candidate built from a recovery: ``conj(Y) = sum p R_k^dag rho E_j^dag tr(E_j rho R_k)``.

    ``tr Y`` equals the recovery's fidelity; the point is feasible only when the
    recovery is optimal.
    """
    ens = ensemble or Ensemble.completely_mixed(channel.d_in)
    r, e = recovery.kraus, channel.kraus
    y_bar = np.zeros((channel.d_out, channel.d_out), dtype=complex)
    for rho, p in zip(ens.states, ens.probabilities):
        er = np.einsum("jcs,st->jct", e, rho)  # E_j rho
        t = np.einsum("jct,ktc->jk", er, r)  # tr(E_j rho R_k)
        # sum_jk t_jk R_k^dag rho E_j^dag = (sum_k R_k^dag ...) contracted over j
        a = np.einsum("jk,ksc->jcs", t, r.conj())  # sum_k t_jk R_k^dag, shape (j, d_c, d_s)
        y_bar += p * np.einsum("jcs,st,jdt->cd", a, rho, e.conj())
    y = np.conj(y_bar)
    kern = kernel or data_matrix(ens, channel)
    return certificate(y, kern, source="dual_from_primal")


@dataclass(frozen=True)
class OptimalityReport:
    primal_residual: float
    dual_residual: float
    duality_gap: float
    slackness: float
    tol: float

    @property
    def passed(self) -> bool:
        return max(self.primal_residual, self.dual_residual, abs(self.duality_gap),
                   self.slackness) <= self.tol


def verify_optimality(x, y: np.ndarray, kernel: DataMatrix, tol: float = 1e-6) -> OptimalityReport:
    """Feasibility of both points, strong duality and complementary slackness."""
    xm = x.matrix if isinstance(x, ChoiMatrix) else np.asarray(x, dtype=complex)
    d_s, d_c = kernel.d_s, kernel.d_c
    t = partial_trace(xm, (d_s, d_c), 0)
    p_res = max(float(np.linalg.norm(t - np.eye(d_c))), -min_eigenvalue(xm), 0.0)
    z = np.kron(np.eye(d_s), y) - kernel.matrix
    d_res = max(0.0, -min_eigenvalue(z))
    gap = float(np.real(np.trace(y))) - kernel.fidelity(xm)
    slack = float(np.linalg.norm(z @ xm))
    return OptimalityReport(p_res, d_res, gap, slack, tol)


def robust_data_matrix(samples: Sequence[tuple[float, object]], ensemble: Ensemble | None = None) -> DataMatrix:
    """Weighted kernel ``sum f(lambda) C_lambda`` from ``(weight, channel or kernel)`` pairs."""
    weights = np.array([w for w, _ in samples], dtype=float)
    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
        raise ValueError("robustness weights must be nonnegative and sum to 1")
    total = None
    for w, item in samples:
        k = item if isinstance(item, DataMatrix) else data_matrix(
            ensemble or Ensemble.completely_mixed(item.d_in), item)
        if total is None:
            total = DataMatrix(w * k.matrix, k.d_s, k.d_c)
        else:
            if (k.d_s, k.d_c) != (total.d_s, total.d_c):
                raise ValueError("kernels of different dimensions")
            total = DataMatrix(total.matrix + w * k.matrix, k.d_s, k.d_c)
    return total


def encoding_kernel(recovery: QuantumChannel, noise: QuantumChannel,
                    ensemble: Ensemble | None = None) -> DataMatrix:
    """``D = sum p |E_j^dag R_i^dag rho>><<.|`` on ``H_C (x) H_S*``.

    The returned kernel reuses ``DataMatrix`` with the roles swapped: its first
    factor (``d_s`` field) is the code space.
    """
    d_s, d_c = recovery.d_out, recovery.d_in
    if noise.d_in != d_c or noise.d_out != d_c:
        raise ValueError("noise must act on the recovery's input space")
    ens = ensemble or Ensemble.completely_mixed(d_s)
    rdag = dagger(recovery.kraus)  # (i, d_c, d_s)
    edag = dagger(noise.kraus)  # (j, d_c, d_c)
    d = np.zeros((d_c * d_s, d_c * d_s), dtype=complex)
    for rho, p in zip(ens.states, ens.probabilities):
        v = np.einsum("jab,ibs,st->jiat", edag, rdag, rho).reshape(-1, d_c * d_s)
        d += p * (v.T @ v.conj())
    return DataMatrix(0.5 * (d + dagger(d)), d_c, d_s)


@dataclass(frozen=True)
class EncodingSolution:
    kraus: np.ndarray  # (L, d_c, d_s)
    value: float
    rank: int
    solution: SdpSolution


def solve_optimal_encoding(recovery: QuantumChannel, noise: QuantumChannel,
                           ensemble: Ensemble | None = None, tol: float = 1e-7) -> EncodingSolution:
    """Best CPTP encoding ``d_S -> d_C`` for a fixed recovery and noise."""
    kern = encoding_kernel(recovery, noise, ensemble)
    sol = solve_optimal_recovery(kern, tol=tol)
    enc = choi_to_kraus(sol.x)
    w = np.linalg.eigvalsh(sol.x.matrix)
    rank = int(np.sum(w > 1e-6 * w[-1]))
    return EncodingSolution(enc.kraus, sol.primal_value, rank, sol)


@dataclass(frozen=True)
class AlternationResult:
    encoding: np.ndarray
    recovery: QuantumChannel
    trace: list

    @property
    def value(self) -> float:
        return self.trace[-1]

    @property
    def increments(self) -> np.ndarray:
        return np.diff(np.array(self.trace))


def _compose_encoding(noise: QuantumChannel, enc_kraus: np.ndarray) -> QuantumChannel:
    k = np.einsum("jab,lbs->jlas", noise.kraus, enc_kraus)
    return QuantumChannel(k.reshape(-1, noise.d_out, enc_kraus.shape[2]), check=False)


def iterate_encoding_recovery(encoder: np.ndarray, noise: QuantumChannel,
                              ensemble: Ensemble | None = None, max_rounds: int = 10,
                              tol: float = 1e-6) -> AlternationResult:
    """Alternate optimal recovery and optimal encoding SDPs from an isometric start.

    ``trace`` holds the value after every half-step; each half-step can only
    improve on the previous one, up to solver tolerance.
    """
    u = np.asarray(encoder, dtype=complex)
    if np.linalg.norm(dagger(u) @ u - np.eye(u.shape[1])) > 1e-8:
        raise ValueError("initial encoding must be an isometry")
    ens = ensemble or Ensemble.completely_mixed(u.shape[1])
    enc = u[None]
    trace: list[float] = []
    recovery = None
    for _ in range(max_rounds):
        kern = data_matrix(ens, _compose_encoding(noise, enc))
        sol = solve_optimal_recovery(kern)
        recovery = sol.recovery()
        trace.append(sol.primal_value)
        enc_sol = solve_optimal_encoding(recovery, noise, ens)
        enc = enc_sol.kraus
        trace.append(enc_sol.value)
        if len(trace) >= 3 and trace[-1] - trace[-3] < tol:
            break
    return AlternationResult(enc, recovery, trace)


# ---------------------------------------------------------------- binary serialization

_MAGIC = b"QERKIT01"


def write_arrays(path, arrays: dict, summary: dict | None = None) -> None:
    """Write named complex arrays (little-endian f64 pairs, row-major) plus a JSON summary.

    Layout: magic, array count, then per array the name length, UTF-8 name,
    rank, dimensions as uint64 and the raw data.
    """
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<I", len(arrays)))
        for name, arr in arrays.items():
            a = np.ascontiguousarray(np.asarray(arr, dtype="<c16"))
            raw = name.encode("utf-8")
            fh.write(struct.pack("<I", len(raw)))
            fh.write(raw)
            fh.write(struct.pack("<I", a.ndim))
            fh.write(struct.pack(f"<{a.ndim}Q", *a.shape))
            fh.write(a.tobytes(order="C"))
    if summary is not None:
        with open(path.with_suffix(path.suffix + ".json"), "w", newline="\n") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")


def read_arrays(path) -> dict:
    with open(path, "rb") as fh:
        if fh.read(len(_MAGIC)) != _MAGIC:
            raise ValueError("not a qerkit array file")
        (count,) = struct.unpack("<I", fh.read(4))
        out = {}
        for _ in range(count):
            (ln,) = struct.unpack("<I", fh.read(4))
            name = fh.read(ln).decode("utf-8")
            (ndim,) = struct.unpack("<I", fh.read(4))
            shape = struct.unpack(f"<{ndim}Q", fh.read(8 * ndim))
            size = int(np.prod(shape)) if ndim else 1
            out[name] = np.frombuffer(fh.read(16 * size), dtype="<c16").reshape(shape).copy()
    return out


def save_solution(path, sol: SdpSolution, kernel: DataMatrix | None = None) -> None:
    summary = {"primal_value": sol.primal_value, "dual_value": sol.dual_value,
               "gap": sol.gap, "iterations": sol.iterations,
               "d_s": sol.x.d_out, "d_c": sol.x.d_in}
    if kernel is not None:
        rep = verify_optimality(sol.x, sol.y, kernel)
        summary.update(primal_residual=rep.primal_residual, dual_residual=rep.dual_residual,
                       slackness=rep.slackness)
    write_arrays(path, {"X": sol.x.matrix, "Y": sol.y}, summary)
