"""States, channels, fidelity measures and the recovery data matrix."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce
from typing import Sequence

import numpy as np

from .linalg import (
    as_matrix,
    dagger,
    devectorize,
    hermitian_eig,
    partial_trace,
    psd_sqrt,
    symmetrize,
    vectorize,
)

CPTP_TOL = 1e-8
PSD_TOL = 1e-9
STATE_TOL = 1e-10


def density_matrix(rho, tol: float = STATE_TOL) -> np.ndarray:
    """Validate and return a density matrix (Hermitian, unit trace, PSD)."""
    rho = as_matrix(rho, "state")
    if rho.shape[0] != rho.shape[1]:
        raise ValueError("state must be square")
    if np.linalg.norm(rho - dagger(rho)) > tol * max(1.0, np.linalg.norm(rho)):
        raise ValueError("state is not Hermitian")
    rho = 0.5 * (rho + dagger(rho))
    if abs(np.trace(rho).real - 1.0) > tol:
        raise ValueError(f"state trace {np.trace(rho).real} != 1")
    if np.linalg.eigvalsh(rho)[0] < -tol:
        raise ValueError("state is not positive semidefinite")
    return rho


def pure_state(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def maximally_mixed(d: int) -> np.ndarray:
    return np.eye(d, dtype=complex) / d


@dataclass(frozen=True)
class QuantumChannel:
    """CPTP map ``rho -> sum_k A_k rho A_k^dagger`` stored as a Kraus stack ``(K, d_out, d_in)``."""

    kraus: np.ndarray
    check: bool = field(default=True, repr=False, compare=False)

    def __post_init__(self):
        k = np.asarray(self.kraus, dtype=complex)
        if k.ndim == 2:
            k = k[None]
        if k.ndim != 3 or k.shape[0] == 0:
            raise ValueError("Kraus operators must form a non-empty (K, d_out, d_in) stack")
        if not np.all(np.isfinite(k)):
            raise ValueError("Kraus operators have non-finite entries")
        object.__setattr__(self, "kraus", k)
        if self.check:
            res = self.cptp_residual()
            if res > CPTP_TOL:
                raise ValueError(f"Kraus set is not trace preserving (residual {res:.2e})")

    @property
    def d_in(self) -> int:
        return self.kraus.shape[2]

    @property
    def d_out(self) -> int:
        return self.kraus.shape[1]

    def __len__(self) -> int:
        return self.kraus.shape[0]

    def cptp_residual(self) -> float:
        s = np.einsum("kij,kil->jl", self.kraus.conj(), self.kraus)
        return float(np.linalg.norm(s - np.eye(self.d_in)))


def identity_channel(d: int) -> QuantumChannel:
    return QuantumChannel(np.eye(d, dtype=complex)[None])


def unitary_channel(u) -> QuantumChannel:
    return QuantumChannel(as_matrix(u)[None])


@dataclass(frozen=True)
class ChoiMatrix:
    """``X = sum_k |A_k>><<A_k|`` on ``H_out (x) H_in*``."""

    matrix: np.ndarray
    d_in: int
    d_out: int

    def validate(self, tol: float = CPTP_TOL) -> None:
        if np.linalg.eigvalsh(0.5 * (self.matrix + dagger(self.matrix)))[0] < -PSD_TOL:
            raise ValueError("Choi matrix is not positive semidefinite")
        t = partial_trace(self.matrix, (self.d_out, self.d_in), 0)
        if np.linalg.norm(t - np.eye(self.d_in)) > tol:
            raise ValueError("Choi matrix partial trace is not the identity")


def kraus_to_choi(ch: QuantumChannel) -> ChoiMatrix:
    v = ch.kraus.reshape(len(ch), -1)
    return ChoiMatrix(v.T @ v.conj(), ch.d_in, ch.d_out)


def choi_to_kraus(x: ChoiMatrix, tol: float = 1e-12) -> QuantumChannel:
    """Kraus set from the spectral decomposition of a Choi matrix.

    Eigenvalues at or below ``tol`` (relative to the largest) are dropped.
    """
    dec = hermitian_eig(x.matrix)
    w = dec.eigenvalues
    if w[-1] < -1e-6:
        raise ValueError(f"Choi matrix has eigenvalue {w[-1]:.2e}; not a channel")
    keep = w > tol * max(w[0], 1e-300)
    ops = [np.sqrt(lam) * devectorize(dec.eigenvectors[:, i], x.d_out, x.d_in)
           for i, lam in zip(np.flatnonzero(keep), w[keep])]
    return QuantumChannel(np.array(ops), check=False)


def apply(ch: QuantumChannel, rho) -> np.ndarray:
    rho = as_matrix(rho, "state")
    if rho.shape != (ch.d_in, ch.d_in):
        raise ValueError(f"state of shape {rho.shape} does not match channel input {ch.d_in}")
    return np.einsum("kij,jl,kml->im", ch.kraus, rho, ch.kraus.conj())


def compose(second: QuantumChannel, first: QuantumChannel) -> QuantumChannel:
    """Channel ``second o first`` with Kraus set ``{B_i A_j}``."""
    if second.d_in != first.d_out:
        raise ValueError("channel dimensions do not compose")
    ops = np.einsum("iab,jbc->ijac", second.kraus, first.kraus)
    return QuantumChannel(ops.reshape(-1, second.d_out, first.d_in), check=False)


def tensor(channels: Sequence[QuantumChannel]) -> QuantumChannel:
    """Tensor product channel; Kraus products ordered lexicographically by factor index."""
    if not channels:
        raise ValueError("need at least one channel")

    def pair(a: np.ndarray, b: np.ndarray) -> np.ndarray:
        k = np.einsum("iab,jcd->ijacbd", a, b)
        return k.reshape(a.shape[0] * b.shape[0], a.shape[1] * b.shape[1], a.shape[2] * b.shape[2])

    ops = reduce(pair, [c.kraus for c in channels])
    return QuantumChannel(ops, check=False)


def state_fidelity(rho1, rho2) -> float:
    """Uhlmann fidelity ``(tr sqrt(sqrt(rho1) rho2 sqrt(rho1)))^2``."""
    rho1, rho2 = density_matrix(rho1, 1e-8), density_matrix(rho2, 1e-8)
    if rho1.shape != rho2.shape:
        raise ValueError("states have different dimensions")
    s = psd_sqrt(rho1)
    w = np.linalg.eigvalsh(s @ rho2 @ s)
    return float(np.sum(np.sqrt(np.clip(w, 0.0, None))) ** 2)


def entanglement_fidelity(rho, ch: QuantumChannel) -> float:
    """``sum_i |tr(rho A_i)|^2``."""
    rho = as_matrix(rho, "state")
    if ch.d_in != ch.d_out or rho.shape != (ch.d_in, ch.d_in):
        raise ValueError("entanglement fidelity needs a square channel on the state's space")
    t = np.einsum("ij,kji->k", rho, ch.kraus)
    return float(np.sum(np.abs(t) ** 2))


@dataclass(frozen=True)
class Ensemble:
    states: tuple
    probabilities: tuple

    def __post_init__(self):
        states = tuple(density_matrix(s) for s in self.states)
        p = tuple(float(x) for x in self.probabilities)
        if len(states) != len(p) or not states:
            raise ValueError("ensemble needs matching, non-empty states and probabilities")
        if any(x < 0 for x in p) or abs(sum(p) - 1.0) > 1e-12:
            raise ValueError("ensemble probabilities must be nonnegative and sum to 1")
        if len({s.shape for s in states}) != 1:
            raise ValueError("ensemble states have different dimensions")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "probabilities", p)

    @property
    def dim(self) -> int:
        return self.states[0].shape[0]

    @classmethod
    def completely_mixed(cls, d: int) -> "Ensemble":
        return cls((maximally_mixed(d),), (1.0,))

    def average_state(self) -> np.ndarray:
        return sum(p * s for p, s in zip(self.probabilities, self.states))


def average_entanglement_fidelity(ens: Ensemble, ch: QuantumChannel) -> float:
    return float(sum(p * entanglement_fidelity(s, ch) for s, p in zip(ens.states, ens.probabilities)))


def ensemble_average_fidelity(ens: Ensemble, ch: QuantumChannel, tol: float = 1e-9) -> float:
    total = 0.0
    for rho, p in zip(ens.states, ens.probabilities):
        w, v = np.linalg.eigh(rho)
        if w[-2:-1].size and w[-2] > tol:
            raise ValueError("ensemble average fidelity needs pure states")
        psi = v[:, -1]
        total += p * float(np.real(psi.conj() @ apply(ch, rho) @ psi))
    return total


def minimum_fidelity_estimate(ch: QuantumChannel, samples: int = 512, refine_steps: int = 200,
                              seed: int = 0) -> float:
    """Upper estimate of the minimum pure-state fidelity of a square channel.

    Haar-random starts are followed by Nelder-Mead refinement from the worst few.
    """
    from scipy.optimize import minimize

    if ch.d_in != ch.d_out:
        raise ValueError("minimum fidelity needs a square channel")
    d = ch.d_in
    rng = np.random.default_rng(seed)

    def fid(psi: np.ndarray) -> float:
        psi = psi / np.linalg.norm(psi)
        out = apply(ch, np.outer(psi, psi.conj()))
        return float(np.real(psi.conj() @ out @ psi))

    starts = rng.normal(size=(samples, d)) + 1j * rng.normal(size=(samples, d))
    for i in range(d):
        basis = np.zeros(d, dtype=complex)
        basis[i] = 1.0
        starts = np.vstack([starts, basis])
    vals = np.array([fid(s) for s in starts])
    best = float(vals.min())
    for idx in np.argsort(vals)[:4]:
        x0 = np.concatenate([starts[idx].real, starts[idx].imag])
        res = minimize(lambda x: fid(x[:d] + 1j * x[d:]), x0, method="Nelder-Mead",
                       options={"maxiter": refine_steps, "xatol": 1e-10, "fatol": 1e-12})
        best = min(best, float(res.fun))
    return best


@dataclass(frozen=True)
class DataMatrix:
    """Objective kernel ``C`` on ``H_S (x) H_C*`` with ``tr(X_R C)`` = average entanglement fidelity."""

    matrix: np.ndarray
    d_s: int
    d_c: int

    def fidelity(self, recovery_choi: np.ndarray) -> float:
        return float(np.real(np.sum(recovery_choi.T * self.matrix)))

    def fidelity_of_kraus(self, kraus: np.ndarray) -> float:
        """``sum_k <<R_k|C|R_k>>`` for a Kraus stack ``(K, d_s, d_c)``."""
        v = np.asarray(kraus, dtype=complex).reshape(len(kraus), -1)
        return float(np.real(np.einsum("ki,ij,kj->", v.conj(), self.matrix, v)))


def data_matrix(ens: Ensemble, channel: QuantumChannel) -> DataMatrix:
    """``C = sum_jk p_k |rho_k E_j^dagger>><<rho_k E_j^dagger|`` for an encoded channel ``d_S -> d_C``."""
    if channel.d_in != ens.dim:
        raise ValueError(f"ensemble dimension {ens.dim} does not match channel input {channel.d_in}")
    d_s, d_c = channel.d_in, channel.d_out
    edag = dagger(channel.kraus)  # (K, d_s, d_c)
    c = np.zeros((d_s * d_c, d_s * d_c), dtype=complex)
    for rho, p in zip(ens.states, ens.probabilities):
        v = np.einsum("ab,kbc->kac", rho, edag).reshape(len(channel), -1)
        c += p * (v.T @ v.conj())
    c = 0.5 * (c + dagger(c))
    return DataMatrix(c, d_s, d_c)


def channel_data_matrix(channel: QuantumChannel, ensemble: Ensemble | None = None) -> DataMatrix:
    ens = ensemble or Ensemble.completely_mixed(channel.d_in)
    return data_matrix(ens, channel)


def encode(channel: QuantumChannel, encoder: np.ndarray) -> QuantumChannel:
    """Composite channel ``E' o U_C`` with Kraus ``{E_j U_C}``."""
    u = as_matrix(encoder, "encoder")
    return QuantumChannel(np.einsum("kab,bc->kac", channel.kraus, u), check=False)


def recovered_fidelity(recovery: QuantumChannel, channel: QuantumChannel,
                       ensemble: Ensemble | None = None) -> float:
    """Average entanglement fidelity of ``recovery o channel`` evaluated along the Kraus path."""
    ens = ensemble or Ensemble.completely_mixed(channel.d_in)
    total = 0.0
    for rho, p in zip(ens.states, ens.probabilities):
        # tr(R_i E_j rho) for all pairs, without forming the composed Kraus list
        er = np.einsum("jbc,ca->jba", channel.kraus, rho)
        t = np.einsum("iab,jba->ij", recovery.kraus, er, optimize=True)
        total += p * float(np.sum(np.abs(t) ** 2))
    return total


def random_channel(d_in: int, d_out: int, n_kraus: int, rng: np.random.Generator) -> QuantumChannel:
    """Random CPTP map from a Haar-like isometry ``d_in -> d_out * n_kraus``."""
    if d_out * n_kraus < d_in:
        raise ValueError(f"need d_out * n_kraus >= d_in, got {d_out} * {n_kraus} < {d_in}")
    g = rng.normal(size=(d_out * n_kraus, d_in)) + 1j * rng.normal(size=(d_out * n_kraus, d_in))
    q, _ = np.linalg.qr(g)
    return QuantumChannel(q.reshape(n_kraus, d_out, d_in), check=False)


def random_density_matrix(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    r = rank or d
    g = rng.normal(size=(d, r)) + 1j * rng.normal(size=(d, r))
    rho = g @ dagger(g)
    return rho / np.trace(rho).real


def choi_distance(a: QuantumChannel, b: QuantumChannel) -> float:
    return float(np.linalg.norm(kraus_to_choi(a).matrix - kraus_to_choi(b).matrix))


__all__ = [
    "QuantumChannel", "ChoiMatrix", "Ensemble", "DataMatrix", "density_matrix", "pure_state",
    "maximally_mixed", "identity_channel", "unitary_channel", "kraus_to_choi", "choi_to_kraus",
    "apply", "compose", "tensor", "state_fidelity", "entanglement_fidelity",
    "average_entanglement_fidelity", "ensemble_average_fidelity", "minimum_fidelity_estimate",
    "data_matrix", "channel_data_matrix", "encode", "recovered_fidelity", "random_channel",
    "random_density_matrix", "choi_distance", "vectorize", "symmetrize",
]
