"""Single-qubit noise models and their n-qubit tensor extensions."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .quantum_ops import QuantumChannel, tensor

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}

MAX_QUBITS = 12


def amplitude_damping(gamma: float) -> QuantumChannel:
    """Kraus ``E0 = diag(1, sqrt(1-g))`` (no decay) and ``E1 = sqrt(g)|0><1|`` (decay)."""
    if not 0.0 <= gamma <= 1.0:
        raise ValueError(f"damping probability {gamma} outside [0, 1]")
    e0 = np.diag([1.0, np.sqrt(1.0 - gamma)]).astype(complex)
    e1 = np.array([[0.0, np.sqrt(gamma)], [0.0, 0.0]], dtype=complex)
    return QuantumChannel(np.array([e0, e1]))


def pure_state_rotation(theta: float, phi: float) -> QuantumChannel:
    """Channel that maps ``|+-theta/2>`` to ``|+-(theta-phi)/2>`` (angles in the xz-plane).

    Kraus operators are two rank-one maps and one diagonal map; the scale factors
    are fixed by the diagonal of the completeness relation and the full relation
    is checked afterwards.
    """
    if not (0.0 < phi <= theta < np.pi):
        raise ValueError(f"need 0 < phi <= theta < pi, got theta={theta}, phi={phi}")
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    cp, sp = np.cos((theta - phi) / 2), np.sin((theta - phi) / 2)
    plus = np.array([[cp * s, cp * c], [sp * s, sp * c]], dtype=complex)
    minus = np.array([[cp * s, -cp * c], [-sp * s, sp * c]], dtype=complex)
    diag = np.diag([cp / c, sp / s]).astype(complex)
    # diag(sum E^dag E) = 1 is linear in (alpha^2, beta^2)
    a = np.array([[2 * s * s, (cp / c) ** 2], [2 * c * c, (sp / s) ** 2]])
    a2, b2 = np.linalg.solve(a, np.ones(2))
    if a2 < -1e-12 or b2 < -1e-12:
        raise ValueError("no nonnegative scale factors satisfy the completeness relation")
    alpha, beta = np.sqrt(max(a2, 0.0)), np.sqrt(max(b2, 0.0))
    kraus = np.array([alpha * plus, alpha * minus, beta * diag])
    res = np.linalg.norm(np.einsum("kij,kil->jl", kraus.conj(), kraus) - np.eye(2))
    if res > 1e-9:
        raise ValueError(f"pure-state rotation Kraus set fails completeness ({res:.2e})")
    return QuantumChannel(kraus)


def xz_state(angle: float) -> np.ndarray:
    """``cos(angle)|0> + sin(angle)|1>``."""
    return np.array([np.cos(angle), np.sin(angle)], dtype=complex)


def pauli_matrix(label: str) -> np.ndarray:
    out = np.ones((1, 1), dtype=complex)
    for ch in label.upper():
        if ch not in PAULI:
            raise ValueError(f"bad Pauli label {label!r}")
        out = np.kron(out, PAULI[ch])
    return out


def pauli_channel(terms) -> QuantumChannel:
    """Channel ``rho -> sum_i p_i e_i rho e_i`` from ``(label, probability)`` pairs."""
    terms = list(terms.items()) if isinstance(terms, dict) else list(terms)
    if not terms:
        raise ValueError("empty Pauli channel")
    probs = np.array([p for _, p in terms], dtype=float)
    if np.any(probs < 0):
        raise ValueError("negative Pauli probability")
    if abs(probs.sum() - 1.0) > 1e-12:
        raise ValueError(f"Pauli probabilities sum to {probs.sum()}, not 1")
    n = {len(label) for label, _ in terms}
    if len(n) != 1:
        raise ValueError("Pauli labels have different lengths")
    kraus = [np.sqrt(p) * pauli_matrix(label) for label, p in terms if p > 0]
    return QuantumChannel(np.array(kraus))


def depolarizing(p: float) -> QuantumChannel:
    """``(1 - 3p) rho + p (X rho X + Y rho Y + Z rho Z)``."""
    if not 0.0 <= p <= 1.0 / 3.0:
        raise ValueError(f"depolarizing parameter {p} outside [0, 1/3]")
    return pauli_channel([("I", 1 - 3 * p), ("X", p), ("Y", p), ("Z", p)])


def independent_pauli_terms(single: dict, n: int) -> list[tuple[str, float]]:
    """Product distribution over n qubits from a single-qubit Pauli distribution."""
    out = []
    for combo in itertools.product(single.items(), repeat=n):
        label = "".join(k for k, _ in combo)
        prob = float(np.prod([p for _, p in combo]))
        out.append((label, prob))
    return out


def n_fold(ch: QuantumChannel, n: int) -> QuantumChannel:
    """``ch`` applied independently to ``n`` qubits (qubit 1 is the leftmost factor)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if n > MAX_QUBITS:
        raise ValueError(f"{n} qubits exceeds the dense-storage guard of {MAX_QUBITS}")
    return tensor([ch] * n)


@dataclass(frozen=True)
class ChannelSpec:
    """Parsable description of a per-qubit noise model."""

    kind: str
    params: dict = field(default_factory=dict)
    qubits: int = 1

    KINDS = ("amplitude_damping", "pure_state_rotation", "depolarizing", "pauli")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")

    @property
    def noise_key(self) -> str:
        return {"amplitude_damping": "gamma", "pure_state_rotation": "phi",
                "depolarizing": "p", "pauli": "scale"}[self.kind]

    def valid_range(self) -> tuple[float, float]:
        if self.kind == "amplitude_damping":
            return 0.0, 1.0
        if self.kind == "pure_state_rotation":
            return 0.0, float(self.params["theta"])
        if self.kind == "depolarizing":
            return 0.0, 1.0 / 3.0
        return 0.0, 1.0

    def single(self, noise: float) -> QuantumChannel:
        if self.kind == "amplitude_damping":
            return amplitude_damping(noise)
        if self.kind == "pure_state_rotation":
            return pure_state_rotation(float(self.params["theta"]), noise)
        if self.kind == "depolarizing":
            return depolarizing(noise)
        weights = dict(self.params["weights"])
        total = sum(weights.values())
        terms = [(k, noise * w / total) for k, w in weights.items() if k != "I"]
        terms.append(("I", 1.0 - noise))
        return pauli_channel(terms)

    def build(self, noise: float) -> QuantumChannel:
        return n_fold(self.single(noise), self.qubits)

    @classmethod
    def from_dict(cls, d: dict, qubits: int = 1) -> "ChannelSpec":
        d = dict(d)
        kind = d.pop("kind")
        return cls(kind, d, int(d.pop("qubits", qubits)))


def encoded_n_fold(ch: QuantumChannel, n: int, encoder: np.ndarray) -> QuantumChannel:
    """Kraus set of ``ch^{(x) n} o U_C`` built without forming the n-qubit operators.

    Kraus ordering matches ``encode(n_fold(ch, n), encoder)``.
    """
    u = np.asarray(encoder, dtype=complex)
    d = ch.d_in
    if u.shape[0] != d ** n:
        raise ValueError(f"encoder has {u.shape[0]} rows, expected {d ** n}")
    t = u.reshape((1,) + (d,) * n + (u.shape[1],))
    for q in range(n):
        # contract qubit q (axis q+1) with every single-site Kraus operator
        t = np.tensordot(ch.kraus, t, axes=([2], [q + 1]))  # (k, out, kprev, ...)
        t = np.moveaxis(t, (0, 1), (1, q + 2))  # earlier qubits stay more significant
        t = t.reshape((-1,) + t.shape[2:])
    return QuantumChannel(t.reshape(t.shape[0], d ** n, u.shape[1]), check=False)
