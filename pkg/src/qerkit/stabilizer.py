"""Stabilizer codes: Pauli algebra, code construction, syndromes and recoveries.

Qubit 1 is the leftmost tensor factor (most significant bit of a basis index).
Pauli operators are stored symplectically as ``i^phase * P_1 (x) ... (x) P_n`` where
each ``P_j`` is one of I, X, Y, Z chosen by the bit pair ``(x_j, z_j)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channels import PAULI
from .quantum_ops import QuantumChannel

_LETTER = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_BITS = {v: k for k, v in _LETTER.items()}
_PHASE_PREFIX = {0: "+", 1: "+i", 2: "-", 3: "-i"}


def _product_phase(x1, z1, x2, z2) -> int:
    """Exponent of i picked up by ``sigma(x1,z1) sigma(x2,z2)`` per site, summed mod 4."""
    x1, z1, x2, z2 = (np.asarray(a, dtype=np.int64) for a in (x1, z1, x2, z2))
    g = np.where(
        (x1 == 1) & (z1 == 1), z2 - x2,
        np.where((x1 == 1) & (z1 == 0), z2 * (2 * x2 - 1),
                 np.where((x1 == 0) & (z1 == 1), x2 * (1 - 2 * z2), 0)))
    return int(np.sum(g)) % 4


@dataclass(frozen=True)
class Pauli:
    x: tuple
    z: tuple
    phase: int = 0

    def __post_init__(self):
        if len(self.x) != len(self.z):
            raise ValueError("x and z bit vectors differ in length")
        object.__setattr__(self, "x", tuple(int(b) & 1 for b in self.x))
        object.__setattr__(self, "z", tuple(int(b) & 1 for b in self.z))
        object.__setattr__(self, "phase", int(self.phase) % 4)

    @property
    def n(self) -> int:
        return len(self.x)

    @classmethod
    def parse(cls, text: str) -> "Pauli":
        """Parse strings such as ``"XZZXI"``, ``"-ZZII"`` or ``"+iXY"``."""
        s = text.strip()
        phase = 0
        for prefix, ph in (("-i", 3), ("+i", 1), ("i", 1), ("-", 2), ("+", 0)):
            if s.startswith(prefix):
                phase, s = ph, s[len(prefix):]
                break
        if not s or any(ch not in "IXYZ" for ch in s.upper()):
            raise ValueError(f"malformed Pauli string {text!r}")
        bits = [_BITS[ch] for ch in s.upper()]
        return cls(tuple(b[0] for b in bits), tuple(b[1] for b in bits), phase)

    @classmethod
    def identity(cls, n: int) -> "Pauli":
        return cls((0,) * n, (0,) * n, 0)

    @classmethod
    def single(cls, n: int, site: int, letter: str) -> "Pauli":
        """``letter`` on 0-based ``site``, identity elsewhere."""
        x, z = [0] * n, [0] * n
        x[site], z[site] = _BITS[letter]
        return cls(tuple(x), tuple(z), 0)

    @property
    def label(self) -> str:
        return "".join(_LETTER[(a, b)] for a, b in zip(self.x, self.z))

    def __str__(self) -> str:
        prefix = _PHASE_PREFIX[self.phase]
        return ("" if prefix == "+" else prefix) + self.label

    def __mul__(self, other: "Pauli") -> "Pauli":
        if self.n != other.n:
            raise ValueError("Pauli operators act on different qubit counts")
        ph = self.phase + other.phase + _product_phase(self.x, self.z, other.x, other.z)
        x = tuple(a ^ b for a, b in zip(self.x, other.x))
        z = tuple(a ^ b for a, b in zip(self.z, other.z))
        return Pauli(x, z, ph)

    def __neg__(self) -> "Pauli":
        return Pauli(self.x, self.z, self.phase + 2)

    def dagger(self) -> "Pauli":
        # every unsigned factor is Hermitian, so only the scalar conjugates
        return Pauli(self.x, self.z, -self.phase)

    def commutes(self, other: "Pauli") -> bool:
        return symplectic(self.x, self.z, other.x, other.z) == 0

    @property
    def weight(self) -> int:
        return sum(1 for a, b in zip(self.x, self.z) if a or b)

    @property
    def is_hermitian(self) -> bool:
        return self.phase % 2 == 0

    def unsigned(self) -> "Pauli":
        return Pauli(self.x, self.z, 0)

    def sort_key(self) -> tuple[int, int, int, int]:
        # fewer Y factors first: X and Z parts are then corrected independently on CSS codes
        return (self.weight, sum(self.x) + sum(self.z), _bits_to_int(self.x), _bits_to_int(self.z))

    def to_matrix(self) -> np.ndarray:
        out = np.ones((1, 1), dtype=complex)
        for a, b in zip(self.x, self.z):
            out = np.kron(out, PAULI[_LETTER[(a, b)]])
        return (1j ** self.phase) * out

    def apply(self, states: np.ndarray) -> np.ndarray:
        """Apply to column vectors ``states`` (shape ``(2**n, m)``) without forming the matrix."""
        n = self.n
        idx = np.arange(2 ** n)
        xmask = _bits_to_int(self.x)
        zmask = _bits_to_int(self.z)
        ymask = xmask & zmask
        # sigma(x,z) = i^{x z} X^x Z^z per site
        sign = (-1.0) ** _popcount(idx & zmask)
        factor = (1j ** (self.phase + bin(ymask).count("1"))) * sign
        out = np.empty_like(states, dtype=complex)
        out[idx ^ xmask] = factor[:, None] * states[idx]
        return out


def _bits_to_int(bits: Sequence[int]) -> int:
    v = 0
    for b in bits:
        v = (v << 1) | int(b)
    return v


def _popcount(a: np.ndarray) -> np.ndarray:
    a = a.astype(np.int64).copy()
    c = np.zeros_like(a)
    while np.any(a):
        c += a & 1
        a >>= 1
    return c


def symplectic(x1, z1, x2, z2) -> int:
    return int((np.dot(x1, z2) + np.dot(z1, x2)) % 2)


def parse_all(labels: Iterable[str]) -> list[Pauli]:
    return [Pauli.parse(s) for s in labels]


# ---------------------------------------------------------------- GF(2) helpers

def gf2_rank(rows: np.ndarray) -> int:
    m = np.array(rows, dtype=np.uint8) % 2
    if m.size == 0:
        return 0
    r = 0
    for c in range(m.shape[1]):
        piv = np.flatnonzero(m[r:, c])
        if piv.size == 0:
            continue
        p = r + piv[0]
        m[[r, p]] = m[[p, r]]
        others = np.flatnonzero(m[:, c])
        others = others[others != r]
        m[others] ^= m[r]
        r += 1
        if r == m.shape[0]:
            break
    return r


def gf2_nullspace(a: np.ndarray) -> np.ndarray:
    """Basis (rows) of ``{v : a v = 0 mod 2}``."""
    m = np.array(a, dtype=np.uint8) % 2
    rows, cols = m.shape
    pivots = []
    r = 0
    for c in range(cols):
        if r == rows:
            break
        piv = np.flatnonzero(m[r:, c])
        if piv.size == 0:
            continue
        p = r + piv[0]
        m[[r, p]] = m[[p, r]]
        others = np.flatnonzero(m[:, c])
        others = others[others != r]
        m[others] ^= m[r]
        pivots.append(c)
        r += 1
    free = [c for c in range(cols) if c not in pivots]
    basis = []
    for f in free:
        v = np.zeros(cols, dtype=np.uint8)
        v[f] = 1
        for i, pc in enumerate(pivots):
            v[pc] = m[i, f]
        basis.append(v)
    return np.array(basis, dtype=np.uint8).reshape(len(basis), cols)


def _symp_vec(p: Pauli) -> np.ndarray:
    return np.array(p.x + p.z, dtype=np.uint8)


def _from_symp(v: np.ndarray) -> Pauli:
    n = len(v) // 2
    return Pauli(tuple(v[:n]), tuple(v[n:]), 0)


def find_logicals(generators: Sequence[Pauli]) -> tuple[list[Pauli], list[Pauli]]:
    """Logical ``(X, Z)`` pairs for a stabilizer group by symplectic Gram-Schmidt."""
    n = generators[0].n
    g = np.array([_symp_vec(p) for p in generators], dtype=np.uint8)
    # v commutes with g  <=>  g_x . v_z + g_z . v_x = 0
    swapped = np.concatenate([g[:, n:], g[:, :n]], axis=1)
    normalizer = gf2_nullspace(swapped)
    span = [row for row in g]
    reps = []
    for v in normalizer:
        if gf2_rank(np.array(span + [v])) > len(span):
            span.append(v)
            reps.append(v.copy())

    def sp(a, b):
        return int((a[:n] @ b[n:] + a[n:] @ b[:n]) % 2)

    xs, zs = [], []
    pool = reps
    while pool:
        zv = pool.pop(0)
        j = next((i for i, w in enumerate(pool) if sp(zv, w)), None)
        if j is None:
            raise ValueError("could not pair logical operators")
        xv = pool.pop(j)
        pool = [(w ^ (sp(w, xv) * zv) ^ (sp(w, zv) * xv)).astype(np.uint8) for w in pool]
        zs.append(_from_symp(zv))
        xs.append(_from_symp(xv))
    return xs, zs


# ---------------------------------------------------------------- codes

@dataclass(frozen=True)
class StabilizerCode:
    name: str
    generators: tuple
    logical_x: tuple
    logical_z: tuple
    damping_pairs: tuple = field(default=(), compare=False)

    def __post_init__(self):
        gens = tuple(Pauli.parse(g) if isinstance(g, str) else g for g in self.generators)
        lx = tuple(Pauli.parse(g) if isinstance(g, str) else g for g in self.logical_x)
        lz = tuple(Pauli.parse(g) if isinstance(g, str) else g for g in self.logical_z)
        object.__setattr__(self, "generators", gens)
        object.__setattr__(self, "logical_x", lx)
        object.__setattr__(self, "logical_z", lz)
        self.validate()

    @property
    def n(self) -> int:
        return self.generators[0].n

    @property
    def k(self) -> int:
        return self.n - len(self.generators)

    @property
    def d_s(self) -> int:
        return 2 ** self.k

    @property
    def d_c(self) -> int:
        return 2 ** self.n

    def validate(self) -> None:
        gens, lx, lz = self.generators, self.logical_x, self.logical_z
        if any(p.n != gens[0].n for p in gens + lx + lz):
            raise ValueError("operators act on different qubit counts")
        if any(not p.is_hermitian for p in gens):
            raise ValueError("generators must be Hermitian")
        for a, b in itertools.combinations(gens, 2):
            if not a.commutes(b):
                raise ValueError(f"generators {a} and {b} anticommute")
        if gf2_rank(np.array([_symp_vec(p) for p in gens])) != len(gens):
            raise ValueError("generators are not independent")
        k = self.n - len(gens)
        if k < 1:
            raise ValueError("code has no logical qubits")
        if len(lx) != k or len(lz) != k:
            raise ValueError(f"expected {k} logical X and Z operators")
        for op in lx + lz:
            if not all(op.commutes(g) for g in gens):
                raise ValueError(f"logical operator {op} does not commute with the stabilizer")
        for i, j in itertools.product(range(k), repeat=2):
            if not lz[i].commutes(lz[j]) or not lx[i].commutes(lx[j]):
                raise ValueError("logical operators of one type must commute")
            if lx[i].commutes(lz[j]) != (i != j):
                raise ValueError("logical X_i must anticommute with Z_i only")
        if gf2_rank(np.array([_symp_vec(p) for p in gens + lz])) != len(gens) + k:
            raise ValueError("logical Z operators are not independent of the stabilizer")

    def syndrome(self, e: Pauli) -> tuple:
        return tuple(0 if e.commutes(g) else 1 for g in self.generators)

    def __repr__(self) -> str:
        return f"StabilizerCode({self.name!r}, [{self.n},{self.k}])"


def stabilizer_code(name: str, generators, logical_x=None, logical_z=None, pairs=()) -> StabilizerCode:
    gens = parse_all(generators) if generators and isinstance(generators[0], str) else list(generators)
    if logical_x is None or logical_z is None:
        lx, lz = find_logicals(gens)
    else:
        lx, lz = parse_all(logical_x), parse_all(logical_z)
    return StabilizerCode(name, tuple(gens), tuple(lx), tuple(lz), tuple(pairs))


_LIBRARY = {
    "five_qubit": (["XZZXI", "IXZZX", "XIXZZ", "ZXIXZ"], ["XXXXX"], ["ZZZZZ"]),
    "steane": (["IIIXXXX", "IXXIIXX", "XIXIXIX", "IIIZZZZ", "IZZIIZZ", "ZIZIZIZ"],
               ["XXXXXXX"], ["ZZZZZZZ"]),
    "shor": (["ZZIIIIIII", "IZZIIIIII", "IIIZZIIII", "IIIIZZIII", "IIIIIIZZI", "IIIIIIIZZ",
              "XXXXXXIII", "IIIXXXXXX"], ["ZZZZZZZZZ"], ["XXXXXXXXX"]),
    "leung_41": (["XXXX", "ZZII", "IIZZ"], ["XXII"], ["ZIZI"]),
    "gottesman_83": (["XXXXXXXX", "ZZZZZZZZ", "IXIXYZYZ", "IXZYIXZY", "IYXZXZIY"], None, None),
}


def code_library(name: str) -> StabilizerCode:
    if name not in _LIBRARY:
        raise ValueError(f"unknown code {name!r}; known: {sorted(_LIBRARY)}")
    gens, lx, lz = _LIBRARY[name]
    pairs = ((0, 1), (2, 3)) if name == "leung_41" else ()
    return stabilizer_code(name, gens, lx, lz, pairs)


def generalized_adc_code(m: int) -> StabilizerCode:
    """``[2(M+1), M]`` amplitude-damping code in standard form.

    Generators are the all-X row and Z pairs ``(1,2)`` and ``(2+j, n+1-j)``;
    ``X_i`` acts on pair ``M+1-i`` and ``Z_i = Z_1 Z_{n-M+i}`` (1-based qubits).
    """
    if m < 1:
        raise ValueError("M must be at least 1")
    n = 2 * (m + 1)
    pairs = [(0, 1)] + [(1 + j, n - j) for j in range(1, m + 1)]

    def zz(a: int, b: int, letter: str = "Z") -> str:
        s = ["I"] * n
        s[a], s[b] = letter, letter
        return "".join(s)

    gens = ["X" * n] + [zz(a, b) for a, b in pairs]
    lx = [zz(*pairs[m + 1 - i], "X") for i in range(1, m + 1)]
    lz = [zz(0, n - m + i - 1) for i in range(1, m + 1)]
    return stabilizer_code(f"adc_{n}_{m}", gens, lx, lz, pairs)


HAMMING_7_4 = np.array([[0, 0, 0, 1, 1, 1, 1],
                        [0, 1, 1, 0, 0, 1, 1],
                        [1, 0, 1, 0, 1, 0, 1]], dtype=np.uint8)

EXTENDED_HAMMING_8_4 = np.array([[1, 1, 1, 1, 1, 1, 1, 1],
                                 [0, 0, 0, 0, 1, 1, 1, 1],
                                 [0, 0, 1, 1, 0, 0, 1, 1],
                                 [0, 1, 0, 1, 0, 1, 0, 1]], dtype=np.uint8)


def linear_adc_code(h, name: str | None = None) -> StabilizerCode:
    """Z-type checks from a parity-check matrix plus an all-X generator.

    Every parity check must have even weight, otherwise the all-X generator
    would anticommute with it.
    """
    h = np.array(h, dtype=np.uint8) % 2
    r, n = h.shape
    if gf2_rank(h) != r:
        raise ValueError("parity-check rows are not independent")
    if n <= 16:
        for combo in itertools.product((0, 1), repeat=r):
            word = (np.array(combo, dtype=np.uint8) @ h) % 2
            if word.sum() % 2:
                raise ValueError("odd-weight parity check found; all-X generator would anticommute")
    elif np.any(h.sum(axis=1) % 2):
        raise ValueError("odd-weight parity check found; all-X generator would anticommute")
    if n - r - 1 < 1:
        raise ValueError("parity-check matrix leaves no logical qubits")
    gens = ["".join("Z" if b else "I" for b in row) for row in h] + ["X" * n]
    return stabilizer_code(name or f"linear_{n}_{n - r - 1}", gens)


def get_code(name: str, **params) -> StabilizerCode:
    """Look up a code by CLI name, including the parameterized families."""
    if name == "generalized_adc":
        return generalized_adc_code(int(params.get("M", 1)))
    if name in ("linear_73", "hamming_73"):
        return linear_adc_code(HAMMING_7_4, "linear_73")
    if name == "linear_83":
        return linear_adc_code(EXTENDED_HAMMING_8_4, "linear_83")
    return code_library(name)


# ---------------------------------------------------------------- dense constructions

def _joint_projector_apply(gens: Sequence[Pauli], signs: Sequence[int], states: np.ndarray) -> np.ndarray:
    out = states
    for g, s in zip(gens, signs):
        out = 0.5 * (out + (s * g.apply(out)))
    return out


def encoding_isometry(code: StabilizerCode) -> np.ndarray:
    """``U_C`` whose column ``m`` (bits ``i_1..i_k``) has logical-Z eigenvalues ``(-1)^{i_j}``.

    Each column's largest-magnitude amplitude is made real and positive.
    """
    d_c, d_s = code.d_c, code.d_s
    cols = []
    for m in range(d_s):
        bits = [(m >> (code.k - 1 - j)) & 1 for j in range(code.k)]
        signs = [1] * len(code.generators) + [(-1) ** b for b in bits]
        proj = _joint_projector_apply(list(code.generators) + list(code.logical_z), signs,
                                      np.eye(d_c, dtype=complex))
        norms = np.linalg.norm(proj, axis=0)
        j = int(np.argmax(norms))
        if norms[j] < 1e-6:
            raise ValueError("logical eigenspace is empty; invalid stabilizer set")
        v = proj[:, j] / norms[j]
        mags = np.abs(v)
        top = int(np.flatnonzero(mags >= mags.max() - 1e-9)[0])
        v = v * (np.conj(v[top]) / mags[top])
        cols.append(v)
    u = np.column_stack(cols)
    if np.linalg.norm(u.conj().T @ u - np.eye(d_s)) > 1e-10:
        raise ValueError("code space dimension does not match 2^k")
    return u


def code_projector(code: StabilizerCode) -> np.ndarray:
    u = encoding_isometry(code)
    return u @ u.conj().T


@dataclass(frozen=True)
class SyndromePartition:
    """Orthogonal decomposition of ``H_C`` into syndrome subspaces, each given by an isometry."""

    bases: tuple  # each (d_c, rank) with orthonormal columns
    labels: tuple

    def projector(self, q: int) -> np.ndarray:
        b = self.bases[q]
        return b @ b.conj().T

    def projectors(self) -> list[np.ndarray]:
        return [self.projector(q) for q in range(len(self.bases))]

    def __len__(self) -> int:
        return len(self.bases)

    @property
    def dim(self) -> int:
        return self.bases[0].shape[0]


def syndrome_labels(code: StabilizerCode) -> list[tuple]:
    r = len(code.generators)
    return [tuple((q >> (r - 1 - i)) & 1 for i in range(r)) for q in range(2 ** r)]


def pauli_syndrome(code: StabilizerCode, e: Pauli | str) -> tuple:
    if isinstance(e, str):
        e = Pauli.parse(e)
    return code.syndrome(e)


def coset_leaders(code: StabilizerCode) -> dict:
    """Minimum-weight Pauli per syndrome; ties broken on ``(|x| + |z|, x bits, z bits)``."""
    n = code.n
    need = 2 ** len(code.generators)
    leaders = {}
    for w in range(n + 1):
        cands = []
        for sites in itertools.combinations(range(n), w):
            for letters in itertools.product("XYZ", repeat=w):
                x, z = [0] * n, [0] * n
                for s, l in zip(sites, letters):
                    x[s], z[s] = _BITS[l]
                cands.append(Pauli(tuple(x), tuple(z), 0))
        cands.sort(key=Pauli.sort_key)
        for p in cands:
            s = code.syndrome(p)
            if s not in leaders:
                leaders[s] = p
        if len(leaders) == need:
            break
    return leaders


def syndrome_partition(code: StabilizerCode, u_c: np.ndarray | None = None) -> SyndromePartition:
    """Syndrome subspaces ``S_q = B_q S_0``; projector ``P_q = prod_i (I + (-1)^{b_i} g_i)/2``."""
    u_c = encoding_isometry(code) if u_c is None else u_c
    leaders = coset_leaders(code)
    labels = syndrome_labels(code)
    bases = tuple(leaders[lab].apply(u_c) for lab in labels)
    return SyndromePartition(bases, tuple(labels))


def syndrome_projector(code: StabilizerCode, label: Sequence[int]) -> np.ndarray:
    """Dense ``prod_i (I + (-1)^{b_i} g_i)/2``."""
    return _joint_projector_apply(code.generators, [(-1) ** b for b in label],
                                  np.eye(code.d_c, dtype=complex))


@dataclass(frozen=True)
class RecoveryOperation:
    """Decoding map ``H_C -> H_S`` as Kraus operators, optionally labelled per syndrome."""

    kraus: np.ndarray
    labels: tuple = ()
    name: str = ""

    def channel(self, check: bool = True) -> QuantumChannel:
        return QuantumChannel(self.kraus, check=check)

    def cptp_residual(self) -> float:
        return QuantumChannel(self.kraus, check=False).cptp_residual()


def generic_qec_recovery(code: StabilizerCode, u_c: np.ndarray | None = None) -> RecoveryOperation:
    """Syndrome measurement then the minimum-weight Pauli correction, then decode."""
    u_c = encoding_isometry(code) if u_c is None else u_c
    part = syndrome_partition(code, u_c)
    kraus = np.array([b.conj().T for b in part.bases])
    return RecoveryOperation(kraus, part.labels, f"generic:{code.name}")


def pauli_from_matrix(k: np.ndarray, tol: float = 1e-10) -> tuple[Pauli, complex]:
    """Write ``k = a * P`` for a Pauli ``P``; raises if ``k`` is not a scaled Pauli."""
    d = k.shape[0]
    n = int(round(np.log2(d)))
    if 2 ** n != d or k.shape != (d, d):
        raise ValueError("operator is not on a qubit register")
    col0 = k[:, 0]
    xm = int(np.argmax(np.abs(col0)))
    a0 = col0[xm]
    if abs(a0) < tol:
        raise ValueError("zero operator")
    x = tuple((xm >> (n - 1 - j)) & 1 for j in range(n))
    z = []
    for j in range(n):
        r = 1 << (n - 1 - j)
        z.append(0 if np.real(k[r ^ xm, r] / a0) > 0 else 1)
    p = Pauli(x, tuple(z), 0)
    # X^x Z^z has entry 1 at (x, 0); sigma(x,z) carries i^{#Y} relative to it
    ny = sum(1 for a, b in zip(x, z) if a and b)
    amp = a0 / (1j ** ny)
    if np.linalg.norm(k - amp * p.to_matrix()) > tol * max(1.0, np.linalg.norm(k)):
        raise ValueError("operator is not proportional to a Pauli")
    return p, amp


def _logical_class(code: StabilizerCode, e: Pauli) -> tuple:
    """Bits ``(i_1..i_k, j_1..j_k)`` of the logical ``X^i Z^j`` in a normalizer element."""
    i_bits = tuple(0 if e.commutes(z) else 1 for z in code.logical_z)
    j_bits = tuple(0 if e.commutes(x) else 1 for x in code.logical_x)
    return i_bits + j_bits


def logical_operator(code: StabilizerCode, cls: tuple) -> Pauli:
    k = code.k
    out = Pauli.identity(code.n)
    for i in range(k):
        if cls[i]:
            out = out * code.logical_x[i]
    for j in range(k):
        if cls[k + j]:
            out = out * code.logical_z[j]
    return out


@dataclass(frozen=True)
class PauliRecovery:
    recovery: RecoveryOperation
    fidelity: float
    best_mass: dict  # syndrome label -> |a_q|^2 of the chosen class
    classes: dict  # syndrome label -> chosen logical class bits


def ml_pauli_recovery(code: StabilizerCode, channel: QuantumChannel,
                      u_c: np.ndarray | None = None) -> PauliRecovery:
    """Maximum-likelihood normalizer correction for a channel of scaled Pauli errors."""
    u_c = encoding_isometry(code) if u_c is None else u_c
    leaders = coset_leaders(code)
    mass: dict = {}
    for kop in channel.kraus:
        p, amp = pauli_from_matrix(kop)
        q = code.syndrome(p)
        cls = _logical_class(code, leaders[q] * p)
        mass.setdefault(q, {})
        mass[q][cls] = mass[q].get(cls, 0.0) + abs(amp) ** 2
    kraus, labels, best, chosen = [], [], {}, {}
    for q in syndrome_labels(code):
        classes = mass.get(q, {})
        if classes:
            cls = max(sorted(classes), key=lambda c: classes[c])
        else:
            cls = (0,) * (2 * code.k)
        best[q] = classes.get(cls, 0.0)
        chosen[q] = cls
        op = leaders[q] * logical_operator(code, cls)
        kraus.append(op.apply(u_c).conj().T)
        labels.append(q)
    rec = RecoveryOperation(np.array(kraus), tuple(labels), f"ml_pauli:{code.name}")
    return PauliRecovery(rec, float(sum(best.values())), best, chosen)


def pauli_dual_point(code: StabilizerCode, pr: PauliRecovery, u_c: np.ndarray | None = None) -> np.ndarray:
    """Analytic dual point ``Y = sum_q |a_q|^2 conj(P_q) / d_S`` for the Pauli-channel optimum."""
    u_c = encoding_isometry(code) if u_c is None else u_c
    part = syndrome_partition(code, u_c)
    y = np.zeros((code.d_c, code.d_c), dtype=complex)
    for b, lab in zip(part.bases, part.labels):
        y += pr.best_mass[lab] * np.conj(b @ b.conj().T)
    return y / code.d_s


# ---------------------------------------------------------------- damped subspaces

@dataclass(frozen=True)
class DampedSubspace:
    generators: tuple
    n: int

    @property
    def dimension(self) -> int:
        return 2 ** (self.n - len(self.generators))

    @property
    def labels(self) -> list[str]:
        return [str(g) for g in self.generators]


def damped_subspace(generators: Sequence[Pauli | str], qubit: int) -> DampedSubspace:
    """Stabilizer of ``(X_i + iY_i)`` applied to the space fixed by ``generators``.

    ``qubit`` is 0-based. Generators are first reduced so that at most one has
    X or Y at the site and at most one has Z there.
    """
    gens = [Pauli.parse(g) if isinstance(g, str) else g for g in generators]
    n = gens[0].n
    i = qubit
    xs = [j for j, g in enumerate(gens) if g.x[i]]
    if len(xs) > 1:
        piv = next((j for j in xs if not gens[j].z[i]), xs[0])
        for j in xs:
            if j != piv:
                gens[j] = gens[j] * gens[piv]
    zs = [j for j, g in enumerate(gens) if not g.x[i] and g.z[i]]
    if len(zs) > 1:
        piv = zs[0]
        for j in zs[1:]:
            gens[j] = gens[j] * gens[piv]
    out = []
    for g in gens:
        if g.x[i]:
            continue
        out.append(-g if g.z[i] else g)
    out.append(Pauli.single(n, i, "Z"))
    return DampedSubspace(tuple(out), n)


def damped_subspace_sequence(code_or_gens, qubits: Sequence[int]) -> DampedSubspace:
    gens = code_or_gens.generators if isinstance(code_or_gens, StabilizerCode) else code_or_gens
    sub = DampedSubspace(tuple(Pauli.parse(g) if isinstance(g, str) else g for g in gens),
                         (code_or_gens.n if isinstance(code_or_gens, StabilizerCode)
                          else (Pauli.parse(gens[0]) if isinstance(gens[0], str) else gens[0]).n))
    for q in qubits:
        sub = damped_subspace(sub.generators, q)
    return sub


def subspace_projector(sub: DampedSubspace) -> np.ndarray:
    return _joint_projector_apply(sub.generators, [1] * len(sub.generators),
                                  np.eye(2 ** sub.n, dtype=complex))


def same_group(a: Sequence[Pauli], b: Sequence[Pauli]) -> bool:
    """True when two signed generator lists generate the same group (checked densely)."""
    n = a[0].n
    pa = _joint_projector_apply(a, [1] * len(a), np.eye(2 ** n, dtype=complex))
    pb = _joint_projector_apply(b, [1] * len(b), np.eye(2 ** n, dtype=complex))
    return len(a) == len(b) and np.linalg.norm(pa - pb) < 1e-9


# ---------------------------------------------------------------- error-correction conditions

@dataclass(frozen=True)
class CorrectabilityReport:
    correctable: bool
    alpha: np.ndarray
    residual: float


def check_correctability(code_or_isometry, errors: Iterable[np.ndarray], tol: float = 1e-9) -> CorrectabilityReport:
    """Test ``P_C E_i^dag E_j P_C = alpha_ij P_C`` for every pair of errors."""
    u = encoding_isometry(code_or_isometry) if isinstance(code_or_isometry, StabilizerCode) \
        else np.asarray(code_or_isometry)
    d_s = u.shape[1]
    images = [np.asarray(e) @ u for e in errors]
    t = np.array(images)  # (m, d_c, d_s)
    g = np.einsum("iab,jac->ijbc", t.conj(), t)
    alpha = np.einsum("ijbb->ij", g) / d_s
    resid = g - alpha[:, :, None, None] * np.eye(d_s)[None, None]
    r = float(np.max(np.linalg.norm(resid, axis=(2, 3)))) if len(images) else 0.0
    return CorrectabilityReport(r <= tol, alpha, r)


def local_operator(n: int, ops: dict) -> np.ndarray:
    """Dense operator with single-qubit matrices at the given 0-based sites."""
    out = np.ones((1, 1), dtype=complex)
    for j in range(n):
        out = np.kron(out, ops.get(j, np.eye(2, dtype=complex)))
    return out


def damping_errors(n: int, gamma: float, orders: Sequence[int] = (0, 1)):
    """First/second order damping errors: ``E_1`` on the chosen sites, identity elsewhere."""
    e1 = np.array([[0, np.sqrt(gamma)], [0, 0]], dtype=complex)
    for order in orders:
        for sites in itertools.combinations(range(n), order):
            yield local_operator(n, {s: e1 for s in sites})


# ---------------------------------------------------------------- amplitude-damping recoveries

def _basis_bits(n: int) -> np.ndarray:
    idx = np.arange(2 ** n)
    return ((idx[:, None] >> (n - 1 - np.arange(n))[None, :]) & 1).astype(np.int64)


def _hadamard_on(n: int, site: int) -> np.ndarray:
    h = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
    return local_operator(n, {site: h})


def _cnot_fan(n: int, control: int) -> np.ndarray:
    """CNOT from ``control`` onto every other qubit (a permutation matrix)."""
    bits = _basis_bits(n)
    mask = 0
    for j in range(n):
        if j != control:
            mask |= 1 << (n - 1 - j)
    idx = np.arange(2 ** n)
    ctrl = bits[:, control].astype(bool)
    dest = np.where(ctrl, idx ^ mask, idx)
    p = np.zeros((2 ** n, 2 ** n), dtype=complex)
    p[dest, idx] = 1.0
    return p


def adc_family_recovery(code: StabilizerCode, u_c: np.ndarray | None = None) -> RecoveryOperation:
    """Damping-syndrome recovery for the ``[2(M+1), M]`` family.

    For a damped set ``D`` (at most one qubit per Z pair) the syndrome projector
    fixes the pair parities and the damped-qubit Z values; the correction is
    ``X_D . CNOT-fan(i_1) . H(i_1)``. With no damping the all-X generator is
    measured and a single Z repairs the -1 outcome.
    """
    if not code.damping_pairs:
        raise ValueError("code has no damping-pair structure")
    u_c = encoding_isometry(code) if u_c is None else u_c
    n = code.n
    bits = _basis_bits(n)
    zval = 1 - 2 * bits  # Z eigenvalue per basis state and site
    pairs = list(code.damping_pairs)
    parity = np.array([zval[:, a] * zval[:, b] for a, b in pairs])  # (pairs, 2^n)
    kraus, labels = [], []

    xall = Pauli.parse("X" * n).to_matrix()
    no_damp = np.all(parity == 1, axis=0).astype(float)
    p0 = np.diag(no_damp).astype(complex)
    plus = p0 @ (np.eye(2 ** n) + xall) / 2
    minus = p0 @ (np.eye(2 ** n) - xall) / 2
    zlast = local_operator(n, {n - 1: PAULI["Z"]})
    kraus.append(u_c.conj().T @ plus)
    labels.append(("none", "+"))
    kraus.append(u_c.conj().T @ zlast @ minus)
    labels.append(("none", "-"))

    for r in range(1, len(pairs) + 1):
        for chosen in itertools.combinations(range(len(pairs)), r):
            for picks in itertools.product((0, 1), repeat=r):
                damped = sorted(pairs[c][s] for c, s in zip(chosen, picks))
                mask = np.ones(2 ** n)
                for c, (a, b) in enumerate(pairs):
                    mask *= (parity[c] == (-1 if c in chosen else 1))
                for d in damped:
                    mask *= (zval[:, d] == 1)
                proj = np.diag(mask).astype(complex)
                i1 = damped[0]
                w = _cnot_fan(n, i1) @ _hadamard_on(n, i1)
                w = local_operator(n, {d: PAULI["X"] for d in damped}) @ w
                kraus.append(u_c.conj().T @ w @ proj)
                labels.append(("damped", tuple(d + 1 for d in damped)))
    return RecoveryOperation(np.array(kraus), tuple(labels), f"adc_family:{code.name}")


def _rot(angle: float) -> np.ndarray:
    """``exp(i angle Y)``."""
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, s], [-s, c]], dtype=complex)


def _controlled(u: np.ndarray) -> np.ndarray:
    """Two-qubit controlled-``u``, control on the first factor."""
    out = np.eye(4, dtype=complex)
    out[2:, 2:] = u
    return out


def _controlled_rev(u: np.ndarray) -> np.ndarray:
    """Two-qubit controlled-``u``, control on the second factor."""
    swap = np.eye(4)[[0, 2, 1, 3]]
    return swap @ _controlled(u) @ swap


def _cnot(n: int, control: int, target: int) -> np.ndarray:
    bits = _basis_bits(n)
    idx = np.arange(2 ** n)
    dest = np.where(bits[:, control] == 1, idx ^ (1 << (n - 1 - target)), idx)
    p = np.zeros((2 ** n, 2 ** n), dtype=complex)
    p[dest, idx] = 1.0
    return p


def leung_recovery(gamma: float) -> RecoveryOperation:
    """Measurement-circuit recovery for the four-qubit damping code.

    CNOTs 1->2 and 3->4 expose the syndrome on qubits 2 and 4; the remaining
    pair (1, 3) is corrected by a gamma-dependent circuit per outcome. The
    (1, 1) outcome has no prescribed circuit and outputs qubit 1 unchanged.
    """
    if not 0.0 <= gamma < 1.0:
        raise ValueError("gamma must lie in [0, 1)")
    theta = np.arctan((1 - gamma) ** 2)
    theta_p = np.arccos(1 - gamma)
    pre = _cnot(4, 2, 3) @ _cnot(4, 0, 1)
    e = np.eye(2, dtype=complex)
    x = PAULI["X"]
    ket0 = e[:, :1]
    kraus, labels = [], []
    for m2, m4 in ((0, 0), (1, 0), (0, 1), (1, 1)):
        # <m2|_2 <m4|_4 : 16 -> 4 on (n1, n3)
        sel = np.kron(np.kron(e, e[m2:m2 + 1]), np.kron(e, e[m4:m4 + 1]))
        head = sel @ pre
        branch = []
        if (m2, m4) == (0, 0):
            cnot31 = _cnot(2, 1, 0)
            u = _controlled(_rot(np.pi / 4 - theta)) @ np.kron(e, _rot(theta)) @ cnot31
            for m in (0, 1):
                branch.append((np.kron(e, e[m:m + 1]) @ u, ("00", m)))
        elif (m2, m4) == (1, 0):
            # order (n1, anc, n3); output n3, trace n1
            prep = np.kron(np.kron(e, ket0), x)  # ancilla |0>, X on n3
            u = np.kron(e, _controlled_rev(_rot(theta_p))) @ prep
            for b in (0, 1):
                for m in (0, 1):
                    proj = np.kron(np.kron(e[b:b + 1], e[m:m + 1]), e)
                    branch.append((proj @ u, ("10", b, m)))
        elif (m2, m4) == (0, 1):
            # order (n1, anc, n3); output n1, trace n3
            prep = np.kron(x, np.kron(ket0, e))
            u = np.kron(_controlled(_rot(theta_p)), e) @ prep
            for b in (0, 1):
                for m in (0, 1):
                    proj = np.kron(np.kron(e, e[m:m + 1]), e[b:b + 1])
                    branch.append((proj @ u, ("01", b, m)))
        else:
            for b in (0, 1):
                branch.append((np.kron(e, e[b:b + 1]), ("11", b)))
        for op, lab in branch:
            kraus.append(op @ head)
            labels.append(lab)
    return RecoveryOperation(np.array(kraus), tuple(labels), "leung")
