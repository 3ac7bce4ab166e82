"""Primal-dual interior-point solver for the recovery semidefinite program.

    maximize    tr(X C)
    subject to  X >= 0 on H_S (x) H_C*,   tr_S X = I_{d_C}

with dual ``minimize tr Y  s.t.  Z = I (x) Y - C >= 0``. The search direction is
the HKM direction with a Mehrotra predictor-corrector step. Complex Hermitian
matrices are handled directly; the Schur complement is Hermitian positive
definite, so each Newton system is one Cholesky solve.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .linalg import dagger, partial_trace, psd_inv_sqrt

MAX_PRODUCT_DIM = 256
MAX_SCHUR_DIM = 4096  # d_C^2; the Schur matrix is dense complex


class SdpConvergenceError(RuntimeError):
    """Raised when the iteration cap is hit; carries the best iterate."""

    def __init__(self, message: str, x: np.ndarray, y: np.ndarray, gap: float):
        super().__init__(message)
        self.x, self.y, self.gap = x, y, gap


@dataclass(frozen=True)
class IpmResult:
    x: np.ndarray
    y: np.ndarray
    primal_value: float
    dual_value: float
    iterations: int

    @property
    def gap(self) -> float:
        return self.dual_value - self.primal_value


def _herm(a: np.ndarray) -> np.ndarray:
    return 0.5 * (a + dagger(a))


def _lift(y: np.ndarray, d_s: int) -> np.ndarray:
    return np.kron(np.eye(d_s), y)


def _schur(x4: np.ndarray, z4: np.ndarray, d_s: int, d_c: int) -> np.ndarray:
    """Matrix of ``dY -> A(herm(X (I kron dY) Z^-1))`` on row-major vec(dY)."""

    def half(a4, b4):
        p = a4.transpose(1, 3, 0, 2).reshape(d_c * d_c, d_s * d_s)
        q = b4.transpose(2, 0, 1, 3).reshape(d_s * d_s, d_c * d_c)
        r = (p @ q).reshape(d_c, d_c, d_c, d_c)  # c, a, b, c'
        return r.transpose(0, 3, 1, 2).reshape(d_c * d_c, d_c * d_c)

    m = 0.5 * (half(x4, z4) + half(z4, x4))
    return _herm(m)


def _max_step(s: np.ndarray, ds: np.ndarray) -> float:
    """Largest alpha with ``s + alpha ds`` PSD (``s`` PD)."""
    lower = np.linalg.cholesky(s)
    li = sla.solve_triangular(lower, np.eye(s.shape[0]), lower=True)
    w = np.linalg.eigvalsh(_herm(li @ ds @ dagger(li)))
    lam = w[0]
    return np.inf if lam >= 0 else -1.0 / lam


def solve_trace_sdp(c: np.ndarray, d_s: int, d_c: int, tol: float = 1e-7,
                    max_iter: int = 100, target: float = 1e-12) -> IpmResult:
    """Solve the recovery SDP for kernel ``c`` of dimension ``d_s * d_c``."""
    n = d_s * d_c
    if c.shape != (n, n):
        raise ValueError(f"kernel shape {c.shape} does not match d_S*d_C = {n}")
    if n > MAX_PRODUCT_DIM or d_c * d_c > MAX_SCHUR_DIM:
        raise ValueError(f"SDP of size d_S={d_s}, d_C={d_c} exceeds the dense guard; "
                         "use a structured recovery")
    c = _herm(np.asarray(c, dtype=complex))
    scale = max(float(np.max(np.abs(c))), 1e-300)
    cs = c / scale
    x = np.eye(n, dtype=complex) / d_s
    lam = float(np.linalg.eigvalsh(cs)[-1])
    y = (max(lam, 0.0) + 1.0) * np.eye(d_c, dtype=complex)
    z = _lift(y, d_s) - cs
    ident_c = np.eye(d_c)
    best = None

    for it in range(1, max_iter + 1):
        pobj = float(np.real(np.sum(x.T * cs)))
        dobj = float(np.real(np.trace(y)))
        rel_gap = (dobj - pobj) / (1.0 + abs(pobj))
        rp = ident_c - partial_trace(x, (d_s, d_c), 0)
        rd = _lift(y, d_s) - cs - z
        if best is None or rel_gap < best[2]:
            best = (x, y, rel_gap)
        if rel_gap < target and np.linalg.norm(rp) < 1e-10 and np.linalg.norm(rd) < 1e-10:
            break
        try:
            x, y, z = _ipm_step(x, y, z, cs, rp, rd, d_s, d_c)
        except np.linalg.LinAlgError:
            # iterate has lost numerical definiteness; keep the best one seen
            break

    x, y = _polish(best[0], best[1], cs, d_s, d_c)
    pobj = float(np.real(np.sum(x.T * cs))) * scale
    dobj = float(np.real(np.trace(y))) * scale
    y = y * scale
    if dobj - pobj > tol * max(1.0, abs(pobj)):
        raise SdpConvergenceError(f"SDP stopped with gap {dobj - pobj:.3e} after {it} iterations",
                                  x, y, dobj - pobj)
    return IpmResult(x, y, pobj, dobj, it)


def _ipm_step(x, y, z, cs, rp, rd, d_s, d_c):
    """One Mehrotra predictor-corrector step along the HKM direction."""
    n = d_s * d_c
    mu = float(np.real(np.sum(x.T * z))) / n
    zi = _herm(sla.cho_solve(sla.cho_factor(z, lower=True), np.eye(n, dtype=complex)))
    x4 = x.reshape(d_s, d_c, d_s, d_c)
    z4 = zi.reshape(d_s, d_c, d_s, d_c)
    chol = sla.cho_factor(_schur(x4, z4, d_s, d_c), lower=True)

    def direction(sigma_mu, corr):
        g = sigma_mu * zi - x - _herm(x @ rd @ zi) - corr
        rhs = partial_trace(g, (d_s, d_c), 0) - rp
        dy = _herm(sla.cho_solve(chol, rhs.reshape(-1)).reshape(d_c, d_c))
        dz = _lift(dy, d_s) + rd
        dx = sigma_mu * zi - x - _herm(x @ dz @ zi) - corr
        return _herm(dx), dy, dz

    dx_a, _, dz_a = direction(0.0, 0.0)
    ap = min(1.0, _max_step(x, dx_a))
    ad = min(1.0, _max_step(z, dz_a))
    mu_aff = float(np.real(np.sum((x + ap * dx_a).T * (z + ad * dz_a)))) / n
    sigma = min(1.0, (max(mu_aff, 0.0) / mu) ** 3)
    corr = _herm(dx_a @ dz_a @ zi)
    dx, dy, dz = direction(sigma * mu, corr)
    ap = min(1.0, 0.98 * _max_step(x, dx))
    ad = min(1.0, 0.98 * _max_step(z, dz))
    x_new = _herm(x + ap * dx)
    z_new = _herm(z + ad * dz)
    np.linalg.cholesky(x_new)
    np.linalg.cholesky(z_new)
    return x_new, _herm(y + ad * dy), z_new


def _polish(x: np.ndarray, y: np.ndarray, c: np.ndarray, d_s: int, d_c: int):
    """Restore exact primal and dual feasibility of an interior iterate."""
    w, v = np.linalg.eigh(_herm(x))
    x = (v * np.clip(w, 0.0, None)) @ dagger(v)
    t = partial_trace(x, (d_s, d_c), 0)
    s = np.kron(np.eye(d_s), psd_inv_sqrt(t))
    x = _herm(s @ x @ dagger(s))
    y = _herm(y)
    lmin = float(np.linalg.eigvalsh(_lift(y, d_s) - c)[0])
    if lmin < 0:
        y = y - lmin * np.eye(d_c)
    return x, y
