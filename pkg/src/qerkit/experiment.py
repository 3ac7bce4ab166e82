"""Parameter sweeps, polynomial fits and CSV reports."""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import dual_bounds, optimal, stabilizer, structured
from .channels import ChannelSpec, encoded_n_fold, n_fold
from .quantum_ops import Ensemble, data_matrix, entanglement_fidelity, maximally_mixed, recovered_fidelity

WORKERS_ENV = "QERKIT_WORKERS"
CSV_COLUMNS = ("noise", "method", "fidelity", "bound", "normalized")
METHODS = ("baseline", "optimal", "generic_qec", "ml_pauli", "eigqer", "block_eigqer", "orderqer",
           "adc_family", "leung", "dual_bound")
DUAL_KINDS = ("iterated_block", "iterative", "gersgorin", "svd")


@dataclass(frozen=True)
class MethodSpec:
    name: str
    params: dict = field(default_factory=dict)

    @property
    def label(self) -> str:
        if self.name == "block_eigqer":
            return f"block_eigqer(M={self.params.get('M', 2)})"
        if self.name == "orderqer":
            return f"orderqer({self.params.get('order', 1)})"
        if self.name == "dual_bound":
            return f"dual_bound({self.params.get('kind', 'iterated_block')})"
        return self.name

    @classmethod
    def parse(cls, item) -> "MethodSpec":
        if isinstance(item, str):
            name, params = item, {}
        else:
            params = dict(item)
            name = params.pop("name")
        if name not in METHODS:
            raise ValueError(f"unknown method {name!r}")
        if name == "dual_bound" and params.get("kind", "iterated_block") not in DUAL_KINDS:
            raise ValueError(f"unknown dual bound kind {params['kind']!r}")
        return cls(name, params)


@dataclass(frozen=True)
class FitSpec:
    degree: int = 2
    fit_range: tuple = (0.005, 0.1)


@dataclass(frozen=True)
class ExperimentSpec:
    name: str
    code: dict
    channel: ChannelSpec
    methods: tuple
    grid: tuple
    fit: FitSpec | None = None
    seed: int = 0

    def __post_init__(self):
        g = np.asarray(self.grid, dtype=float)
        if g.size == 0 or np.any(np.diff(g) <= 0):
            raise ValueError("grid must be non-empty and strictly increasing")
        lo, hi = self.channel.valid_range()
        if g[0] < lo or g[-1] > hi:
            raise ValueError(f"grid leaves the channel's valid range [{lo}, {hi}]")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        d = dict(d)
        grid = d["grid"]
        if isinstance(grid, dict):
            if "logspace" in grid:
                lo, hi, num = grid["logspace"]
                grid = np.geomspace(lo, hi, int(num))
            elif "linspace" in grid:
                lo, hi, num = grid["linspace"]
                grid = np.linspace(lo, hi, int(num))
            else:
                raise ValueError("grid dict needs 'logspace' or 'linspace'")
        code = d["code"] if isinstance(d["code"], dict) else {"name": d["code"]}
        ens = d.get("ensemble", "completely_mixed")
        if ens not in ("completely_mixed", {"kind": "completely_mixed"}):
            raise ValueError("only the completely mixed ensemble is supported in experiment specs")
        fit = d.get("fit")
        fit_spec = None
        if fit:
            fit_spec = FitSpec(int(fit.get("degree", 2)), tuple(fit.get("range", (0.005, 0.1))))
        return cls(
            name=d.get("name", "experiment"),
            code=code,
            channel=ChannelSpec.from_dict(d["channel"]),
            methods=tuple(MethodSpec.parse(m) for m in d.get("methods", [])),
            grid=tuple(float(x) for x in grid),
            fit=fit_spec,
            seed=int(d.get("seed", 0)),
        )

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


@dataclass(frozen=True)
class Row:
    noise: float
    method: str
    fidelity: float
    bound: float | None
    normalized: float
    seconds: float = 0.0
    error: str | None = None


@dataclass
class SweepResult:
    spec: ExperimentSpec
    rows: list

    @property
    def errors(self) -> list:
        return [r for r in self.rows if r.error]

    @property
    def ok(self) -> bool:
        return not self.errors

    def column(self, method: str) -> tuple[np.ndarray, np.ndarray]:
        sel = [r for r in self.rows if r.method == method and r.error is None]
        return (np.array([r.noise for r in sel]), np.array([r.fidelity for r in sel]))

    def methods(self) -> list[str]:
        seen = []
        for r in self.rows:
            if r.method not in seen:
                seen.append(r.method)
        return seen


def normalized_fidelity(value: float, k: int) -> float:
    """``value ** (1/k)``: per-logical-qubit fidelity."""
    if k < 1:
        raise ValueError("k must be positive")
    if not 0.0 < value <= 1.0 + 1e-9:
        raise ValueError(f"fidelity {value} outside (0, 1]")
    return float(min(value, 1.0) ** (1.0 / k))


class _Point:
    """Lazily built objects shared by all methods at one grid point."""

    def __init__(self, spec: ExperimentSpec, noise: float):
        self.spec, self.noise = spec, noise
        self.code = stabilizer.get_code(spec.code["name"], **{k: v for k, v in spec.code.items() if k != "name"})
        self.u = stabilizer.encoding_isometry(self.code)
        self.single = spec.channel.single(noise)
        self.channel = encoded_n_fold(self.single, self.code.n, self.u)
        self.ens = Ensemble.completely_mixed(self.code.d_s)
        self._kernel = None
        self.cache: dict = {}

    @property
    def kernel(self):
        if self._kernel is None:
            self._kernel = data_matrix(self.ens, self.channel)
        return self._kernel

    def structured(self, key, fn):
        if key not in self.cache:
            self.cache[key] = fn()
        return self.cache[key]


def _evaluate(p: _Point, m: MethodSpec) -> tuple[float, float | None]:
    name = m.name
    if name == "baseline":
        return entanglement_fidelity(maximally_mixed(p.single.d_in), p.single) ** p.code.k, None
    if name == "optimal":
        sol = optimal.solve_optimal_recovery(p.kernel)
        return sol.primal_value, sol.dual_value
    if name == "generic_qec":
        rec = stabilizer.generic_qec_recovery(p.code, p.u)
        return recovered_fidelity(rec.channel(check=False), p.channel, p.ens), None
    if name == "ml_pauli":
        full = n_fold(p.single, p.code.n)
        return stabilizer.ml_pauli_recovery(p.code, full, p.u).fidelity, None
    if name == "eigqer":
        return p.structured("eigqer", lambda: structured.eigqer(p.kernel)).fidelity, None
    if name == "block_eigqer":
        size = int(m.params.get("M", 2))
        rec = p.structured(("block", size), lambda: structured.block_eigqer(p.kernel, size))
        return rec.fidelity, None
    if name == "orderqer":
        order = int(m.params.get("order", 1))
        rec = structured.orderqer(p.kernel, p.channel, p.code.n, order, m.params.get("residual", "eigqer"))
        return rec.fidelity, None
    if name == "adc_family":
        rec = stabilizer.adc_family_recovery(p.code, p.u)
        return recovered_fidelity(rec.channel(check=False), p.channel, p.ens), None
    if name == "leung":
        if p.code.name != "leung_41":
            raise ValueError("the Leung circuit applies to leung_41 only")
        rec = stabilizer.leung_recovery(p.noise)
        return recovered_fidelity(rec.channel(check=False), p.channel, p.ens), None
    if name == "dual_bound":
        kind = m.params.get("kind", "iterated_block")
        if kind == "iterated_block":
            rec = p.structured(("block", 2), lambda: structured.block_eigqer(p.kernel, 2))
            cert = dual_bounds.iterated_block_dual(p.kernel, rec)
        else:
            rec = p.structured("eigqer", lambda: structured.eigqer(p.kernel))
            if kind == "gersgorin":
                cert = dual_bounds.gersgorin_bound(p.kernel, rec)
            elif kind == "svd":
                cert = dual_bounds.svd_dual_point(p.kernel, rec)
                if not cert.valid:
                    cert = dual_bounds.iterative_dual(cert.y, p.kernel)
            else:
                cert = dual_bounds.iterative_dual(dual_bounds.lambda_max_init(p.kernel, rec), p.kernel)
        if not cert.valid:
            raise RuntimeError(f"dual certificate infeasible (residual {cert.residual:.2e})")
        return rec.fidelity, cert.bound
    raise ValueError(f"unknown method {name!r}")


def _run_point(spec: ExperimentSpec, noise: float) -> list[Row]:
    rows = []
    try:
        point = _Point(spec, noise)
    except Exception as exc:  # noqa: BLE001 - row-level error record
        return [Row(noise, m.label, math.nan, None, math.nan, 0.0, f"{type(exc).__name__}: {exc}")
                for m in (MethodSpec("baseline"),) + spec.methods]
    for m in (MethodSpec("baseline"),) + spec.methods:
        t0 = time.perf_counter()
        try:
            fid, bound = _evaluate(point, m)
            rows.append(Row(noise, m.label, fid, bound, normalized_fidelity(fid, point.code.k),
                            time.perf_counter() - t0))
        except Exception as exc:  # noqa: BLE001 - row-level error record
            rows.append(Row(noise, m.label, math.nan, None, math.nan, time.perf_counter() - t0,
                            f"{type(exc).__name__}: {exc}"))
    return rows


def worker_count() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


def run_sweep(spec: ExperimentSpec, workers: int | None = None) -> SweepResult:
    """Evaluate every method at every grid point; failures become error rows."""
    workers = worker_count() if workers is None else workers
    if workers > 1 and len(spec.grid) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_point, [spec] * len(spec.grid), spec.grid))
    else:
        chunks = [_run_point(spec, g) for g in spec.grid]
    order = {m: i for i, m in enumerate(["baseline"] + [m.label for m in spec.methods])}
    rows = sorted((r for c in chunks for r in c), key=lambda r: (r.noise, order.get(r.method, 99)))
    return SweepResult(spec, rows)


@dataclass(frozen=True)
class FitResult:
    coefficients: tuple
    residual: float
    fit_range: tuple
    n_points: int

    @property
    def c0(self) -> float:
        return self.coefficients[0]

    @property
    def c1(self) -> float:
        return self.coefficients[1]

    @property
    def c2(self) -> float:
        return self.coefficients[2]


def fit_polynomial(x, y, degree: int = 2, fit_range=(0.005, 0.1)) -> FitResult:
    """Least-squares ``y ~ sum c_i x^i`` over points with ``x`` inside ``fit_range``."""
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    lo, hi = fit_range
    sel = (x >= lo - 1e-15) & (x <= hi + 1e-15) & np.isfinite(y)
    if sel.sum() < degree + 2:
        raise ValueError(f"need at least {degree + 2} points in {fit_range}, have {int(sel.sum())}")
    coef = np.polynomial.polynomial.polyfit(x[sel], y[sel], degree)
    resid = float(np.linalg.norm(np.polynomial.polynomial.polyval(x[sel], coef) - y[sel]))
    return FitResult(tuple(float(c) for c in coef), resid, (float(lo), float(hi)), int(sel.sum()))


def _fmt(v) -> str:
    if v is None or (isinstance(v, float) and math.isnan(v)):
        return ""
    return f"{v:.12g}"


def to_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in result.rows:
        w.writerow([_fmt(r.noise), r.method, _fmt(r.fidelity), _fmt(r.bound), _fmt(r.normalized)])
    return buf.getvalue()


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def duality_violations(result: SweepResult, slack: float = 1e-6) -> list[tuple]:
    """``(noise, method, fidelity, bound)`` where a certified bound fails to dominate a fidelity."""
    out = []
    for g in sorted({r.noise for r in result.rows}):
        rows = [r for r in result.rows if r.noise == g and r.error is None]
        bounds = [r.bound for r in rows if r.bound is not None]
        if not bounds:
            continue
        b = min(bounds)
        for r in rows:
            if r.method != "baseline" and r.fidelity > b + slack:
                out.append((g, r.method, r.fidelity, b))
    return out


def summary_text(result: SweepResult) -> str:
    spec = result.spec
    lines = [f"experiment: {spec.name}", f"code: {json.dumps(spec.code, sort_keys=True)}",
             f"channel: {spec.channel.kind} {json.dumps(spec.channel.params, sort_keys=True)}",
             f"grid points: {len(spec.grid)}", f"rows: {len(result.rows)}  errors: {len(result.errors)}"]
    if spec.fit:
        lo, hi = spec.fit.fit_range
        lines.append(f"fit: degree {spec.fit.degree} on [{lo}, {hi}]")
        header = "method".ljust(28) + "".join(f"c{i}".rjust(14) for i in range(spec.fit.degree + 1))
        lines.append(header)
        for method in result.methods():
            x, y = result.column(method)
            try:
                f = fit_polynomial(x, y, spec.fit.degree, spec.fit.fit_range)
            except ValueError:
                continue
            lines.append(method.ljust(28) + "".join(f"{c:14.5f}" for c in f.coefficients))
            bx, bound = _bound_column(result, method)
            if bound.size:
                try:
                    fb = fit_polynomial(bx, bound, spec.fit.degree, spec.fit.fit_range)
                    lines.append((method + " [bound]").ljust(28) + "".join(f"{c:14.5f}" for c in fb.coefficients))
                except ValueError:
                    pass
    viol = duality_violations(result)
    lines.append(f"weak-duality violations: {len(viol)}")
    for r in result.errors:
        lines.append(f"error at {r.noise:.6g} [{r.method}]: {r.error}")
    return "\n".join(lines) + "\n"


def _bound_column(result: SweepResult, method: str):
    sel = [r for r in result.rows if r.method == method and r.error is None and r.bound is not None]
    return np.array([r.noise for r in sel]), np.array([r.bound for r in sel])


def emit_report(result: SweepResult, outdir, fmt: str = "csv") -> list[Path]:
    """Write ``<name>.csv`` and ``<name>_summary.txt``; returns the written paths."""
    if fmt != "csv":
        raise ValueError("only the csv report format is supported")
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / f"{result.spec.name}.csv"
    txt_path = out / f"{result.spec.name}_summary.txt"
    with open(csv_path, "w", newline="") as fh:
        fh.write(to_csv(result))
    with open(txt_path, "w", newline="\n") as fh:
        fh.write(summary_text(result))
    return [csv_path, txt_path]


def bundled_specs_dir() -> Path:
    return Path(__file__).with_name("specs")
