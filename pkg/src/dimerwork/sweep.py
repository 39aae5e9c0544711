"""Parallel (protocol, kT, U, tau) parameter sweeps and their CSV serialization.

Every grid point is a pure computation; the worker pool only changes the
schedule, never the arithmetic, so the assembled table (and its CSV bytes,
with timing zeroed) is identical for any worker count.  Exact and
non-interacting tasks propagate once per (U, tau) and reuse the propagator
across temperatures; mean-field tasks depend on kT through their thermal
densities and run per temperature.
"""

from __future__ import annotations

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dynamics import TimeGrid
from .model import SIGN_NARRATIVE, DomainError, DriveParams
from .protocols import (
    ProtocolKind,
    alda_run,
    exact_family,
    measure,
    noninteracting_family,
    plda_family,
    propagate_family,
)
from .thermo import KT_PRESETS

CSV_HEADER = "protocol,kT_over_J,U_over_J,tauJ,W_over_J,n1_tau,n2_tau,scf_iterations,converged,wall_ms"

EPS_RELATIVE = 1e-6


def _fmt(x: float) -> str:
    return f"{x:.12g}"


@dataclass(frozen=True)
class SweepGrid:
    """The swept parameter axes; values must be positive (U may be 0) and increasing."""

    U_values: tuple[float, ...]
    tau_values: tuple[float, ...]
    kT_values: tuple[float, ...] = KT_PRESETS
    protocols: tuple[ProtocolKind, ...] = (ProtocolKind.EXACT,)

    def __post_init__(self):
        object.__setattr__(self, "U_values", tuple(float(u) for u in self.U_values))
        object.__setattr__(self, "tau_values", tuple(float(t) for t in self.tau_values))
        object.__setattr__(self, "kT_values", tuple(float(k) for k in self.kT_values))
        object.__setattr__(self, "protocols", tuple(ProtocolKind(p) for p in self.protocols))
        for name, vals, lo in (
            ("U_values", self.U_values, 0.0),
            ("tau_values", self.tau_values, None),
            ("kT_values", self.kT_values, None),
        ):
            if not vals:
                raise DomainError(f"{name} must be non-empty")
            if any(v < lo if lo is not None else v <= 0 for v in vals):
                raise DomainError(f"{name} contains out-of-range values")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise DomainError(f"{name} must be strictly increasing")

    @classmethod
    def default(cls, protocols=(ProtocolKind.EXACT,), n_u: int = 40, n_tau: int = 40) -> "SweepGrid":
        return cls(
            U_values=tuple(np.linspace(0.0, 10.0, n_u)),
            tau_values=tuple(np.linspace(0.1, 10.0, n_tau)),
            protocols=tuple(protocols),
        )


@dataclass(frozen=True)
class SweepRow:
    protocol: str
    kT: float
    U: float
    tauJ: float
    W: float
    n1_tau: float
    n2_tau: float
    scf_iterations: int
    converged: bool
    wall_time: float  # seconds

    def sort_key(self):
        return (self.protocol, self.kT, self.U, self.tauJ)


@dataclass(frozen=True)
class SweepResult:
    grid: SweepGrid
    rows: tuple[SweepRow, ...]

    def select(self, **eq) -> list[SweepRow]:
        out = []
        for r in self.rows:
            if all(getattr(r, k) == v for k, v in eq.items()):
                out.append(r)
        return out


@dataclass(frozen=True)
class SweepSettings:
    """Knobs shared by every point of a sweep."""

    A0: float = 1.0
    Atau: float = 7.0
    sign_convention: str = SIGN_NARRATIVE
    M: int | None = None
    plda_density_source: str = "scf"
    alda_tol: float = 1e-5
    alda_max_iter: int = 200
    alda_mixing: float = 1.0


def _grid_for(tau: float, settings: SweepSettings) -> TimeGrid:
    return TimeGrid.for_duration(tau, settings.M)


def _params(u: float, tau: float, s: SweepSettings) -> DriveParams:
    return DriveParams(tau=tau, U=u, A0=s.A0, Atau=s.Atau, sign_convention=s.sign_convention)


def _compute_task(args) -> list[SweepRow]:
    protocol, u, tau, kts, settings = args
    rows = []
    try:
        p = _params(u, tau, settings)
        grid = _grid_for(tau, settings)
        if protocol in (ProtocolKind.EXACT, ProtocolKind.NONINTERACTING):
            t0 = time.perf_counter()
            fam = (exact_family if protocol is ProtocolKind.EXACT else noninteracting_family)(p, grid)
            pf = propagate_family(fam)
            shared = time.perf_counter() - t0
            for kt in kts:
                t1 = time.perf_counter()
                w, n1, n2, _ = measure(pf, kt)
                wall = shared / len(kts) + (time.perf_counter() - t1)
                rows.append(SweepRow(protocol.value, kt, u, tau, w, n1, n2, 0, True, wall))
        elif protocol is ProtocolKind.STATIC_PLDA:
            for kt in kts:
                t0 = time.perf_counter()
                fam, iters = plda_family(p, kt, grid, settings.plda_density_source)
                w, n1, n2, _ = measure(propagate_family(fam), kt)
                wall = time.perf_counter() - t0
                rows.append(SweepRow(protocol.value, kt, u, tau, w, n1, n2, iters, True, wall))
        else:
            for kt in kts:
                t0 = time.perf_counter()
                res = alda_run(
                    p,
                    kt,
                    grid,
                    tol=settings.alda_tol,
                    max_iter=settings.alda_max_iter,
                    mixing=settings.alda_mixing,
                )
                wall = time.perf_counter() - t0
                rows.append(
                    SweepRow(
                        protocol.value,
                        kt,
                        u,
                        tau,
                        res.work,
                        float(res.trajectory.n1[-1]),
                        float(res.trajectory.n2[-1]),
                        res.scf.iterations,
                        res.scf.converged,
                        wall,
                    )
                )
    except Exception:  # per-point failures must not kill the sweep
        done = {(r.kT) for r in rows}
        for kt in kts:
            if kt not in done:
                rows.append(
                    SweepRow(protocol.value, kt, u, tau, float("nan"), float("nan"), float("nan"), 0, False, 0.0)
                )
    return rows


def run_sweep(
    grid: SweepGrid,
    workers: int | None = None,
    settings: SweepSettings = SweepSettings(),
) -> SweepResult:
    """Evaluate every grid point; deterministic row order for any worker count."""
    tasks = [
        (protocol, u, tau, grid.kT_values, settings)
        for protocol in grid.protocols
        for u in grid.U_values
        for tau in grid.tau_values
    ]
    if workers is None or workers <= 1 or len(tasks) == 1:
        chunks = map(_compute_task, tasks)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_compute_task, tasks, chunksize=max(1, len(tasks) // (8 * workers))))
    rows = [row for chunk in chunks for row in chunk]
    rows.sort(key=SweepRow.sort_key)
    return SweepResult(grid=grid, rows=tuple(rows))


def sweep_csv_lines(result: SweepResult, timing: str = "live"):
    """Yield CSV lines; timing="zero" writes a deterministic wall_ms column."""
    if timing not in ("live", "zero"):
        raise DomainError(f"timing must be 'live' or 'zero', got {timing!r}")
    yield CSV_HEADER
    for r in result.rows:
        wall_ms = 0.0 if timing == "zero" else r.wall_time * 1e3
        yield ",".join(
            [
                r.protocol,
                _fmt(r.kT),
                _fmt(r.U),
                _fmt(r.tauJ),
                _fmt(r.W),
                _fmt(r.n1_tau),
                _fmt(r.n2_tau),
                str(r.scf_iterations),
                "true" if r.converged else "false",
                _fmt(wall_ms),
            ]
        )


def write_sweep_csv(result: SweepResult, path, timing: str = "live"):
    with open(path, "w", encoding="utf-8") as fh:
        for line in sweep_csv_lines(result, timing):
            fh.write(line + "\n")


def read_sweep_rows(path) -> list[SweepRow]:
    import csv as _csv

    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        if reader.fieldnames != CSV_HEADER.split(","):
            raise DomainError(f"unexpected sweep CSV header in {path}")
        for rec in reader:
            rows.append(
                SweepRow(
                    protocol=rec["protocol"],
                    kT=float(rec["kT_over_J"]),
                    U=float(rec["U_over_J"]),
                    tauJ=float(rec["tauJ"]),
                    W=float(rec["W_over_J"]),
                    n1_tau=float(rec["n1_tau"]),
                    n2_tau=float(rec["n2_tau"]),
                    scf_iterations=int(rec["scf_iterations"]),
                    converged=rec["converged"] == "true",
                    wall_time=float(rec["wall_ms"]) / 1e3,
                )
            )
    return rows


@dataclass(frozen=True)
class ErrorRow:
    kT: float
    U: float
    tauJ: float
    rel_error: float


def relative_error_map(approx: SweepResult, exact: SweepResult) -> list[ErrorRow]:
    """|W_approx - W_exact| / max(|W_exact|, eps), aligned point by point.

    Each argument must hold a single protocol; points are matched on
    (kT, U, tau).
    """

    def key(r: SweepRow):
        return (r.kT, r.U, r.tauJ)

    for res in (approx, exact):
        if len({r.protocol for r in res.rows}) != 1:
            raise DomainError("relative_error_map expects single-protocol sweeps")
    ex = {key(r): r for r in exact.rows}
    out = []
    for r in approx.rows:
        k = key(r)
        if k not in ex:
            raise DomainError(f"grid mismatch: {k} missing from the exact sweep")
        denom = max(abs(ex[k].W), EPS_RELATIVE)
        out.append(ErrorRow(kT=r.kT, U=r.U, tauJ=r.tauJ, rel_error=abs(r.W - ex[k].W) / denom))
    if len(out) != len(exact.rows):
        raise DomainError("grid mismatch: sweeps have different point counts")
    return out
