"""Render dimerwork CSV files into figures.

Four kinds, one per data product:

    contour      -- sweep CSV -> W or n1(tau) over the (tau*J, U/J) plane
    lines        -- trajectory CSV -> n1(t), n2(t)
    populations  -- populations CSV -> p_n versus kT
    scf          -- scf-trace CSV -> residual versus iteration

Rendering never transforms the numbers: `render` returns the exact arrays it
drew so callers can verify them against the CSV.  Colors and styles are fixed
so the same input always produces the same image.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

SWEEP_HEADER = [
    "protocol",
    "kT_over_J",
    "U_over_J",
    "tauJ",
    "W_over_J",
    "n1_tau",
    "n2_tau",
    "scf_iterations",
    "converged",
    "wall_ms",
]
TRAJECTORY_HEADER = ["t", "n1", "n2"]
POPULATIONS_HEADER = ["kT_over_J", "p0", "p1", "p2", "p3"]
SCF_HEADER = ["iteration", "residual"]

KINDS = ("contour", "lines", "populations", "scf")
CMAP = "viridis"


class SchemaError(ValueError):
    """Input CSV does not match the expected dimerwork layout."""


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    inputs: tuple[str, ...]
    output: str
    value: str = "W"  # contour only: "W" or "n1"
    protocol: str | None = None
    kT: float | None = None
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    overlay: str | None = None  # optional tauJ,U curve drawn as a red dashed line
    title: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown figure kind {self.kind!r}; expected one of {KINDS}")
        if not self.inputs:
            raise SchemaError("at least one input CSV is required")
        if self.kind == "contour" and self.value not in ("W", "n1"):
            raise SchemaError(f"contour value must be 'W' or 'n1', got {self.value!r}")


def _read_csv(path: str, expected_header: list[str]) -> list[dict]:
    p = Path(path)
    if not p.exists():
        raise SchemaError(f"input CSV not found: {path}")
    with p.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != expected_header:
            raise SchemaError(
                f"{path}: expected header {','.join(expected_header)}, found "
                f"{','.join(reader.fieldnames or ['<empty>'])}"
            )
        rows = list(reader)
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    return rows


def _select_sweep(rows: list[dict], protocol: str | None, kT: float | None):
    protocols = sorted({r["protocol"] for r in rows})
    if protocol is None:
        if len(protocols) > 1:
            raise SchemaError(f"sweep holds several protocols {protocols}; pass one explicitly")
        protocol = protocols[0]
    elif protocol not in protocols:
        raise SchemaError(f"protocol {protocol!r} not in sweep (has {protocols})")
    rows = [r for r in rows if r["protocol"] == protocol]
    kts = sorted({float(r["kT_over_J"]) for r in rows})
    if kT is None:
        if len(kts) > 1:
            raise SchemaError(f"sweep holds several temperatures {kts}; pass one explicitly")
        kT = kts[0]
    elif kT not in kts:
        raise SchemaError(f"kT={kT} not in sweep (has {kts})")
    return [r for r in rows if float(r["kT_over_J"]) == kT], protocol, kT


def _pivot(rows: list[dict], column: str):
    taus = np.array(sorted({float(r["tauJ"]) for r in rows}))
    us = np.array(sorted({float(r["U_over_J"]) for r in rows}))
    lookup = {(float(r["tauJ"]), float(r["U_over_J"])): float(r[column]) for r in rows}
    if len(lookup) != len(taus) * len(us):
        raise SchemaError("sweep is not a complete (tau, U) grid")
    z = np.empty((len(us), len(taus)))
    for i, u in enumerate(us):
        for j, t in enumerate(taus):
            z[i, j] = lookup[(t, u)]
    return taus, us, z


def _load_overlay(path: str):
    pts = np.loadtxt(path, delimiter=",", ndmin=2)
    if pts.shape[1] != 2:
        raise SchemaError(f"overlay {path} must have two columns: tauJ,U")
    return pts


def _render_contour(spec: FigureSpec, ax):
    rows = _read_csv(spec.inputs[0], SWEEP_HEADER)
    rows, protocol, kt = _select_sweep(rows, spec.protocol, spec.kT)
    column = "W_over_J" if spec.value == "W" else "n1_tau"
    taus, us, z = _pivot(rows, column)
    mesh = ax.contourf(taus, us, z, levels=24, cmap=CMAP)
    ax.contour(taus, us, z, levels=24, colors="k", linewidths=0.3, alpha=0.4)
    cbar = plt.colorbar(mesh, ax=ax)
    cbar.set_label(r"$W/J$" if spec.value == "W" else r"$n_1(\tau)$")
    ax.set_xlabel(r"$\tau \cdot J$")
    ax.set_ylabel(r"$U/J$")
    ax.set_title(spec.title or f"{protocol}, $k_B T = {kt:g}\\,J$")
    if spec.overlay:
        pts = _load_overlay(spec.overlay)
        ax.plot(pts[:, 0], pts[:, 1], "r--", linewidth=1.2)
    return {"tauJ": taus, "U_over_J": us, column: z}


def _render_lines(spec: FigureSpec, ax):
    data = {}
    for path in spec.inputs:
        rows = _read_csv(path, TRAJECTORY_HEADER)
        t = np.array([float(r["t"]) for r in rows])
        n1 = np.array([float(r["n1"]) for r in rows])
        n2 = np.array([float(r["n2"]) for r in rows])
        label = Path(path).stem
        ax.plot(t, n1, color="firebrick", label=f"{label} $n_1$")
        ax.plot(t, n2, color="steelblue", label=f"{label} $n_2$")
        data[path] = {"t": t, "n1": n1, "n2": n2}
    ax.set_xlabel(r"$t \cdot J$")
    ax.set_ylabel(r"$n_j(t)$")
    ax.set_ylim(0.0, 2.0)
    ax.legend(fontsize=8)
    ax.set_title(spec.title or "site occupations")
    return data


def _render_populations(spec: FigureSpec, ax):
    rows = _read_csv(spec.inputs[0], POPULATIONS_HEADER)
    kt = np.array([float(r["kT_over_J"]) for r in rows])
    data = {"kT_over_J": kt}
    for n in range(4):
        p = np.array([float(r[f"p{n}"]) for r in rows])
        ax.semilogx(kt, p, label=rf"$p_{n}$")
        data[f"p{n}"] = p
    ax.axhline(0.25, color="gray", linestyle=":", linewidth=0.8)
    ax.set_xlabel(r"$k_B T / J$")
    ax.set_ylabel(r"$p_n$")
    ax.set_ylim(0.0, 1.05)
    ax.legend()
    ax.set_title(spec.title or "thermal populations")
    return data


def _render_scf(spec: FigureSpec, ax):
    rows = _read_csv(spec.inputs[0], SCF_HEADER)
    it = np.array([int(r["iteration"]) for r in rows])
    res = np.array([float(r["residual"]) for r in rows])
    ax.semilogy(it, res, "o-", color="darkslateblue", markersize=3)
    ax.axhline(1e-5, color="gray", linestyle=":", linewidth=0.8)
    ax.set_xlabel("iteration")
    ax.set_ylabel("density residual")
    ax.set_title(spec.title or "self-consistency trace")
    return {"iteration": it, "residual": res}


_RENDERERS = {
    "contour": _render_contour,
    "lines": _render_lines,
    "populations": _render_populations,
    "scf": _render_scf,
}


def render(spec: FigureSpec) -> dict:
    """Draw the figure to spec.output and return the exact plotted arrays."""
    fig, ax = plt.subplots(figsize=(6.0, 4.5), dpi=150)
    try:
        data = _RENDERERS[spec.kind](spec, ax)
        if spec.xlim:
            ax.set_xlim(*spec.xlim)
        if spec.ylim:
            ax.set_ylim(*spec.ylim)
        fig.tight_layout()
        fig.savefig(spec.output)
    finally:
        plt.close(fig)
    return data
