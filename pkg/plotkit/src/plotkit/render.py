"""The three renderers.  Each returns the figure plus the exact data series
it drew, so tests can check the plotted numbers against the CSV without
pixel comparisons."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from matplotlib.colors import TwoSlopeNorm

from .io import PlotError, Table, read_table, require_columns

KINDS = ("delay_curve", "phase_map", "pn_bars")

FIGSIZE = (7.0, 4.5)


@dataclass(frozen=True)
class PlotJob:
    kind: str
    inputs: tuple[str, ...]
    out: str
    title: str | None = None
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PlotError(f"unknown plot kind {self.kind!r}; choose from {KINDS}")
        if not self.inputs:
            raise PlotError("at least one input CSV is required")


@dataclass
class PlotResult:
    series: dict
    width_px: int
    height_px: int
    warnings: list[str] = field(default_factory=list)


def _finish(fig, job: PlotJob, series, warnings) -> PlotResult:
    if job.title:
        fig.suptitle(job.title)
    fig.savefig(job.out, dpi=job.dpi)
    w, h = fig.get_size_inches()
    plt.close(fig)
    for msg in warnings:
        print(f"warning: {msg}", file=sys.stderr)
    return PlotResult(series=series, width_px=int(round(w * job.dpi)),
                      height_px=int(round(h * job.dpi)), warnings=warnings)


def _delay_curve(job: PlotJob) -> PlotResult:
    table = read_table(job.inputs[0])
    require_columns(table, ("tau", "pbar1", "pbar2"), job.kind)
    warnings = []
    fig, ax = plt.subplots(figsize=FIGSIZE)
    series = {"tau": [], "curves": {}}
    rows = [r for r in table.rows if r.get("tau") is not None]
    rows.sort(key=lambda r: r["tau"])
    if not rows:
        warnings.append(f"{table.path}: no data rows, drawing empty axes")
    else:
        tau = np.array([r["tau"] for r in rows], dtype=float)
        series["tau"] = tau.tolist()
        for name, style in (("pbar1", "o-"), ("pbar2", "s-"), ("pbar3", "^-")):
            if name not in table.columns:
                continue
            vals = [r.get(name) for r in rows]
            if any(v is None for v in vals):
                if all(v is None for v in vals):
                    continue
                warnings.append(f"{table.path}: column {name} has gaps; skipped")
                continue
            y = np.array(vals, dtype=float)
            ax.plot(tau, y, style, label=name.replace("pbar", "n = "))
            series["curves"][name] = y.tolist()
    ax.axhline(1.0, color="0.4", lw=0.8, ls="--")  # no-feedback reference
    ax.set_xlabel(r"delay $\tau\,\Gamma$")
    ax.set_ylabel("normalized photon probability")
    if series["curves"]:
        ax.legend()
    return _finish(fig, job, series, warnings)


def _phase_map(job: PlotJob) -> PlotResult:
    table = read_table(job.inputs[0])
    require_columns(table, ("tau", "phi", "r_over_r_baseline"), job.kind)
    warnings = []
    rows = [r for r in table.rows
            if r.get("tau") is not None and r.get("phi") is not None
            and r.get("r_over_r_baseline") is not None]
    fig, ax = plt.subplots(figsize=FIGSIZE)
    series = {"tau": [], "phi": [], "grid": []}
    if not rows:
        warnings.append(f"{table.path}: no data rows, drawing empty axes")
    else:
        taus = sorted({r["tau"] for r in rows})
        phis = sorted({r["phi"] for r in rows})
        grid = np.full((len(phis), len(taus)), np.nan)
        for r in rows:
            grid[phis.index(r["phi"]), taus.index(r["tau"])] = r["r_over_r_baseline"]
        lo = np.nanmin(grid)
        hi = np.nanmax(grid)
        norm = TwoSlopeNorm(vcenter=1.0, vmin=min(lo, 1.0 - 1e-9),
                            vmax=max(hi, 1.0 + 1e-9))
        mesh = ax.pcolormesh(_edges(taus), _edges(phis),
                             np.ma.masked_invalid(grid),
                             cmap="RdBu_r", norm=norm, shading="flat")
        fig.colorbar(mesh, ax=ax, label=r"$r / r_{\mathrm{no\,feedback}}$")
        series = {"tau": list(taus), "phi": list(phis), "grid": grid.tolist()}
    ax.set_xlabel(r"delay $\tau\,\Gamma$")
    ax.set_ylabel(r"feedback phase $\phi$")
    return _finish(fig, job, series, warnings)


def _edges(centers) -> np.ndarray:
    c = np.asarray(centers, dtype=float)
    if c.size == 1:
        half = 0.5 * (abs(c[0]) if c[0] != 0 else 0.5)
        return np.array([c[0] - half, c[0] + half])
    mid = 0.5 * (c[1:] + c[:-1])
    return np.concatenate(([c[0] - (mid[0] - c[0])], mid,
                           [c[-1] + (c[-1] - mid[-1])]))


def _pn_bars(job: PlotJob) -> PlotResult:
    warnings = []
    groups = []
    for path in job.inputs:
        table = read_table(path)
        require_columns(table, ("p0", "p1", "p2", "p3"), job.kind)
        for r in table.rows:
            vals = [r.get(f"p{n}") for n in range(4)]
            if any(v is None for v in vals):
                warnings.append(f"{path}: row with undefined p(n) skipped")
                continue
            if r.get("feedback") is False:
                label = "no feedback"
            else:
                tau = r.get("tau")
                label = rf"$\tau\Gamma$={tau:g}" if tau is not None else "feedback"
            groups.append((label, vals))
    fig, ax = plt.subplots(figsize=FIGSIZE)
    series = {"labels": [], "values": []}
    if not groups:
        warnings.append("no plottable rows, drawing empty axes")
    else:
        width = 0.8 / len(groups)
        x = np.arange(4)
        for i, (label, vals) in enumerate(groups):
            ax.bar(x + (i - (len(groups) - 1) / 2.0) * width, vals, width,
                   label=label)
            series["labels"].append(label)
            series["values"].append(list(vals))
        ax.set_xticks(x)
        ax.set_xticklabels([f"p({n})" for n in range(4)])
        ax.legend()
    ax.set_ylabel("probability")
    return _finish(fig, job, series, warnings)


_RENDERERS = {"delay_curve": _delay_curve, "phase_map": _phase_map,
              "pn_bars": _pn_bars}


def render(job: PlotJob) -> PlotResult:
    """Render one job to its output file and return the plotted series."""
    return _RENDERERS[job.kind](job)
