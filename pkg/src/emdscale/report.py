"""CSV / JSON / SVG writers for decompositions, summary tables, regression
grids and causality spectra."""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .analytics import BandSummary, ImfSummary, significance_stars
from .causality import CausalitySpectrum
from .emd import Decomposition
from .regression import ResultGrid
from .series import format_float


def clean(value: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, NaN to None, inf to "inf"."""
    if isinstance(value, dict):
        return {str(k): clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [clean(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        v = float(value)
        if math.isnan(v):
            return None
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return value


def dumps_json(obj: Any) -> str:
    return json.dumps(clean(obj), indent=2, allow_nan=False) + "\n"


def dumps_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def _num(v, fmt: str | None = None) -> str:
    if v is None:
        return ""
    v = float(v)
    if math.isnan(v):
        return ""
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, fmt) if fmt else format_float(v)


# -- decompositions -----------------------------------------------------------


def decomposition_csv(d: Decomposition) -> str:
    header = ["t", "source", *(f"imf{c.index}" for c in d.imfs), "residue"]
    cols = [d.source.values, *(c.values for c in d.imfs), d.residue]
    rows = (
        [str(p), *(format_float(c[i]) for c in cols)]
        for i, p in enumerate(d.source.periods)
    )
    return dumps_csv(header, rows)


def decomposition_sidecar(d: Decomposition, **extra) -> dict:
    return {
        **extra,
        "series": d.source.name,
        "start": str(d.source.start),
        "end": str(d.source.end),
        "config": d.config.to_dict(),
        **d.diagnostics,
        "n_imfs": d.n_imfs,
    }


# -- summary tables ------------------------------------------------------------


def _corr_cell(r, p) -> str:
    return "" if r is None else f"{r:.3f}{significance_stars(p)}"


def imf_table_rows(variable: str, rows: list[ImfSummary]) -> list[list[str]]:
    return [
        [
            variable,
            s.mode,
            _num(s.mean_period, ".2f"),
            _corr_cell(s.pearson_r, s.pearson_p),
            _corr_cell(s.kendall_tau, s.kendall_p),
            _num(100.0 * s.variance_share, ".2f"),
        ]
        for s in rows
    ]


IMF_TABLE_HEADER = ["variable", "mode", "mean_period", "pearson", "kendall", "variance_pct"]
BAND_TABLE_HEADER = ["variable", "component", "pearson", "kendall", "variance_pct"]


def imf_summary_json(s: ImfSummary) -> dict:
    return {
        "mode": s.mode,
        "mean_period": s.mean_period,
        "pearson_r": s.pearson_r,
        "pearson_p": s.pearson_p,
        "pearson_stars": s.pearson_stars,
        "kendall_tau": s.kendall_tau,
        "kendall_p": s.kendall_p,
        "kendall_stars": s.kendall_stars,
        "variance_share": s.variance_share,
        "variance_pct": round(100.0 * s.variance_share, 2),
    }


def band_table_rows(variable: str, rows: list[BandSummary]) -> list[list[str]]:
    return [
        [
            variable,
            b.band,
            _corr_cell(b.pearson_r, b.pearson_p),
            _corr_cell(b.kendall_tau, b.kendall_p),
            _num(100.0 * b.variance_share, ".2f"),
        ]
        for b in rows
    ]


def band_summary_json(b: BandSummary) -> dict:
    return {
        "component": b.band,
        "modes": list(b.members),
        "pearson_r": b.pearson_r,
        "pearson_p": b.pearson_p,
        "pearson_stars": b.pearson_stars,
        "kendall_tau": b.kendall_tau,
        "kendall_p": b.kendall_p,
        "kendall_stars": b.kendall_stars,
        "variance_share": b.variance_share,
        "variance_pct": round(100.0 * b.variance_share, 2),
    }


# -- regression grids ---------------------------------------------------------


def grid_cell(grid: ResultGrid, row: str, col: str) -> dict | None:
    res = grid.cells.get(col)
    if res is None:
        return None
    i = res.names.index(row)
    p = float(res.p_values[i])
    return {"coef": float(res.coefficients[i]), "t": float(res.t_stats[i]), "stars": significance_stars(p)}


def grid_csv(grid: ResultGrid) -> str:
    rows = []
    for name in grid.row_names:
        line = [name]
        for col in grid.columns:
            cell = grid_cell(grid, name, col)
            line.append("" if cell is None else f"{cell['coef']:.4f}{cell['stars']} ({cell['t']:.3f})")
        rows.append(line)
    if grid.spec.estimator == "ols":
        rows.append(["R2"] + [_num(grid.cells[c].r_squared, ".4f") if grid.cells[c] else "" for c in grid.columns])
    else:
        rows.append(
            ["Cragg-Donald F"]
            + [_num(grid.cells[c].cragg_donald_f, ".2f") if grid.cells[c] else "" for c in grid.columns]
        )
    rows.append(["N"] + [str(grid.cells[c].n_obs) if grid.cells[c] else "" for c in grid.columns])
    return dumps_csv(["", *grid.columns], rows)


def grid_json(grid: ResultGrid, **extra) -> dict:
    spec = grid.spec
    out: dict[str, Any] = {
        **extra,
        "name": spec.label,
        "estimator": spec.estimator,
        "dependent": spec.dependent,
        "regressors": list(spec.regressors),
        "intercept": spec.intercept,
        "columns": list(grid.columns),
        "rows": {name: {col: grid_cell(grid, name, col) for col in grid.columns} for name in grid.row_names},
        "n_obs": {c: (grid.cells[c].n_obs if grid.cells[c] else None) for c in grid.columns},
    }
    if spec.estimator == "ols":
        out["r_squared"] = {c: (grid.cells[c].r_squared if grid.cells[c] else None) for c in grid.columns}
    else:
        out["endogenous"] = list(spec.endogenous)
        out["instrument_lags"] = spec.instrument_lags
        out["cragg_donald_f"] = {
            c: (grid.cells[c].cragg_donald_f if grid.cells[c] else None) for c in grid.columns
        }
        out["stock_yogo"] = {
            c: (grid.cells[c].stock_yogo.label if grid.cells[c] and grid.cells[c].stock_yogo else None)
            for c in grid.columns
        }
    out["errors"] = dict(grid.errors)
    out["warnings"] = list(grid.warnings)
    return out


# -- causality spectra --------------------------------------------------------


def spectrum_csv(sp: CausalitySpectrum) -> str:
    rows = (
        [format_float(w), format_float(s), format_float(sp.critical_value), "1" if s > sp.critical_value else "0"]
        for w, s in zip(sp.grid, sp.statistics)
    )
    return dumps_csv(["omega", "statistic", "critical", "significant"], rows)


def spectrum_json(sp: CausalitySpectrum, **extra) -> dict:
    return {
        **extra,
        "cause": sp.cause,
        "effect": sp.effect,
        "p": sp.p,
        "test": sp.test,
        "critical_value": sp.critical_value,
        "n_obs": sp.n_obs,
        "spectral_radius": sp.spectral_radius,
        "bands": [
            {"omega": [a, b], "cycle": [ca, cb]}
            for (a, b), (ca, cb) in zip(sp.significant_bands, sp.cycle_bands)
        ],
        "notes": list(sp.notes),
    }


# -- figures ------------------------------------------------------------------


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "emdscale"
    return plt


def _save_svg(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def causality_svg(spectra: Sequence[CausalitySpectrum], path: Path) -> None:
    """One panel per spectrum: statistic curve and one horizontal critical line."""
    plt = _pyplot()
    fig, axes = plt.subplots(len(spectra), 1, figsize=(6, 2.6 * len(spectra)), squeeze=False)
    for i, (ax, sp) in enumerate(zip(axes[:, 0], spectra)):
        ax.plot(sp.grid, sp.statistics, color="black", lw=1.2, gid=f"statistic-{i}")
        ax.axhline(sp.critical_value, color="tab:red", lw=1.0, ls="--", gid=f"critical-line-{i}")
        ax.set_xlim(0, math.pi)
        ax.set_title(f"{sp.cause} -> {sp.effect} (p = {sp.p})", fontsize=9)
        ax.set_xlabel("omega")
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)


def imf_stack_svg(d: Decomposition, path: Path) -> None:
    plt = _pyplot()
    comps = [("source", d.source.values), *((f"IMF{c.index}", c.values) for c in d.imfs), ("residue", d.residue)]
    fig, axes = plt.subplots(len(comps), 1, figsize=(6, 1.2 * len(comps)), sharex=True, squeeze=False)
    for ax, (label, values) in zip(axes[:, 0], comps):
        ax.plot(values, lw=0.9, color="tab:blue")
        ax.set_ylabel(label, fontsize=7)
        ax.tick_params(labelsize=6)
    fig.tight_layout()
    _save_svg(fig, path)
    plt.close(fig)
