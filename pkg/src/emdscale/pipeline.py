"""End-to-end pipeline: ingest, transform, slice, decompose, summarize,
regress and test causality for every configured period."""

from __future__ import annotations

import hashlib
import json
import logging
import shutil
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np
import scipy

from . import __version__, report
from .analytics import (
    BandSummary,
    ImfSummary,
    aggregate_bands,
    band_map_from_groups,
    default_band_map,
    summarize_decomposition,
)
from .causality import CausalitySpectrum, VarError, causality_spectrum, default_grid
from .config import ConfigError, PipelineConfig, as_dict, check_columns
from .emd import Decomposition, DecompositionError, decompose
from .regression import RegressionError, ResultGrid, scale_regressions
from .series import SeriesError, SeriesTable, log_transform, read_series_table, to_per_capita

logger = logging.getLogger(__name__)

STAGES = ("decompose", "summarize", "regress", "causality")

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class PipelineError(RuntimeError):
    def __init__(self, stage: str, message: str, exit_code: int):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
        self.exit_code = exit_code


@dataclass
class PeriodResult:
    name: str
    start: str
    end: str
    n_obs: int
    decompositions: dict[str, Decomposition] = field(default_factory=dict)
    imf_summaries: dict[str, list[ImfSummary]] = field(default_factory=dict)
    band_summaries: dict[str, list[BandSummary]] = field(default_factory=dict)
    ols_grids: dict[str, ResultGrid] = field(default_factory=dict)
    tsls_grids: dict[str, ResultGrid] = field(default_factory=dict)
    spectra: dict[str, list[CausalitySpectrum]] = field(default_factory=dict)


@dataclass
class ReportBundle:
    config: PipelineConfig
    periods: dict[str, PeriodResult]
    input_digest: str
    stages: tuple[str, ...]
    diagnostics: list[str] = field(default_factory=list)


def _apply_transforms(config: PipelineConfig, table: SeriesTable) -> SeriesTable:
    for t in config.transforms:
        src = table[t.column]
        if t.op == "log":
            out = log_transform(src)
        else:
            out = to_per_capita(src, table[t.population])
        table = table.replace(out, key=t.target)
    return table


def _band_map(config: PipelineConfig, d: Decomposition, diagnostics: list[str], label: str):
    if config.bands is None:
        return default_band_map(d.n_imfs)
    bm = band_map_from_groups(config.bands)
    if any(k not in bm for k in range(1, d.n_imfs + 1)):
        diagnostics.append(
            f"{label}: configured bands do not cover {d.n_imfs} modes; default band map used"
        )
        return default_band_map(d.n_imfs)
    return bm


def run_pipeline(config: PipelineConfig, stages: Iterable[str] | None = None) -> ReportBundle:
    """Execute every selected stage for every period and collect results.

    Errors are re-raised as :class:`PipelineError` tagged with the stage and
    the exit code the CLI should use.
    """
    stages = tuple(STAGES if not stages else stages)
    bad = set(stages) - set(STAGES)
    if bad:
        raise PipelineError("config", f"unknown stages {sorted(bad)}", EXIT_CONFIG)
    need_decomp = any(s in stages for s in ("decompose", "summarize", "regress"))

    try:
        raw = config.input_path.read_bytes()
    except OSError as exc:
        raise PipelineError("ingest", f"cannot read {config.input_path}: {exc}", EXIT_DATA) from None
    try:
        table = read_series_table(config.input_path, config.columns, config.period_column, config.delimiter)
    except SeriesError as exc:
        raise PipelineError("ingest", str(exc), EXIT_DATA) from None
    try:
        check_columns(config, table.names)
        first, last = table.index[0], table.index[-1]
        for name, (a, b) in config.periods.items():
            if a < first or b > last:
                raise ConfigError(f"period {name!r} ({a}..{b}) outside data range {first}..{last}")
    except ConfigError as exc:
        raise PipelineError("config", str(exc), EXIT_CONFIG) from None
    try:
        table = _apply_transforms(config, table)
    except SeriesError as exc:
        raise PipelineError("transform", str(exc), EXIT_DATA) from None

    diagnostics: list[str] = []
    results: dict[str, PeriodResult] = {}
    variables = config.variables()
    for pname, (a, b) in config.periods.items():
        try:
            sub = table.slice(a, b)
        except SeriesError as exc:
            raise PipelineError("slice", f"{pname}: {exc}", EXIT_DATA) from None
        pr = PeriodResult(pname, str(a), str(b), len(sub.index))
        results[pname] = pr

        if need_decomp:
            for v in variables:
                try:
                    d = decompose(sub[v], config.sift)
                except (DecompositionError, ValueError) as exc:
                    raise PipelineError("decompose", f"{pname}/{v}: {exc}", EXIT_NUMERIC) from None
                pr.decompositions[v] = d
                diagnostics.extend(f"{pname}: {w}" for w in d.diagnostics["warnings"])

        if "summarize" in stages:
            for v, d in pr.decompositions.items():
                try:
                    pr.imf_summaries[v] = summarize_decomposition(d)
                    bm = _band_map(config, d, diagnostics, f"{pname}/{v}")
                    pr.band_summaries[v] = aggregate_bands(d, bm)
                except ValueError as exc:
                    raise PipelineError("summarize", f"{pname}/{v}: {exc}", EXIT_NUMERIC) from None

        if "regress" in stages:
            for spec in config.regressions:
                try:
                    grid = scale_regressions(sub, pr.decompositions, spec)
                except (RegressionError, np.linalg.LinAlgError) as exc:
                    raise PipelineError("regress", f"{pname}/{spec.label}: {exc}", EXIT_NUMERIC) from None
                target = pr.ols_grids if spec.estimator == "ols" else pr.tsls_grids
                target[spec.label] = grid
                diagnostics.extend(f"{pname}: {w}" for w in grid.warnings)

        if "causality" in stages:
            for cs in config.causality:
                controls = None
                if cs.controls:
                    controls = np.column_stack([sub[c].values for c in cs.controls])
                try:
                    out = causality_spectrum(
                        sub[cs.cause].values,
                        sub[cs.effect].values,
                        cs.lag,
                        default_grid(cs.grid_points),
                        p_max=cs.p_max,
                        test=cs.test,
                        controls=controls,
                        names=(cs.cause, cs.effect),
                        both=cs.both_directions,
                    )
                except (VarError, ValueError, np.linalg.LinAlgError) as exc:
                    raise PipelineError("causality", f"{pname}/{cs.label}: {exc}", EXIT_NUMERIC) from None
                spectra = list(out) if cs.both_directions else [out]
                pr.spectra[cs.label] = spectra
                for sp in spectra:
                    diagnostics.extend(f"{pname}: {sp.cause} -> {sp.effect}: {n}" for n in sp.notes)

    digest = hashlib.sha256(raw).hexdigest()
    return ReportBundle(config, results, digest, stages, diagnostics)


def _replaceable(path: Path) -> bool:
    if not path.is_dir():
        return False
    if not any(path.iterdir()):
        return True
    try:
        return json.loads((path / "manifest.json").read_text(encoding="utf-8")).get("tool") == "emdscale"
    except (OSError, ValueError):
        return False


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _period_files(pr: PeriodResult, formats: set[str]):
    """Yield (relative path, kind, payload) for every output of one period."""
    base = pr.name
    meta = {"period": pr.name, "start": pr.start, "end": pr.end}
    for v, d in pr.decompositions.items():
        if "csv" in formats:
            yield f"{base}/decompositions/{v}.csv", "text", report.decomposition_csv(d)
        if "json" in formats:
            yield f"{base}/decompositions/{v}.json", "text", report.dumps_json(
                report.decomposition_sidecar(d, variable=v, period=pr.name)
            )
        if "svg" in formats:
            yield f"{base}/figures/imfs_{v}.svg", "imf_svg", d
    if pr.imf_summaries:
        rows = [r for v, s in pr.imf_summaries.items() for r in report.imf_table_rows(v, s)]
        if "csv" in formats:
            yield f"{base}/imf_features.csv", "text", report.dumps_csv(report.IMF_TABLE_HEADER, rows)
        if "json" in formats:
            payload = {**meta, "variables": {v: [report.imf_summary_json(r) for r in s] for v, s in pr.imf_summaries.items()}}
            yield f"{base}/imf_features.json", "text", report.dumps_json(payload)
    if pr.band_summaries:
        rows = [r for v, s in pr.band_summaries.items() for r in report.band_table_rows(v, s)]
        if "csv" in formats:
            yield f"{base}/band_components.csv", "text", report.dumps_csv(report.BAND_TABLE_HEADER, rows)
        if "json" in formats:
            payload = {**meta, "variables": {v: [report.band_summary_json(b) for b in s] for v, s in pr.band_summaries.items()}}
            yield f"{base}/band_components.json", "text", report.dumps_json(payload)
    for prefix, grids in (("ols", pr.ols_grids), ("tsls", pr.tsls_grids)):
        for label, grid in grids.items():
            if "csv" in formats:
                yield f"{base}/{prefix}_{label}.csv", "text", report.grid_csv(grid)
            if "json" in formats:
                yield f"{base}/{prefix}_{label}.json", "text", report.dumps_json(report.grid_json(grid, **meta))
    for label, spectra in pr.spectra.items():
        for sp in spectra:
            stem = f"{base}/causality_{sp.cause}_to_{sp.effect}"
            if "csv" in formats:
                yield f"{stem}.csv", "text", report.spectrum_csv(sp)
            if "json" in formats:
                yield f"{stem}.json", "text", report.dumps_json(report.spectrum_json(sp, **meta))
        if "svg" in formats:
            yield f"{base}/figures/causality_{label}.svg", "causality_svg", spectra


def emit_report(bundle: ReportBundle, out_dir, formats: Iterable[str] | None = None) -> list[Path]:
    """Write the bundle under ``out_dir`` and return the written paths.

    Files are staged in a sibling temporary directory and moved into place
    only when every write succeeded, so a failed run leaves no partial output.
    CSV and JSON are always written.
    """
    formats = set(formats or bundle.config.formats) | {"csv", "json"}
    out_dir = Path(out_dir)
    if out_dir.exists() and not _replaceable(out_dir):
        raise PipelineError(
            "emit", f"{out_dir} exists and is not an earlier emdscale output; refusing to replace it", EXIT_CONFIG
        )
    try:
        out_dir.parent.mkdir(parents=True, exist_ok=True)
        staging = Path(tempfile.mkdtemp(prefix=".emdscale-", dir=out_dir.parent))
    except OSError as exc:
        raise PipelineError("emit", f"output directory not writable: {exc}", EXIT_DATA) from None
    try:
        written: list[str] = []
        for pr in bundle.periods.values():
            for rel, kind, payload in _period_files(pr, formats):
                path = staging / rel
                path.parent.mkdir(parents=True, exist_ok=True)
                if kind == "text":
                    path.write_text(payload, encoding="utf-8", newline="\n")
                elif kind == "imf_svg":
                    report.imf_stack_svg(payload, path)
                else:
                    report.causality_svg(payload, path)
                written.append(rel)
        files = [
            {"path": rel, "sha256": None if rel.endswith(".svg") else _sha256(staging / rel)}
            for rel in written
        ]
        manifest = {
            "tool": "emdscale",
            "version": __version__,
            "versions": {"numpy": np.__version__, "scipy": scipy.__version__},
            "config_sha256": bundle.config.digest,
            "input_sha256": bundle.input_digest,
            "config": as_dict(bundle.config),
            "stages": list(bundle.stages),
            "seeds": {},
            "periods": {
                p.name: {"start": p.start, "end": p.end, "n_obs": p.n_obs, "variables": list(p.decompositions)}
                for p in bundle.periods.values()
            },
            "files": files,
            "diagnostics": list(bundle.diagnostics),
        }
        (staging / "manifest.json").write_text(report.dumps_json(manifest), encoding="utf-8", newline="\n")
        if out_dir.exists():
            shutil.rmtree(out_dir)
        staging.rename(out_dir)
    except OSError as exc:
        shutil.rmtree(staging, ignore_errors=True)
        raise PipelineError("emit", str(exc), EXIT_DATA) from None
    except BaseException:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return [out_dir / "manifest.json", *(out_dir / rel for rel in written)]
