"""Pipeline configuration loaded from a TOML file.

Grammar (all sections except ``input`` and ``periods`` optional)::

    [input]
    path = "data.csv"            # relative to the config file
    period_column = "date"
    delimiter = ","              # or "\\t"
    columns = ["a", "b"]         # optional; default all

    [[transform]]                # applied in order, before slicing
    column = "gdp"
    op = "per_capita"            # or "log"
    population = "pop"           # per_capita only
    into = "gdp_pc"              # optional; default overwrites `column`

    [periods]                    # name = [start, end], inclusive
    restricted = ["1990Q1", "2010Q4"]

    [sift]                       # SiftConfig fields

    [bands]                      # optional mode-to-band map
    short = [1, 2]
    medium = [3, 4]
    long = [5, 6, 7]

    [[regression]]
    name = "growth"
    dependent = "ggdp"
    regressors = ["rem_gdp", "fdi_gdp"]
    estimators = ["ols", "tsls"]
    endogenous = ["rem_gdp"]
    instrument_lags = 1
    intercept = true

    [[causality]]
    cause = "rem_gdp"
    effect = "ggdp"
    lag = "aic"                  # or an integer
    p_max = 8
    grid_points = 99
    both_directions = true
    test = "chi2"                # or "f"
    controls = []                # optional pre-whitening columns

    [output]
    dir = "out"
    formats = ["csv", "json", "svg"]
"""

from __future__ import annotations

import hashlib
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .emd import SiftConfig
from .regression import RegressionSpec
from .series import Period, SeriesError

OUTPUT_ENV = "EMDSCALE_OUTPUT_DIR"
FORMATS = ("csv", "json", "svg")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Transform:
    column: str
    op: str
    population: str | None = None
    into: str | None = None

    @property
    def target(self) -> str:
        return self.into or self.column


@dataclass(frozen=True)
class CausalitySpec:
    cause: str
    effect: str
    lag: int | None = None
    p_max: int = 8
    grid_points: int = 99
    both_directions: bool = True
    test: str = "chi2"
    controls: tuple[str, ...] = ()

    @property
    def label(self) -> str:
        return f"{self.cause}_{self.effect}"


@dataclass
class PipelineConfig:
    input_path: Path
    periods: dict[str, tuple[Period, Period]]
    period_column: str = "date"
    delimiter: str = ","
    columns: tuple[str, ...] | None = None
    transforms: list[Transform] = field(default_factory=list)
    sift: SiftConfig = field(default_factory=SiftConfig)
    bands: dict[str, list[int]] | None = None
    regressions: list[RegressionSpec] = field(default_factory=list)
    causality: list[CausalitySpec] = field(default_factory=list)
    output_dir: Path | None = None
    formats: tuple[str, ...] = ("csv", "json")
    source_text: str = ""

    @property
    def digest(self) -> str:
        return hashlib.sha256(self.source_text.encode("utf-8")).hexdigest()

    def variables(self) -> list[str]:
        """Every variable that must be decomposed, in first-use order."""
        seen: dict[str, None] = {}
        for spec in self.regressions:
            for v in spec.variables:
                seen.setdefault(v)
        for c in self.causality:
            seen.setdefault(c.cause)
            seen.setdefault(c.effect)
        return list(seen)

    def resolve_output(self, override: str | os.PathLike | None = None) -> Path:
        if override is not None:
            return Path(override)
        if self.output_dir is not None:
            return self.output_dir
        return Path(os.environ.get(OUTPUT_ENV, "emdscale-out"))


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError(f"missing required key {key!r} in [{where}]")
    return table[key]


def _str_list(value, where: str) -> list[str]:
    if isinstance(value, str):
        return [value]
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ConfigError(f"{where} must be a list of strings")
    return list(value)


def parse_config(text: str, base_dir: Path | None = None) -> PipelineConfig:
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML: {exc}") from None
    base_dir = Path(".") if base_dir is None else Path(base_dir)
    known = {"input", "transform", "periods", "sift", "bands", "regression", "causality", "output"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown top-level sections {sorted(unknown)}")

    inp = _require(raw, "input", "top level")
    path = Path(_require(inp, "path", "input"))
    if not path.is_absolute():
        path = base_dir / path
    delimiter = inp.get("delimiter", ",")
    if delimiter not in (",", "\t"):
        raise ConfigError("input.delimiter must be ',' or '\\t'")
    columns = inp.get("columns")
    columns = tuple(_str_list(columns, "input.columns")) if columns is not None else None

    transforms = []
    for i, t in enumerate(raw.get("transform", [])):
        op = _require(t, "op", f"transform {i}")
        if op not in ("log", "per_capita"):
            raise ConfigError(f"transform {i}: unknown op {op!r}")
        if op == "per_capita" and "population" not in t:
            raise ConfigError(f"transform {i}: per_capita needs a population column")
        transforms.append(Transform(_require(t, "column", f"transform {i}"), op, t.get("population"), t.get("into")))

    periods_raw = _require(raw, "periods", "top level")
    if not periods_raw:
        raise ConfigError("at least one period is required")
    periods = {}
    for name, bounds in periods_raw.items():
        if not isinstance(bounds, list) or len(bounds) != 2:
            raise ConfigError(f"period {name!r} must be [start, end]")
        try:
            start, end = Period.parse(bounds[0]), Period.parse(bounds[1])
        except SeriesError as exc:
            raise ConfigError(f"period {name!r}: {exc}") from None
        if end < start:
            raise ConfigError(f"period {name!r}: end {end} precedes start {start}")
        periods[name] = (start, end)

    try:
        sift = SiftConfig(**raw.get("sift", {}))
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[sift]: {exc}") from None

    bands = raw.get("bands")
    if bands is not None:
        bad = set(bands) - {"short", "medium", "long"}
        if bad:
            raise ConfigError(f"[bands]: unknown bands {sorted(bad)}")
        bands = {k: [int(m) for m in v] for k, v in bands.items()}

    regressions = []
    for i, r in enumerate(raw.get("regression", [])):
        where = f"regression {i}"
        estimators = r.get("estimators", r.get("estimator", "ols"))
        estimators = _str_list(estimators, f"{where}.estimators")
        for est in estimators:
            try:
                regressions.append(
                    RegressionSpec(
                        dependent=_require(r, "dependent", where),
                        regressors=tuple(_str_list(_require(r, "regressors", where), f"{where}.regressors")),
                        intercept=bool(r.get("intercept", True)),
                        estimator=est,
                        endogenous=tuple(_str_list(r.get("endogenous", []), f"{where}.endogenous"))
                        if est == "tsls"
                        else (),
                        instrument_lags=int(r.get("instrument_lags", 1)),
                        name=r.get("name", ""),
                    )
                )
            except ValueError as exc:
                raise ConfigError(f"{where}: {exc}") from None

    causality = []
    for i, c in enumerate(raw.get("causality", [])):
        where = f"causality {i}"
        lag = c.get("lag", "aic")
        if lag == "aic":
            lag = None
        elif not isinstance(lag, int) or lag < 1:
            raise ConfigError(f"{where}: lag must be 'aic' or a positive integer")
        test = c.get("test", "chi2")
        if test not in ("chi2", "f"):
            raise ConfigError(f"{where}: test must be 'chi2' or 'f'")
        causality.append(
            CausalitySpec(
                cause=_require(c, "cause", where),
                effect=_require(c, "effect", where),
                lag=lag,
                p_max=int(c.get("p_max", 8)),
                grid_points=int(c.get("grid_points", 99)),
                both_directions=bool(c.get("both_directions", True)),
                test=test,
                controls=tuple(_str_list(c.get("controls", []), f"{where}.controls")),
            )
        )

    out = raw.get("output", {})
    output_dir = out.get("dir")
    if output_dir is not None:
        output_dir = Path(output_dir)
        if not output_dir.is_absolute():
            output_dir = base_dir / output_dir
    formats = tuple(_str_list(out.get("formats", ["csv", "json"]), "output.formats"))
    bad = set(formats) - set(FORMATS)
    if bad:
        raise ConfigError(f"unknown output formats {sorted(bad)}")

    return PipelineConfig(
        input_path=path,
        periods=periods,
        period_column=inp.get("period_column", "date"),
        delimiter=delimiter,
        columns=columns,
        transforms=transforms,
        sift=sift,
        bands=bands,
        regressions=regressions,
        causality=causality,
        output_dir=output_dir,
        formats=formats,
        source_text=text,
    )


def load_config(path: str | os.PathLike) -> PipelineConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text, path.parent)


def check_columns(config: PipelineConfig, available: list[str]) -> None:
    """Raise :class:`ConfigError` naming the first column the config uses but the data lacks."""
    have = list(available)
    for t in config.transforms:
        if t.column not in have:
            raise ConfigError(f"transform references missing column {t.column!r}")
        if t.population is not None and t.population not in have:
            raise ConfigError(f"transform references missing population column {t.population!r}")
        if t.target not in have:
            have.append(t.target)
    for v in config.variables():
        if v not in have:
            raise ConfigError(f"config references missing column {v!r}")
    for c in config.causality:
        for v in c.controls:
            if v not in have:
                raise ConfigError(f"causality controls reference missing column {v!r}")


def as_dict(config: PipelineConfig) -> dict[str, Any]:
    return {
        "input": str(config.input_path.name),
        "periods": {k: [str(a), str(b)] for k, (a, b) in config.periods.items()},
        "sift": config.sift.to_dict(),
        "formats": list(config.formats),
    }
