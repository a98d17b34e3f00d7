"""Command line entry point.

    emdscale run CONFIG [--out DIR] [--stage STAGE ...] [-v]
    emdscale decompose CSV COLUMN [--out DIR]
    emdscale causality CSV X Y [--lags P] [--out DIR]
    emdscale synth SPEC [--out FILE]

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import report
from .analytics import summarize_decomposition
from .causality import VarError, causality_spectrum
from .config import OUTPUT_ENV, ConfigError, load_config, tomllib
from .emd import DecompositionError, decompose
from .pipeline import (
    EXIT_CONFIG,
    EXIT_DATA,
    EXIT_NUMERIC,
    EXIT_OK,
    STAGES,
    PipelineError,
    emit_report,
    run_pipeline,
)
from .series import SeriesError, SeriesTable, emit_series_table, read_series_table
from .synth import Tone, ToneMixSpec, VarGenSpec, gen_tone_mix, gen_var_process

log = logging.getLogger("emdscale")


def _default_out(name: str) -> Path:
    return Path(os.environ.get(OUTPUT_ENV, "emdscale-out")) / name


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = config.resolve_output(args.out)
    try:
        bundle = run_pipeline(config, args.stage)
        files = emit_report(bundle, out)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    for d in bundle.diagnostics:
        log.info("diagnostic: %s", d)
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8", newline="\n")


def cmd_decompose(args) -> int:
    try:
        table = read_series_table(args.csv, [args.column], args.period_column, args.delimiter)
        d = decompose(table[args.column])
    except SeriesError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DecompositionError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = Path(args.out) if args.out else _default_out("decompose")
    _write(out / f"{args.column}.csv", report.decomposition_csv(d))
    _write(out / f"{args.column}.json", report.dumps_json(report.decomposition_sidecar(d, variable=args.column)))
    rows = report.imf_table_rows(args.column, summarize_decomposition(d))
    _write(out / f"{args.column}_imf_features.csv", report.dumps_csv(report.IMF_TABLE_HEADER, rows))
    print(f"{args.column}: {d.n_imfs} IMFs + residue ({d.diagnostics['termination']}) -> {out}")
    return EXIT_OK


def cmd_causality(args) -> int:
    try:
        table = read_series_table(args.csv, [args.x, args.y], args.period_column, args.delimiter)
        fwd, back = causality_spectrum(
            table[args.x].values, table[args.y].values, args.lags, p_max=args.p_max,
            names=(args.x, args.y), both=True,
        )
    except SeriesError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (VarError, np.linalg.LinAlgError) as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    out = Path(args.out) if args.out else _default_out("causality")
    for sp in (fwd, back):
        stem = out / f"causality_{sp.cause}_to_{sp.effect}"
        _write(stem.with_suffix(".csv"), report.spectrum_csv(sp))
        _write(stem.with_suffix(".json"), report.dumps_json(report.spectrum_json(sp)))
        bands = ", ".join(f"[{a:.2f}, {b:.2f}]" for a, b in sp.significant_bands) or "none"
        print(f"{sp.cause} -> {sp.effect} (p={sp.p}): significant omega bands {bands}")
    return EXIT_OK


def synth_from_spec(raw: dict) -> SeriesTable:
    kind = raw.get("kind", "tone_mix")
    if kind == "tone_mix":
        tones = tuple(
            Tone(float(t["frequency"]), float(t.get("amplitude", 1.0)), float(t.get("phase", 0.0)))
            for t in raw.get("tone", [])
        )
        spec = ToneMixSpec(
            tones=tones,
            trend=tuple(raw.get("trend", ())),
            noise_sd=float(raw.get("noise_sd", 0.0)),
            length=int(raw.get("length", 256)),
            seed=int(raw.get("seed", 0)),
            name=raw.get("name", "x"),
            start=raw.get("start", "1990Q1"),
        )
        s = gen_tone_mix(spec)
        return SeriesTable({s.name: s})
    if kind == "var":
        spec = VarGenSpec(
            coefs=np.asarray(raw["coefs"], dtype=float),
            cov=np.asarray(raw.get("cov", [[1.0, 0.0], [0.0, 1.0]]), dtype=float),
            length=int(raw.get("length", 500)),
            burn_in=int(raw.get("burn_in", 500)),
            seed=int(raw.get("seed", 0)),
            intercepts=tuple(raw.get("intercepts", (0.0, 0.0))),
            names=tuple(raw.get("names", ("x", "y"))),
            start=raw.get("start", "1990Q1"),
        )
        x, y = gen_var_process(spec)
        return SeriesTable({x.name: x, y.name: y})
    raise ConfigError(f"unknown synth kind {kind!r}")


def cmd_synth(args) -> int:
    try:
        raw = tomllib.loads(Path(args.spec).read_text(encoding="utf-8"))
        table = synth_from_spec(raw)
    except (OSError, tomllib.TOMLDecodeError, ConfigError, KeyError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    text = emit_series_table(table)
    if args.out:
        _write(Path(args.out), text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="emdscale", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0, help="more logging (-v, -vv)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run the full pipeline from a TOML config")
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides the config)")
    p.add_argument("--stage", action="append", choices=STAGES, help="run only these stages")
    p.set_defaults(func=cmd_run)

    for name, helptext in (("decompose", "decompose one column"), ("causality", "frequency-domain causality")):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("csv")
        if name == "decompose":
            p.add_argument("column")
            p.set_defaults(func=cmd_decompose)
        else:
            p.add_argument("x")
            p.add_argument("y")
            p.add_argument("--lags", type=int, default=None, help="VAR lag order (default: AIC)")
            p.add_argument("--p-max", type=int, default=8)
            p.set_defaults(func=cmd_causality)
        p.add_argument("--out")
        p.add_argument("--period-column", default="date")
        p.add_argument("--delimiter", default=",")

    p = sub.add_parser("synth", help="generate a synthetic series from a TOML spec")
    p.add_argument("spec")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING if args.verbose == 0 else logging.INFO if args.verbose == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    if args.verbose == 0:
        # per-series warnings end up in the manifest diagnostics instead
        logging.getLogger("emdscale").setLevel(logging.ERROR)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
