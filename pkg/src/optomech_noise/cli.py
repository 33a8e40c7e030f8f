"""Command-line entry point.

    optomech-noise run SCENARIO [--grid FMIN:FMAX:PPD] [--out DIR]
    optomech-noise import-check FILE [--grid FMIN:FMAX:PPD]
    optomech-noise compare MODEL.json MEASURED.csv [--bands F1:F2 ...]

The output directory is taken from --out, else $OPTOMECH_NOISE_OUT, else
the scenario's ``output_dir``, else ``out/<scenario name>``.
Exit status is 0 on success, 2 on invalid input, 1 on I/O failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import budget as bud
from . import fileio
from .params import ConfigError, FrequencyGrid, NoiseSpectrum
from .scenario import GridSpec, evaluate, load_scenario

OUT_ENV = "OPTOMECH_NOISE_OUT"
EXIT_INVALID = 2
EXIT_IO = 1


class CliError(Exception):
    pass


def _output_dir(args, sc) -> Path:
    if args.out:
        return Path(args.out)
    if os.environ.get(OUT_ENV):
        return Path(os.environ[OUT_ENV])
    if sc.output_dir:
        return Path(sc.output_dir)
    return Path("out") / sc.name


def _write_all(out_dir: Path, files: dict[str, str]) -> list[Path]:
    """Write every file or none: on any failure, remove what was written."""
    created_dir = not out_dir.exists()
    written: list[Path] = []
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        for name, text in files.items():
            p = out_dir / name
            p.write_text(text, newline="")
            written.append(p)
    except BaseException:
        for p in written:
            p.unlink(missing_ok=True)
        if created_dir and out_dir.exists() and not any(out_dir.iterdir()):
            out_dir.rmdir()
        raise
    return written


def cmd_run(args) -> int:
    grid = GridSpec.parse(args.grid) if args.grid else None
    sc = load_scenario(args.scenario, grid_override=grid)
    budget, summary = evaluate(sc)
    scenario_hash = fileio.sha256_of(*sc.input_paths)
    labels = list(budget.components) + ["total"]
    summary["scenario_hash"] = scenario_hash
    summary["files"] = [f"{k}.csv" for k in labels] + ["budget.json", "summary.json"]
    summary["units"] = {"frequency": "Hz", "asd": "m/sqrt(Hz)", "rms": "m", "power": "W"}

    files = {f"{k}.csv": fileio.spectrum_csv(s) for k, s in budget.components.items()}
    files["total.csv"] = fileio.spectrum_csv(budget.total)
    meta = {"scenario": sc.name, "scenario_hash": scenario_hash, "frame": sc.frame,
            "operating_point": sc.op.label, "component_labels": labels}
    files["budget.json"] = fileio.spectra_json([*budget.components.values(), budget.total], meta)
    files["summary.json"] = fileio.dumps_json(summary)

    out_dir = _output_dir(args, sc)
    _write_all(out_dir, files)
    print(f"wrote {len(files)} files to {out_dir}")
    return 0


def cmd_import_check(args) -> int:
    grid = GridSpec.parse(args.grid).build() if args.grid else None
    spec = fileio.import_spectrum(args.file, grid=grid, component=args.component)
    print(f"{args.file}: ok, {len(spec.grid)} points, {spec.f[0]:g} to {spec.f[-1]:g} Hz, label {spec.label!r}")
    return 0


def _parse_band(text: str) -> tuple[float, float]:
    parts = text.split(":")
    try:
        f1, f2 = (float(p) for p in parts)
    except ValueError:
        raise CliError(f"band {text!r} must look like F1:F2 in Hz") from None
    return f1, f2


def compare(model_spec, measured_spec, bands) -> dict:
    """Band-rms ratio measured / model for each band.

    The measurement is resampled onto the model grid points that lie
    inside its frequency range.
    """
    f = model_spec.f
    inside = (f >= measured_spec.f[0]) & (f <= measured_spec.f[-1])
    if inside.sum() < 2:
        raise CliError("model and measurement do not overlap in frequency")
    grid = FrequencyGrid(f[inside])
    model_on = NoiseSpectrum(grid, model_spec.asd[inside], model_spec.label)
    meas_on = fileio.resample(measured_spec, grid)
    rows = []
    for band in bands:
        try:
            m = bud.band_integrate(model_on, band)
            x = bud.band_integrate(meas_on, band)
        except ValueError as exc:
            raise CliError(str(exc)) from None
        rows.append({"band_hz": list(band), "model_rms_m": m, "measured_rms_m": x,
                     "ratio": x / m if m > 0 else None})
    return {"model": model_spec.label, "measured": measured_spec.label, "bands": rows}


def cmd_compare(args) -> int:
    bands = [_parse_band(b) for b in (args.bands or [])]
    model = fileio.import_spectrum(args.model, component=args.component)
    measured = fileio.import_spectrum(args.measured, component=args.component)
    report = compare(model, measured, bands)
    text = fileio.dumps_json(report)
    if args.out:
        _write_all(Path(args.out).parent, {Path(args.out).name: text})
    else:
        sys.stdout.write(text)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="optomech-noise", description="Optomechanical cavity noise budgets.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="evaluate a scenario and write CSV/JSON outputs")
    r.add_argument("scenario")
    r.add_argument("--grid", help="override grid as FMIN:FMAX:POINTS_PER_DECADE")
    r.add_argument("--out", help=f"output directory (overrides ${OUT_ENV} and the scenario)")
    r.add_argument("--seedless", action="store_true",
                   help="accepted for compatibility; every run is already deterministic")
    r.set_defaults(func=cmd_run)

    i = sub.add_parser("import-check", help="validate a spectrum file")
    i.add_argument("file")
    i.add_argument("--grid", help="also resample onto FMIN:FMAX:POINTS_PER_DECADE")
    i.add_argument("--component", default="total", help="component to read from a JSON file")
    i.set_defaults(func=cmd_import_check)

    c = sub.add_parser("compare", help="band-rms ratios of a measurement against a model")
    c.add_argument("model", help="budget.json written by 'run' (or any spectrum file)")
    c.add_argument("measured", help="measured spectrum, CSV or JSON")
    c.add_argument("--bands", nargs="*", default=[], metavar="F1:F2")
    c.add_argument("--component", default="total", help="component to read from JSON inputs")
    c.add_argument("--out", help="write the JSON report here instead of stdout")
    c.set_defaults(func=cmd_compare)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ConfigError, fileio.SpectrumFileError, CliError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
