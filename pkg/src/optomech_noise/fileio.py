"""Spectrum files and float formatting.

CSV layout: a header ``frequency_hz,asd_m_per_sqrthz`` (optionally
``,label``) followed by one row per grid point. JSON layout: an object
with ``frequency_hz``, ``units``, ``components`` (label -> asd list) and
a free-form ``meta`` block.

Floats are written with ``repr``, Python's shortest round-trip decimal,
so the same numbers always produce the same bytes and re-reading
recovers them exactly.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .budget import _loglog_interp
from .params import FrequencyGrid, NoiseSpectrum

CSV_HEADER = ("frequency_hz", "asd_m_per_sqrthz")
UNITS = {"frequency": "Hz", "asd": "m/sqrt(Hz)"}


class SpectrumFileError(ValueError):
    pass


def fmt(x: float) -> str:
    return repr(float(x))


def sha256_of(*paths) -> str:
    """sha256 over the files' bytes, each prefixed by its length."""
    h = hashlib.sha256()
    for p in paths:
        data = Path(p).read_bytes()
        h.update(len(data).to_bytes(8, "big"))
        h.update(data)
    return h.hexdigest()


# ---------------------------------------------------------------------------
# writing


def spectrum_csv(spec: NoiseSpectrum, with_label: bool = False) -> str:
    header = list(CSV_HEADER) + (["label"] if with_label else [])
    lines = [",".join(header)]
    for f, a in zip(spec.f, spec.asd):
        row = [fmt(f), fmt(a)] + ([spec.label] if with_label else [])
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def write_spectrum_csv(path, spec: NoiseSpectrum, with_label: bool = False) -> None:
    Path(path).write_text(spectrum_csv(spec, with_label), newline="")


def dumps_json(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def spectra_json(spectra, meta: dict | None = None) -> str:
    spectra = list(spectra)
    grid = spectra[0].grid
    for s in spectra:
        if s.grid != grid:
            raise SpectrumFileError(f"spectrum {s.label!r} is on a different grid")
    doc = {
        "frequency_hz": grid.points,
        "units": UNITS,
        "components": {s.label: s.asd for s in spectra},
        "meta": meta or {},
    }
    return dumps_json(doc)


# ---------------------------------------------------------------------------
# reading


def _validate(freq, asd, where: str):
    freq = np.asarray(freq, dtype=float)
    asd = np.asarray(asd, dtype=float)
    if freq.size < 2:
        raise SpectrumFileError(f"{where}: need at least 2 rows")
    if np.any(freq <= 0):
        raise SpectrumFileError(f"{where}: frequencies must be > 0")
    step = np.diff(freq)
    if np.any(step <= 0):
        i = int(np.flatnonzero(step <= 0)[0]) + 1
        raise SpectrumFileError(f"{where}: frequency not strictly increasing at row {i + 1} "
                                f"({freq[i]!r} Hz after {freq[i - 1]!r} Hz)")
    return freq, asd


def read_spectrum_csv(path) -> NoiseSpectrum:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise SpectrumFileError(f"cannot read {path}: {exc}") from None
    rows = list(csv.reader(text.splitlines()))
    if not rows:
        raise SpectrumFileError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if tuple(header[:2]) != CSV_HEADER or len(header) > 3 or (len(header) == 3 and header[2] != "label"):
        raise SpectrumFileError(
            f"{path}, line 1: header must be 'frequency_hz,asd_m_per_sqrthz[,label]' (got {','.join(header)!r})")
    freq, asd, labels = [], [], set()
    for lineno, row in enumerate(rows[1:], start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise SpectrumFileError(f"{path}, line {lineno}: expected {len(header)} fields, got {len(row)}")
        try:
            fv, av = float(row[0]), float(row[1])
        except ValueError:
            raise SpectrumFileError(f"{path}, line {lineno}: not a number in {row[:2]!r}") from None
        if not (math.isfinite(fv) and math.isfinite(av)):
            raise SpectrumFileError(f"{path}, line {lineno}: non-finite value")
        if av < 0:
            raise SpectrumFileError(f"{path}, line {lineno}: negative asd {av!r}")
        freq.append(fv)
        asd.append(av)
        if len(header) == 3:
            labels.add(row[2].strip())
    freq, asd = _validate(freq, asd, str(path))
    if len(labels) > 1:
        raise SpectrumFileError(f"{path}: more than one label in a single-spectrum file")
    label = labels.pop() if labels else path.stem
    return NoiseSpectrum(FrequencyGrid(freq), asd, label)


def read_spectra_json(path) -> dict[str, NoiseSpectrum]:
    path = Path(path)
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise SpectrumFileError(f"cannot read {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise SpectrumFileError(f"{path}, line {exc.lineno}: {exc.msg}") from None
    if not isinstance(doc, dict) or "frequency_hz" not in doc or "components" not in doc:
        raise SpectrumFileError(f"{path}: expected keys 'frequency_hz' and 'components'")
    freq, _ = _validate(doc["frequency_hz"], doc["frequency_hz"], str(path))
    grid = FrequencyGrid(freq)
    out = {}
    for label, asd in doc["components"].items():
        asd = np.asarray(asd, dtype=float)
        if asd.shape != freq.shape:
            raise SpectrumFileError(f"{path}: component {label!r} has {asd.size} values for {freq.size} frequencies")
        bad = np.flatnonzero(~(asd >= 0))
        if bad.size:
            raise SpectrumFileError(f"{path}: component {label!r} row {bad[0] + 1} has invalid asd {asd[bad[0]]!r}")
        out[label] = NoiseSpectrum(grid, asd, label)
    return out


def import_spectrum(path, grid: FrequencyGrid | None = None, component: str = "total") -> NoiseSpectrum:
    """Read a CSV or JSON spectrum, optionally resampled onto ``grid``."""
    path = Path(path)
    if path.suffix.lower() == ".json":
        comps = read_spectra_json(path)
        if component not in comps:
            raise SpectrumFileError(f"{path}: no component {component!r} (have {sorted(comps)})")
        spec = comps[component]
    else:
        spec = read_spectrum_csv(path)
    return spec if grid is None else resample(spec, grid)


def resample(spec: NoiseSpectrum, grid: FrequencyGrid) -> NoiseSpectrum:
    """Log-log interpolation onto ``grid``; no extrapolation."""
    f = grid.points
    lo, hi = spec.f[0], spec.f[-1]
    if f[0] < lo * (1 - 1e-12) or f[-1] > hi * (1 + 1e-12):
        raise SpectrumFileError(
            f"target grid [{f[0]:g}, {f[-1]:g}] Hz exceeds spectrum range [{lo:g}, {hi:g}] Hz")
    f = np.clip(f, lo, hi)
    asd = _loglog_interp(f, spec.f, spec.asd)
    # exact copies where the target point is a source point
    idx = np.clip(np.searchsorted(spec.f, f), 0, spec.f.size - 1)
    hit = spec.f[idx] == f
    asd[hit] = spec.asd[idx[hit]]
    return NoiseSpectrum(grid, asd, spec.label)
