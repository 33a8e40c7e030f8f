"""Scenario files: which config to load, on what grid, and which analyses to run.

A scenario is a small YAML document::

    scenario_version: 1
    name: baseline
    config: builtin:baseline        # or a path relative to the scenario file
    operating_point: 220mW          # label of an operating point in the config
    frame: calibrated               # or physical
    grid: {f_min_hz: 100.0, f_max_hz: 1.0e6, points_per_decade: 500}
    output_dir: out/baseline        # relative to the working directory
    analyses:
      attribution_bands_hz: [[21000.0, 22000.0]]
      dominance: true
      slopes:
        - {component: "thermal:fundamental", band_hz: [5000.0, 9000.0]}
      sql_band_hz: [2000.0, 100000.0]
      spring: true
      power_scan: {powers_w: [0.073, 0.11], band_hz: [21000.0, 22000.0]}
      thermometry: {band_hz: [1000.0, 2000.0], temperature_factor: 4.0}

Every analysis key is optional.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from . import budget as bud
from . import quantum
from .params import (
    CavityConfig,
    ConfigError,
    FrequencyGrid,
    MechanicalModel,
    NoiseParams,
    OperatingPoint,
    load_config,
)
from .thermal import infer_temperature_ratio, mode_thermal_asd, total_thermal_asd

SCENARIO_VERSION = 1
BUILTIN_PREFIX = "builtin:"


def builtin_path(name: str) -> Path:
    return Path(str(resources.files("optomech_noise") / "data" / f"{name}.yaml"))


@dataclass(frozen=True)
class GridSpec:
    f_min: float = 100.0
    f_max: float = 1e6
    per_decade: int = 500

    def __post_init__(self):
        if not 0 < self.f_min < self.f_max:
            raise ConfigError(f"grid: need 0 < f_min_hz < f_max_hz (got {self.f_min}, {self.f_max})")
        if self.per_decade < 1:
            raise ConfigError(f"grid: points_per_decade must be >= 1 (got {self.per_decade})")

    @classmethod
    def parse(cls, text: str) -> GridSpec:
        """From 'f_min:f_max:points_per_decade'."""
        parts = text.split(":")
        if len(parts) != 3:
            raise ConfigError(f"grid spec {text!r} must look like f_min:f_max:points_per_decade")
        try:
            return cls(float(parts[0]), float(parts[1]), int(parts[2]))
        except ValueError:
            raise ConfigError(f"grid spec {text!r} has a non-numeric field") from None

    def build(self) -> FrequencyGrid:
        return FrequencyGrid.logspace(self.f_min, self.f_max, self.per_decade)


@dataclass(frozen=True)
class Scenario:
    name: str
    path: Path
    config_path: Path
    config: CavityConfig
    model: MechanicalModel
    noise: NoiseParams
    op: OperatingPoint
    grid_spec: GridSpec
    frame: str = "calibrated"
    output_dir: str | None = None
    analyses: dict = field(default_factory=dict)

    @property
    def input_paths(self) -> tuple[Path, Path]:
        return self.path, self.config_path


def _band(value, where: str) -> tuple[float, float]:
    try:
        f1, f2 = (float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: band must be a pair of frequencies in Hz (got {value!r})") from None
    return f1, f2


def _check_band_in_grid(band, grid: FrequencyGrid, where: str) -> None:
    f = grid.points
    if not band[0] < band[1]:
        raise ConfigError(f"{where}: band {list(band)} Hz has lower edge >= upper edge")
    if band[0] < f[0] or band[1] > f[-1]:
        raise ConfigError(f"{where}: band {list(band)} Hz lies outside the grid [{f[0]:g}, {f[-1]:g}] Hz")
    if np.count_nonzero((f >= band[0]) & (f <= band[1])) < 3:
        raise ConfigError(f"{where}: band {list(band)} Hz holds fewer than 3 grid points")


def _normalise_analyses(raw: dict, grid: FrequencyGrid, model: MechanicalModel) -> dict:
    if not isinstance(raw, dict):
        raise ConfigError("analyses must be a mapping")
    known = {"attribution_bands_hz", "dominance", "slopes", "sql_band_hz", "spring",
             "power_scan", "thermometry"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"analyses: unknown keys {sorted(unknown)}")
    out: dict = {}
    if "attribution_bands_hz" in raw:
        bands = [_band(b, "analyses.attribution_bands_hz") for b in raw["attribution_bands_hz"] or []]
        for b in bands:
            _check_band_in_grid(b, grid, "analyses.attribution_bands_hz")
        out["attribution_bands_hz"] = bands
    out["dominance"] = bool(raw.get("dominance", False))
    out["spring"] = bool(raw.get("spring", False))
    slopes = []
    mode_names = {m.name for m in model.modes}
    for i, s in enumerate(raw.get("slopes", []) or []):
        where = f"analyses.slopes[{i}]"
        comp = str(s.get("component", ""))
        if comp.startswith("thermal:") and comp.split(":", 1)[1] not in mode_names:
            raise ConfigError(f"{where}: no mechanical mode named {comp.split(':', 1)[1]!r}")
        if not comp.startswith("thermal:") and comp not in bud.COMPONENTS + ("total",):
            raise ConfigError(f"{where}: unknown component {comp!r}")
        band = _band(s.get("band_hz"), where)
        _check_band_in_grid(band, grid, where)
        slopes.append({"component": comp, "band_hz": band})
    out["slopes"] = slopes
    if "sql_band_hz" in raw:
        band = _band(raw["sql_band_hz"], "analyses.sql_band_hz")
        _check_band_in_grid(band, grid, "analyses.sql_band_hz")
        out["sql_band_hz"] = band
    if "power_scan" in raw:
        ps = raw["power_scan"] or {}
        powers = [float(p) for p in ps.get("powers_w", [])]
        if not powers or any(not p > 0 for p in powers):
            raise ConfigError("analyses.power_scan: powers_w must be a non-empty list of positive powers")
        band = _band(ps.get("band_hz", (21e3, 22e3)), "analyses.power_scan")
        _check_band_in_grid(band, grid, "analyses.power_scan")
        det = ps.get("detuning_hwhm")
        out["power_scan"] = {"powers_w": powers, "band_hz": band,
                             "detuning_hwhm": None if det is None else float(det)}
    if "thermometry" in raw:
        th = raw["thermometry"] or {}
        band = _band(th.get("band_hz", (1e3, 2e3)), "analyses.thermometry")
        _check_band_in_grid(band, grid, "analyses.thermometry")
        factor = float(th.get("temperature_factor", 4.0))
        if not factor > 0:
            raise ConfigError("analyses.thermometry: temperature_factor must be > 0")
        out["thermometry"] = {"band_hz": band, "temperature_factor": factor}
    return out


def load_scenario(path, grid_override: GridSpec | None = None) -> Scenario:
    path = Path(path)
    try:
        doc = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read scenario {path}: {exc}") from None
    except yaml.YAMLError as exc:
        raise ConfigError(f"parse error in scenario {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"scenario {path}: root must be a mapping")
    if doc.get("scenario_version") != SCENARIO_VERSION:
        raise ConfigError(f"scenario {path}: unsupported scenario_version {doc.get('scenario_version')!r}")

    ref = doc.get("config")
    if not isinstance(ref, str) or not ref:
        raise ConfigError(f"scenario {path}: 'config' must name a config file")
    if ref.startswith(BUILTIN_PREFIX):
        cfg_path = builtin_path(ref[len(BUILTIN_PREFIX):])
    else:
        cfg_path = (path.parent / ref).resolve()
    config, model, noise, ops = load_config(cfg_path)

    label = doc.get("operating_point")
    if not ops:
        raise ConfigError(f"config {cfg_path} defines no operating points")
    if label is None:
        op = ops[0]
    else:
        matches = [o for o in ops if o.label == str(label)]
        if not matches:
            raise ConfigError(f"scenario {path}: operating point {label!r} is not defined in {cfg_path.name} "
                              f"(have {[o.label for o in ops]})")
        op = matches[0]

    g = doc.get("grid", {}) or {}
    try:
        grid_spec = grid_override or GridSpec(float(g.get("f_min_hz", 100.0)), float(g.get("f_max_hz", 1e6)),
                                              int(g.get("points_per_decade", 500)))
    except (TypeError, ValueError):
        raise ConfigError(f"scenario {path}: malformed grid {g!r}") from None
    frame = str(doc.get("frame", "calibrated"))
    if frame not in ("calibrated", "physical"):
        raise ConfigError(f"scenario {path}: frame must be 'calibrated' or 'physical' (got {frame!r})")
    analyses = _normalise_analyses(doc.get("analyses", {}) or {}, grid_spec.build(), model)
    out_dir = doc.get("output_dir")
    return Scenario(
        name=str(doc.get("name", path.stem)),
        path=path,
        config_path=cfg_path,
        config=config,
        model=model,
        noise=noise,
        op=op,
        grid_spec=grid_spec,
        frame=frame,
        output_dir=None if out_dir is None else str(out_dir),
        analyses=analyses,
    )


# ---------------------------------------------------------------------------
# evaluation


def _dominance_segments(budget: bud.NoiseBudget) -> list[dict]:
    labels = bud.dominance_map(budget)
    f = budget.grid.points
    segs = []
    start = 0
    for i in range(1, len(f) + 1):
        if i == len(f) or labels[i] != labels[start]:
            segs.append({"f_lo_hz": f[start], "f_hi_hz": f[i - 1], "component": str(labels[start])})
            start = i
    return segs


def _band_stat_dict(stat: bud.BandStat) -> dict:
    return {"band_hz": list(stat.band), "rms_m": stat.rms, "fractions": stat.fractions,
            "total_rms_m": stat.total_rms}


def evaluate(sc: Scenario) -> tuple[bud.NoiseBudget, dict]:
    """Build the budget and run every requested analysis."""
    grid = sc.grid_spec.build()
    cfg, model, op = sc.config, sc.model, sc.op
    budget = bud.model_budget(cfg, model, sc.noise, op, grid, frame=sc.frame)
    a = sc.analyses
    summary: dict = {
        "scenario": sc.name,
        "frame": sc.frame,
        "grid": {"f_min_hz": sc.grid_spec.f_min, "f_max_hz": sc.grid_spec.f_max,
                 "points_per_decade": sc.grid_spec.per_decade, "n_points": len(grid)},
        "cavity": {"finesse": cfg.finesse, "fsr_hz": cfg.fsr, "linewidth_hwhm_hz": cfg.linewidth},
        "operating_point": {
            "label": op.label, "p_in_w": op.P_in, "p_circ_w": op.P_circ, "p_refl_w": op.P_refl,
            "p_trans_w": op.P_trans, "detuning_hwhm": op.detuning,
            "detection_quadrature_rad": op.detection_quadrature,
        },
    }
    if a.get("attribution_bands_hz"):
        summary["attribution"] = [_band_stat_dict(bud.attribute(budget, b)) for b in a["attribution_bands_hz"]]
    if a.get("dominance"):
        summary["dominance"] = _dominance_segments(budget)
    if a.get("slopes"):
        out = []
        for s in a["slopes"]:
            comp = s["component"]
            if comp.startswith("thermal:"):
                mode = next(m for m in model.modes if m.name == comp.split(":", 1)[1])
                spec = mode_thermal_asd(mode, cfg.temperature, grid)
            elif comp == "total":
                spec = budget.total
            else:
                spec = budget[comp]
            out.append({"component": comp, "band_hz": list(s["band_hz"]),
                        "slope": bud.fit_loglog_slope(spec, s["band_hz"])})
        summary["slopes"] = out
    if "sql_band_hz" in a:
        ratio, at = bud.sql_ratio(budget, model.fundamental.modal_mass, a["sql_band_hz"])
        summary["sql"] = {"band_hz": list(a["sql_band_hz"]), "min_ratio": ratio, "at_hz": at,
                          "mass_kg": model.fundamental.modal_mass}
    if a.get("spring"):
        summary["spring_frequency_hz"] = quantum.spring_frequency(cfg, model, op)
        summary["static_spring_n_per_m"] = quantum.static_spring_constant(cfg, op)
    if "power_scan" in a:
        ps = a["power_scan"]
        det = op.detuning if ps["detuning_hwhm"] is None else ps["detuning_hwhm"]
        scan = bud.power_scan(cfg, model, sc.noise, det, ps["powers_w"], grid, band=ps["band_hz"],
                              detection_quadrature=op.detection_quadrature)
        points = []
        for p in scan:
            d = _band_stat_dict(p.stat)
            d.update(p_circ_w=p.op.P_circ, p_in_w=p.op.P_in, detuning_hwhm=p.op.detuning,
                     no_qrpn_total_rms_m=p.no_qrpn_rms, spring_frequency_hz=p.spring_hz)
            points.append(d)
        powers = [p.op.P_circ for p in scan]
        summary["power_scan"] = {
            "band_hz": list(ps["band_hz"]),
            "points": points,
            "qrpn_exponent": bud.fit_power_law(powers, [p.stat.rms["qrpn"] for p in scan]) if len(scan) > 1 else None,
            "crpn_exponent": (bud.fit_power_law(powers, [p.stat.rms["crpn"] for p in scan])
                              if len(scan) > 1 and all(p.stat.rms["crpn"] > 0 for p in scan) else None),
        }
    if "thermometry" in a:
        th = a["thermometry"]
        base = total_thermal_asd(model, cfg.temperature, grid)
        hot = total_thermal_asd(model, cfg.temperature * th["temperature_factor"], grid)
        summary["thermometry"] = {
            "band_hz": list(th["band_hz"]),
            "temperature_factor": th["temperature_factor"],
            "inferred_ratio": infer_temperature_ratio(base, hot, th["band_hz"]),
        }
    return budget, summary

