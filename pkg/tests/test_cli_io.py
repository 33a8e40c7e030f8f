import json
import math
import shutil
import subprocess
import sys

import numpy as np
import pytest
import yaml

from optomech_noise import budget as bud
from optomech_noise import cli, fileio
from optomech_noise.params import FrequencyGrid, NoiseSpectrum
from optomech_noise.scenario import GridSpec, evaluate, load_scenario
from optomech_noise.thermal import infer_temperature_ratio, total_thermal_asd

EXPECTED = {"thermal.csv", "qrpn.csv", "shot.csv", "dark.csv", "crpn.csv", "total.csv",
            "budget.json", "summary.json"}


@pytest.fixture
def scenario_copy(tmp_path, scenario_path, baseline_path):
    d = tmp_path / "in"
    d.mkdir()
    shutil.copy(baseline_path, d / "baseline.yaml")
    shutil.copy(scenario_path, d / "scenario.yaml")
    return d / "scenario.yaml"


def _edit(path, fn):
    doc = yaml.safe_load(path.read_text())
    fn(doc)
    path.write_text(yaml.safe_dump(doc))


@pytest.fixture(scope="module")
def run_dir(tmp_path_factory, scenario_path):
    out = tmp_path_factory.mktemp("run")
    assert cli.main(["run", str(scenario_path), "--out", str(out)]) == 0
    return out


# ---------------------------------------------------------------------------
# run


def test_run_writes_file_set(run_dir):
    assert {p.name for p in run_dir.iterdir()} == EXPECTED


def test_csv_headers_carry_units(run_dir):
    for name in EXPECTED - {"budget.json", "summary.json"}:
        assert (run_dir / name).read_text().splitlines()[0] == "frequency_hz,asd_m_per_sqrthz"


def test_summary_contents(run_dir, scenario_path, baseline_path):
    s = json.loads((run_dir / "summary.json").read_text())
    assert s["scenario_hash"] == fileio.sha256_of(scenario_path, baseline_path)
    assert set(s["attribution"][0]["fractions"]) == {"thermal", "qrpn", "shot", "dark", "crpn"}
    assert s["sql"]["band_hz"] == [2000.0, 100000.0]
    assert [x["component"] for x in s["slopes"]] == ["thermal:fundamental", "qrpn"]
    assert s["units"]["asd"] == "m/sqrt(Hz)"
    assert len(s["power_scan"]["points"]) == 4


def test_budget_json_meta(run_dir):
    doc = json.loads((run_dir / "budget.json").read_text())
    assert doc["meta"]["component_labels"] == ["thermal", "qrpn", "shot", "dark", "crpn", "total"]
    assert doc["units"]["frequency"] == "Hz"


def test_run_is_byte_identical(run_dir, scenario_path, tmp_path):
    assert cli.main(["run", str(scenario_path), "--out", str(tmp_path), "--seedless"]) == 0
    for name in EXPECTED:
        assert (tmp_path / name).read_bytes() == (run_dir / name).read_bytes(), name


def test_csv_float_contract(run_dir):
    # shortest round-trip decimal: parsing and re-formatting reproduces the text
    for line in (run_dir / "qrpn.csv").read_text().splitlines()[1:50]:
        for cell in line.split(","):
            assert repr(float(cell)) == cell


def test_band_outside_grid_exits_nonzero(scenario_copy, tmp_path, capsys):
    _edit(scenario_copy, lambda d: d["analyses"].update(attribution_bands_hz=[[21000.0, 2.0e6]]))
    out = tmp_path / "o"
    assert cli.main(["run", str(scenario_copy), "--out", str(out)]) != 0
    err = capsys.readouterr().err
    assert "[21000.0, 2000000.0]" in err and "outside the grid" in err
    assert not out.exists()


def test_grid_override_moves_band_outside(scenario_path, tmp_path, capsys):
    rc = cli.main(["run", str(scenario_path), "--grid", "100:1e5:500", "--out", str(tmp_path / "o")])
    assert rc != 0
    assert "150000" in capsys.readouterr().err


def test_partial_outputs_removed(scenario_path, tmp_path, capsys):
    out = tmp_path / "o"
    out.mkdir()
    (out / "total.csv").mkdir()  # writing total.csv will fail
    assert cli.main(["run", str(scenario_path), "--out", str(out)]) != 0
    assert [p.name for p in out.iterdir()] == ["total.csv"]
    assert "error" in capsys.readouterr().err


def test_missing_operating_point(scenario_copy, capsys):
    _edit(scenario_copy, lambda d: d.update(operating_point="9W"))
    assert cli.main(["run", str(scenario_copy), "--out", str(scenario_copy.parent / "o")]) == 2
    assert "9W" in capsys.readouterr().err


def test_unknown_analysis_key(scenario_copy, capsys):
    _edit(scenario_copy, lambda d: d["analyses"].update(plot=True))
    assert cli.main(["run", str(scenario_copy)]) == 2
    assert "plot" in capsys.readouterr().err


def test_env_var_output_dir(scenario_path, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", str(scenario_path)]) == 0
    assert {p.name for p in (tmp_path / "env").iterdir()} == EXPECTED


def test_out_flag_beats_env(scenario_path, tmp_path, monkeypatch):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path / "env"))
    assert cli.main(["run", str(scenario_path), "--out", str(tmp_path / "flag")]) == 0
    assert (tmp_path / "flag" / "total.csv").exists()
    assert not (tmp_path / "env").exists()


def test_scenario_hash_tracks_input_bytes(scenario_copy):
    cfg = scenario_copy.parent / "baseline.yaml"
    h0 = fileio.sha256_of(scenario_copy, cfg)
    assert fileio.sha256_of(scenario_copy, cfg) == h0
    cfg.write_bytes(cfg.read_bytes() + b" ")
    h1 = fileio.sha256_of(scenario_copy, cfg)
    scenario_copy.write_bytes(scenario_copy.read_bytes() + b"#")
    h2 = fileio.sha256_of(scenario_copy, cfg)
    assert len({h0, h1, h2}) == 3


def test_hash_separates_files(tmp_path):
    a, b, c, d = (tmp_path / n for n in "abcd")
    a.write_bytes(b"xy")
    b.write_bytes(b"z")
    c.write_bytes(b"x")
    d.write_bytes(b"yz")
    assert fileio.sha256_of(a, b) != fileio.sha256_of(c, d)


def test_module_entry_point(tmp_path):
    p = subprocess.run([sys.executable, "-m", "optomech_noise", "import-check", str(tmp_path / "missing.csv")],
                       capture_output=True, text=True)
    assert p.returncode == 2
    assert "missing.csv" in p.stderr


# ---------------------------------------------------------------------------
# spectrum files


def test_csv_round_trip_lossless(baseline_budget, tmp_path):
    p = tmp_path / "qrpn.csv"
    fileio.write_spectrum_csv(p, baseline_budget["qrpn"], with_label=True)
    back = fileio.read_spectrum_csv(p)
    assert np.array_equal(back.f, baseline_budget.grid.points)
    assert np.array_equal(back.asd, baseline_budget["qrpn"].asd)
    assert back.label == "qrpn"


def test_json_round_trip_lossless(run_dir, baseline_budget):
    comps = fileio.read_spectra_json(run_dir / "budget.json")
    for k, s in baseline_budget.components.items():
        assert np.array_equal(comps[k].asd, s.asd)
    assert np.array_equal(comps["total"].asd, baseline_budget.total.asd)


def test_negative_asd_names_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("frequency_hz,asd_m_per_sqrthz\n1.0,1e-15\n2.0,-3e-15\n3.0,1e-15\n")
    with pytest.raises(fileio.SpectrumFileError, match="line 3"):
        fileio.read_spectrum_csv(p)


def test_nonmonotone_frequency(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("frequency_hz,asd_m_per_sqrthz\n1.0,1e-15\n3.0,1e-15\n2.0,1e-15\n")
    with pytest.raises(fileio.SpectrumFileError, match="strictly increasing"):
        fileio.read_spectrum_csv(p)


@pytest.mark.parametrize("text, msg", [
    ("freq,asd\n1,1\n2,1\n", "line 1"),
    ("frequency_hz,asd_m_per_sqrthz\n1,abc\n2,1\n", "line 2"),
    ("frequency_hz,asd_m_per_sqrthz\n1,1,1\n2,1\n", "line 2"),
    ("frequency_hz,asd_m_per_sqrthz\n1,nan\n2,1\n", "line 2"),
    ("frequency_hz,asd_m_per_sqrthz\n1,1\n", "at least 2"),
])
def test_csv_format_errors(tmp_path, text, msg):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(fileio.SpectrumFileError, match=msg):
        fileio.read_spectrum_csv(p)


def test_json_errors(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"frequency_hz": [1, 2], "components": {"total": [1, -1]}}')
    with pytest.raises(fileio.SpectrumFileError, match="row 2"):
        fileio.read_spectra_json(p)
    p.write_text("{not json")
    with pytest.raises(fileio.SpectrumFileError, match="line 1"):
        fileio.read_spectra_json(p)


def test_resample_power_law_exact():
    g = FrequencyGrid.logspace(10, 1e4, 10)
    s = NoiseSpectrum(g, 4e-12 * g.points**-2.5, "x")
    target = FrequencyGrid(np.geomspace(20, 5e3, 37))
    r = fileio.resample(s, target)
    assert np.allclose(r.asd, 4e-12 * target.points**-2.5, rtol=1e-12)


def test_resample_copies_grid_points(baseline_budget):
    s = baseline_budget.total
    sub = FrequencyGrid(s.f[100:200])
    assert np.array_equal(fileio.resample(s, sub).asd, s.asd[100:200])


def test_resample_no_extrapolation(baseline_budget):
    with pytest.raises(fileio.SpectrumFileError, match="exceeds"):
        fileio.resample(baseline_budget.total, FrequencyGrid([50.0, 1e3]))


def test_import_check_cli(run_dir, capsys):
    assert cli.main(["import-check", str(run_dir / "total.csv")]) == 0
    assert "2001 points" in capsys.readouterr().out
    assert cli.main(["import-check", str(run_dir / "budget.json"), "--component", "qrpn",
                     "--grid", "1000:1e5:50"]) == 0
    assert cli.main(["import-check", str(run_dir / "budget.json"), "--component", "nope"]) == 2


def test_imported_thermometry_standins(baseline, grid, tmp_path):
    # low- and high-power thermal stand-ins differing by 2% in asd
    cfg, model, _, _ = baseline
    lo = total_thermal_asd(model, cfg.temperature, grid)
    hi = total_thermal_asd(model, cfg.temperature * 1.02**2, grid)
    fileio.write_spectrum_csv(tmp_path / "lo.csv", lo)
    fileio.write_spectrum_csv(tmp_path / "hi.csv", hi)
    target = GridSpec(500.0, 5e3, 200).build()
    a = fileio.import_spectrum(tmp_path / "lo.csv", grid=target)
    b = fileio.import_spectrum(tmp_path / "hi.csv", grid=target)
    assert infer_temperature_ratio(a, b, (1e3, 2e3)) == pytest.approx(1.0404, abs=0.005)


# ---------------------------------------------------------------------------
# compare


def test_compare_self(run_dir, capsys):
    assert cli.main(["compare", str(run_dir / "budget.json"), str(run_dir / "total.csv"),
                     "--bands", "21000:22000", "1000:2000"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert [r["ratio"] for r in rep["bands"]] == pytest.approx([1.0, 1.0], rel=1e-12)


def test_compare_no_qrpn(run_dir, baseline_budget, tmp_path):
    fileio.write_spectrum_csv(tmp_path / "noq.csv", baseline_budget.without("qrpn").total)
    out = tmp_path / "report.json"
    assert cli.main(["compare", str(tmp_path / "noq.csv"), str(run_dir / "total.csv"),
                     "--bands", "21000:22000", "--out", str(out)]) == 0
    ratio = json.loads(out.read_text())["bands"][0]["ratio"]
    frac = bud.attribute(baseline_budget, (21e3, 22e3)).fractions["qrpn"]
    assert ratio == pytest.approx(1 / math.sqrt(1 - frac), rel=1e-9)
    assert ratio == pytest.approx(1.37, abs=0.03)


def test_compare_empty_bands(run_dir, capsys):
    assert cli.main(["compare", str(run_dir / "budget.json"), str(run_dir / "total.csv")]) == 0
    assert json.loads(capsys.readouterr().out)["bands"] == []


def test_compare_bad_band(run_dir, capsys):
    assert cli.main(["compare", str(run_dir / "budget.json"), str(run_dir / "total.csv"),
                     "--bands", "abc"]) == 2
    assert cli.main(["compare", str(run_dir / "budget.json"), str(run_dir / "total.csv"),
                     "--bands", "50:200"]) == 2
    assert "band" in capsys.readouterr().err


def test_evaluate_summary_values(scenario_path):
    sc = load_scenario(scenario_path)
    budget, s = evaluate(sc)
    assert s["thermometry"]["inferred_ratio"] == pytest.approx(4.0, abs=0.01)
    assert s["power_scan"]["qrpn_exponent"] == pytest.approx(0.5, abs=0.01)
    assert s["spring_frequency_hz"] > 100e3
