import hashlib
import json

import numpy as np
import pytest

from excikit.cli import (
    CSV_COLUMNS,
    PRESETS,
    RunConfig,
    build_cells,
    load_config,
    main,
    read_csv,
    run_scenario,
)
from excikit.errors import ValidationError


def write_cfg(tmp_path, **body):
    body.setdefault("output_dir", str(tmp_path / "out"))
    p = tmp_path / "cfg.json"
    p.write_text(json.dumps(body))
    return p


CUSTOM = {
    "scenario": "custom",
    "ensemble": {"n_atoms": 3, "dipole_coupling": 0.1, "detuning": -5.0},
    "tau_max": 10.0,
    "tau_steps": 40,
    "methods": ["analytic", "laplace_numeric"],
    "plots": False,
}


def test_presets_listing(capsys):
    assert main(["presets"]) == 0
    out = capsys.readouterr().out
    for name in PRESETS:
        assert name in out


def test_preset_cells():
    cfg = load_config({"scenario": "fig1"})
    assert len(build_cells(cfg)) == 5
    assert [c.ensemble.n_atoms for c in build_cells(load_config({"scenario": "fig5"}))] == [2, 4, 10, 20]


def test_run_writes_bundle(tmp_path):
    path = write_cfg(tmp_path, **CUSTOM)
    assert main(["run", str(path)]) == 0
    out = tmp_path / "out"
    csvs = sorted(out.glob("*.csv"))
    assert len(csvs) == 2
    man = json.loads((out / "manifest.json").read_text())
    for entry in man["files"]:
        assert hashlib.sha256((out / entry["file"]).read_bytes()).hexdigest() == entry["sha256"]
    header = csvs[0].read_text().splitlines()[0]
    assert tuple(header.split(",")) == CSV_COLUMNS


def test_csv_round_trip(tmp_path):
    cfg = load_config({**CUSTOM, "output_dir": str(tmp_path)})
    res = run_scenario(cfg)
    name = next(f for f in res["files"] if f.endswith("analytic.csv"))
    d = read_csv(tmp_path / name)
    tau = cfg.tau_grid
    assert d["tau"].size == 3 * tau.size
    amp = d["re_amplitude"] + 1j * d["im_amplitude"]
    assert np.array_equal(d["population"], amp.real ** 2 + amp.imag ** 2)
    # the first atom starts excited
    first = (d["tau"] == 0) & (d["atom_index"] == 1)
    assert amp[first][0] == 1


def test_rerun_is_byte_identical(tmp_path):
    a = run_scenario(load_config({**CUSTOM, "output_dir": str(tmp_path / "a")}))
    b = run_scenario(load_config({**CUSTOM, "output_dir": str(tmp_path / "b")}))
    assert a["files"] == b["files"]
    for f in a["files"]:
        if f == "metadata.json":
            continue
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_markovian_and_explicit_init(tmp_path):
    path = write_cfg(tmp_path, scenario="custom",
                     ensemble={"n_atoms": 2, "dipole_coupling": 0.0, "detuning": 0.0,
                               "kernel": {"type": "markovian", "gamma": 1.0}},
                     init=[[0.6, 0.0], [0.0, 0.8]], tau_max=5.0, tau_steps=20,
                     methods=["analytic", "laplace_numeric"], plots=False)
    assert main(["run", str(path)]) == 0


def test_png_written(tmp_path):
    cfg = load_config({**CUSTOM, "plots": True, "output_dir": str(tmp_path)})
    res = run_scenario(cfg)
    pngs = [f for f in res["files"] if f.endswith(".png")]
    assert len(pngs) == 2
    assert (tmp_path / pngs[0]).read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


@pytest.mark.parametrize("body", [
    {**CUSTOM, "colour": "blue"},
    {**CUSTOM, "methods": ["magic"]},
    {**CUSTOM, "tau_steps": 1.5},
    {"scenario": "nope"},
    {"scenario": "custom"},
    {**CUSTOM, "ensemble": {**CUSTOM["ensemble"], "n_atoms": 0}},
    {**CUSTOM, "init": [1.0, 1.0, 0.0]},
])
def test_bad_configs_exit_2(tmp_path, body, capsys):
    assert main(["run", str(write_cfg(tmp_path, **body))]) == 2
    assert "invalid input" in capsys.readouterr().err


def test_missing_file(tmp_path):
    assert main(["run", str(tmp_path / "absent.json")]) == 2


def test_invalid_json(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(ValidationError):
        load_config(p)


def test_markovian_scaling(tmp_path, capsys):
    path = write_cfg(tmp_path, scenario="scaling",
                     ensemble={"n_atoms": 4, "dipole_coupling": 0.0, "detuning": 0.0,
                               "kernel": {"type": "markovian", "gamma": 1.0}},
                     n_list=[2, 4, 8, 16])
    assert main(["scaling", str(path)]) == 0
    assert "PASS" in capsys.readouterr().out
    rep = json.loads((tmp_path / "out" / "scaling.json").read_text())
    assert rep["exponent"] == pytest.approx(1, abs=0.05)


def test_compare(tmp_path, capsys):
    path = write_cfg(tmp_path, **CUSTOM)
    assert main(["compare", str(path)]) == 0
    rep = json.loads((tmp_path / "out" / "compare.json").read_text())
    assert rep["pass"] and len(rep["pairs"]) == 1


def test_compare_needs_two_methods(tmp_path):
    path = write_cfg(tmp_path, **{**CUSTOM, "methods": ["analytic"]})
    assert main(["compare", str(path)]) == 2


def test_unsupported_method_is_recorded(tmp_path):
    # the convolution oracle has no time kernel for a Markovian reservoir
    cfg = load_config({**CUSTOM, "output_dir": str(tmp_path), "methods": ["analytic", "oracle_convolution"],
                       "ensemble": {**CUSTOM["ensemble"], "kernel": {"type": "markovian"}}})
    res = run_scenario(cfg)
    assert [r["method"] for r in res["failed"]] == ["oracle_convolution"]
    meta = json.loads((tmp_path / "metadata.json").read_text())
    assert {r["status"] for r in meta["runs"]} == {"ok", "error"}


def test_run_config_validation():
    base = load_config(CUSTOM)
    with pytest.raises(ValidationError):
        RunConfig("custom", base.ensemble, tau_max=-1.0)
    with pytest.raises(ValidationError):
        RunConfig("custom", base.ensemble, init="everything")
