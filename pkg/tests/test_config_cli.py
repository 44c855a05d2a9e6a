import json

import numpy as np
import pytest
import yaml

from nlscontrol.cli import main
from nlscontrol.config import EXPERIMENTS, ExperimentConfig, preset, preset_names
from nlscontrol.errors import ConfigError
from nlscontrol.output import (
    csv_text, dump_coefficients, load_coefficients, read_csv, write_csv,
)
from nlscontrol.spectral import TorusGrid, random_field


def summary(path):
    _, rows = read_csv(path / "summary.csv")
    return {r[0]: r[1] for r in rows}


# -- configuration -------------------------------------------------------------------------

def test_all_presets_valid():
    names = preset_names()
    assert len(names) >= 16
    for name in names:
        cfg = preset(name)
        assert cfg.experiment in EXPERIMENTS
        again = ExperimentConfig.from_yaml(cfg.to_yaml())
        assert again == cfg


def test_preset_contents():
    cfg = preset("decay-focusing")
    assert cfg.n_modes == 64 and cfg.lam == (-1.0,)
    assert cfg.params["n_samples"] == 20 and list(cfg.params["R0"]) == [1.0, 5.0]
    tri = preset("trilinear-scan-s2")
    assert tri.params["n_samples"] == 200
    assert all(p.seed == 0 for p in map(preset, preset_names()))


def test_unknown_preset():
    with pytest.raises(ConfigError):
        preset("no-such-preset")


@pytest.mark.parametrize("patch", [
    {"grid": {"n_modes": 33}},
    {"grid": {"n_modes": 4}},
    {"time": {"dt": -1e-3, "T": 1.0}},
    {"time": {"dt": 0.3, "T": 1.0}},
    {"lam": []},
    {"geometry": {"omega": [2.0, 1.0]}},
    {"geometry": {"omega": [0.0, 1.0], "plateau": [0.5, 1.5]}},
    {"seed": -1},
    {"bogus": 1},
    {"params": {"amplitude": 1e-2, "no_such_param": 3}},
])
def test_malformed_configs(patch):
    d = {"experiment": "null-control"}
    d.update(patch)
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict(d)


def test_override():
    cfg = preset("plane-wave").override(seed=5, out="x", threads=None)
    assert cfg.seed == 5 and cfg.out == "x" and cfg.threads == preset("plane-wave").threads


# -- output formats ------------------------------------------------------------------------

def test_csv_full_precision(tmp_path):
    x = 1 / 3
    text = csv_text(["a", "b", "c"], [[x, 7, True]])
    assert text.splitlines()[1] == "3.3333333333333331e-01,7,1"
    assert float(text.splitlines()[1].split(",")[0]) == x
    write_csv(tmp_path / "t.csv", ["a"], [[x]])
    assert read_csv(tmp_path / "t.csv")[1][0][0] == x
    assert [p.name for p in tmp_path.iterdir()] == ["t.csv"]


def test_coefficient_dump_layout(tmp_path):
    grid = TorusGrid(8)
    u = random_field(grid, np.random.default_rng(0))
    dump_coefficients(tmp_path / "u.bin", grid, [u.coeffs, 2 * u.coeffs])
    raw = np.frombuffer((tmp_path / "u.bin").read_bytes(), dtype="<c16")
    assert raw.size == 16
    assert raw[0] == u.coeffs[4]   # mode -4 comes first
    assert raw[4] == u.coeffs[0]   # then ... mode 0 in the middle
    back = load_coefficients(tmp_path / "u.bin", grid)
    np.testing.assert_array_equal(back[1], 2 * u.coeffs)


# -- command line ----------------------------------------------------------------------------

def test_cli_plane_wave(tmp_path):
    out = tmp_path / "pw"
    assert main(["simulate", "--preset", "plane-wave", "--out", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "ok" and man["rng"]["seed"] == 0
    assert man["config"]["experiment"] == "simulate"
    assert summary(out)["linf_error_final[+1]"] <= 1e-8
    for f in man["files"]:
        assert (out / f).exists()


def test_cli_manifest_reproduces(tmp_path):
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["linear-control", "--preset", "linear-hum", "--out", str(out1)]) == 0
    cfg = json.loads((out1 / "manifest.json").read_text())["config"]
    cfg_path = tmp_path / "cfg.yaml"
    cfg_path.write_text(yaml.safe_dump(cfg))
    assert main(["linear-control", "--config", str(cfg_path), "--out", str(out2)]) == 0
    assert (out1 / "summary.csv").read_bytes() == (out2 / "summary.csv").read_bytes()


def test_cli_invalid_config_writes_nothing(tmp_path):
    bad = tmp_path / "bad.yaml"
    bad.write_text("experiment: simulate\ngrid: {n_modes: 33}\n")
    out = tmp_path / "never"
    assert main(["simulate", "--config", str(bad), "--out", str(out)]) == 2
    assert not out.exists()


def test_cli_experiment_mismatch(tmp_path):
    out = tmp_path / "never"
    assert main(["steer", "--preset", "plane-wave", "--out", str(out)]) == 2
    assert not out.exists()


def test_cli_unknown_preset(tmp_path):
    assert main(["simulate", "--preset", "nope", "--out", str(tmp_path / "x")]) == 2


def test_cli_list_presets(capsys):
    assert main(["--list-presets"]) == 0
    assert "plane-wave" in capsys.readouterr().out.split()


def test_cli_numerical_failure(tmp_path):
    cfg = preset("null-control").to_dict()
    cfg["params"]["amplitude"] = 3.0
    cfg["lam"] = [1.0]
    path = tmp_path / "big.yaml"
    path.write_text(yaml.safe_dump(cfg))
    out = tmp_path / "fail"
    assert main(["null-control", "--config", str(path), "--out", str(out)]) == 3
    man = json.loads((out / "manifest.json").read_text())
    assert man["status"] == "failed" and man["exit_code"] == 3
    assert man["failure"]["type"] == "ContractionError"
    assert man["failure"]["phase"]
    assert not (out / "summary.csv").exists()


def test_cli_thread_count_does_not_change_results(tmp_path):
    outs = []
    for threads in (1, 2):
        out = tmp_path / f"t{threads}"
        args = ["estimate-scan", "--preset", "difference-scan", "--out", str(out),
                "--threads", str(threads)]
        assert main(args) == 0
        outs.append((out / "summary.csv").read_bytes())
    assert outs[0] == outs[1]


def test_cli_seed_changes_random_results(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["linear-control", "--preset", "linear-hum", "--out", str(a)]) == 0
    assert main(["linear-control", "--preset", "linear-hum", "--out", str(b), "--seed", "1"]) == 0
    assert (a / "summary.csv").read_bytes() != (b / "summary.csv").read_bytes()
