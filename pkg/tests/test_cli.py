import json

import numpy as np
import pytest

from ymhlab.cli import main
from ymhlab.currents import CubicalCurrent
from ymhlab.experiments import (
    ConfigError,
    ExperimentConfig,
    current_csv,
    read_current_csv,
)
from ymhlab.lattice import make_grid


def test_config_parse_and_types():
    cfg = ExperimentConfig.parse(
        "grid.n = 2\n# comment\neps.list = 0.2, 0.1\nflow.dt = 1e-3\n"
    )
    assert cfg.get_int("grid.n") == 2
    assert cfg.get_list("eps.list") == [0.2, 0.1]
    assert cfg.get_float("flow.dt") == pytest.approx(1e-3)
    assert cfg.get("missing.key", "fallback") == "fallback"


def test_config_rejects_malformed():
    with pytest.raises(ConfigError):
        ExperimentConfig.parse("just a line without equals\n")
    with pytest.raises(ConfigError):
        ExperimentConfig.parse("a.b = 1\na.b = 2\n")
    cfg = ExperimentConfig.parse("bogus.key = 1\n")
    with pytest.raises(ConfigError, match="unknown"):
        cfg.reject_unknown({"grid"})


def test_current_csv_roundtrip():
    g, _ = make_grid(3, (6, 6, 6), (1.0, 1.0, 1.0), [[0, 0, 0]] * 3)
    cur = CubicalCurrent(g, 1, {((1, 2, 3), (2,)): 2, ((0, 0, 0), (1,)): -1},
                         dual=True)
    back = read_current_csv(current_csv(cur), g)
    assert back == cur


def test_cli_vortex_and_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "v.cfg"
    cfg.write_text("vortex.k_list = 1\n")
    rc = main(["vortex", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert abs(payload["profiles"][0]["rel_defect"]) < 5e-3
    for name in ("quantization_report.csv", "profile_k1.csv",
                 "resolved_config.txt", "version_stamp.txt", "manifest.txt"):
        assert (tmp_path / "out" / name).exists()

    bad = tmp_path / "bad.cfg"
    bad.write_text("vortex.k_list = 1\nnot.a.key = 2\n")
    rc = main(["vortex", "--config", str(bad), "--out", str(tmp_path / "o2")])
    assert rc == 2


def test_cli_flatnorm(tmp_path, capsys):
    g, _ = make_grid(2, (6, 6), (1.0, 1.0), 0)
    S = CubicalCurrent(g, 0, {((0, 0), ()): 1, ((0, 2), ()): -1})
    s_csv = tmp_path / "s.csv"
    s_csv.write_text(current_csv(S))
    cfg = tmp_path / "f.cfg"
    cfg.write_text(
        f"grid.n = 2\ngrid.dims = 6,6\ngrid.lengths = 1.0,1.0\ngrid.flux = 0\n"
        f"flatnorm.s_csv = {s_csv}\n"
    )
    rc = main(["flatnorm", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["value"] == pytest.approx(2 / 6, abs=1e-9)
    assert payload["integral"] is True


def test_cli_info_snapshot(tmp_path, capsys):
    from ymhlab.lattice import vacuum_pair, write_snapshot

    g, bg = make_grid(2, (8, 8), (1.0, 1.0), 1)
    pair = vacuum_pair(g, bg, 0.25)
    snap = tmp_path / "s.ymh"
    write_snapshot(snap, pair)
    cfg = tmp_path / "i.cfg"
    cfg.write_text(f"info.snapshot = {snap}\n")
    rc = main(["info", "--config", str(cfg)])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["n"] == 2 and payload["eps"] == 0.25


def test_cli_determinism(tmp_path):
    cfg = tmp_path / "m.cfg"
    cfg.write_text(
        "grid.n = 2\ngrid.flux = 1\neps.list = 0.15\n"
        "minimize.dims_list = 16,16\nminimize.noise = 0.2\n"
        "flow.t_end = 0.05\nflow.monitor_stride = 10\nseed = 11\n"
    )
    outs = []
    for run_dir in ("a", "b"):
        rc = main(["minimize", "--config", str(cfg), "--out",
                   str(tmp_path / run_dir)])
        assert rc == 0
        outs.append((tmp_path / run_dir / "trajectory_eps0.15_N16x16.csv").read_bytes())
    assert outs[0] == outs[1]


def test_cli_width_small(tmp_path, capsys):
    cfg = tmp_path / "w.cfg"
    cfg.write_text(
        "grid.dims = 32,32\ngrid.lengths = 1.0,1.0\neps.list = 0.1\n"
        "width.tighten_time = 0.05\nwidth.transport_samples = 4\nseed = 3\n"
    )
    rc = main(["width", "--config", str(cfg), "--out", str(tmp_path / "out"),
               "--strict"])
    out = capsys.readouterr()
    assert rc in (0, 4)
    payload = json.loads(out.out)
    assert tuple(payload["class"]) == (1, 0)
