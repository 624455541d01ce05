import json
import math

import numpy as np
import pytest

from layerlab.cli import main as cli_main
from layerlab.errors import ConfigInvalid, IllConditionedFit, IoError
from layerlab.harness import (
    ScenarioConfig,
    config_sha256,
    fit_scaling,
    load_config,
    parse_config,
    run_scenario,
    thread_budget,
    write_csv,
    write_json,
)


def test_parse_config_happy():
    cfg = parse_config({"kind": "toda", "seed": 3,
                        "params": {"d": 12.0, "l": 40.0}, "label": "a"})
    assert cfg.kind == "toda" and cfg.seed == 3 and cfg.label == "a"
    assert cfg.params["d"] == 12.0


@pytest.mark.parametrize("raw,msg", [
    ({}, "kind"),
    ({"kind": "warp"}, "kind"),
    ({"kind": "toda", "seed": -1}, "seed"),
    ({"kind": "toda", "seed": 1.5}, "seed"),
    ({"kind": "toda", "params": 3}, "params"),
    ({"kind": "toda", "label": 7}, "label"),
    ({"kind": "toda", "extra": 1}, "extra"),
])
def test_parse_config_rejects(raw, msg):
    with pytest.raises(ConfigInvalid) as err:
        parse_config(raw)
    assert msg in str(err.value)


def test_load_config_missing_file(tmp_path):
    with pytest.raises(IoError):
        load_config(tmp_path / "none.toml")


def test_load_config_bad_toml(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("kind = [unclosed")
    with pytest.raises(ConfigInvalid):
        load_config(p)


def test_config_hash_depends_on_content():
    a = ScenarioConfig(kind="toda", params={"d": 12.0})
    b = ScenarioConfig(kind="toda", params={"d": 12.5})
    assert config_sha256(a) != config_sha256(b)
    assert config_sha256(a) == config_sha256(
        ScenarioConfig(kind="toda", params={"d": 12.0}))
    assert len(config_sha256(a)) == 64


def test_csv_format_and_precision(tmp_path):
    path = tmp_path / "t.csv"
    rows = [[math.pi, 1.0 / 3.0], [1e-17, 6.02214076e23]]
    write_csv(path, ["a", "b"], rows, "f00d")
    lines = path.read_text().splitlines()
    assert lines[0] == "# config_sha256=f00d"
    assert lines[1] == "a,b"
    parsed = [[float(v) for v in ln.split(",")] for ln in lines[2:]]
    # 17 significant digits give an exact float64 round trip
    assert parsed == rows


def test_json_flat_and_finite(tmp_path):
    path = tmp_path / "t.json"
    write_json(path, {"b": np.float64(2.5), "a": np.int64(3)})
    text = path.read_text()
    assert json.loads(text) == {"a": 3, "b": 2.5}
    assert text.index('"a"') < text.index('"b"')
    with pytest.raises(IoError):
        write_json(path, {"x": float("nan")})
    with pytest.raises(IoError):
        write_json(path, {"x": float("inf")})


def test_fit_scaling_recovers_power_law():
    eps = np.geomspace(1e-4, 0.3, 9)
    y = 3.0 * eps ** 1.5
    out = fit_scaling(eps, y)
    assert out["p"] == pytest.approx(1.5, abs=1e-8)
    assert abs(out["c_loglog"]) < 1e-7
    assert out["p_stderr"] < 1e-8
    plain = fit_scaling(eps, y, with_loglog=False)
    assert plain["p"] == pytest.approx(1.5, abs=1e-10)


def test_fit_scaling_ill_conditioned():
    eps = [0.1, 0.1 + 1e-9, 0.1 + 2e-9, 0.1 + 3e-9]
    with pytest.raises(IllConditionedFit):
        fit_scaling(eps, [1.0, 1.0, 1.0, 1.0])


@pytest.mark.parametrize("eps,y", [
    ([0.1, 0.2], [1.0, 2.0]),
    ([0.1, 0.2, 1.5, 0.3], [1.0, 2.0, 3.0, 4.0]),
    ([0.1, 0.2, 0.3, 0.4], [1.0, -2.0, 3.0, 4.0]),
])
def test_fit_scaling_rejects(eps, y):
    with pytest.raises(ConfigInvalid):
        fit_scaling(eps, y)


def test_thread_budget_env(monkeypatch):
    monkeypatch.setenv("LAYERLAB_THREADS", "5")
    assert thread_budget() == 5
    monkeypatch.setenv("LAYERLAB_THREADS", "zero")
    with pytest.raises(ConfigInvalid):
        thread_budget()
    monkeypatch.setenv("LAYERLAB_THREADS", "0")
    with pytest.raises(ConfigInvalid):
        thread_budget()
    monkeypatch.delenv("LAYERLAB_THREADS")
    assert thread_budget() >= 1


def test_run_scenario_toda_artifacts(tmp_path):
    cfg = ScenarioConfig(kind="toda", params={"d": 12.0, "l": 40.0},
                         label="pair")
    summary = run_scenario(cfg, out_dir=tmp_path)
    assert summary["residual"] < 1e-9
    assert summary["gap_vs_closed_form"] < 1e-6
    data = json.loads((tmp_path / "pair.json").read_text())
    assert data["config_sha256"] == config_sha256(cfg)
    first = (tmp_path / "pair.csv").read_text().splitlines()[0]
    assert first == f"# config_sha256={config_sha256(cfg)}"


def test_run_scenario_deterministic_bytes(tmp_path):
    cfg = ScenarioConfig(kind="toda", params={"d": 10.0, "l": 30.0})
    run_scenario(cfg, out_dir=tmp_path / "a")
    run_scenario(cfg, out_dir=tmp_path / "b")
    assert (tmp_path / "a/toda.csv").read_bytes() == \
        (tmp_path / "b/toda.csv").read_bytes()
    assert (tmp_path / "a/toda.json").read_bytes() == \
        (tmp_path / "b/toda.json").read_bytes()


def test_run_scenario_unknown_kind():
    with pytest.raises(ConfigInvalid):
        run_scenario(ScenarioConfig(kind="warp"))


def test_sweep_driver_small(tmp_path, monkeypatch):
    monkeypatch.setenv("LAYERLAB_THREADS", "2")
    cfg = ScenarioConfig(
        kind="sweep",
        params={"l": 20.0, "margin": 8.0, "h": 0.1,
                "d_values": [9.5, 10.5, 11.5, 12.5]})
    summary = run_scenario(cfg, out_dir=tmp_path)
    assert summary["n_runs"] == 4
    assert 5.0 < summary["p_plain"] < 30.0
    assert summary["workers"] == 2
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert len(lines) == 2 + 4


def test_cli_exit_codes(tmp_path):
    assert cli_main(["toda", "--set", "d=12", "--set", "l=40",
                     "--quiet"]) == 0
    assert cli_main(["toda", "--set", "d=oops!", "--quiet"]) == 2
    assert cli_main(["toda", "--set", "d=6", "--set", "l=30",
                     "--quiet"]) == 3
    assert cli_main(["toda", "--config", str(tmp_path / "nope.toml"),
                     "--quiet"]) == 4


def test_cli_seed_and_config(tmp_path, capsys):
    cfgfile = tmp_path / "s.toml"
    cfgfile.write_text('kind = "toda"\nseed = 4\n\n[params]\nd = 12.0\nl = 40.0\n')
    rc = cli_main(["toda", "--config", str(cfgfile), "--seed", "9"])
    assert rc == 0
    out = json.loads(capsys.readouterr().out)
    assert out["residual"] < 1e-9


def test_cli_kind_mismatch(tmp_path):
    cfgfile = tmp_path / "s.toml"
    cfgfile.write_text('kind = "profile"\n')
    assert cli_main(["toda", "--config", str(cfgfile), "--quiet"]) == 2
