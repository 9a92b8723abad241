import json

import numpy as np
import pytest

from cococat import ILA, PLA, load_config, parse_config
from cococat import calibration as cal
from cococat.cli import main, parse_grid
from cococat.config import bundled_config_path, model_to_json
from cococat.errors import ConfigError
from cococat.validation import binomial_z, validate, variant_grid

FAST_NUMERICS = {"grid_size": 4096}


def _raw(name="paper-ila.cfg"):
    return json.loads(bundled_config_path(name).read_text())


@pytest.mark.parametrize("name", ["paper-ila.cfg", "paper-ilp.cfg", "paper-cpla.cfg",
                                  "paper-rpla.cfg"])
def test_bundled_configs_load_and_roundtrip(name):
    cfg = load_config(name)
    raw = _raw(name)
    raw["model"] = model_to_json(cfg.model)
    assert parse_config(raw).model == cfg.model


@pytest.mark.parametrize("mutate, where", [
    (lambda r: r.update(extra=1), "<root>"),
    (lambda r: r["covenant"].pop("T"), "covenant"),
    (lambda r: r["model"].update(type="XYZ"), "model"),
    (lambda r: r.update(schema_version=2), "schema_version"),
    (lambda r: r["variants"].update(coupon="sideways"), "variants/coupon"),
])
def test_schema_violations(mutate, where):
    raw = _raw()
    mutate(raw)
    with pytest.raises(ConfigError, match=where):
        parse_config(raw)


def test_value_errors_become_config_errors():
    raw = _raw()
    raw["covenant"]["nu"] = 3.0
    with pytest.raises(ConfigError):
        parse_config(raw)


def test_explicit_impact_block():
    raw = _raw()
    raw["impact"] = {"alpha": 0.3, "beta": 0.1}
    assert parse_config(raw).impact.alpha == 0.3


def test_parse_grid():
    assert parse_grid("1,2,3") == [1.0, 2.0, 3.0]
    assert parse_grid("0:1:3") == [0.0, 0.5, 1.0]
    for bad in ("", "1:2", "a,b", "0:1:0"):
        with pytest.raises(ConfigError):
            parse_grid(bad)


def _run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def _fast_cfg(tmp_path, name="paper-ila.cfg", **sim):
    raw = _raw(name)
    raw["numerics"].update(FAST_NUMERICS)
    raw["simulation"].update(sim)
    path = tmp_path / name
    path.write_text(json.dumps(raw))
    return str(path)


def test_cli_price(capsys, tmp_path):
    code, out, _ = _run(capsys, "price", _fast_cfg(tmp_path), "--d1", "1.5", "--nu", "0.3")
    assert code == 0
    res = json.loads(out)
    assert res["total"] == pytest.approx(res["e_i1"] + res["e_i2"] + res["e_i3"])
    assert out == json.dumps(res, indent=2, sort_keys=True) + "\n"


def test_cli_price_output_is_deterministic(capsys, tmp_path):
    path = _fast_cfg(tmp_path)
    assert _run(capsys, "price", path)[1] == _run(capsys, "price", path)[1]


def test_cli_exit_codes(capsys, tmp_path):
    assert _run(capsys, "price", str(tmp_path / "missing.cfg"))[0] == 3
    bad = tmp_path / "bad.cfg"
    bad.write_text("{not json")
    assert _run(capsys, "price", str(bad))[0] == 1
    assert _run(capsys, "price", _fast_cfg(tmp_path), "--nu", "2")[0] == 1
    with pytest.raises(SystemExit) as info:
        main(["frobnicate"])
    assert info.value.code == 1


def test_cli_sweep_uses_output_dir(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("COCOCAT_OUTPUT_DIR", str(tmp_path / "out"))
    code, out, _ = _run(capsys, "sweep", _fast_cfg(tmp_path), "--d2", "1:3:3", "--nu", "0.2,0.8")
    assert code == 0
    summary = json.loads(out)
    assert summary["rows"] == 6 and all(summary["monotonicity"].values())
    lines = (tmp_path / "out" / "sweep.csv").read_text().splitlines()
    assert lines[0] == "D1,D2,nu,q,EI1,EI2,EI3,total" and len(lines) == 7


def test_cli_sweep_rejects_empty_grid(capsys, tmp_path):
    assert _run(capsys, "sweep", _fast_cfg(tmp_path), "--d2", "")[0] == 1
    assert _run(capsys, "sweep", _fast_cfg(tmp_path))[0] == 1
    assert _run(capsys, "sweep", _fast_cfg(tmp_path), "--quantiles", "1.5")[0] == 1


def test_cli_calibrate_emits_valid_config(capsys, tmp_path, rng):
    ila = load_config("paper-ila.cfg").model
    data = tmp_path / "losses.csv"
    cal.write_losses(cal.simulate_dataset(ila, 60, rng), data)
    out_cfg = tmp_path / "cal.cfg"
    code, out, _ = _run(capsys, "calibrate", str(data), "--out", str(out_cfg))
    assert code == 0
    report = json.loads(out)
    assert report["severity1"]["selected"] in cal.PRICING_FAMILIES
    assert isinstance(load_config(out_cfg).model, ILA)

    pla_model = load_config("paper-rpla.cfg").model
    cal.write_losses(cal.simulate_dataset(pla_model, 60, rng), data)
    code, out, _ = _run(capsys, "calibrate", str(data), "--mode", "PLA", "--out", str(out_cfg),
                        "--families", "lognormal,gamma")
    assert code == 0 and isinstance(load_config(out_cfg).model, PLA)


def test_cli_calibrate_bad_data(capsys, tmp_path):
    data = tmp_path / "bad.csv"
    data.write_text("date,loss_region1,loss_region2\n2001-01-01,1,oops\n")
    code, _, err = _run(capsys, "calibrate", str(data))
    assert code == 3 and "line 2" in err


def test_cli_simulate_and_dump(capsys, tmp_path):
    dump = tmp_path / "paths.csv"
    code, out, _ = _run(capsys, "simulate", _fast_cfg(tmp_path, chunk_size=200), "--paths",
                        "400", "--seed", "5", "--dump", str(dump))
    assert code == 0
    res = json.loads(out)
    assert res["n_paths"] == 400 and res["seed"] == 5
    assert len(dump.read_text().splitlines()) == 401


def test_cli_validate_and_negative_control(capsys, tmp_path):
    path = _fast_cfg(tmp_path, chunk_size=1000)
    code, out, _ = _run(capsys, "validate", path, "--paths", "3000", "--trigger-paths", "5000")
    report = json.loads(out)
    assert code == (0 if report["passed"] else 4)
    assert {"coupon=plus", "exponent=theorem", "rate_start=unscaled"} <= set(report["variants"])
    code, out, _ = _run(capsys, "validate", path, "--paths", "3000", "--trigger-paths", "1000",
                        "--negative-control")
    assert code == 4


def test_variant_grid_and_binomial_z():
    grid = variant_grid()
    assert len(grid) == 4 and grid["selected"].coupon == "minus"
    assert binomial_z(0.5, 50, 100) == 0.0
    assert np.isinf(binomial_z(1.0, 99, 100))


def test_validate_report_structure():
    cfg = load_config("paper-cpla.cfg")
    rep = validate(cfg, n_paths=1000, trigger_paths=2000, survival_times=(1.0,),
                   martingale_times=(1.0,))
    names = [c["name"] for c in rep["checks"]]
    assert names == ["price.e_i1", "price.e_i2", "price.e_i3", "price.total", "martingale.t=1",
                     "survival.t=1"]


def test_validate_without_catastrophes_is_exact(tmp_path):
    raw = _raw()
    raw["model"]["intensity"] = 0.0
    raw["numerics"].update(FAST_NUMERICS)
    cfg = parse_config(raw)
    rep = validate(cfg, n_paths=500, trigger_paths=500)
    exact = [c for c in rep["checks"] if c["name"].startswith(("martingale", "survival"))
             or c["name"] == "price.e_i2"]
    assert exact and all(c["z"] == 0.0 and c["stderr"] == 0.0 for c in exact)


def test_identical_config_and_seed_give_identical_files(capsys, tmp_path):
    path = _fast_cfg(tmp_path, chunk_size=100)
    outputs = []
    for k in range(2):
        dump, csv_path = tmp_path / f"d{k}.csv", tmp_path / f"s{k}.csv"
        assert main(["simulate", path, "--paths", "200", "--dump", str(dump)]) == 0
        assert main(["sweep", path, "--d1", "1,2", "--out", str(csv_path)]) == 0
        outputs.append((dump.read_bytes(), csv_path.read_bytes()))
    capsys.readouterr()
    assert outputs[0] == outputs[1]
