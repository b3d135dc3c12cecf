import json

import pytest

from softbool.cli import ConfigError, RunConfig, dump_config, load_config, main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_predict_mixed(capsys):
    code, out, _ = run(capsys, "predict", "--beta", "0.05", "--gamma", "0.5", "--alpha", "0",
                       "--delta", "2", "--dim", "1")
    d = json.loads(out)
    assert code == 0 and d["regime"] == "Mixed"
    assert d["diameter_exponent"] == pytest.approx(0.5)


def test_predict_no_subcritical(capsys):
    code, out, _ = run(capsys, "predict", "--beta", "0.05", "--gamma", "0.7", "--delta", "2", "--dim", "2")
    assert code == 0 and json.loads(out)["regime"] == "NoSubcriticalPhase"


def test_predict_missing_flag(capsys):
    with pytest.raises(SystemExit) as e:
        main(["predict", "--beta", "0.05", "--gamma", "0.5", "--delta", "2"])
    assert e.value.code == 2


def test_predict_invalid_params(capsys):
    code, _, err = run(capsys, "predict", "--beta", "-1", "--gamma", "0.5", "--delta", "2", "--dim", "1")
    assert code == 2 and json.loads(err)["exit_code"] == 2


def test_sim_zero_trials(capsys, tmp_path):
    out = tmp_path / "r"
    code, text, _ = run(capsys, "sim", "diameter", "--trials", "0", "--out", str(out), "--workers", "1")
    assert code == 3 and not out.exists()
    assert "refused" in json.loads(text)


def test_sim_invalid_config(capsys, tmp_path):
    code, _, _ = run(capsys, "sim", "diameter", "--gamma", "1.5", "--out", str(tmp_path / "r"))
    assert code == 2


SIM = ["sim", "diameter", "--beta", "0.05", "--gamma", "0.5", "--delta", "2", "--dim", "1",
       "--box-side", "40000", "--trials", "20000", "--seed", "7", "--window", "16", "10000",
       "--workers", "1"]


def test_sim_diameter_files_and_determinism(capsys, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    code, text, _ = run(capsys, *SIM, "--out", str(a))
    assert code == 0
    s = json.loads(text)
    assert s["verdict"] == "PASS" and s["seed_source"] == "flag or config"
    assert abs(s["estimate"]["exponent"] - 0.5) <= 0.1
    for f in ("curve.csv", "samples.csv", "fit.json", "config.toml", "summary.json"):
        assert (a / f).exists()
    assert run(capsys, *SIM, "--out", str(b))[0] == 0
    for f in ("curve.csv", "samples.csv", "fit.json"):
        assert (a / f).read_bytes() == (b / f).read_bytes()
    # refit from the run directory
    code, text, _ = run(capsys, "fit", str(a))
    assert code == 0 and json.loads(text)["exponent"] == s["estimate"]["exponent"]
    # the written config reproduces the run
    c = tmp_path / "c"
    assert run(capsys, "sim", "diameter", "--config", str(a / "config.toml"), "--out", str(c))[0] == 0
    assert (a / "curve.csv").read_bytes() == (c / "curve.csv").read_bytes()


def test_sim_branching_csv(capsys, tmp_path):
    out = tmp_path / "br"
    code, _, _ = run(capsys, "sim", "branching", "--beta", "0.1", "--gamma", "0.25", "--delta", "2",
                     "--dim", "1", "--trials", "200000", "--window", "10", "100", "--workers", "1",
                     "--out", str(out))
    assert code == 0
    lines = (out / "branching.csv").read_text().splitlines()
    assert lines[0] == "trial,progeny,capped" and len(lines) == 200001
    assert lines[1].split(",")[0] == "0"


def test_sim_default_seed_recorded(capsys, tmp_path):
    code, text, _ = run(capsys, "sim", "degree", "--beta", "0.75", "--gamma", "0.5", "--delta", "2",
                        "--dim", "1", "--box-side", "4000", "--trials", "20000", "--window", "8", "64",
                        "--workers", "1", "--out", str(tmp_path / "d"))
    s = json.loads(text)
    assert code == 0 and s["seed_source"] == "default" and s["seed"] == 20240601


def test_config_roundtrip(tmp_path):
    cfg = RunConfig(beta=0.1 + 0.2, window=[16.0, 1000.0], origin_mark=0.25, ms=[2.0, 3.5]).validate()
    p = tmp_path / "c.toml"
    p.write_text(dump_config(cfg))
    back = RunConfig(**load_config(p)).validate()
    assert back == cfg


def test_config_unknown_key(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("beta = 0.1\nbogus = 3\n")
    with pytest.raises(ConfigError):
        load_config(p)


@pytest.mark.parametrize("kw", [dict(trials=-1), dict(box_side=0.0), dict(origin_mark=1.5),
                                dict(window=[10.0, 5.0]), dict(method="x"), dict(statistic="z"),
                                dict(statistic="branching", gamma=0.25, cap=0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        RunConfig(**kw).validate()


def test_validate_only(capsys):
    code, text, _ = run(capsys, "validate", "fast", "--only", "dwass_identity")
    assert code == 0 and "PASS dwass_identity" in text
