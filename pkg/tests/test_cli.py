import csv
import json

import pytest

from qrcmeas import cli
from qrcmeas.cli import ExperimentConfig, TipcOptions
from qrcmeas.reservoir import ReservoirConfig
from qrcmeas.tasks import gen_input, gen_narma

SMALL_TIPC = {"length": 300, "washout": 20, "max_degree": 2, "max_delay": 4}


def write_config(tmp_path, data, name="cfg.json"):
    path = tmp_path / name
    path.write_text(json.dumps(data), encoding="utf-8")
    return path


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def run_cli(args, capsys):
    code = cli.main([str(a) for a in args])
    out, err = capsys.readouterr()
    return code, out, err


# --------------------------------------------------------------------------- #
# Config
# --------------------------------------------------------------------------- #


@pytest.mark.parametrize(
    "kwargs",
    [
        {"task": "narma3x"},
        {"trials": 0},
        {"split": (10, 5, 100)},
        {"split": (10, 80, 200)},
        {"strengths": (11,)},
        {"task": "csv"},
        {"scales": ()},
        {"workers": 0},
    ],
)
def test_experiment_config_rejects(kwargs):
    with pytest.raises(ValueError):
        ExperimentConfig(**kwargs)


def test_tipc_options_reject():
    with pytest.raises(ValueError):
        TipcOptions(inputs=("gaussian",))
    with pytest.raises(ValueError):
        TipcOptions(mode="fast")


def test_config_round_trip():
    cfg = ExperimentConfig(
        task="narma5",
        reservoir=ReservoirConfig(seed=4, mode="trajectory", shots=128).with_strength(7),
        scales=(0.5, 1.0),
        tipc=TipcOptions(inputs=("symmetric",), correction="bonferroni"),
    )
    data = json.loads(json.dumps(cfg.to_dict()))
    assert ExperimentConfig.from_dict(data) == cfg


def test_unknown_config_key():
    with pytest.raises(ValueError):
        ExperimentConfig.from_dict({"tsk": "narma2"})


# --------------------------------------------------------------------------- #
# Experiments
# --------------------------------------------------------------------------- #


def test_tune_scale_uses_training_window_only():
    u = gen_input(100)
    y = gen_narma(u, 2)
    cfg = ReservoirConfig()
    best, errors = cli.tune_scale(u, y, (10, 80, 100), cfg, (0.5, 1.0, 2.0), 14)
    assert best == min(errors, key=errors.get)
    y_changed = y.copy()
    y_changed[80:] += 5.0
    assert cli.tune_scale(u, y_changed, (10, 80, 100), cfg, (0.5, 1.0, 2.0), 14) == (best, errors)
    with pytest.raises(ValueError):
        cli.tune_scale(u, y, (10, 80, 100), cfg, (1.0,), 69)


def test_mean_predictor_and_bias_only_agree():
    y = gen_narma(gen_input(100), 2)
    assert cli.bias_only_error(y, (10, 80, 100)) == pytest.approx(cli.mean_predictor(y, (10, 80, 100))["nmse_paper"], rel=1e-12)


def test_run_prediction_trials_and_band():
    cfg = ExperimentConfig(reservoir=ReservoirConfig(mode="trajectory", shots=256), trials=3)
    res = cli.run_prediction(cfg)
    m = res["metrics"]
    assert [t["seed"] for t in m["trials"]] == [0, 1, 2]
    agg = m["aggregate"]["nmse_paper"]
    assert agg["std"] > 0
    assert agg["band_2sigma"] == pytest.approx([agg["mean"] - 2 * agg["std"], agg["mean"] + 2 * agg["std"]])
    assert m["noise"] == cli.NOISE_LABELS["trajectory"]


def test_workers_do_not_change_results():
    cfg = ExperimentConfig(reservoir=ReservoirConfig(mode="trajectory", shots=128), trials=2)
    a = cli.run_prediction(cfg)["metrics"]
    b = cli.run_prediction(ExperimentConfig(**{**cfg.__dict__, "workers": 2}))["metrics"]
    assert a == b


def test_parity_summary_counts():
    cfg = ExperimentConfig(tipc=TipcOptions(**SMALL_TIPC, inputs=("symmetric",)))
    report = cli.run_tipc(cfg)["symmetric"]["report"]
    summary = cli.parity_summary(report)
    surviving = report.surviving()
    assert summary["odd_count"] + summary["even_count"] == len(surviving)


# --------------------------------------------------------------------------- #
# Command line
# --------------------------------------------------------------------------- #


def test_narma_command_artifacts(tmp_path, capsys):
    out = tmp_path / "run"
    code, stdout, _ = run_cli(["narma", "--trials", 2, "--out", out], capsys)
    assert code == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["config.json", "features.csv", "metrics.json", "predictions.csv"]
    features = read_csv(out / "features.csv")
    preds = read_csv(out / "predictions.csv")
    assert len(features) - 1 == 90  # washout rows dropped
    assert len(preds) - 1 == 20  # test window only
    assert float(preds[1][0]) == 80.0
    metrics = json.loads((out / "metrics.json").read_text())
    assert metrics["aggregate"]["nmse_paper"]["mean"] < metrics["mean_predictor"]["nmse_paper"]


def test_config_echo_replays_identically(tmp_path, capsys):
    cfg = write_config(tmp_path, {"reservoir": {"mode": "trajectory", "shots": 200}, "trials": 2})
    a, b = tmp_path / "a", tmp_path / "b"
    assert run_cli(["narma", "--config", cfg, "--seed", 9, "--out", a], capsys)[0] == 0
    assert run_cli(["narma", "--config", a / "config.json", "--out", b], capsys)[0] == 0
    for name in ("features.csv", "predictions.csv", "metrics.json", "config.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
    assert json.loads((a / "config.json").read_text())["reservoir"]["seed"] == 9


def test_scale_search_reported(tmp_path, capsys):
    cfg = write_config(tmp_path, {"scales": [0.5, 1.0], "trials": 1})
    assert run_cli(["narma", "--config", cfg, "--out", tmp_path / "o"], capsys)[0] == 0
    metrics = json.loads((tmp_path / "o" / "metrics.json").read_text())
    assert set(metrics["scale_search"]["errors"]) == {"0.5", "1.0"}
    assert metrics["input_scale"] in (0.5, 1.0)


def test_csv_command_round_trip(tmp_path, capsys):
    u = gen_input(150)
    y = gen_narma(u, 2)
    data = tmp_path / "series.csv"
    with open(data, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "u", "y"])
        w.writerows([[t, u[t], y[t]] for t in range(150)])
    out = tmp_path / "csv_out"
    code, _, _ = run_cli(["csv", data, "--out", out], capsys)
    assert code == 0
    preds = read_csv(out / "predictions.csv")
    features = read_csv(out / "features.csv")
    # default split clamps to (100, 149, 150)
    assert len(preds) - 1 == 1 and len(features) - 1 == 50


def test_csv_command_with_config_split(tmp_path, capsys):
    data = tmp_path / "s.csv"
    data.write_text("t,u,y\n" + "".join(f"{t},{0.01 * t},{0.02 * t}\n" for t in range(40)))
    cfg = write_config(tmp_path, {"split": [5, 30, 40], "trials": 1})
    assert run_cli(["csv", data, "--config", cfg, "--out", tmp_path / "o"], capsys)[0] == 0
    assert len(read_csv(tmp_path / "o" / "predictions.csv")) - 1 == 10


def test_baseline_command(tmp_path, capsys):
    assert run_cli(["baseline", "--out", tmp_path / "b"], capsys)[0] == 0
    metrics = json.loads((tmp_path / "b" / "metrics.json").read_text())
    assert metrics["mode"] == "baseline" and len(metrics["trials"]) == 1


def test_tipc_command(tmp_path, capsys):
    cfg = write_config(tmp_path, {"tipc": SMALL_TIPC})
    out = tmp_path / "t"
    assert run_cli(["tipc", "--config", cfg, "--bonferroni", "--input", "both", "--out", out], capsys)[0] == 0
    capacity = json.loads((out / "capacity.json").read_text())
    assert set(capacity) == {"symmetric", "asymmetric"}
    assert capacity["symmetric"]["correction"] == "bonferroni"
    metrics = json.loads((out / "metrics.json").read_text())
    assert "parity" in metrics["asymmetric"]


def test_sweep_command(tmp_path, capsys):
    cfg = write_config(tmp_path, {"strengths": [0, 5, 10], "trials": 1, "tipc": SMALL_TIPC})
    out = tmp_path / "s"
    assert run_cli(["sweep", "--config", cfg, "--out", out], capsys)[0] == 0
    metrics = json.loads((out / "metrics.json").read_text())
    rows = metrics["rows"]
    assert [r["strength"] for r in rows] == [0.0, 5.0, 10.0]
    assert rows[0]["nmse_paper"] == pytest.approx(metrics["bias_only_nmse_paper"], rel=1e-9)
    assert rows[0]["c_tot"]["asymmetric"] == 0.0
    assert "rho" in metrics["spearman_strength_vs_nmse"]
    assert set(metrics["c_tot_argmax"]) == {"symmetric", "asymmetric"}
    assert len(read_csv(out / "sweep.csv")) == 4


@pytest.mark.parametrize(
    "args, kind",
    [
        (["narma", "--config", "/nonexistent/cfg.json"], "FileNotFoundError"),
        (["csv", "/nonexistent/data.csv"], "FileNotFoundError"),
        (["narma", "--mode", "psychic"], "UsageError"),
        (["frobnicate"], "UsageError"),
    ],
)
def test_errors_emit_json(tmp_path, capsys, args, kind):
    if kind == "UsageError":
        with pytest.raises(SystemExit) as exc:
            cli.main([*args, "--out", str(tmp_path / "x")])
        assert exc.value.code == 2
        err = capsys.readouterr().err
    else:
        code, _, err = run_cli([*args, "--out", tmp_path / "x"], capsys)
        assert code == 1
    payload = json.loads(err.strip().splitlines()[-1])
    assert payload["error"] == kind and payload["message"]


def test_invalid_config_value_exit_code(tmp_path, capsys):
    cfg = write_config(tmp_path, {"trials": 0})
    code, _, err = run_cli(["narma", "--config", cfg, "--out", tmp_path / "x"], capsys)
    assert code == 1
    assert json.loads(err)["error"] == "ValueError"
    assert not (tmp_path / "x").exists()
