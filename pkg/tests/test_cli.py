import csv
import json

import pytest

from resolvent_lab import cli, experiments
from resolvent_lab.errors import ConfigError


def write(path, data):
    path.write_text(data if isinstance(data, str) else json.dumps(data))
    return str(path)


def run(tmp_path, config, *extra, name="out"):
    cfg = write(tmp_path / f"{name}.json", config)
    out = tmp_path / name
    code = cli.main(["run", "--config", cfg, "--out", str(out), *extra])
    return code, out


# ---------------------------------------------------------------- config

@pytest.mark.parametrize("config,field", [
    ({"experiment": "spectrum", "operator": {"alpha_rl": 0.7}}, "operator.alpha_rl"),
    ({"experiment": "spectrum", "operator": {"N": 1}}, "operator.N"),
    ({"experiment": "spectrum", "operator": {"alpha": 0.2}}, "operator.alpha"),
    ({"experiment": "nonsense"}, "experiment"),
    ({}, "experiment"),
    ({"experiment": "evolve", "times": [0.5, 0.1]}, "times"),
    ({"experiment": "evolve", "alpha_series": 1.0}, "alpha_series"),
    ({"experiment": "theorem1", "window": [0, 4]}, "window"),
    ({"experiment": "theorem1", "levels": [64, 32]}, "levels"),
    ({"experiment": "lemma1", "seed": 1.5}, "seed"),
    ({"experiment": "lemma1", "trials": {"lemma1": 0}}, "trials.lemma1"),
    ({"experiment": "lemma1", "tolerances": {"made_up": 1}}, "tolerances.made_up"),
    ({"experiment": "lemma1", "colour": "red"}, "colour"),
])
def test_config_errors_name_the_field(config, field):
    with pytest.raises(ConfigError) as info:
        experiments.parse_config(config)
    assert info.value.field == field


def test_config_defaults():
    cfg = experiments.parse_config({"experiment": "all"})
    assert cfg.experiments == list(experiments.EXPERIMENTS)
    assert cfg.seed == 42 and cfg.alpha_series == 4.0
    assert experiments.parse_config({"experiment": "lemma1"}, seed=7).seed == 7


def test_malformed_alpha_exits_with_config_error(tmp_path, capsys):
    code, out = run(tmp_path, {"experiment": "spectrum", "operator": {"alpha_rl": 0.7}})
    err = capsys.readouterr().err
    assert code == 1
    assert "operator.alpha_rl" in err and "(0, 1/2)" in err
    assert not out.exists()


def test_invalid_json_exits_with_config_error(tmp_path, capsys):
    code, _ = run(tmp_path, "{not json")
    assert code == 1
    assert "valid JSON" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["run", "--config", str(tmp_path / "absent.json")]) == 1


def test_usage_error_exit_code():
    assert cli.main(["run"]) == 1
    assert cli.main(["frobnicate"]) == 1


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv("RESOLVENT_LAB_THREADS", "many")
    code, _ = run(tmp_path, {"experiment": "spectrum"})
    assert code == 1


# ------------------------------------------------------------------ runs

def test_lemma1_run(tmp_path):
    code, out = run(tmp_path, {"experiment": "lemma1", "trials": {"lemma1": 30}})
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    checks = {c["name"]: c for e in report["experiments"] for c in e["checks"]}
    assert checks["lemma1_holds"]["passed"] is True
    rows = list(csv.DictReader((out / "lemma1.csv").open()))
    assert len(rows) == 30 and set(rows[0]) == {"trial", "n", "theta", "margin", "holds"}


def test_theorem1_run_writes_ratio_csv(tmp_path):
    code, out = run(tmp_path, {"experiment": "theorem1", "levels": [32, 64], "window": [1, 8]})
    assert code == 0
    rows = list(csv.DictReader((out / "theorem1.csv").open()))
    assert {int(r["N"]) for r in rows} == {32, 64} and len(rows) == 16
    report = json.loads((out / "report.json").read_text())
    drift = [c for c in report["experiments"][0]["checks"] if c["name"] == "theorem1_drift"][0]
    assert drift["value"] < 0.1


def test_failed_check_exit_code(tmp_path):
    code, out = run(tmp_path, {"experiment": "theorem1", "levels": [32, 64], "window": [1, 8],
                               "tolerances": {"drift_max": 1e-15}})
    assert code == 2
    assert json.loads((out / "report.json").read_text())["passed"] is False


def test_computation_error_is_reported_with_provenance(tmp_path):
    code, out = run(tmp_path, {"experiment": "schatten", "operator": {"N": 8}})
    assert code == 2
    check = json.loads((out / "report.json").read_text())["experiments"][0]["checks"][0]
    assert check["name"] == "schatten_error"
    assert "resolvent_lab.errors.FitFailure" in check["value"]


def test_csv_uses_17_significant_digits(tmp_path):
    code, out = run(tmp_path, {"experiment": "spectrum", "operator": {"N": 8}})
    assert code == 0
    row = next(csv.DictReader((out / "spectrum.csv").open()))
    assert float(row["re_lambda"]) == float(repr(float(row["re_lambda"])))
    assert len(row["s_inverse"].replace(".", "").lstrip("0")) >= 16


def test_timestamps_only_in_metadata(tmp_path):
    code, out = run(tmp_path, {"experiment": "spectrum", "operator": {"N": 8}})
    meta = json.loads((out / "metadata.json").read_text())
    assert {"started", "finished", "seconds", "threads"} <= set(meta)
    assert "started" not in (out / "report.json").read_text()


def test_determinism_across_runs_and_threads(tmp_path, monkeypatch):
    config = {"experiment": ["lemma1", "property-suite"],
              "trials": {"lemma1": 20, "inequalities": 20, "lidskii": 10}, "seed": 5}
    monkeypatch.setenv("RESOLVENT_LAB_THREADS", "1")
    _, a = run(tmp_path, config, name="a")
    monkeypatch.setenv("RESOLVENT_LAB_THREADS", "4")
    _, b = run(tmp_path, config, name="b")
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    for f in a.glob("*.csv"):
        assert f.read_bytes() == (b / f.name).read_bytes()


def test_seed_flag_overrides_config(tmp_path):
    _, a = run(tmp_path, {"experiment": "lemma1", "trials": {"lemma1": 5}, "seed": 1}, "--seed", "9",
               name="a")
    assert json.loads((a / "report.json").read_text())["seed"] == 9


# ---------------------------------------------------------------- render

def test_render_empty_report():
    text = cli.render({"experiments": []})
    assert text.splitlines() == ["| experiment | check | claim | value | bound | verdict |",
                                 "|---|---|---|---|---|---|"]


def test_render_unknown_check_verbatim():
    seen = []
    report = {"experiments": [{"name": "x", "checks": [
        {"name": "mystery_metric", "value": 1.5, "passed": True}]}]}
    text = cli.render(report, warn=seen.append)
    assert "| x | mystery_metric |" in text
    assert seen and "mystery_metric" in seen[0]


def test_render_command(tmp_path, capsys):
    _, out = run(tmp_path, {"experiment": "spectrum", "operator": {"N": 8}})
    capsys.readouterr()
    assert cli.main(["render", str(out / "report.json")]) == 0
    text = capsys.readouterr().out
    assert text.count("| spectrum |") == 4 and "FAIL" not in text


def test_render_rejects_garbage(tmp_path):
    assert cli.main(["render", write(tmp_path / "r.json", "[1, 2")]) == 1
    assert cli.main(["render", write(tmp_path / "s.json", {"experiments": [{"checks": [3]}]})]) == 1
