import csv
import json
import math

import pytest

from orliczlab import cli
from orliczlab.bbm import CONVERGED, ConvergenceReport

LINEAR = cli.CONFIG_DIR / "linear_1d.json"
DISK = cli.CONFIG_DIR / "varexp_disk.json"


def write_config(tmp_path, name="exp.json", **overrides):
    data = json.loads(LINEAR.read_text())
    data.update(overrides)
    path = tmp_path / name
    path.write_text(json.dumps(data, indent=2))
    return path


def test_bundled_configs_load():
    for path in sorted(cli.CONFIG_DIR.glob("*.json")):
        cfg = cli.load_config(path)
        assert cfg.name == path.stem


def test_config_roundtrip():
    cfg = cli.load_config(LINEAR)
    again = cli.ExperimentConfig.from_json(json.loads(cfg.dumps()))
    assert again == cfg


def test_converge_linear(tmp_path, capsys):
    out = tmp_path / "out"
    assert cli.main(["converge", "--config", str(LINEAR), "--out", str(out)]) == cli.EXIT_OK
    assert CONVERGED in capsys.readouterr().out
    assert sorted(p.name for p in out.iterdir()) == ["linear_1d.csv", "linear_1d.report.json", "linear_1d.svg"]


def test_csv_matches_report(tmp_path):
    out = tmp_path / "out"
    cli.main(["converge", "--config", str(LINEAR), "--out", str(out)])
    rep = json.loads((out / "linear_1d.report.json").read_text())
    with open(out / "linear_1d.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert tuple(rows[0]) == cli.CSV_COLUMNS
    assert len(rows) == len(rep["eps"])
    for k, row in enumerate(rows):
        assert float(row["eps"]) == rep["eps"][k]
        assert float(row["rho_eps"]) == rep["rho_eps"][k]
        assert float(row["eps_norm"]) == rep["eps_norm"][k]
        assert float(row["rel_err_modular"]) == rep["rel_err_modular"][k]


def test_reruns_are_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert cli.main(["converge", "--config", str(LINEAR), "--out", str(out)]) == 0
    for p in a.iterdir():
        assert p.read_bytes() == (b / p.name).read_bytes()


def test_report_rerender(tmp_path):
    out = tmp_path / "out"
    cli.main(["converge", "--config", str(LINEAR), "--out", str(out)])
    before = {p.name: p.read_bytes() for p in out.iterdir()}
    (out / "linear_1d.csv").unlink()
    (out / "linear_1d.svg").unlink()
    assert cli.main(["report", "--out", str(out)]) == 0
    assert {p.name: p.read_bytes() for p in out.iterdir()} == before


def test_report_without_reports_fails(tmp_path):
    assert cli.main(["report", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_grid_sweep_writes_one_set_per_h(tmp_path):
    path = write_config(tmp_path, grid_h=[0.002, 0.001])
    out = tmp_path / "out"
    assert cli.main(["converge", "--config", str(path), "--out", str(out)]) == 0
    assert (out / "linear_1d_h0.csv").exists() and (out / "linear_1d_h1.csv").exists()


def test_malformed_json(tmp_path, capsys):
    path = tmp_path / "bad.json"
    text = LINEAR.read_text().replace('"tolerance": 0.01,', '"tolerance": 0.01,,')
    path.write_text(text)
    out = tmp_path / "out"
    assert cli.main(["converge", "--config", str(path), "--out", str(out)]) == cli.EXIT_CONFIG
    line = text.splitlines().index(next(l for l in text.splitlines() if ",," in l)) + 1
    err = capsys.readouterr().err
    assert err.startswith(f"{path}:") and "config error" in err
    assert abs(int(err.split(":")[1]) - line) <= 1
    assert not out.exists()


@pytest.mark.parametrize("key,value", [
    ("kernel", {"family": "uniform", "eps": [0.2, 0.005]}),
    ("tolerance", -1.0),
    ("model", {"family": "nope"}),
    ("bogus", 1),
])
def test_invalid_fields_anchor_line(tmp_path, capsys, key, value):
    path = write_config(tmp_path, **{key: value})
    out = tmp_path / "out"
    assert cli.main(["converge", "--config", str(path), "--out", str(out)]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    lineno = int(err.split(":")[1])
    anchor = "eps" if key == "kernel" else key
    assert f'"{anchor}"' in path.read_text().splitlines()[lineno - 1]
    assert not out.exists()


def test_grid_h_override_validated(tmp_path):
    out = tmp_path / "out"
    code = cli.main(["converge", "--config", str(LINEAR), "--grid-h", "0.01", "--out", str(out)])
    assert code == cli.EXIT_CONFIG and not out.exists()


def test_missing_config():
    assert cli.main(["converge"]) == cli.EXIT_CONFIG


def test_certify_step_model_fails(tmp_path, capsys):
    path = write_config(tmp_path, model={"family": "step", "threshold": 1.0}, grid_h=[0.01],
                        kernel={"family": "uniform", "eps": [0.2, 0.1]},
                        certify={"ball_samples": 20, "n_samples": 500})
    out = tmp_path / "out"
    assert cli.main(["certify", "--config", str(path), "--out", str(out)]) == cli.EXIT_ASSUMPTION
    files = {p.name for p in (out / "assumptions").iterdir()}
    assert "linear_1d.doubling.json" in files
    rep = json.loads((out / "assumptions" / "linear_1d.doubling.json").read_text())
    assert rep["verdict"] == "violated" and rep["counterexample"]


def test_certify_power_holds(tmp_path):
    path = write_config(tmp_path, grid_h=[0.01], kernel={"family": "uniform", "eps": [0.2, 0.1]},
                        certify={"ball_samples": 20, "n_samples": 500})
    out = tmp_path / "out"
    assert cli.main(["certify", "--config", str(path), "--out", str(out)]) == cli.EXIT_OK


def test_norm_verb(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["norm", "--config", str(LINEAR), "--out", str(out)]) == 0
    row = json.loads((out / "linear_1d.norm.json").read_text())["rows"][0]
    assert row["c_n"] == 0.5
    assert row["modular_c_n_grad"] == pytest.approx(0.25, rel=2e-3)
    assert row["c_n_norm_grad"] == pytest.approx(0.5, rel=2e-3)


def test_c_n_verb(capsys):
    assert cli.main(["c-n", "--dim", "1", "--dim", "2", "--samples", "20000"]) == 0
    rows = json.loads(capsys.readouterr().out)
    assert [r["n"] for r in rows] == [1, 2]
    assert rows[1]["closed_form"] == pytest.approx(4 / (3 * math.pi))
    assert all(abs(r["z_score"]) < 4 for r in rows)


def test_report_json_roundtrip(tmp_path):
    out = tmp_path / "out"
    cli.main(["converge", "--config", str(LINEAR), "--out", str(out)])
    data = json.loads((out / "linear_1d.report.json").read_text())
    assert ConvergenceReport.from_json(data).to_json() == data


@pytest.mark.slow
def test_converge_disk(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["converge", "--config", str(DISK), "--out", str(out)]) == 0
    rep = json.loads((out / "varexp_disk.report.json").read_text())
    assert rep["classification"] == CONVERGED
