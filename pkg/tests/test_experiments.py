import json

import numpy as np
import pytest

from rmtlab.cli import main
from rmtlab.ensembles import BlockEnsembleSpec, PerturbationSpec
from rmtlab.errors import CapExceededError, ConfigError
from rmtlab.experiments import (EIGEN_COLUMNS, METRIC_COLUMNS, config_from_dict, load_config,
                                lsv_experiment, read_eigenvalues, read_metrics, run_experiment,
                                stieltjes_compare)


def circular(**kw):
    cfg = {"experiment": "circular-law",
           "ensemble": {"d": 2, "kind": "gaussian-complex", "mode": "quaternionic"},
           "sizes": [20], "samples": 3, "seed": 11}
    cfg.update(kw)
    return cfg


def test_fig1_setup_row_count(tmp_path):
    rep = run_experiment(circular(sizes=[100], samples=50), out=tmp_path)
    rows = read_eigenvalues(tmp_path / "eigenvalues.csv")
    assert len(rows) == 2 * 100 * 50
    assert rep.metric("conjugate_pairing_error") < 1e-10
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["seed"] == 11 and summary["version"]


def test_csv_schemas_round_trip(tmp_path):
    rep = run_experiment(circular(), out=tmp_path)
    with open(tmp_path / "metrics.csv") as fh:
        assert fh.readline().strip() == ",".join(METRIC_COLUMNS)
    with open(tmp_path / "eigenvalues.csv") as fh:
        assert fh.readline().strip() == ",".join(EIGEN_COLUMNS)
    back = read_metrics(tmp_path / "metrics.csv")
    assert [(r.metric_name, r.value) for r in back] == [(r.metric_name, r.value) for r in rep.metrics]
    eig = read_eigenvalues(tmp_path / "eigenvalues.csv")
    first = [v for i, n, v in eig if i == 0]
    assert np.array_equal(np.array(first), rep.eigenvalues[0][2])
    assert [(i, n) for i, n, _ in eig] == sorted((i, n) for i, n, _ in eig)


def test_determinism_and_workers(tmp_path, monkeypatch):
    run_experiment(circular(), out=tmp_path / "a")
    monkeypatch.setenv("RMTLAB_WORKERS", "3")
    run_experiment(circular(), out=tmp_path / "b")
    for name in ("metrics.csv", "eigenvalues.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


@pytest.mark.parametrize("bad, field", [
    ({"sizes": []}, "sizes"),
    ({"sizes": [1]}, "sizes[0]"),
    ({"samples": 0}, "samples"),
    ({"experiment": "nope"}, "experiment"),
    ({"ensemble": {"d": 2, "kind": "bernoulli-real", "mode": "quaternionic"}}, "ensemble"),
    ({"extra": 1}, "extra"),
    ({"schema_version": 9}, "schema_version"),
])
def test_config_validation_paths(bad, field):
    with pytest.raises(ConfigError) as err:
        config_from_dict(circular(**bad))
    assert err.value.field == field


def test_empty_grid_rejected():
    cfg = circular(experiment="stieltjes-compare", grid={"z": [], "w": ["1j"]})
    with pytest.raises(ConfigError) as err:
        config_from_dict(cfg)
    assert err.value.field == "grid.z"
    with pytest.raises(ConfigError):
        config_from_dict(circular(experiment="stieltjes-compare", grid={"z": [0], "w": ["0.5-1j"]}))


def test_load_config_file(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(circular()))
    assert load_config(path).sizes == [20]
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        load_config(path)


def test_assertions_drive_pass_flag():
    assert run_experiment(circular(assertions=[{"metric": "radial_gap", "max": 1.0}])).passed
    assert not run_experiment(circular(assertions=[{"metric": "radial_gap", "max": 1e-9}])).passed
    with pytest.raises(ConfigError):
        run_experiment(circular(assertions=[{"metric": "missing", "max": 1}]))


def test_lsv_experiment():
    spec = BlockEnsembleSpec.uniform(2, "bernoulli-real")
    plain = lsv_experiment(spec, 20, 10, 20, 1)
    ranked = lsv_experiment(spec, 20, 10, 20, 1, PerturbationSpec(1.0, 1.0, 1.0))
    for rep in (plain, ranked):
        assert len(rep.sigma_min) == 20 and np.all(rep.sigma_min >= 0)
    assert not np.array_equal(plain.sigma_min, ranked.sigma_min)
    with pytest.raises(CapExceededError):
        lsv_experiment(spec, 201, 10, 1, 1)


def test_lsv_run_writes_sigma_table(tmp_path):
    cfg = {"experiment": "lsv", "ensemble": {"d": 2, "kind": "bernoulli-real"}, "sizes": [10],
           "samples": 5, "params": {"A_exponent": 10}}
    run_experiment(cfg, out=tmp_path)
    lines = (tmp_path / "sigma_min.csv").read_text().splitlines()
    assert lines[0] == "sample_index,n,sigma_min" and len(lines) == 6


def test_stieltjes_compare_closed_form():
    spec = BlockEnsembleSpec.uniform(2, "gaussian-complex")
    rows = stieltjes_compare(spec, [30], 0, 1j, 2, 3)
    assert rows[0].m_limit == pytest.approx(1j * (5 ** 0.5 - 1) / 2, abs=1e-12)
    assert rows[0].mean_abs_dev < 0.05
    with pytest.raises(ValueError):
        stieltjes_compare(spec, [30], 0, -1j, 2, 3)


def test_other_experiment_kinds():
    g = run_experiment({"experiment": "g-function", "ensemble": {"d": 2}, "sizes": [30],
                        "grid": {"s": [1.5], "t": [0]}})
    assert g.metric("g_abs_error[0,0]") < 0.3
    lv = run_experiment({"experiment": "rate-levy", "ensemble": {"d": 2}, "sizes": [20],
                         "truncation": {"delta": 0.1}})
    assert 0 <= lv.metric("levy_truncation[0]") < 1


def test_cli_commands(tmp_path, capsys):
    assert main(["cubic-eval", "--z", "0", "--w", "1j"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["solutions"][0]["m"][1] == pytest.approx(0.6180339887498949)
    assert main(["smallball", "--coeffs", "1,1,1,1", "--beta", "1"]) == 0
    assert json.loads(capsys.readouterr().out)["rho"]["numerator"] == 5
    assert main(["gap", "--relation", "2;5", "--quiet"]) == 0
    assert main(["gap", "--generators", "1", "--bounds", "2", "--member", "2.6", "--delta", "0.5",
                 "--out", str(tmp_path / "g")]) == 0
    assert json.loads((tmp_path / "g" / "summary.json").read_text())["membership"] is None
    assert main(["truncation-check", "--atom", "gaussian-complex", "--trials", "1000", "--quiet"]) == 0
    assert main(["decoupling-check", "--n", "2", "--trials", "1000", "--quiet"]) == 0
    assert main(["ensemble-sample", "--sizes", "10", "--samples", "2", "--quiet",
                 "--out", str(tmp_path / "e")]) == 0
    assert (tmp_path / "e" / "eigenvalues.csv").exists()
    assert main(["radial-test", "--sizes", "10", "--samples", "1", "--max-gap", "1e-9", "--quiet"]) == 1
    assert main(["lsv", "--sizes", "10", "--samples", "3", "--perturb", "--require-zero", "--quiet"]) == 0
    assert main(["stieltjes-compare", "--sizes", "10", "--samples", "1", "--quiet"]) == 0
    assert main(["stieltjes-compare", "--w", "0.5-1j", "--quiet"]) == 2
    assert main(["rate-levy", "--sizes", "10", "--samples", "1", "--quiet"]) == 0


def test_cli_config_and_seed_override(tmp_path):
    path = tmp_path / "c.json"
    path.write_text(json.dumps(circular()))
    assert main(["radial-test", "--config", str(path), "--seed", "5", "--out", str(tmp_path / "o"),
                 "--quiet"]) == 0
    assert json.loads((tmp_path / "o" / "summary.json").read_text())["seed"] == 5


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(ConfigError):
        run_experiment(circular(), out=blocker / "sub")
