import json
import subprocess
import sys

import numpy as np
import pytest

from bmlab import cli
from bmlab.config import ExperimentConfig, shipped_config
from bmlab.sampler import load_sample, sample_stationary

CONFIGS = "src/bmlab/configs"


def write_config(tmp_path, cfg: ExperimentConfig, name="cfg.json"):
    path = tmp_path / name
    path.write_text(cfg.to_json())
    return str(path)


def shipped_path(tmp_path, name):
    return write_config(tmp_path, shipped_config(name), name)


def expand_lines(capsys, *argv):
    assert cli.main(["expand", *argv]) == cli.EXIT_OK
    return capsys.readouterr().out.splitlines()


def test_expand_cubic(capsys):
    out = expand_lines(capsys, "x^3")
    assert out[:4] == ["h0 = 0", "rank m = 1", "c1 = 3", "c3 = 1"]
    assert json.loads(out[-1])["coeffs"] == [[1, 3.0], [3, 1.0]]


def test_expand_square_and_scaled_quintic(capsys):
    assert expand_lines(capsys, "x^2")[:3] == ["h0 = 1", "rank m = 2", "c2 = 1"]
    out = expand_lines(capsys, "x^5", "--variance", "1.5")
    # x^5 = He5 + 10 g He3 + 15 g^2 He1 for variance g
    assert out[2:5] == ["c1 = 33.75", "c3 = 15", "c5 = 1"]


def test_expand_bad_observable(capsys):
    assert cli.main(["expand", "tan(x)"]) == cli.EXIT_INVALID
    assert "invalid input" in capsys.readouterr().err


def contraction_rows(capsys, *argv):
    assert cli.main(["contraction", *argv]) == cli.EXIT_OK
    lines = capsys.readouterr().out.splitlines()
    return lines[0], [[float(v) for v in ln.split(",")] for ln in lines[1:]]


def test_contraction_delta_is_one_over_N(capsys):
    header, rows = contraction_rows(capsys, "--q", "2", "--N", "5,9,17")
    assert header == "N,r=1"
    for N, val in rows:
        assert val == pytest.approx(1 / N, rel=1e-14)


def test_contraction_decreases_finite_support(capsys, tmp_path):
    header, rows = contraction_rows(capsys, "--q", "3", "--model", "tent:2", "--d", "2", "--N", "3,5,7,9",
                                    "--out", str(tmp_path))
    assert header == "N,r=1,r=2"
    cols = np.array(rows)[:, 1:]
    assert np.all(np.diff(cols, axis=0) < 0)
    assert (tmp_path / "contraction.csv").read_text().startswith("N,r=1,r=2")


def test_contraction_guard_and_order(capsys):
    assert cli.main(["contraction", "--q", "2", "--d", "2", "--N", "19"]) == cli.EXIT_INVALID
    assert "guard" in capsys.readouterr().err
    assert cli.main(["contraction", "--q", "2", "--r", "2", "--N", "5"]) == cli.EXIT_INVALID


def test_clt_golden_config(tmp_path, capsys):
    out = tmp_path / "run"
    code = cli.main(["clt", "--config", shipped_path(tmp_path, "clt_d2_h2.json"), "--out", str(out)])
    text = capsys.readouterr().out
    assert code == cli.EXIT_OK
    assert "all verdicts passed" in text
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["N_list"] == [17, 33]


def test_clt_seed_override_changes_run_id(tmp_path, capsys):
    cfg = ExperimentConfig(experiment="clt", d=1, model={"kind": "delta"}, observable={"power": 2},
                           test_functions=[{"kind": "constant_one"}], N_list=[33], replicas=300, seed=5)
    path = write_config(tmp_path, cfg)
    ids = []
    for seed in ("5", "6"):
        cli.main(["clt", "--config", path, "--seed", seed])
        ids.append(capsys.readouterr().out.strip().splitlines()[-1].split()[0])
    assert ids[0] != ids[1]


def test_statistical_failure_exit_code(tmp_path, capsys):
    # a wrong model: the samples are far more correlated than the verdicts assume
    cfg = ExperimentConfig(experiment="clt", d=1, model={"kind": "nearest_neighbour", "c": 0.45},
                           observable={"power": 1}, test_functions=[{"kind": "constant_one"}], N_list=[65],
                           replicas=2000, seed=3, prediction="limit")
    good = cli.main(["clt", "--config", write_config(tmp_path, cfg)])
    capsys.readouterr()
    assert good == cli.EXIT_OK
    data = cfg.to_dict()
    data["k_se"] = 0.01
    bad = cli.main(["clt", "--config", write_config(tmp_path, ExperimentConfig.from_dict(data), "bad.json")])
    assert bad == cli.EXIT_FAIL
    assert "FAIL" in capsys.readouterr().out


def test_summability_failure_is_invalid(tmp_path, capsys):
    assert cli.main(["clt", "--config", shipped_path(tmp_path, "summability_fail.json")]) == cli.EXIT_INVALID
    assert "converge" in capsys.readouterr().err


def test_zero_replicas_invalid(tmp_path, capsys):
    data = shipped_config("clt_d2_h2.json").to_dict()
    data["replicas"] = 0
    path = tmp_path / "zero.json"
    path.write_text(json.dumps(data))
    assert cli.main(["clt", "--config", str(path)]) == cli.EXIT_INVALID
    assert "replica count" in capsys.readouterr().err


def test_experiment_type_mismatch(tmp_path, capsys):
    assert cli.main(["gff", "--config", shipped_path(tmp_path, "clt_d2_h2.json")]) == cli.EXIT_INVALID
    assert "not 'gff'" in capsys.readouterr().err


def test_missing_and_malformed_config(tmp_path, capsys):
    assert cli.main(["clt"]) == cli.EXIT_INVALID
    assert cli.main(["clt", "--config", str(tmp_path / "absent.json")]) == cli.EXIT_INVALID
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["clt", "--config", str(bad)]) == cli.EXIT_INVALID


def test_embedding_failure_is_numerical(tmp_path, capsys):
    # rho(+-1) = 0.6 in d=1 is not positive definite
    cfg = ExperimentConfig(experiment="clt", d=1, model={"kind": "nearest_neighbour", "c": 0.6},
                           observable={"power": 2}, test_functions=[{"kind": "constant_one"}], N_list=[9],
                           replicas=10, seed=0)
    assert cli.main(["clt", "--config", write_config(tmp_path, cfg)]) == cli.EXIT_NUMERIC
    assert "numerical error" in capsys.readouterr().err


def test_plotdata_command(tmp_path, capsys):
    cfg = ExperimentConfig(experiment="clt", d=1, model={"kind": "delta"}, observable={"power": 2},
                           test_functions=[{"kind": "constant_one"}], N_list=[9, 17], replicas=200, seed=8)
    run = tmp_path / "run"
    cli.main(["clt", "--config", write_config(tmp_path, cfg), "--out", str(run)])
    capsys.readouterr()
    assert cli.main(["plotdata", str(run)]) == cli.EXIT_OK
    text = capsys.readouterr().out
    assert text.startswith("experiment,N,f,statistic,value,se\n")
    assert cli.main(["plotdata", str(run), "--out", str(tmp_path / "plots")]) == cli.EXIT_OK
    assert (tmp_path / "plots" / "plotdata.csv").read_text() == text


def test_sample_dump(tmp_path, capsys):
    cfg = ExperimentConfig(experiment="clt", d=2, model={"kind": "nearest_neighbour", "c": 0.2},
                           observable={"power": 2}, test_functions=[{"kind": "constant_one"}], N_list=[5],
                           replicas=10, seed=11)
    out = tmp_path / "dump"
    assert cli.main(["sample-dump", "--config", write_config(tmp_path, cfg), "--replicas", "0,3",
                     "--out", str(out)]) == cli.EXIT_OK
    assert len(capsys.readouterr().out.splitlines()) == 2
    s = load_sample(out / "sample_11_3.bin")
    ref = sample_stationary(cfg.build_model(), s.values.shape[0], 11, 3)
    np.testing.assert_array_equal(s.values, ref.values)


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "bmlab.cli", "expand", "He4"], capture_output=True, text=True)
    assert proc.returncode == 0 and "c4 = 1" in proc.stdout


@pytest.mark.slow
@pytest.mark.parametrize("name", ["gff_gradient_d3.json", "gff_even_d5_surrogate.json"])
def test_shipped_gff_configs_pass(tmp_path, capsys, name):
    code = cli.main(["gff", "--config", shipped_path(tmp_path, name)])
    out = capsys.readouterr().out
    assert code == cli.EXIT_OK, out
