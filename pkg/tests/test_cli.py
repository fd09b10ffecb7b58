import json

import numpy as np
import pytest

from matrixldp import __version__
from matrixldp.cli import ExperimentConfig, main, run_baselines, run_ldp_sweep
from matrixldp.kernel import StepKernel, save_kernel


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def test_config_round_trip():
    cfg = ExperimentConfig(law="twopoint(a=-1, b=1, p=0.5)", n_values=[4, 8], seeds=[1, 2])
    assert ExperimentConfig.from_json(cfg.to_json()) == cfg
    moved = ExperimentConfig.from_json(cfg.to_json())
    moved.output_dir = "/elsewhere"
    assert moved.config_hash() == cfg.config_hash()
    with pytest.raises(ValueError):
        ExperimentConfig.from_json('{"bogus": 1}')


def test_sweep_point_mass_is_typical(tmp_path):
    cfg = ExperimentConfig(law="pointmass(c=0.5)", target="constant(0.5)", n_values=[4, 8],
                           samples=5, output_dir=str(tmp_path), trunc_samples=3)
    path = run_ldp_sweep(cfg)
    lines = path.read_text().splitlines()
    assert lines[0].startswith(f"# matrixldp {__version__} config_sha256={cfg.config_hash()}")
    header = lines[1].split(",")
    assert header[:9] == ["n", "samples", "hit_count", "rate_estimate", "std_error_log",
                          "I_target", "ell", "delta", "seed"]
    rows = [dict(zip(header, line.split(","))) for line in lines[2:]]
    assert [r["rate_estimate"] for r in rows] == ["0.0", "0.0"]
    assert json.loads((tmp_path / "config.json").read_text())["law"] == "pointmass(c=0.5)"


def test_sweep_reports_zero_hits_as_inf(tmp_path):
    cfg = ExperimentConfig(n_values=[4], samples=3, delta=1e-5, output_dir=str(tmp_path),
                           trunc_samples=0)
    text = run_ldp_sweep(cfg).read_text()
    assert ",inf," in text


def test_sweep_bytes_independent_of_workers(tmp_path):
    cfgs = [ExperimentConfig(law="twopoint()", n_values=[6, 20], samples=30, delta=0.3,
                             output_dir=str(tmp_path / d), trunc_samples=10) for d in "ab"]
    a = run_ldp_sweep(cfgs[0], workers=1).read_bytes()
    b = run_ldp_sweep(cfgs[1], workers=4).read_bytes()
    assert a == b


def test_baselines(tmp_path):
    cfg = ExperimentConfig(law="pointmass(c=1)", n_values=[5], output_dir=str(tmp_path))
    lines = run_baselines(cfg).read_text().splitlines()
    row = dict(zip(lines[1].split(","), lines[2].split(",")))
    assert float(row["lambda_max_over_n"]) == pytest.approx(1.0, abs=1e-12)


def test_rate_command(capsys, tmp_path):
    code, out, _ = run(capsys, "rate", "--kernel", "constant(0.5)", "--law", "twopoint()")
    assert code == 0
    assert json.loads(out)["primal"] == pytest.approx(0.0654060179706)
    code, out, _ = run(capsys, "rate", "--kernel", "constant(2)", "--law", "twopoint()")
    assert json.loads(out)["primal"] == "inf"
    code, out, _ = run(capsys, "rate", "--kernel", "constant(0.5)", "--law", "gaussian()",
                       "--ell", "10")
    assert json.loads(out)["truncated"] == pytest.approx(0.0625, abs=1e-6)


def test_cutdist_and_spectrum_commands(capsys, tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    save_kernel(StepKernel.uniform([[1.0, -1.0], [-1.0, 1.0]]), a)
    save_kernel(StepKernel.constant(0.0), b)
    code, out, _ = run(capsys, "cutdist", str(a), str(b), "--mode", "exact")
    res = json.loads(out)
    assert code == 0 and res["distance"] == 0.25 and res["witness"]["A"] == [0]
    code, out, _ = run(capsys, "cutdist", str(a), str(a), "--mode", "quotient")
    assert json.loads(out)["distance"] == 0.0
    code, out, _ = run(capsys, "spectrum", "--kernel", str(a), "--moments", "2..3",
                       "--semicircle", "1")
    res = json.loads(out)
    assert res["eigenvalues"] == pytest.approx([1.0])
    assert res["moments"]["2"] == pytest.approx(1.0)
    assert 0 <= res["ks_distance"] <= 1


def test_sample_command(capsys, tmp_path):
    code, out, _ = run(capsys, "sample", "--law", "pointmass(c=2)", "--n", "3")
    assert code == 0
    assert out.splitlines() == ["2.0,2.0,2.0"] * 3
    out_file = tmp_path / "x.csv"
    code, _, _ = run(capsys, "sample", "--law", "gaussian()", "--n", "4", "--target",
                     "constant(0.5)", "--out", str(out_file))
    text = out_file.read_text()
    assert text.startswith("# log_likelihood_ratio=")
    x = np.loadtxt(out_file, delimiter=",", comments="#")
    np.testing.assert_array_equal(x, x.T)


def test_tilt_estimate_and_exit_codes(capsys, tmp_path):
    csv = tmp_path / "est.csv"
    args = ["tilt-estimate", "--law", "twopoint()", "--target", "constant(0.3)", "--delta",
            "0.25", "--n", "4", "--samples", "200", "--csv", str(csv)]
    code, out, _ = run(capsys, *args)
    assert code == 0 and json.loads(out)["hit_count"] > 0
    run(capsys, *args)
    assert len(csv.read_text().splitlines()) == 4
    code, _, err = run(capsys, "tilt-estimate", "--law", "gaussian()", "--delta", "1e-6",
                       "--n", "4", "--samples", "5")
    assert code == 3 and "hit" in err
    code, _, _ = run(capsys, "rate", "--kernel", str(tmp_path / "missing.json"), "--law",
                     "gaussian()")
    assert code == 2
    code, _, _ = run(capsys, "rate", "--kernel", "constant(1)", "--law", "cauchy()")
    assert code == 2
    with pytest.raises(SystemExit) as info:
        main(["rate"])
    assert info.value.code == 2


def test_jsolve_and_regularize_commands(capsys, tmp_path):
    sfile = tmp_path / "s.json"
    sfile.write_text(json.dumps({"eigenvalues": [1.0]}))
    code, out, _ = run(capsys, "jsolve", "--law", "gaussian()", "--spectrum", str(sfile),
                       "--grid", "3", "--restarts", "2", "--output-dir", str(tmp_path))
    res = json.loads(out)
    assert code == 0 and res["J"] == pytest.approx(0.25) and res["restarts_used"] == 2
    kfile = res["kernel_file"]
    code, out, _ = run(capsys, "regularize", "--kernel", kfile, "--eps", "0.01")
    res = json.loads(out)
    assert code == 0 and res["certified"] and len(res["partition"]) == 3
    code, _, _ = run(capsys, "regularize", "--kernel", kfile, "--eps", "1e-9",
                     "--max-parts", "1")
    assert code in (0, 3)


def test_output_dir_from_environment(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("MATRIXLDP_OUTPUT_DIR", str(tmp_path / "env"))
    code, out, _ = run(capsys, "baselines", "--law", "gaussian()", "--n-values", "20",
                       "--seeds", "0", "1")
    assert code == 0
    assert (tmp_path / "env" / "baselines.csv").exists()
