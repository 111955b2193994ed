import csv
import json

import numpy as np

from clsbp.cli import main


def _run(*argv):
    return main(list(argv))


def _write_toy_csv(path, n=12, seed=0, pihat=False):
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as fh:
        cols = ["y", "z", "x1", "x2"] + (["pihat"] if pihat else [])
        fh.write(",".join(cols) + "\n")
        for i in range(n):
            x1, x2 = rng.normal(), rng.normal()
            z = i % 2
            y = 1.0 + x1 + 2.0 * z + rng.normal(scale=0.4)
            row = [y, z, x1, x2] + ([rng.uniform(0.3, 0.7)] if pihat else [])
            fh.write(",".join(str(v) for v in row) + "\n")


def test_simulate_writes_expected_columns(tmp_path):
    out = tmp_path / "sim"
    assert _run("simulate", "--outdir", str(out), "--scenario", "sim1:t=0",
                "--n", "40", "--seed", "7") == 0
    with open(out / "sim.csv", encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        rows = fh.readlines()
    assert header == ["y", "z", "x1", "x2", "x3", "x4", "pitrue", "mutrue", "tautrue"]
    assert len(rows) == 40


def test_simulate_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert _run("simulate", "--outdir", str(out), "--scenario", "sim2:mu=linear:tau=homogeneous",
                    "--n", "25", "--seed", "3") == 0
    assert (a / "sim.csv").read_bytes() == (b / "sim.csv").read_bytes()


def test_fit_produces_artifacts_and_is_reproducible(tmp_path):
    data = tmp_path / "toy.csv"
    _write_toy_csv(data, n=14, seed=1)
    outs = []
    for name in ("f1", "f2"):
        out = tmp_path / name
        code = _run("fit", "--input", str(data), "--outdir", str(out),
                    "--sticks", "3", "--burnin", "20", "--keep", "50", "--seed", "9",
                    "--subgroup-col", "x1")
        assert code == 0
        assert (out / "draws" / "diagnostics.csv").exists()
        assert (out / "draws" / "cate.csv").exists()
        assert (out / "estimates.csv").exists()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["seed"] == 9
        assert manifest["config"]["keep"] == 50
        assert manifest["invariants_ok"] is True
        outs.append(out)
    assert (outs[0] / "estimates.csv").read_bytes() == (outs[1] / "estimates.csv").read_bytes()
    with open(outs[0] / "estimates.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert rows[0]["estimand"] == "ATE" and rows[0]["group"] == "all"
    assert all(float(r["lower"]) <= float(r["point"]) <= float(r["upper"]) for r in rows[:1])
    as_json = json.loads((outs[0] / "estimates.json").read_text())
    assert as_json[0]["estimand"] == "ATE"
    assert as_json[0]["point"] == float(rows[0]["point"])


def test_fit_missing_propensity_exits_validation(tmp_path):
    data = tmp_path / "toy.csv"
    _write_toy_csv(data, n=10)
    code = _run("fit", "--input", str(data), "--outdir", str(tmp_path / "out"),
                "--pscore-in-atoms", "--burnin", "5", "--keep", "5")
    assert code == 2


def test_fit_propensity_flag_fills_pihat(tmp_path):
    data = tmp_path / "toy.csv"
    _write_toy_csv(data, n=30, seed=4)
    out = tmp_path / "out"
    code = _run("fit", "--input", str(data), "--outdir", str(out),
                "--pscore-in-atoms", "--pscore-in-weights", "--fit-propensity",
                "--sticks", "2", "--burnin", "10", "--keep", "20", "--seed", "5")
    assert code == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["fitted_propensity"] is True
    assert manifest["transform"]["pscore_in_atoms"] is True


def test_fit_invalid_treatment_exits_validation(tmp_path):
    data = tmp_path / "bad.csv"
    data.write_text("y,z,x1\n1.0,2,0.5\n0.5,0,0.2\n", encoding="utf-8")
    assert _run("fit", "--input", str(data), "--outdir", str(tmp_path / "o"),
                "--burnin", "2", "--keep", "2") == 2


def test_fit_missing_file_exits_io(tmp_path):
    assert _run("fit", "--input", str(tmp_path / "absent.csv"),
                "--outdir", str(tmp_path / "o")) == 4


def test_estimate_from_fit(tmp_path):
    data = tmp_path / "toy.csv"
    _write_toy_csv(data, n=16, seed=2)
    fit_out = tmp_path / "fit"
    assert _run("fit", "--input", str(data), "--outdir", str(fit_out),
                "--sticks", "2", "--burnin", "20", "--keep", "40", "--seed", "6") == 0
    est_out = tmp_path / "est"
    code = _run("estimate", "--input", str(fit_out), "--outdir", str(est_out),
                "--profile", "0.1,-0.2", "--qte-alphas", "0.1,0.3,0.5,0.7,0.9")
    assert code == 0
    with open(est_out / "qte.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert [float(r["alpha"]) for r in rows] == [0.1, 0.3, 0.5, 0.7, 0.9]
    manifest = json.loads((est_out / "manifest.json").read_text())
    for value in manifest["predictive_integrals"].values():
        assert abs(value - 1.0) < 1e-3
    with open(est_out / "predictive.csv", encoding="utf-8") as fh:
        zs = {row["z"] for row in csv.DictReader(fh)}
    assert zs == {"0.0", "1.0"}


def test_estimate_single_component_qte_constant(tmp_path):
    data = tmp_path / "toy.csv"
    _write_toy_csv(data, n=20, seed=3)
    fit_out = tmp_path / "fit"
    assert _run("fit", "--input", str(data), "--outdir", str(fit_out),
                "--sticks", "0", "--burnin", "30", "--keep", "60", "--seed", "8") == 0
    est_out = tmp_path / "est"
    assert _run("estimate", "--input", str(fit_out), "--outdir", str(est_out),
                "--profile", "0.0,0.0", "--qte-alphas", "0.2,0.5,0.8") == 0
    with open(est_out / "qte.csv", encoding="utf-8") as fh:
        pts = [float(r["point"]) for r in csv.DictReader(fh)]
    assert max(pts) - min(pts) < 1e-6


def test_estimate_without_draws_exits_io(tmp_path):
    assert _run("estimate", "--input", str(tmp_path), "--outdir", str(tmp_path / "e"),
                "--profile", "0.0") == 4


def test_benchmark_smoke_and_parallel_determinism(tmp_path):
    outs = []
    for name, jobs in (("b1", "1"), ("b2", "8")):
        out = tmp_path / name
        code = _run("benchmark", "--outdir", str(out),
                    "--scenario", "sim1:t=0:n=50", "--reps", "2", "--jobs", jobs,
                    "--sticks", "3", "--burnin", "20", "--keep", "30", "--seed", "12")
        assert code == 0
        outs.append((out / "metrics.csv").read_bytes())
    assert outs[0] == outs[1]
    lines = outs[0].decode().strip().splitlines()
    assert lines[0] == "scenario,method,pscore,estimand,rmse,cov,len"
    assert len(lines) == 3  # ATE and CATE rows
    assert lines[1].startswith("sim1_t0,cLSBP,with,ATE,")


def test_benchmark_scenario_parsing_errors(tmp_path):
    assert _run("benchmark", "--outdir", str(tmp_path / "x"),
                "--scenario", "sim9:t=0", "--reps", "1") == 2
    assert _run("benchmark", "--outdir", str(tmp_path / "x"),
                "--scenario", "sim1:bogus=1", "--reps", "1") == 2


def test_seed_env_fallback(tmp_path, monkeypatch):
    data = tmp_path / "toy.csv"
    _write_toy_csv(data, n=10, seed=5)
    monkeypatch.setenv("CLSBP_SEED", "321")
    out = tmp_path / "env"
    assert _run("fit", "--input", str(data), "--outdir", str(out),
                "--sticks", "2", "--burnin", "5", "--keep", "10") == 0
    assert json.loads((out / "manifest.json").read_text())["seed"] == 321


def test_config_file_merging(tmp_path):
    data = tmp_path / "toy.csv"
    _write_toy_csv(data, n=10, seed=6)
    cfg_file = tmp_path / "cfg.json"
    cfg_file.write_text(json.dumps({"sticks": 2, "burnin": 5, "keep": 8, "seed": 55}))
    out = tmp_path / "cfgout"
    assert _run("fit", "--input", str(data), "--outdir", str(out),
                "--config", str(cfg_file), "--keep", "11") == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["config"]["keep"] == 11  # flag beats file
    assert manifest["config"]["H"] == 2
    assert manifest["seed"] == 55


def test_binary_draws_flag(tmp_path):
    data = tmp_path / "toy.csv"
    _write_toy_csv(data, n=10, seed=7)
    out = tmp_path / "bin"
    assert _run("fit", "--input", str(data), "--outdir", str(out),
                "--sticks", "2", "--burnin", "5", "--keep", "10", "--binary-draws") == 0
    from clsbp.io import read_cate_binary

    mat = read_cate_binary(out / "draws" / "cate.bin")
    assert mat.shape == (10, 10)
    assert not (out / "draws" / "cate.csv").exists()
