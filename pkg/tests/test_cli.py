import csv
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from ocpdl.cli import main, read_config, trial_seeds
from ocpdl.streams import ppm_write
from ocpdl.tensor_core import cp_out, read_dtf, write_dtf


@pytest.fixture
def tensor_file(tmp_path):
    rng = np.random.default_rng(0)
    U = [rng.uniform(size=(d, 3)) for d in (6, 5, 8)]
    path = tmp_path / "X.dtf1"
    write_dtf(path, cp_out(U).sum(axis=-1))
    return path


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def polyline_points(svg_path):
    root = ET.parse(svg_path).getroot()
    ns = "{http://www.w3.org/2000/svg}"
    return {p.get("data-label"): len(p.get("points").split()) for p in root.iter(ns + "polyline")}


def test_factorize_als(tmp_path, tensor_file):
    out = tmp_path / "als"
    assert main(["factorize", "--method", "als", "--tensor", str(tensor_file), "--rank", "3",
                 "--sweeps", "30", "--out", str(out)]) == 0
    trace = rows(out / "trace.csv")
    assert len(trace) == 30
    objective = [float(r["objective"]) for r in trace]
    assert all(b <= a + 1e-9 for a, b in zip(objective, objective[1:]))
    assert [read_dtf(out / f"U{j}.dtf1").shape for j in (1, 2, 3)] == [(6, 3), (5, 3), (8, 3)]
    assert polyline_points(out / "error_curve.svg") == {"als": 30}


def test_factorize_online_subsampled(tmp_path, tensor_file):
    out = tmp_path / "on"
    assert main(["factorize", "--method", "ocpdl", "--tensor", str(tensor_file), "--rank", "3",
                 "--subsample", "4", "--T", "40", "--out", str(out)]) == 0
    trace = rows(out / "trace.csv")
    assert len(trace) == 40
    assert float(trace[-1]["rel_error"]) < float(trace[0]["rel_error"])
    assert read_dtf(out / "U3.dtf1").shape == (8, 3)


def test_missing_tensor_exits_2_without_outputs(tmp_path, capsys):
    out = tmp_path / "never"
    code = main(["factorize", "--method", "als", "--tensor", str(tmp_path / "nope.dtf1"),
                 "--out", str(out)])
    assert code == 2 and not out.exists()
    assert "not found" in capsys.readouterr().err


def test_bad_source_combinations(tmp_path, tensor_file):
    assert main(["factorize", "--out", str(tmp_path / "o")]) == 2
    assert main(["factorize", "--tensor", str(tensor_file), "--synthetic", "3,3,3",
                 "--out", str(tmp_path / "o")]) == 2
    assert main(["factorize", "--synthetic", "3,x", "--out", str(tmp_path / "o")]) == 2


def test_config_file_and_override(tmp_path, tensor_file):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"# comment\nmethod = mu\ntensor = {tensor_file}\nrank=3\nsweeps=7\n"
                   f"lambda=0.0\nout={tmp_path / 'cfg_out'}\n")
    assert read_config(cfg)["lam"] == "0.0"
    assert main(["factorize", "--config", str(cfg), "--sweeps", "5"]) == 0
    assert len(rows(tmp_path / "cfg_out" / "trace.csv")) == 5
    (tmp_path / "broken.cfg").write_text("no equals sign\n")
    assert main(["factorize", "--config", str(tmp_path / "broken.cfg")]) == 2


def test_bench_schema_and_determinism(tmp_path, tensor_file, monkeypatch):
    args = ["bench", "--tensor", str(tensor_file), "--rank", "3", "--methods", "ocpdl,als,mu",
            "--trials", "3", "--T", "6", "--subsample", "4", "--clock", "none"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("OCPDL_THREADS", "3")
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    first = (tmp_path / "a" / "bench.csv").read_bytes()
    assert first == (tmp_path / "b" / "bench.csv").read_bytes()
    table = rows(tmp_path / "a" / "bench.csv")
    assert len(table) == 3 * 3 * 6
    assert list(table[0]) == ["method", "trial", "iter", "wall_seconds", "abs_error", "rel_error"]
    assert polyline_points(tmp_path / "a" / "bench.svg") == {"ocpdl": 6, "als": 6, "mu": 6}
    root = ET.parse(tmp_path / "a" / "bench.svg").getroot()
    assert len(root.findall("{http://www.w3.org/2000/svg}polygon")) == 3


def test_single_trial_bench_matches_factorize(tmp_path, tensor_file):
    seed = trial_seeds(0, 1)[0]
    assert main(["bench", "--tensor", str(tensor_file), "--rank", "3", "--methods", "als",
                 "--trials", "1", "--T", "5", "--clock", "none", "--out", str(tmp_path / "b")]) == 0
    assert main(["factorize", "--method", "als", "--tensor", str(tensor_file), "--rank", "3",
                 "--sweeps", "5", "--seed", str(seed), "--clock", "none",
                 "--out", str(tmp_path / "f")]) == 0
    bench = [r["rel_error"] for r in rows(tmp_path / "b" / "bench.csv")]
    single = [r["rel_error"] for r in rows(tmp_path / "f" / "trace.csv")]
    assert bench == single


def test_diagnose_pass_and_negative_control(capsys):
    assert main(["diagnose", "--shape", "4,4,4", "--rank", "3", "--T", "30"]) == 0
    out = capsys.readouterr().out
    assert out.count("PASS") >= 6
    assert main(["diagnose", "--shape", "4,4,4", "--rank", "3", "--T", "30",
                 "--skip-aggregation"]) == 1
    assert "FAIL  forward_monotonicity" in capsys.readouterr().out


def test_diagnose_zero_penalty_reports_na(capsys):
    assert main(["diagnose", "--shape", "4,4", "--rank", "2", "--T", "100", "--lambda", "0"]) == 0
    assert "N/A   aggregate_bounds" in capsys.readouterr().out


def test_markov_stream_factorize(tmp_path):
    write_dtf(tmp_path / "a.dtf1", np.outer([1.0, 2.0, 3.0], [1.0, 0.5]))
    write_dtf(tmp_path / "b.dtf1", np.outer([0.5, 0.1, 1.0], [0.2, 1.0]))
    (tmp_path / "chain.txt").write_text("2\n0.5 0.5\n0.3 0.7\na.dtf1\nb.dtf1\n")
    out = tmp_path / "m"
    assert main(["factorize", "--markov", str(tmp_path / "chain.txt"), "--rank", "2",
                 "--T", "25", "--batch-size", "2", "--out", str(out)]) == 0
    assert len(rows(out / "trace.csv")) == 25
    assert main(["factorize", "--method", "als", "--markov", str(tmp_path / "chain.txt"),
                 "--out", str(tmp_path / "x")]) == 2


def test_patches_then_stream_dir(tmp_path):
    rng = np.random.default_rng(3)
    ppm_write(tmp_path / "img.ppm", rng.uniform(size=(12, 10, 3)))
    pdir = tmp_path / "patches"
    assert main(["patches", "--image", str(tmp_path / "img.ppm"), "--patch", "4",
                 "--count", "25", "--batch-size", "10", "--out", str(pdir)]) == 0
    files = sorted(pdir.glob("*.dtf1"))
    assert [read_dtf(f).shape for f in files] == [(4, 4, 3, 10), (4, 4, 3, 10), (4, 4, 3, 5)]
    out = tmp_path / "dl"
    assert main(["factorize", "--stream-dir", str(pdir), "--rank", "4", "--lambda", "0.1",
                 "--T", "10", "--out", str(out)]) == 0
    assert len(rows(out / "trace.csv")) == 3
    assert main(["patches", "--image", str(tmp_path / "missing.ppm")]) == 2
    assert main(["patches", "--image", str(tmp_path / "img.ppm"), "--patch", "20",
                 "--out", str(tmp_path / "p2")]) == 2


def test_factorize_synthetic_recovery_example(tmp_path):
    out = tmp_path / "syn"
    assert main(["factorize", "--method", "ocpdl", "--synthetic", "30,30,500", "--rank", "5",
                 "--subsample", "20", "--T", "500", "--beta", "1", "--lambda", "0", "--seed", "7",
                 "--out", str(out)]) == 0
    assert float(rows(out / "trace.csv")[-1]["rel_error"]) <= 0.1
