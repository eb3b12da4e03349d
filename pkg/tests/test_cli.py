import json

import pytest

from tailmem.cli import main

SMALL = ["--d", "2000", "--n", "200", "--alpha", "2.0"]


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, (json.loads(out) if out.strip() else None), (json.loads(err) if err.strip() else None)


def test_generate_solve_evaluate_diagnose(tmp_path, capsys):
    s, e = tmp_path / "s.txt", tmp_path / "e.txt"
    code, out, _ = run(capsys, "generate", *SMALL, "--sigma", "0.05", "--seed", "4", "--out", str(s))
    assert code == 0 and out["n"] == 200
    code, out, _ = run(capsys, "solve", "--samples", str(s), "--out", str(e))
    assert code == 0 and out["support"] > 0
    code, out, _ = run(capsys, "evaluate", *SMALL, "--samples", str(s), "--estimate", str(e), "--mc-draws", "2000")
    assert code == 0
    assert out["in_dist_loss"] >= 0 and len(out["forced"]) == 2 and min(out["forced"]) >= 1
    assert out["mc_in_dist"] is not None
    code, out, _ = run(capsys, "diagnose", *SMALL, "--samples", str(s), "--estimate", str(e))
    assert code == 0
    st = out["structure"]
    assert st["s0_count"] + st["s1_count"] + st["s_ge2_count"] == 200
    assert {c["name"] for c in out["checks"]} == {"zero_off_support", "singleton_noise_level"}


def test_bounds(capsys):
    code, out, _ = run(capsys, "bounds", "--alpha", "1.5", "--sigma", "0")
    assert code == 0
    assert out["general_bound"] == pytest.approx(1801.427638277402, rel=1e-12)
    code, out, _ = run(capsys, "bounds", "--alpha", "2.5", "--sigma", "0.05", "--k", "40", "--t", "3")
    assert code == 0 and out["regime"] == "noisy" and out["inputs"]["k"] == 40


def test_run_and_sweep(tmp_path, capsys):
    code, out, _ = run(capsys, "run", *SMALL, "--seeds", "1", "2", "--output-dir", str(tmp_path / "r"))
    assert code == 0 and out["failed"] == 0 and out["aggregate"]["in_dist_loss"]["n_ok"] == 2
    assert (tmp_path / "r" / "runs.csv").exists()
    code, out, _ = run(capsys, "sweep", *SMALL, "--seeds", "1", "--alphas", "1.5", "2.5",
                       "--sigmas", "0", "--no-plots", "--output-dir", str(tmp_path / "w"))
    assert code == 0 and out["rows"] == 2
    assert (tmp_path / "w" / "aggregate.csv").exists()
    assert not (tmp_path / "w" / "figure1_ood_loss.svg").exists()


def test_config_file(tmp_path, capsys):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"d": 500, "n": 50, "seeds": [9], "output_dir": str(tmp_path / "o")}))
    code, out, _ = run(capsys, "run", "--config", str(cfg), "--alpha", "2.5")
    assert code == 0 and out["out"].startswith(str(tmp_path / "o"))


def test_errors_go_to_stderr(tmp_path, capsys):
    code, out, err = run(capsys, "bounds", "--alpha", "-1")
    assert code == 1 and out is None and err["error"] == "ConfigError"
    code, out, err = run(capsys, "solve", "--samples", str(tmp_path / "missing.txt"), "--out", str(tmp_path / "e"))
    assert code == 1 and "error" in err
    bad = tmp_path / "bad.txt"
    bad.write_text("garbage\n")
    code, _, err = run(capsys, "solve", "--samples", str(bad), "--out", str(tmp_path / "e"))
    assert code == 1 and err["error"] == "FormatError"
