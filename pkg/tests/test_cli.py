import json
import math
import os

import pytest

from qndspin.cli import main


def read_csv(path):
    with open(path, encoding="utf-8") as handle:
        header = handle.readline().strip().split(",")
        rows = [line.strip().split(",") for line in handle if line.strip()]
    return header, rows


def test_table1_preset(tmp_path, capsys):
    out = str(tmp_path / "t1")
    assert main(["table1", "--preset", "P1", "--out", out]) == 0
    header, rows = read_csv(out + ".csv")
    assert header == ["preset", "N_DD", "B_gauss", "T_R_ns", "T_ns"]
    assert rows[0][0] == "P1"
    assert float(rows[0][3]) == pytest.approx(1351, abs=1)
    assert float(rows[0][4]) == pytest.approx(1088, abs=1)
    assert "T_R=1351 ns" in capsys.readouterr().out


def test_fidelity_anchor(tmp_path):
    out = str(tmp_path / "fid")
    code = main(
        ["fidelity", "--alpha", "0.1", "--phi", "1.5707963", "--n", "200", "--out", out]
    )
    assert code == 0
    header, rows = read_csv(out + ".csv")
    assert header == ["n", "D", "DN", "u_th", "F_plus", "F_minus", "F_bar", "F_erf"]
    assert float(rows[0][6]) == pytest.approx(0.92, abs=0.01)


def test_distribution_normalized(tmp_path):
    out = str(tmp_path / "dist")
    assert main(["distribution", "--alpha", "0.1", "--phi", "1.4", "--n", "50", "--out", out]) == 0
    header, rows = read_csv(out + ".csv")
    assert header == ["u_bar", "p_plus_alpha", "p_minus_alpha"]
    assert len(rows) == 51
    for col in (1, 2):
        assert sum(float(r[col]) for r in rows) == pytest.approx(1.0, abs=1e-9)


def test_binary_stats_csv(tmp_path):
    out = str(tmp_path / "bs")
    assert main(["binary-stats", "--alpha", "0.1", "--phi", "1.5707963", "--out", out]) == 0
    _, rows = read_csv(out + ".csv")
    assert float(rows[0][-1]) == pytest.approx(math.tan(0.1), abs=1e-6)


def test_qnd_solve(tmp_path):
    out = str(tmp_path / "roots")
    assert main(["qnd-solve", "--preset", "P2", "--out", out]) == 0
    header, rows = read_csv(out + ".csv")
    assert header == ["t_R_ns", "residual_rad"]
    assert min(float(r[1]) for r in rows) < 1e-9


def test_stability_csv(tmp_path):
    out = str(tmp_path / "stab")
    code = main(
        [
            "stability",
            "--alpha-vec",
            "0.0,0.0,0.5",
            "--error",
            "systematic",
            "--delta-phi",
            "0.01",
            "--error-axis",
            "1,0,0",
            "--n-max",
            "200",
            "--out",
            out,
        ]
    )
    assert code == 0
    header, rows = read_csv(out + ".csv")
    assert header == ["N", "S_sim", "S_analytic"]
    assert len(rows) == 201
    assert float(rows[0][1]) == 1.0


def test_trajectories_deterministic(tmp_path):
    args = [
        "trajectories",
        "--alpha", "0.1", "--phi", "1.4",
        "--n", "20", "--n-traj", "50", "--seed", "7",
        "--cycle-rot", "0,0,0.7",
    ]
    out_a, out_b = str(tmp_path / "a"), str(tmp_path / "b")
    assert main(args + ["--out", out_a]) == 0
    assert main(args + ["--out", out_b]) == 0
    with open(out_a + ".csv", "rb") as fa, open(out_b + ".csv", "rb") as fb:
        assert fa.read() == fb.read()


def test_nv_scan_outputs(tmp_path):
    out_dir = str(tmp_path / "scan")
    code = main(
        [
            "nv-scan", "--preset", "P2",
            "--n-tdd", "6", "--n-tr", "12", "--n-max", "2000",
            "--out-dir", out_dir,
        ]
    )
    assert code == 0
    header, rows = read_csv(os.path.join(out_dir, "scan.csv"))
    assert header == ["t_DD_ns", "t_R_ns", "alpha_mag", "qnd_residual", "D", "N_c", "N_L"]
    assert len(rows) == 6 * 12
    header, tol_rows = read_csv(os.path.join(out_dir, "tolerance.csv"))
    assert header == ["t_DD_ns", "dtR_measured_ns", "dtR_worst_case_ns", "Nc"]
    assert len(tol_rows) == 6
    manifest = json.load(open(os.path.join(out_dir, "manifest.json")))
    assert manifest["subcommand"] == "nv-scan"
    assert manifest["parameters"]["N_DD"] == 6


def test_output_collision_refused(tmp_path):
    out = str(tmp_path / "t")
    assert main(["table1", "--out", out]) == 0
    assert main(["table1", "--out", out]) == 2
    assert main(["table1", "--out", out, "--force"]) == 0


def test_unknown_config_key_rejected(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"preset": "P2", "typo_key": 1}))
    out = str(tmp_path / "x")
    assert main(["qnd-solve", "--config", str(cfg), "--out", out]) == 2
    assert not os.path.exists(out + ".csv")


def test_config_file_drives_run(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(
        json.dumps({"preset": "P2", "n_plus": 0.1, "n_minus": 0.07, "alpha": 0.1, "phi": 1.5707963})
    )
    out = str(tmp_path / "bs")
    assert main(["binary-stats", "--config", str(cfg), "--out", out]) == 0
    _, rows = read_csv(out + ".csv")
    assert float(rows[0][2]) == pytest.approx(0.1)  # p_plus = n_plus
    assert float(rows[0][3]) == pytest.approx(0.93)


def test_manifest_reproduces_output(tmp_path):
    out = str(tmp_path / "d1")
    assert main(["distribution", "--alpha", "0.2", "--phi", "1.1", "--n", "30", "--out", out]) == 0
    manifest = json.load(open(out + ".manifest.json"))
    params = manifest["parameters"]
    out2 = str(tmp_path / "d2")
    assert (
        main(
            [
                "distribution",
                "--alpha", str(params["alpha"]),
                "--phi", str(params["phi"]),
                "--p-plus", str(params["p_plus"]),
                "--p-minus", str(params["p_minus"]),
                "--n", str(params["n"]),
                "--law", params["law"],
                "--out", out2,
            ]
        )
        == 0
    )
    with open(out + ".csv", "rb") as fa, open(out2 + ".csv", "rb") as fb:
        assert fa.read() == fb.read()


def test_unknown_subcommand_exits_2():
    assert main(["no-such-command"]) == 2


def test_missing_required_flag_exits_2():
    assert main(["fidelity"]) == 2
