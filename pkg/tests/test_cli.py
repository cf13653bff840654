import json

import pytest

from netdesign.cli import emit_plot_data, main
from netdesign.jsonio import instance_to_json
from netdesign.scenarios import materialize


def run(argv):
    return main(argv)


def test_solve_pigou_ue(tmp_path, capsys):
    out = tmp_path / "report.json"
    code = run(["solve", "--scenario", "pigou", "--routing", "ue", "--out", str(out)])
    assert code == 0
    assert "total_cost=1.000000" in capsys.readouterr().out
    report = json.loads(out.read_text())
    assert report["format_version"] == 1
    assert report["results"]["total_cost"] == pytest.approx(1.0)
    assert report["results"]["path_flows"]["0-2-3"] == pytest.approx(1.0)


def test_solve_braess_so(capsys):
    code = run(["solve", "--scenario", "braess", "--routing", "so"])
    assert code == 0
    assert "total_cost=498.000000" in capsys.readouterr().out


def test_solve_report_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["solve", "--scenario", "counterexample", "--routing", "so",
                    "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_check_supermodular_counterexample(tmp_path, capsys):
    out = tmp_path / "check.json"
    csv_path = tmp_path / "check.csv"
    code = run(["check", "--property", "supermodular", "--scenario", "counterexample",
                "--routing", "mc", "--out", str(out), "--csv", str(csv_path)])
    assert code == 0
    assert "VIOLATED" in capsys.readouterr().out
    report = json.loads(out.read_text())
    first = report["results"]["witnesses"][0]
    assert first["subset_a"] == []
    assert first["subset_b"] == [1]
    assert first["x"] == 0
    assert first["x_name"] == "orange"
    assert first["margin"] == pytest.approx(-2.0)
    lines = csv_path.read_text().strip().splitlines()
    assert lines[0] == "subset_bitmask,subset_names,routing,lambda_value"
    values = [float(line.split(",")[-1]) for line in lines[1:]]
    assert values == [9.0, 9.0, 7.0, 5.0]


def test_check_expectation_gate():
    base = ["check", "--property", "supermodular", "--scenario", "counterexample",
            "--routing", "mc"]
    assert run(base + ["--expect", "violated"]) == 0
    assert run(base + ["--expect", "holds"]) == 1


def test_check_monotone_braess_ue():
    code = run(["check", "--property", "monotone", "--scenario", "braess",
                "--routing", "ue", "--expect", "violated"])
    assert code == 0


def test_lambda_subset(tmp_path):
    out = tmp_path / "lambda.json"
    code = run(["lambda", "--scenario", "counterexample", "--routing", "mc",
                "--subset", "1", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["results"]["value"] == pytest.approx(7.0)
    assert report["results"]["subset_names"] == "blue"


def test_lambda_so_defaults_to_greenshields(capsys):
    code = run(["lambda", "--scenario", "counterexample", "--routing", "so"])
    assert code == 0
    assert "30.0000" in capsys.readouterr().out


def test_lambda_bad_subset():
    assert run(["lambda", "--scenario", "counterexample", "--routing", "mc",
                "--subset", "7"]) == 64


def test_design_greedy(tmp_path, capsys):
    out = tmp_path / "design.json"
    code = run(["design", "--scenario", "counterexample", "--routing", "mc",
                "--budget", "2", "--out", str(out)])
    assert code == 0
    report = json.loads(out.read_text())
    assert report["results"]["picks"] == [1, 0]
    assert report["results"]["values"] == [9.0, 7.0, 5.0]
    assert report["results"]["best_value"] == pytest.approx(5.0)


def test_scenario_list(capsys):
    assert run(["scenario", "list"]) == 0
    out = capsys.readouterr().out
    for name in ("braess", "pigou", "counterexample", "parallel"):
        assert name in out


def test_malformed_network_file(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["solve", "--network", str(bad), "--routing", "so"]) == 64


def test_missing_network_file(tmp_path):
    assert run(["solve", "--network", str(tmp_path / "nope.json"), "--routing", "so"]) == 64


def test_unknown_scenario_is_usage_error(capsys):
    with pytest.raises(SystemExit) as err:
        run(["solve", "--scenario", "nonesuch", "--routing", "so"])
    assert err.value.code == 64


def test_bad_param_value():
    assert run(["solve", "--scenario", "braess", "--routing", "ue",
                "--param", "with_edge=maybe"]) == 64


def test_network_file_solve(tmp_path, pigou):
    doc = instance_to_json(pigou.instance.network, pigou.instance.trips)
    path = tmp_path / "pigou.json"
    path.write_text(json.dumps(doc))
    code = run(["solve", "--network", str(path), "--routing", "ue",
                "--out", str(tmp_path / "r.json")])
    assert code == 0
    report = json.loads((tmp_path / "r.json").read_text())
    assert report["results"]["total_cost"] == pytest.approx(1.0)


def test_design_document_check(tmp_path):
    from netdesign.design import candidate_set_to_json

    cs = materialize("counterexample", {"costing": "mc"}).candidate_set
    path = tmp_path / "design.json"
    path.write_text(json.dumps(candidate_set_to_json(cs)))
    code = run(["check", "--property", "supermodular", "--network", str(path),
                "--routing", "mc", "--expect", "violated"])
    assert code == 0


def test_instance_only_command_needs_candidates(tmp_path, pigou):
    doc = instance_to_json(pigou.instance.network, pigou.instance.trips)
    path = tmp_path / "pigou.json"
    path.write_text(json.dumps(doc))
    assert run(["lambda", "--network", str(path), "--routing", "ue"]) == 64


def test_solver_error_exit_code():
    code = run(["solve", "--scenario", "counterexample", "--routing", "so",
                "--max-iters", "1", "--gap-tol", "1e-12"])
    assert code == 2


def test_emit_plot_data_empty_report():
    assert emit_plot_data({}) == "subset_bitmask,subset_names,routing,lambda_value\n"


def test_csv_congestion_ladder(tmp_path):
    csv_path = tmp_path / "so.csv"
    code = run(["check", "--property", "supermodular", "--scenario", "counterexample",
                "--routing", "so", "--csv", str(csv_path)])
    assert code == 0
    lines = csv_path.read_text().strip().splitlines()
    values = [float(line.split(",")[-1]) for line in lines[1:]]
    targets = [30.0, 29.28, 27.47, 24.97]
    assert len(values) == 4
    for got, want in zip(values, targets):
        assert got == pytest.approx(want, abs=0.01)


def test_mc_on_flow_dependent_scenario_is_usage_error():
    assert run(["solve", "--scenario", "pigou", "--routing", "mc"]) == 64


def test_check_parallel_scenario_via_cli(tmp_path):
    code = run(["check", "--property", "supermodular", "--scenario", "parallel",
                "--routing", "ue", "--param", "n=5", "--expect", "holds",
                "--out", str(tmp_path / "parallel.json")])
    assert code == 0
    report = json.loads((tmp_path / "parallel.json").read_text())
    assert report["results"]["verdict"] == "HOLDS"
    assert report["params"] == {"n": 5, "l": 1.0, "v_max": 1.0, "u": 10.0, "d": 5.0}


def test_invalid_edge_capacity_is_format_error(tmp_path):
    doc = {
        "nodes": [0, 1],
        "edges": [{"from": 0, "to": 1,
                   "cost": {"kind": "constant", "c": 1.0}, "capacity": 0}],
        "trips": [{"source": 0, "sink": 1, "demand": 1.0}],
    }
    path = tmp_path / "zero_cap.json"
    path.write_text(json.dumps(doc))
    assert run(["solve", "--network", str(path), "--routing", "mc"]) == 64


def test_exit_codes_driving_the_binary(tmp_path):
    import subprocess
    import sys

    def invoke(*argv):
        return subprocess.run([sys.executable, "-m", "netdesign.cli", *argv],
                              capture_output=True, text=True)

    ok = invoke("solve", "--scenario", "pigou", "--routing", "ue")
    assert ok.returncode == 0
    assert "total_cost=1.000000" in ok.stdout

    expect = invoke("check", "--property", "supermodular", "--scenario",
                    "counterexample", "--routing", "mc", "--expect", "holds")
    assert expect.returncode == 1

    bad = tmp_path / "broken.json"
    bad.write_text("[1, 2")
    usage = invoke("solve", "--network", str(bad), "--routing", "so")
    assert usage.returncode == 64

    solver = invoke("solve", "--scenario", "counterexample", "--routing", "so",
                    "--max-iters", "1", "--gap-tol", "1e-12")
    assert solver.returncode == 2


def test_check_report_deterministic(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    for path in (a, b):
        assert run(["check", "--property", "supermodular", "--scenario",
                    "counterexample", "--routing", "so", "--out", str(path)]) == 0
    assert a.read_bytes() == b.read_bytes()
