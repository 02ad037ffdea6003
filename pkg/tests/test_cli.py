import csv
import io
import json

import pytest

from torus_spectral import cli


def run(argv, capsys):
    rc = cli.main(argv)
    out = capsys.readouterr()
    return rc, out.out, out.err


def table(text):
    rows = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.reader(io.StringIO("\n".join(rows))))


def test_count_csv_has_metadata_and_header(capsys):
    rc, out, _ = run(["count", "--lambda", "5", "--delta", "0.2"], capsys)
    assert rc == 0
    assert out.startswith("# tool: torus-spectral")
    assert "# seed: 0" in out and "# config:" in out
    t = table(out)
    assert t[0] == ["lambda", "N", "leading", "P", "shell", "projector_indicator"]
    assert t[1][0] == "5" and t[1][1] == "69" and t[1][4] == "20"


def test_count_emit_points(tmp_path, capsys):
    pts = tmp_path / "pts.csv"
    rc, _, _ = run(["count", "--lambda", "3/2", "--delta", "1/4", "--emit-points", str(pts)], capsys)
    assert rc == 0
    t = table(pts.read_text())
    assert t[0] == ["n_1", "n_2", "Q(n)"]
    assert sorted(map(tuple, t[1:])) == sorted([("-1", "-1", "2"), ("-1", "1", "2"), ("1", "-1", "2"), ("1", "1", "2")])


def test_count_from_form_file(tmp_path, capsys):
    f = tmp_path / "form.json"
    f.write_text(json.dumps({"dim": 2, "kind": "diagonal", "coeffs": [["1.5", "0"], ["0", "2"]]}))
    rc, out, _ = run(["count", "--form", str(f), "--lambda", "4", "--format", "json"], capsys)
    body = json.loads(out)
    assert rc == 0 and body["meta"]["command"] == "count"
    from torus_spectral.lattice import count_points
    from torus_spectral.quadform import QuadForm

    assert body["rows"][0][1] == count_points(QuadForm.diagonal(["1.5", "2"]), 4)


def test_weyl_table_columns(capsys):
    rc, out, _ = run(["weyl", "-N", "64", "--t", "1/3,0.2718"], capsys)
    t = table(out)
    assert rc == 0
    assert t[0] == ["t", "arc_kind", "Q", "q", "K_lower", "upper_proxy", "weyl_rhs"]
    assert t[1][1] == "major" and t[1][3] == "3" and t[2][1] == "minor"


def test_weyl_scan_json(capsys):
    rc, out, _ = run(["weyl", "-N", "16", "--dim", "1", "--scan", "0.5", "--samples", "8", "--json"], capsys)
    body = json.loads(out)
    assert rc == 0 and len(body["rows"]) == 8 and set(body["time_average"]) == {"lower", "upper"}


def test_subdet_modes(tmp_path, capsys):
    m = tmp_path / "m.json"
    m.write_text(json.dumps([[3, 1, 0], [1, 2, "0.5"]]))
    rc, out, _ = run(["subdet", "--matrix", str(m), "--profile"], capsys)
    assert rc == 0 and table(out)[1][:2] == ["1", "3"]
    rc, out, _ = run(["subdet", "--matrix", str(m), "--rearrange", "--json"], capsys)
    assert rc == 0 and sorted(json.loads(out)["permutation"]) == [0, 1, 2]
    m3 = tmp_path / "m3.json"
    m3.write_text(json.dumps({"matrix": [[1, 0.2], [0.3, 1], [2, 0.5]]}))
    rc, out, _ = run(["subdet", "--matrix", str(m3), "--voli", "--mu", "2,1", "--trials", "500"], capsys)
    assert rc == 0 and table(out)[0][-2:] == ["measure", "stderr"]


def test_zcount_and_table(capsys):
    rc, out, _ = run(["zcount", "--d", "1", "--b", "1", "--lambda0", "4", "--mu", "2", "--L", "16"], capsys)
    assert rc == 0 and table(out)[1][-1] == "2"
    rc, out, _ = run(["zcount", "--d", "1", "--b", "1", "--lambda0", "4", "--mu", "2"], capsys)
    assert rc == 0 and len(table(out)) > 1


def test_moments_json_to_path(tmp_path, capsys):
    out_path = tmp_path / "m.json"
    rc, _, _ = run(["moments", "--d", "1", "--b", "2", "--lambda0", "16", "--delta", "0.125",
                    "--samples", "200", "--seed", "7", "--json", str(out_path), "--rhs"], capsys)
    body = json.loads(out_path.read_text())
    assert rc == 0 and body["meta"]["seed"] == 7 and "argmax" in body


def test_bounds_json_report(capsys):
    rc, out, _ = run(["bounds", "--d", "3", "--p", "inf", "--lambda", "1e3", "--delta", "1e-4", "--json"], capsys)
    body = json.loads(out)
    assert rc == 0
    assert all(set(b) == {"name", "kind", "applicable", "value", "condition"} for b in body["bounds"])
    assert body["minimum"]["name"]


def test_verify_subset(capsys):
    rc, out, err = run(["verify", "--only", "11,12", "--json"], capsys)
    body = json.loads(out)
    assert rc == 0 and body["passed"] is True
    assert [r["id"] for r in body["results"]] == [11, 12]
    assert "criterion 11 [PASS]" in err


def test_run_config_is_byte_identical(tmp_path, capsys):
    out = tmp_path / "out.csv"
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"command": "count", "params": {"diagonal": "1,2", "lambda": "3,4", "delta": 0.25},
                               "seed": 3, "output": str(out)}))
    assert cli.main(["run", "--config", str(cfg)]) == 0
    first = out.read_bytes()
    assert cli.main(["run", "--config", str(cfg)]) == 0
    assert out.read_bytes() == first
    assert table(first.decode())[0][0] == "lambda"
    assert not [p for p in tmp_path.iterdir() if p.name.startswith(".tmp-")]


def test_run_config_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert cli.main(["run", "--config", str(bad)]) == 2
    unknown = tmp_path / "unknown.json"
    unknown.write_text(json.dumps({"command": "count", "params": {"bogus": 1}}))
    assert cli.main(["run", "--config", str(unknown)]) == 2
    missing = tmp_path / "missing.json"
    missing.write_text(json.dumps({"command": "bounds", "params": {"d": 3}}))
    assert cli.main(["run", "--config", str(missing)]) == 2
    assert "config invalid" in capsys.readouterr().err


def test_budget_exit_3(monkeypatch, capsys):
    monkeypatch.setenv("TORUS_SPECTRAL_BUDGET", "1000")
    rc, _, err = run(["count", "--dim", "3", "--lambda", "200"], capsys)
    assert rc == 3 and "budget" in err


def test_dimension_cap(capsys):
    rc, _, err = run(["count", "--dim", "9"], capsys)
    assert rc == 2 and "cap" in err


def test_schema_ships_and_validates():
    schema = cli.load_schema()
    assert set(schema["properties"]["command"]["enum"]) == set(cli.COMMANDS)
    cli.validate_config({"command": "zcount", "params": {"d": 1, "b": 1, "lambda0": 4, "mu": "2"}})
    with pytest.raises(cli.ConfigError):
        cli.validate_config({"command": "zcount", "params": {"d": "one"}})
