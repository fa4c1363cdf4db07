import json
import math

import pytest

from fblbounds.cli import main

BSC = {"inputs": ["0", "1"], "outputs": ["0", "1"], "W": [[0.9, 0.1], [0.1, 0.9]]}


@pytest.fixture
def bsc_file(write_json):
    return write_json("bsc.json", BSC)


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_bounds_three_rates(capsys, bsc_file):
    code, out, err = run(capsys, "bounds", "--channel", bsc_file, "--rate-points", 3,
                         "--rate-max", 1.5)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "R,F,P_clipped,P_exact,Er,Er_prime"
    assert len(lines) == 4
    F = [float(line.split(",")[1]) for line in lines[1:]]
    assert F == sorted(F)
    assert "sandwich" in err and "slope" in err


def test_bounds_deterministic(capsys, bsc_file, tmp_path):
    outs = []
    for k in range(2):
        path = tmp_path / f"out{k}.json"
        argv = ("bounds", "--channel", bsc_file, "--format", "json", "--out", path)
        assert run(capsys, *argv)[0] == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


def test_bounds_bits(capsys, bsc_file):
    code, out, _ = run(capsys, "bounds", "--channel", bsc_file, "--rate-min", math.log(2),
                       "--rate-max", 1.0, "--rate-points", 2, "--bits", "--format", "json")
    assert code == 0
    assert json.loads(out)[0]["R"] == pytest.approx(1.0)


def test_bounds_size_mode(capsys, bsc_file):
    code, out, _ = run(capsys, "bounds", "--channel", bsc_file, "--M", 1, 2)
    assert code == 0
    rows = out.splitlines()[1:]
    assert rows[1].split(",")[3] == repr(0.3) or float(rows[1].split(",")[3]) == pytest.approx(0.3)
    assert rows[0].endswith(",inf,")


def test_missing_file_names_path(capsys, tmp_path):
    missing = tmp_path / "nowhere.json"
    code, _, err = run(capsys, "bounds", "--channel", missing)
    assert code == 2
    assert "nowhere.json" in err


def test_malformed_file_has_line(capsys, write_json):
    bad = write_json("bad.json", '{"W": [[0.5, 0.5],\n [0.5 0.5]]}')
    code, _, err = run(capsys, "bounds", "--channel", bad)
    assert code == 2
    assert "line 2" in err


def test_non_stochastic_row(capsys, write_json):
    bad = write_json("bad.json", {"W": [[0.6, 0.5], [0.5, 0.5]]})
    code, _, err = run(capsys, "bounds", "--channel", bad)
    assert code == 2
    assert "row 0" in err


def test_mutually_exclusive_modes(capsys, bsc_file):
    with pytest.raises(SystemExit) as exc:
        main(["bounds", "--channel", str(bsc_file), "--M", "2", "--rate-max", "1"])
    assert exc.value.code == 2


def test_grid_validation(capsys, bsc_file):
    with pytest.raises(SystemExit) as exc:
        main(["bounds", "--channel", str(bsc_file), "--rate-min", "2", "--rate-max", "1"])
    assert exc.value.code == 2


def test_witness(capsys, bsc_file):
    code, out, err = run(capsys, "witness", "--channel", bsc_file, "--R", math.log(2))
    assert code == 0
    doc = json.loads(out)
    assert doc["gap"] <= 1e-9
    assert [e["x_y"] for e in doc["per_y"]] == ["0", "1"]
    assert "|beta - F|" in err
    assert run(capsys, "witness", "--channel", bsc_file, "--R", 0)[0] == 0


def test_witness_refuses_mismatched(capsys, write_json):
    path = write_json("mm.json", dict(BSC, metric=[[0, 1], [1, 0]]))
    code, _, err = run(capsys, "witness", "--channel", path, "--R", 0.5)
    assert code == 1
    assert "maximum-likelihood" in err


def test_witness_degenerate(capsys, write_json):
    path = write_json("id.json", {"W": [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 1, 0], [0, 0, 0, 1]]})
    code, _, err = run(capsys, "witness", "--channel", path, "--R", math.log(2))
    assert code == 1
    assert "eta = 0" in err


def test_mc_echoes_seed(capsys, bsc_file):
    code, out, _ = run(capsys, "mc", "--channel", bsc_file, "--M", 2, "--trials", 20000,
                       "--seed", 17)
    assert code == 0
    doc = json.loads(out)
    assert doc["seed"] == 17 and doc["trials"] == 20000
    again = run(capsys, "mc", "--channel", bsc_file, "--M", 2, "--trials", 20000,
                "--seed", 17)[1]
    assert again == out


def test_code_eval(capsys, bsc_file, write_json):
    code_path = write_json("code.json", {"codewords": ["0", "1"]})
    code, out, _ = run(capsys, "code-eval", "--channel", bsc_file, "--code", code_path)
    assert code == 0
    doc = json.loads(out)
    assert doc["epsilon"] == pytest.approx(0.1)
    assert doc["gap"] <= 1e-12
    assert doc["meta_converse_uniform_qy"] <= doc["epsilon"] + 1e-12


def test_code_eval_bad_label(capsys, bsc_file, write_json):
    code_path = write_json("code.json", {"codewords": ["7"]})
    assert run(capsys, "code-eval", "--channel", bsc_file, "--code", code_path)[0] == 2


def test_product(capsys):
    code, out, _ = run(capsys, "product", "bsc", "--n", 50, "--p", 0.11, "--rate-points", 5,
                       "--rate-max", 30)
    assert code == 0
    assert len(out.splitlines()) == 6
    code, out, _ = run(capsys, "product", "bec", "--n", 1, "--p", 0.5, "--M", 2,
                       "--format", "json")
    assert code == 0
    assert json.loads(out)[0]["F"] == pytest.approx(0.25)


def test_product_bad_parameter(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["product", "bsc", "--n", "3", "--p", "0.7"])
    assert exc.value.code == 2


def test_verify_trials_zero():
    with pytest.raises(SystemExit) as exc:
        main(["verify", "--trials", "0"])
    assert exc.value.code == 2


def test_verify_corrupted_channel(capsys, write_json):
    bad = write_json("bad.json", '{"W": [[0.5, 0.5], [0.2')
    assert run(capsys, "verify", "--channel", bad)[0] == 2


def test_verify_report(capsys, bsc_file, tmp_path):
    out = tmp_path / "report.json"
    code, _, err = run(capsys, "verify", "--trials", 20000, "--channel", bsc_file, "--out", out)
    doc = json.loads(out.read_text())
    names = [c["name"] for c in doc["checks"]]
    assert "converse_equality" in names and "user_channel" in names
    assert code == (0 if doc["passed"] else 1)
    assert "[PASS] converse_equality" in err
