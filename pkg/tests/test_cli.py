import csv
import hashlib
import io
import json
import subprocess
import sys

import pytest

from narrowlab.cli import SCHEMA, read_config, run, UsageError


def invoke(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def table(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_cp_table_csv(capsys):
    code, out, _ = invoke(capsys, "cp-table", "--p", "1,2,3")
    assert code == 0
    rows = table(out)
    assert [r["p"] for r in rows] == ["1", "1.5", "2", "3"]
    assert rows[0]["C_p"] == "2"
    assert rows[1]["C_p"] == rows[3]["C_p"]


def test_json_report(capsys):
    code, out, _ = invoke(capsys, "daugavet", "--blocks", "4", "--scales", "1", "--n", "16",
                          "--format", "json")
    doc = json.loads(out)
    assert code == 0
    assert doc["schema"] == SCHEMA and doc["command"] == "daugavet" and doc["passed"] is True
    assert doc["params"] == {"blocks": "4", "n": "16", "scales": "1", "seed": "0"}
    assert doc["rows"][0]["discrepancy"] == 0.5


def test_norm_and_minmod(capsys):
    code, out, _ = invoke(capsys, "norm", "--zoo", "mean", "--n", "8", "--p", "1,3")
    assert code == 0
    rows = table(out)
    assert [float(r["value"]) for r in rows] == pytest.approx([1.0, 1.0])
    assert {"operator", "p", "n", "value", "kind", "solver", "seed", "witness_hash"} <= set(rows[0])
    code, out, _ = invoke(capsys, "minmod", "--zoo", "identity", "--n", "8", "--p", "2")
    assert float(table(out)[0]["value"]) == pytest.approx(1.0)


def test_verify_theorem_rows(capsys):
    code, out, _ = invoke(capsys, "verify-theorem", "--zoo", "identity,mean", "--n", "16",
                          "--p", "2", "--gamma", "1,1+0.5i", "--restarts", "4")
    assert code == 0
    rows = table(out)
    assert len(rows) == 4
    assert rows[0]["pass"] == "" and rows[0]["control"] == "true"
    assert rows[1]["gamma"] == "1.0+0.5i"
    assert all(r["pass"] == "true" for r in rows if r["operator"] == "mean")
    for key in ("lhs_kind", "delta_kind", "rhs_kind", "tolerance", "lhs_witness"):
        assert key in rows[0]


def test_narrowness(capsys):
    code, out, _ = invoke(capsys, "narrowness", "--zoo", "identity,kernel:st", "--levels", "2,4",
                          "--p", "2", "--support", "left-half")
    assert code == 0
    rows = table(out)
    assert list(rows[0]) == ["operator", "n", "best_value", "sign_hash", "evaluations"]
    st = [float(r["best_value"]) for r in rows if r["operator"] == "kernel:st"]
    assert st[1] < st[0]


def test_exit_code_failure(capsys):
    code, out, _ = invoke(capsys, "convergence", "--p", "3", "--levels", "1,2",
                          "--threshold", "1e-6", "--restarts", "2")
    assert code == 1
    assert table(out)[-1]["final_gap_ok"] == "false"


@pytest.mark.parametrize("argv", [
    ["norm", "--zoo", "bogus", "--n", "8"],
    ["norm", "--zoo", "mean", "--strategy", "magic"],
    ["verify-theorem", "--zoo", "mean", "--gamma", "x"],
    ["verify-theorem", "--tolerance-rule", "oops"],
    ["narrowness", "--p", "1,2"],
    ["norm", "--config", "/nonexistent/file"],
])
def test_exit_code_usage(capsys, argv):
    code, _, err = invoke(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_argparse_usage_errors():
    with pytest.raises(SystemExit) as e:
        run(["nosuchcommand"])
    assert e.value.code == 2


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# sweep\np = 3\nn = 8\nzoo = mean, \nformat = json\n")
    code, out, _ = invoke(capsys, "norm", "--config", str(cfg))
    doc = json.loads(out)
    assert doc["params"]["p"] == "3" and doc["params"]["n"] == "8"
    code, out, _ = invoke(capsys, "norm", "--config", str(cfg), "--p", "1.5", "--format", "csv")
    assert table(out)[0]["p"] == "1.5"


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(UsageError):
        read_config(str(cfg))
    cfg.write_text("just words\n")
    with pytest.raises(UsageError):
        read_config(str(cfg))


def test_out_file(tmp_path, capsys):
    target = tmp_path / "cp.csv"
    code, out, _ = invoke(capsys, "cp-table", "--p", "2", "--out", str(target))
    assert out == "" and target.read_text().startswith("p,C_p,alpha_star")


def _digest(argv):
    res = subprocess.run([sys.executable, "-m", "narrowlab", *argv], capture_output=True,
                         check=False)
    assert res.returncode in (0, 1), res.stderr
    return hashlib.sha256(res.stdout).hexdigest()


@pytest.mark.parametrize("argv", [
    ["verify-theorem", "--zoo", "mean,kernel:exp", "--n", "16", "--p", "1.5,3",
     "--gamma", "0.5,1+0.5i", "--restarts", "4", "--seed", "7", "--format", "json"],
    ["narrowness", "--zoo", "kernel:exp", "--levels", "5", "--p", "3", "--budget", "2000",
     "--seed", "3"],
])
def test_byte_identical_reruns(argv):
    assert _digest(argv) == _digest(argv)
