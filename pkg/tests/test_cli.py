import csv
import io
import json
import math
import subprocess
import sys

import pytest

from plasma_branch import cli
from plasma_branch.errors import ConvergenceError


@pytest.fixture(autouse=True)
def _cache(tmp_path_factory, monkeypatch):
    monkeypatch.setenv("PLASMA_BRANCH_CACHE", str(tmp_path_factory.getbasetemp() / "tables"))


def run(args, tmp_path, name="out.txt"):
    out = tmp_path / name
    code = cli.main(args + ["--out", str(out)])
    return code, out.read_bytes() if out.exists() else b""


def parse_csv(data):
    return list(csv.reader(io.StringIO(data.decode())))


def test_trace_csv_contract(tmp_path):
    code, data = run(["trace", "--dim", "2", "--p", "2", "--samples", "200", "--format", "csv"], tmp_path)
    assert code == 0
    rows = parse_csv(data)
    assert rows[0] == list(cli.TRACE_COLUMNS)
    body = rows[1:]
    assert len(body) == 200
    assert b"\r\n" in data
    lams = [float(r[0]) for r in body]
    assert all(b > a for a, b in zip(lams, lams[1:]))
    first = dict(zip(rows[0], body[0]))
    assert float(first["lambda"]) == 0.0 and float(first["alpha"]) == 1.0
    last = dict(zip(rows[0], body[-1]))
    assert last["regime"] == "threshold"
    # sigma1 is only reported where alpha > 0
    assert all(float(r[7]) > 0 for r in body if r[9] == "positive")
    assert all("%.17g" % float(r[4]) == r[4] for r in body)


def test_trace_past_threshold(tmp_path):
    code, data = run(
        ["trace", "--samples", "40", "--grid-n", "1025", "--lambda-max-factor", "2"], tmp_path
    )
    assert code == 0
    rows = parse_csv(data)[1:]
    assert len(rows) == 40
    regimes = [r[9] for r in rows]
    assert "free_boundary" in regimes and "positive" in regimes
    for r in rows:
        if r[9] == "free_boundary":
            assert float(r[4]) < 0 and r[5] == "" and r[7] == ""


def test_trace_json_contract(tmp_path):
    code, data = run(["trace", "--samples", "30", "--grid-n", "1025", "--format", "json"], tmp_path)
    assert code == 0
    doc = json.loads(data)
    assert set(doc) == {"rows", "summary"}
    assert len(doc["rows"]) == 30
    assert list(doc["rows"][0]) == list(cli.TRACE_COLUMNS)
    assert doc["rows"][0]["R"] is None  # R(0) is infinite
    assert doc["summary"]["lambda_plus"] > 0


def test_trace_is_deterministic(tmp_path):
    args = ["trace", "--samples", "30", "--grid-n", "1025"]
    _, a = run(args, tmp_path, "a.csv")
    _, b = run(args, tmp_path, "b.csv")
    assert a == b and len(a) > 0


def test_trace_lambdas_refines_near_threshold():
    lams = cli.trace_lambdas(10.0, 200, 1.0)
    assert lams.size == 200 and lams[-1] == 10.0
    assert sum(9.8 < x < 10.0 for x in lams) >= 10
    assert cli.trace_lambdas(10.0, 50, 0.5).size == 50


@pytest.mark.parametrize("fmt", ["csv", "json"])
def test_bell_output(tmp_path, fmt):
    code, data = run(["bell", "--samples", "150", "--format", fmt], tmp_path)
    assert code == 0
    if fmt == "csv":
        rows = parse_csv(data)
        assert rows[0] == list(cli.BELL_COLUMNS)
        blank = rows.index([])
        body = rows[1:blank]
        summary = dict(zip(rows[blank + 1], (float(x) for x in rows[blank + 2])))
        mus = [float(r[1]) for r in body]
    else:
        doc = json.loads(data)
        body = doc["rows"]
        summary = doc["summary"]
        mus = [r["mu"] for r in body]
    assert len(body) == 150
    assert list(summary) == list(cli.SUMMARY_FIELDS)
    assert 0 < summary["lambda_t"] < summary["lambda_plus"]
    assert summary["E_inf"] == pytest.approx(3 / (16 * math.pi), abs=1e-6)
    assert summary["E0"] == pytest.approx(1 / (16 * math.pi), abs=1e-8)
    assert mus[0] < 1e-6 * max(mus) and mus[-1] < 1e-6 * max(mus)


def test_bell_config_errors(tmp_path):
    assert run(["bell", "--samples", "50"], tmp_path)[0] == 2
    assert run(["bell", "--lambda-max-factor", "2"], tmp_path)[0] == 2


def test_sobolev_output(tmp_path):
    code, data = run(["sobolev", "--dim", "2", "--p", "2", "--t", "2"], tmp_path)
    assert code == 0
    values = dict(line.split(" = ") for line in data.decode().splitlines())
    assert float(values["Lambda(t=2)"]) == pytest.approx(18.1684, abs=1e-4)
    assert float(values["lambda1(p=2)"]) == pytest.approx(float(values["lambda_plus(p=2)"]), rel=1e-5)
    assert float(values["lambda0(p=2)"]) < float(values["lambda_plus(p=2)"])


def test_sobolev_out_of_range(tmp_path, capsys):
    assert run(["sobolev", "--dim", "3", "--p", "2", "--t", "6"], tmp_path)[0] == 2
    assert "outside" in capsys.readouterr().err
    assert run(["sobolev", "--dim", "4", "--p", "1.5", "--t", "1"], tmp_path)[0] == 2


@pytest.mark.parametrize(
    "args",
    [
        ["trace", "--dim", "1"],
        ["trace", "--p", "1"],
        ["trace", "--dim", "3", "--p", "3"],
        ["trace", "--grid-n", "128"],
        ["trace", "--grid-n", "65"],
        ["trace", "--samples", "5"],
        ["trace", "--lambda-max-factor", "0"],
        ["trace", "--modes", "-1"],
        ["verify", "--tol", "no.such.check=1"],
    ],
)
def test_config_errors_exit_2(tmp_path, args):
    assert run(args, tmp_path)[0] == 2


def test_argparse_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as info:
        cli.main(["trace", "--format", "xml"])
    assert info.value.code == 2
    with pytest.raises(SystemExit) as info:
        cli.main(["verify", "--tol", "missing-equals"])
    assert info.value.code == 2


def test_numerical_failure_exit_3(tmp_path, monkeypatch, capsys):
    def boom(*args, **kwargs):
        raise ConvergenceError("no contraction", lam=4.25)

    monkeypatch.setattr(cli, "solve_sweep", boom)
    assert run(["trace", "--samples", "20", "--grid-n", "257"], tmp_path)[0] == 3
    assert "lambda=4.25" in capsys.readouterr().err


@pytest.mark.parametrize("dim", [2, 3])
def test_verify_passes(tmp_path, dim):
    code, data = run(["verify", "--dim", str(dim), "--p", "2"], tmp_path)
    text = data.decode()
    assert code == 0, text
    assert "FAIL" not in text
    assert text.strip().splitlines()[-1].endswith("checks passed")


def test_verify_reports_corrupted_table(tmp_path):
    code, data = run(["verify", "--corrupt-table", "--grid-n", "2049"], tmp_path)
    text = data.decode()
    assert code == 1
    failed = [line for line in text.splitlines() if line.startswith("failed: ")]
    assert failed and "lane_emden.residual" in failed[0]


def test_verify_tolerance_override_can_fail(tmp_path):
    code, data = run(["verify", "--grid-n", "2049", "--tol", "gelfand.q_residual=1e-20"], tmp_path)
    assert code == 1
    assert "gelfand.q_residual" in data.decode().splitlines()[-1]


def test_module_entry_point(tmp_path):
    proc = subprocess.run(
        [sys.executable, "-m", "plasma_branch", "sobolev", "--t", "3"],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert proc.stdout.startswith("Lambda(t=3) = ")
