import csv

import numpy as np
import pytest

from ppformer import cli
from ppformer.approx import load_model
from ppformer.fixed_ring import RingParams, RingTensor
from ppformer.report import REPORT_COLUMNS, load_tensor, read_report, save_tensor


def test_matmul_cop_report(tmp_path):
    out = tmp_path / "r.csv"
    rc = cli.main(["matmul", "--protocol", "cop", "--k", "4", "--m", "6", "--n", "8", "--N", "32",
                   "--report", str(out)])
    assert rc == cli.EXIT_OK
    rows = read_report(out)
    assert tuple(rows[0]) == REPORT_COLUMNS
    online = [r for r in rows if r["phase"] == "online" and r["party"] == "total"][0]
    assert online["rounds"] == "1" and online["ciphertexts"] == "1" and float(online["max_err"]) == 0.0
    assert {r["phase"] for r in rows} == {"setup", "online"}


def test_matmul_sip_window(capsys):
    rc = cli.main(["matmul", "--protocol", "sip", "--k", "4", "--m", "8", "--n", "4", "--N", "32",
                   "--window", "2,4,4", "--ell", "32", "--scale", "12"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0].startswith("phase,party,bytes")
    total = list(csv.DictReader(lines))[-1]
    assert total["rounds"] == "2" and total["ciphertexts"] == str(4 * 8 // 8 + 4 * 4 // 8)


def test_noise_budget_exit_code(monkeypatch):
    from ppformer import toy_he

    def broken(*a, **kw):
        raise toy_he.NoiseBudgetExceeded("forced")

    monkeypatch.setattr(cli, "cop_matmul", broken)
    assert cli.main(["matmul", "--k", "2", "--m", "2", "--n", "2", "--N", "16"]) == cli.EXIT_NOISE


def test_transport_error_exit_code(monkeypatch):
    from ppformer.mpc import TransportError

    def broken(*a, **kw):
        raise TransportError("peer went away")

    monkeypatch.setattr(cli, "cop_matmul", broken)
    assert cli.main(["matmul", "--k", "2", "--m", "2", "--n", "2", "--N", "16"]) == cli.EXIT_TRANSPORT


def test_verification_failure_exit_code(monkeypatch):
    real = cli.cop_matmul

    def tampered(*a, **kw):
        res = real(*a, **kw)
        res.ys.inner.data[0, 0] += np.uint64(1)
        return res

    monkeypatch.setattr(cli, "cop_matmul", tampered)
    assert cli.main(["matmul", "--k", "2", "--m", "2", "--n", "2", "--N", "16"]) == cli.EXIT_VERIFY


def test_fit_then_nonlinear(tmp_path):
    model, table = tmp_path / "gelu.txt", tmp_path / "err.csv"
    assert cli.main(["fit", "--template", "gelu", "--radius", "0.1", "--step", "0.05", "--out", str(model),
                     "--table", str(table)]) == 0
    assert len(load_model(model).breakpoints) == 2
    row = read_report(table)[0]
    assert float(row["weighted_rmse"]) > 0 and row["fixed_overflow"] == "False"

    x = RingTensor.from_real(np.random.default_rng(0).uniform(-4, 3, (3, 5)), RingParams(32, 12))
    save_tensor(x, tmp_path / "x.csv")
    rc = cli.main(["nonlinear", "--model", str(model), "--input", str(tmp_path / "x.csv"), "--op", "gelu",
                   "--output", str(tmp_path / "y.csv"), "--report", str(tmp_path / "r.csv")])
    assert rc == 0
    y = load_tensor(tmp_path / "y.csv")
    assert y.shape == (3, 5) and y.params == RingParams(32, 12)
    assert float(read_report(tmp_path / "r.csv")[-1]["max_err"]) <= 2 * 2.0 ** -12


def test_fit_with_histogram_file(tmp_path):
    from ppformer.approx import Histogram

    Histogram.synthetic_softmax(bins=64).save(tmp_path / "h.txt")
    assert cli.main(["fit", "--template", "exp", "--hist", str(tmp_path / "h.txt"), "--radius", "0.2",
                     "--step", "0.1", "--table", str(tmp_path / "t.csv")]) == 0


def test_block_command(tmp_path):
    rc = cli.main(["block", "--N", "256", "--compare-transports", "--report", str(tmp_path / "b.csv")])
    assert rc == 0
    rows = read_report(tmp_path / "b.csv")
    assert float(rows[-1]["max_err"]) <= 2.0 ** -8


def test_tensor_file_errors(tmp_path):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        load_tensor(tmp_path / "bad.csv")
    (tmp_path / "short.csv").write_text("rows,cols,ell,scale\n2,2,32,12\n1.0,2.0\n")
    with pytest.raises(ValueError):
        load_tensor(tmp_path / "short.csv")


def test_bad_arguments():
    with pytest.raises(SystemExit):
        cli.main(["matmul", "--window", "1,2"])
