import csv
import io
import json

import numpy as np
import pytest

from aqc import circuit as C
from aqc import matrixcore as mc
from aqc.cli import derive_seed, main, synth_circuit
from aqc.structures import ConnectivityGraph
from aqc.targets import toffoli


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_bound(capsys):
    code, out, _ = run(capsys, "bound", "--n", 3)
    assert code == 0
    assert out.split() == ["tlb", "14", "qsd_count", "20", "cart_length", "22"]
    assert run(capsys, "bound", 5)[1].split()[:4] == ["tlb", "252", "qsd_count", "444"]


def test_compile_toffoli_report_and_circuit(capsys, tmp_path):
    out = tmp_path / "c.txt"
    code, text, _ = run(
        capsys, "compile", "--target", "toffoli3", "--structure", "sequ", "--length", 7,
        "--restarts", 2, "--seed", 1, "--threads", 1, "--out", out, "--max-iters", 3000,
    )
    rep = json.loads(text)
    assert code == (0 if rep["converged"] else 2)
    assert set(rep) >= {"frobenius_cost", "fidelity", "hst_cost", "iterations", "wall_ms"}
    circ = C.read_circuit(out)
    assert circ.cnot_count == 7
    m = mc.class_metrics(C.circuit_matrix(circ), toffoli(3))
    assert abs(m.frobenius_fidelity - rep["fidelity"]) <= 1e-9


def test_compile_zero_length_file_target(capsys, tmp_path):
    path = tmp_path / "u.txt"
    u = mc.kron(mc.rx(0.3), mc.ry(1.2))
    mc.write_unitary(path, u)
    code, text, _ = run(
        capsys, "compile", "--target", f"file:{path}", "--structure", "spin", "--length", 0,
        "--threads", 1,
    )
    rep = json.loads(text)
    assert code == 0
    assert rep["length"] == 0
    assert rep["hst_cost"] <= 1e-10


def test_compile_budget_exit_code(capsys):
    code, text, _ = run(
        capsys, "compile", "--target", "haar", "--n", 3, "--length", 4, "--max-iters", 5,
        "--threads", 1,
    )
    assert code == 2
    assert json.loads(text)["converged"] is False


@pytest.mark.parametrize(
    "argv",
    [
        ["compile", "--target", "toffoli3", "--n", 2, "--length", 3],
        ["compile", "--target", "haar", "--n", 3, "--structure", "cart", "--length", 3],
        ["compile", "--target", "haar", "--n", 3, "--length", 3, "--optimizer", "adam"],
        ["compile", "--target", "file:/nonexistent", "--length", 3],
        ["compile", "--length", 3],
        ["nope"],
    ],
)
def test_usage_errors_exit_1(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        code = main([str(a) for a in argv])
        raise SystemExit(code)
    assert exc.value.code == 1


def test_compile_deterministic_without_timing(capsys):
    argv = ["compile", "--target", "haar", "--n", 3, "--length", 6, "--restarts", 2,
            "--seed", 9, "--max-iters", 300, "--no-timing"]
    a = run(capsys, *argv, "--threads", 1)[1]
    b = run(capsys, *argv, "--threads", 2)[1]
    assert a == b
    assert "wall_ms" not in json.loads(a)


def test_sweep_csv(capsys):
    argv = ["sweep", "--n", 2, "--lengths", "0,2,4", "--samples", 2, "--max-iters", 1500,
            "--seed", 3, "--threads", 1]
    code, text, _ = run(capsys, *argv)
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [int(r["length"]) for r in rows] == [0, 2, 4]
    assert float(rows[-1]["median_fidelity"]) >= 0.999
    assert run(capsys, *argv)[1] == text


def test_compress_jsonl_and_best_circuit(capsys, tmp_path):
    out = tmp_path / "best.txt"
    code, text, _ = run(
        capsys, "compress", "--target", "haar", "--n", 3, "--structure", "cart",
        "--lambda-list", "0,0.1", "--max-iters", 800, "--threads", 1, "--no-timing",
        "--out", out, "--min-fidelity", 0.5,
    )
    assert code == 0
    recs = [json.loads(line) for line in text.splitlines()]
    assert [r["lambda"] for r in recs] == [0.0, 0.1]
    assert recs[0]["cnots_after"] == recs[0]["cnots_before"] == 22
    assert all("wall_ms" not in r for r in recs)
    best = min(recs, key=lambda r: (r["cnots_after"], -r["fidelity_after"]))
    assert C.read_circuit(out).cnot_count == best["cnots_after"]


def test_compress_minimal_warm_start(capsys, tmp_path):
    warm = tmp_path / "w.txt"
    warm.write_text("qubits 2\nry 1 0.4\ncx 1 2\nrx 2 0.7\n")
    out = tmp_path / "o.txt"
    code, text, _ = run(
        capsys, "compress", "--warm", warm, "--lambda-list", "0.01,0.1,1", "--threads", 1,
        "--max-iters", 2000, "--min-fidelity", 0.99, "--out", out,
    )
    assert code == 0
    assert C.read_circuit(out).cnot_count == 1


def test_synth_command(capsys, tmp_path):
    path = tmp_path / "w.txt"
    path.write_text("qubits 3\ncx 1 2\ncx 2 3\ncx 1 2\nrx 1 0.5\ncx 1 2\ncx 1 2\n")
    code, text, _ = run(capsys, "synth", path)
    assert code == 0
    assert C.parse(text).cnot_count == 2
    assert mc.metrics(C.circuit_matrix(C.parse(text)), C.circuit_matrix(C.read_circuit(path))).hst_cost <= 1e-9
    assert C.parse(run(capsys, "synth", path, "--connectivity", "line")[1]).cnot_count == 3


def test_synth_circuit_keeps_upward_cnots():
    c = C.Circuit(2, (C.cx(2, 1), C.cx(2, 1)))
    assert synth_circuit(c, ConnectivityGraph.full(2), True) == c


def test_config_file_and_dump(capsys, tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("# defaults\ntarget = haar\nn = 3\nlength = 4\nmax-iters = 20\n")
    code, text, _ = run(capsys, "compile", "--config", cfg, "--dump-config")
    assert code == 0
    assert "target=haar" in text.splitlines()
    assert "max-iters=20" in text.splitlines()
    code, text, _ = run(capsys, "compile", "--config", cfg, "--max-iters", 7, "--threads", 1)
    assert json.loads(text)["max_iters"] == 7
    cfg.write_text("colour = blue\n")
    assert run(capsys, "compile", "--config", cfg, "--target", "haar", "--n", 3, "--length", 2)[0] == 1


def test_threads_env(capsys, monkeypatch):
    monkeypatch.setenv("AQC_THREADS", "x")
    assert run(capsys, "compile", "--target", "haar", "--n", 2, "--length", 1, "--max-iters", 3)[0] == 1


def test_derive_seed():
    assert derive_seed(1, 2) == derive_seed(1, 2)
    assert derive_seed(1, 2) != derive_seed(2, 1)
