import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from entangle import __version__
from entangle.activation.families import _to_rho_layout, separable_floor_state
from entangle.cli import main
from entangle.states import bound_entangled_33, max_entangled
from entangle.tensor_core import DensityOperator, HilbertFactorization, save_matrix


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, (json.loads(out.out) if out.out.strip() else None), out.err


def test_edist_max_entangled(capsys):
    code, rep, _ = run(capsys, "edist", "--state", "kind=max_entangled,d=2", "--d", "2", "--restarts", "8")
    assert code == 0
    assert abs(rep["e_lower"] - 1) < 1e-6 and abs(rep["F_d"] - 1) < 1e-6
    assert rep["best_filter"]["a"]["rows"] == 2
    man = rep["manifest"]
    assert man["command"] == "edist" and man["toolkit_version"] == __version__ and man["seed"] == 0


def test_edist_product(capsys):
    code, rep, _ = run(capsys, "edist", "--state", "kind=product,d=3", "--d", "3", "--restarts", "8")
    assert code == 0 and abs(rep["e_lower"] - 1 / 3) < 1e-6
    assert not rep["distillable_hint"]


def test_edist_file_reproducible(capsys, tmp_path):
    path = tmp_path / "w.json"
    code, _, _ = run(capsys, "export-state", "--state", "kind=werner,d=2,mu=0.9", "--path", str(path))
    assert code == 0
    argv = ["edist", "--state", f"kind=file,path={path}", "--d", "2", "--restarts", "128", "--seed", "7"]
    _, a, _ = run(capsys, *argv)
    _, b, _ = run(capsys, *argv)
    a["manifest"].pop("wall_clock_s")
    b["manifest"].pop("wall_clock_s")
    assert a == b
    assert list(a["manifest"]["input_digests"]) == [str(path)]
    assert a["manifest"]["config"]["restarts"] == 128


def test_seed_from_environment(capsys, monkeypatch):
    monkeypatch.setenv("ENTANGLE_SEED", "11")
    _, rep, _ = run(capsys, "edist", "--state", "kind=werner,d=2,mu=0.9", "--restarts", "2")
    assert rep["manifest"]["seed"] == 11


@pytest.mark.parametrize("argv", [
    ["edist", "--state", "kind=nope"],
    ["edist", "--state", "werner"],
    ["edist", "--state", "kind=werner,d=2"],
    ["edist", "--state", "kind=file,path=/nonexistent.json"],
    ["activate", "--sigma", "kind=max_entangled,d=2", "--lambda", "1.5"],
    ["frobnicate"],
])
def test_errors_exit_one_without_report(capsys, argv):
    try:
        code = main(argv)
    except SystemExit as exc:  # argument errors leave through the parser
        code = exc.code
    assert code == 1
    assert capsys.readouterr().out.strip() == ""


def test_activate_phi2(capsys, tmp_path):
    rho_path = tmp_path / "rho.json"
    code, rep, _ = run(capsys, "activate", "--sigma", "kind=max_entangled,d=2", "--lambda", "0.6", "--d", "2",
                       "--write-rho", str(rho_path))
    assert code == 0 and rep["found"]
    assert rep["joint_seesaw"]["e_lower"] > 0.6
    assert rep["certificate"]["value"] <= 0.6
    assert rep["activation_condition"] < 0
    assert rho_path.exists()
    for key in ("seed", "wall_clock_s", "config"):
        assert key in rep["manifest"]


def test_activate_product_not_found(capsys):
    code, rep, _ = run(capsys, "activate", "--sigma", "kind=product,d=2", "--lambda", "0.6")
    assert code == 2 and not rep["found"]
    assert rep["min_activation_condition"] >= 0


def test_activate_demo_file(capsys, tmp_path):
    sigma = tmp_path / "sigma.json"
    save_matrix(sigma, bound_entangled_33(4.0))
    code, rep, _ = run(capsys, "activate", "--sigma", f"kind=file,path={sigma}", "--lambda", "0.8", "--d", "2",
                       "--witness-samples", "2000")
    assert code == 0
    assert rep["certificate"]["kind"] == "decomposition"
    assert rep["joint_seesaw"]["e_lower"] > 0.8 + 1e-3
    assert rep["witness_min_over_products"] >= -1e-9
    assert str(sigma) in rep["manifest"]["input_digests"]


def test_witness_command(capsys, tmp_path):
    r = tmp_path / "r.json"
    s = tmp_path / "s.json"
    save_matrix(r, separable_floor_state(2, 2, 2))
    save_matrix(s, max_entangled(2)[0])
    code, rep, _ = run(capsys, "witness", "--rho", str(r), "--lambda", "0.6", "--d", "2", "--sigma", str(s),
                       "--samples", "2000")
    assert code == 0 and rep["detected"]
    assert abs(rep["witness_value"] - rep["activation_condition"]) < 1e-10
    assert rep["min_over_products"] >= -1e-9
    assert set(rep["manifest"]["input_digests"]) == {str(r), str(s)}
    code, rep, _ = run(capsys, "witness", "--rho", str(r), "--lambda", "0.6", "--sigma", "kind=product,d=2")
    assert code == 0 and not rep["detected"]


def test_witness_without_certificate_fails(capsys, tmp_path):
    # phi_2 on A3 B3 with noise on A2 B2: entangled across the cut, so no floor certificate
    r = tmp_path / "r.json"
    rho = _to_rho_layout(np.eye(4) / 4, max_entangled(2)[0].matrix, 2, 2, 2)
    save_matrix(r, DensityOperator(rho, HilbertFactorization((("A2", 2), ("A3", 2), ("B2", 2), ("B3", 2)))))
    code, rep, err = run(capsys, "witness", "--rho", str(r), "--lambda", "0.6", "--sigma", "kind=product,d=2")
    assert code == 1 and rep is None and "certificate" in err


def test_teleport_sim(capsys):
    code, rep, _ = run(capsys, "teleport-sim", "--resource", "kind=max_entangled,d=2", "--samples", "1000")
    assert code == 0 and abs(rep["mean"] - 1) < 1e-12
    code, rep, _ = run(capsys, "teleport-sim", "--resource", "kind=werner,d=2,mu=0.9", "--samples", "2000",
                       "--mode", "conclusive", "--restarts", "8")
    assert code == 0 and abs(rep["mean"] - rep["predicted"]) <= 3 * rep["standard_error"] + 1e-12


def test_lemma_check(capsys):
    code, rep, _ = run(capsys, "lemma-check", "--d", "2", "--lambda", "0.6", "--trials", "10000")
    assert code == 0 and rep["counterexamples"] == 0 and rep["psd_count"] > 0


def test_out_and_csv(capsys, tmp_path):
    out = tmp_path / "rep.json"
    table = tmp_path / "rep.csv"
    code = main(["teleport-sim", "--resource", "kind=max_entangled,d=2", "--samples", "10",
                 "--out", str(out), "--csv", str(table)])
    assert code == 0 and capsys.readouterr().out == ""
    rep = json.loads(out.read_text())
    rows = list(csv.DictReader(table.open()))
    assert len(rows) == 1 and float(rows[0]["mean"]) == rep["mean"]
    assert rows[0]["manifest.command"] == "teleport-sim"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "entangle", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.strip() == __version__
