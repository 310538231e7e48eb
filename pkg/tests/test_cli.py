import json
import subprocess
import sys

import pytest

from msbench.cli import main


def test_gen_then_solve_from_files(tmp_path, capsys):
    out = tmp_path / "cav"
    assert main(["gen", "--grid", "8", "--nu", "0.05", "--out", str(out)]) == 0
    meta = json.loads((out / "meta.json").read_text())
    for name in ("C", "b", "A_p", "D_p", "Q_p", "q_diag"):
        assert (out / f"{name}.mtx").exists()
    capsys.readouterr()
    rc = main(["solve", "--matrix", str(out / "C.mtx"), "--split", str(meta["p"]),
               "--rhs", str(out / "b.mtx"), "--aux", str(out), "--method", "pcd",
               "--out", str(tmp_path / "row.json")])
    assert rc == 0
    row = json.loads(capsys.readouterr().out.strip().splitlines()[0])
    assert row["method"] == "PCD" and row["converged"]
    assert json.loads((tmp_path / "row.json").read_text())[0]["status"] == "ok"


@pytest.mark.parametrize("method", ["omscn", "mscn", "lsc"])
def test_solve_generated(method, tmp_path, capsys):
    rc = main(["solve", "--grid", "8", "--nu", "0.1", "--method", method, "--sz", "10",
               "--overlap", "5", "--history", str(tmp_path / "h.csv")])
    assert rc == 0
    assert json.loads(capsys.readouterr().out)["status"] == "ok"
    assert (tmp_path / "h.csv").read_text().startswith("step,relres")


def test_solve_spectra(tmp_path):
    rc = main(["solve", "--grid", "8", "--method", "mscn", "--spectra",
               "--spectra-out", str(tmp_path / "eig.csv")])
    assert rc == 0
    lines = (tmp_path / "eig.csv").read_text().splitlines()
    assert lines[0] == "side,re,im" and len(lines) == 1 + 2 * 176


def test_run_spec(tmp_path):
    spec = {"problems": [{"grid_n": 8, "nu": 0.1}], "methods": [{"variant": "LUM"}],
            "output": str(tmp_path / "res.csv")}
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    assert main(["run", str(path)]) == 0
    assert (tmp_path / "res.csv").read_text().startswith("method,grid")


def test_scaling(tmp_path):
    rc = main(["scaling", "--aggregates", "2", "--size", "20", "--threads", "1,2",
               "--repeats", "1", "--out", str(tmp_path / "sc.csv")])
    assert rc == 0
    assert (tmp_path / "sc.csv").read_text().startswith("threads,")


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "msbench", "--help"], capture_output=True,
                         text=True)
    assert res.returncode == 0 and "solve" in res.stdout


def test_matrix_needs_split(tmp_path):
    with pytest.raises(SystemExit):
        main(["solve", "--matrix", str(tmp_path / "C.mtx")])
