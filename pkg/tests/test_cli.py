import json
from pathlib import Path

import numpy as np
import pytest

from villus_homog.cli import ENV_OUT, main, resolve_out_dir
from villus_homog.io import read_csv

CONFIGS = Path(__file__).resolve().parent.parent / "configs"

CYLINDER = """
[run]
scenario = cylinder
[profile]
r = 1.0
shape = flat
"""


def write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def small_villous(tmp_path, extra=""):
    text = (CONFIGS / "villous.ini").read_text().replace("macro_cells = 400", "macro_cells = 100")
    text = text.replace("n_z = 64", "n_z = 32").replace("n_rho = 64", "n_rho = 32")
    return write(tmp_path, text + extra, "villous.ini")


def test_geometry_cylinder_volume_row(tmp_path):
    out = tmp_path / "out"
    assert main(["geometry", "--config", write(tmp_path, CYLINDER), "--out", str(out)]) == 0
    rows = dict(line.split(",") for line in (out / "measures.csv").read_text().splitlines()[1:])
    assert float(rows["volume"]) == pytest.approx(np.pi, rel=1e-12)
    assert float(rows["ratio_RP"]) == pytest.approx(2.0, abs=1e-10)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == 0
    assert manifest["parameters"]["profile"]["shape"] == {"family": "flat"}
    assert "plots/radius_vs_z.dat" in manifest["files"]
    assert manifest["wall_time_s"] >= 0 and manifest["version"]


def test_unknown_module_exits_2(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["teleport", "--config", write(tmp_path, CYLINDER), "--out", str(out)]) == 2
    err = json.loads((out / "error.json").read_text())
    assert err["exit_status"] == 2 and "teleport" in err["message"]
    assert "teleport" in capsys.readouterr().err


def test_config_error_exits_2_with_all_problems(tmp_path):
    out = tmp_path / "out"
    bad = CYLINDER + "r = -1\nwobble = 3\n"
    assert main(["geometry", "--config", write(tmp_path, bad), "--out", str(out)]) == 2
    err = json.loads((out / "error.json").read_text())
    assert len(err["problems"]) >= 2
    assert all(p["line"] > 0 for p in err["problems"])


def test_missing_config_file_exits_2(tmp_path):
    assert main(["geometry", "--config", str(tmp_path / "nope.ini"), "--out", str(tmp_path)]) == 2


def test_numeric_failure_exits_1(tmp_path):
    out = tmp_path / "out"
    cfg = small_villous(tmp_path, "\n[tolerances]\nsolvability = 1e-12\n")
    assert main(["cell-solve", "--config", cfg, "--out", str(out)]) == 1
    err = json.loads((out / "error.json").read_text())
    assert err["exit_status"] == 1
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["status"] == 1 and manifest["results"]["solvable"] is False


def test_cell_solve_passes_default_tolerance(tmp_path):
    out = tmp_path / "out"
    assert main(["cell-solve", "--config", small_villous(tmp_path), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["results"]["solvable"] is True
    assert manifest["parameters"]["tolerances"]["solvability"] == 5e-3


def test_env_overrides_config_but_not_flag(tmp_path, monkeypatch):
    monkeypatch.setenv(ENV_OUT, str(tmp_path / "env"))
    assert resolve_out_dir("cfgdir") == tmp_path / "env"
    assert resolve_out_dir("cfgdir", str(tmp_path / "flag")) == tmp_path / "flag"
    assert main(["geometry", "--config", write(tmp_path, CYLINDER)]) == 0
    assert (tmp_path / "env" / "measures.csv").exists()
    monkeypatch.delenv(ENV_OUT)
    assert resolve_out_dir("cfgdir") == Path("cfgdir")
    assert resolve_out_dir(None) == Path("results")


def test_ode_converge_table(tmp_path):
    out = tmp_path / "out"
    assert main(["ode-converge", "--config", str(CONFIGS / "ode_converge.ini"), "--out", str(out)]) == 0
    header, data = read_csv(out / "convergence.csv")
    assert header == ["eps", "err_x", "err_xdot", "order_x", "order_xdot", "monotone"]
    assert data.shape[0] == 4
    assert np.all(data[:, -1] == 1)
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["parameters"]["kinetics"] == {"rates": [0.1], "y0": [1.0]}


def output_bytes(root):
    return {p.relative_to(root).as_posix(): p.read_bytes()
            for p in sorted(root.rglob("*")) if p.suffix in (".csv", ".dat")}


@pytest.mark.parametrize("module", ["homogenize", "macro-solve", "cell-solve"])
def test_identical_configs_give_identical_bytes(tmp_path, module):
    cfg = small_villous(tmp_path)
    a, b = tmp_path / "a", tmp_path / "b"
    assert main([module, "--config", cfg, "--out", str(a)]) == 0
    assert main([module, "--config", cfg, "--out", str(b)]) == 0
    fa, fb = output_bytes(a), output_bytes(b)
    assert fa and fa == fb
    for blob in fa.values():
        assert b"\r" not in blob


def test_macro_outputs(tmp_path):
    out = tmp_path / "out"
    assert main(["macro-solve", "--config", small_villous(tmp_path), "--out", str(out)]) == 0
    header, data = read_csv(out / "budget.csv")
    assert header[-1] == "residual"
    header, snaps = read_csv(out / "snapshots.csv")
    assert header == ["t", "x1", "u", "v"]
    assert snaps.shape[0] == 21 * 100
    series = (out / "plots").glob("*.dat")
    for s in series:
        assert all(len(line.split()) == 2 for line in s.read_text().splitlines())


def test_micro_verify_outputs(tmp_path):
    out = tmp_path / "out"
    cfg = small_villous(tmp_path)
    Path(cfg).write_text(Path(cfg).read_text().replace("micro_eps = 0.125", "micro_eps = 0.5")
                         .replace("n_snapshots = 20", "n_snapshots = 2"))
    assert main(["micro-verify", "--config", cfg, "--out", str(out)]) == 0
    header, _ = read_csv(out / "micro_snapshots.csv")
    assert header == ["t", "x1", "rho_hat", "u", "v"]
    assert (out / "averages.csv").exists()
