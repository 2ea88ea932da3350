import json
import subprocess
import sys
import textwrap

import numpy as np
import pytest

from quditqet.cli import EXIT_CONTRACT, EXIT_OK, EXIT_VALIDATION, main
from quditqet.wigner import read_raster

PROTOCOL = """\
protocol:
  d: 3
  initial_state: extraction
  profile_a: {family: hann, center: 0.0, width: 2.0, strength: 0.3}
  profile_b: {family: hann, center: 10.0, width: 2.0, strength: MU}
"""


def scenario(tmp_path, body="", mu="0.05", name="s.yaml"):
    path = tmp_path / name
    path.write_text(PROTOCOL.replace("MU", mu) + textwrap.dedent(body))
    return path


def run(cmd, path, out, *extra):
    return main([cmd, "--scenario", str(path), "--out", str(out), *extra])


def test_report(tmp_path):
    path = scenario(tmp_path)
    assert run("report", path, tmp_path / "o") == EXIT_OK
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["teleport_term"] < 0
    assert abs(rep["delta_e"] - rep["switching_cost"] - rep["teleport_term"]) < 1e-15


def test_report_zero_coupling(tmp_path):
    path = scenario(tmp_path, mu="0.0")
    assert run("report", path, tmp_path / "o") == EXIT_OK
    assert json.loads((tmp_path / "o" / "report.json").read_text())["delta_e"] == 0.0


def test_overlap_exit_code(tmp_path, capsys):
    path = tmp_path / "bad.yaml"
    path.write_text(PROTOCOL.replace("MU", "0.05").replace("center: 10.0", "center: 0.5"))
    assert run("report", path, tmp_path / "o") == EXIT_VALIDATION
    assert "overlap" in capsys.readouterr().err


def test_unknown_key_exit_code(tmp_path, capsys):
    path = scenario(tmp_path, "density: {points: 10, bogus: 1}\n")
    assert run("density", path, tmp_path / "o") == EXIT_VALIDATION
    assert "s.yaml:6" in capsys.readouterr().err


def test_eta_epsilon_out_of_range(tmp_path):
    path = scenario(tmp_path, "scan:\n  eta: {epsilon: 0.3, etas: [1, 2]}\n")
    assert run("scan-eta", path, tmp_path / "o") == EXIT_VALIDATION


def test_missing_section(tmp_path, capsys):
    assert run("wigner", scenario(tmp_path), tmp_path / "o") == EXIT_VALIDATION
    assert "wigner" in capsys.readouterr().err


def test_density_contract(tmp_path, capsys):
    # a coarse grid misses the 1e-4 integral contract; the outputs are still written
    path = scenario(tmp_path, "density: {points: 1024}\n")
    assert run("density", path, tmp_path / "o") == EXIT_CONTRACT
    assert "density integral gap" in capsys.readouterr().err
    assert (tmp_path / "o" / "density_b.csv").exists()


def test_density_outputs_and_determinism(tmp_path):
    path = scenario(tmp_path, "density: {points: 4096}\n")
    assert run("density", path, tmp_path / "a") == EXIT_OK
    assert run("density", path, tmp_path / "b") == EXIT_OK
    for name in ("density_a.csv", "density_b.csv", "density.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    info = json.loads((tmp_path / "a" / "density.json").read_text())
    assert info["pass"]


def test_theta_scan(tmp_path):
    path = scenario(tmp_path, "scan:\n  theta: {epsilon: 0.5, thetas: [1, 2, 4]}\n")
    assert run("scan-theta", path, tmp_path / "o") == EXIT_OK
    header = (tmp_path / "o" / "theta_scan.csv").read_text().splitlines()[0]
    assert "d_scaled" in header and "im_gamma" in header
    assert "np.float64" not in (tmp_path / "o" / "theta_scan.csv").read_text()


def test_oracle_command(tmp_path, capsys):
    path = scenario(tmp_path, """\
        oracle: {modes: [1, 2], d_values: [2, 3], delays: [0.0, 1.0]}
        seed: 5
        """)
    path.write_text(path.read_text().replace("center: 10.0", "center: 5.0").replace("strength: 0.3", "strength: 1.0"))
    assert run("oracle", path, tmp_path / "o") == EXIT_OK
    rec = json.loads((tmp_path / "o" / "oracle.json").read_text())
    assert len(rec["reports"]) == 8 and all(r["pass"] for r in rec["reports"])
    assert "relative gap" in capsys.readouterr().out


def test_oracle_contract_failure(tmp_path, capsys):
    # a pure X shift is not symmetric under b -> -b, so the cosine factor is not exact
    path = scenario(tmp_path, """\
        oracle:
          modes: 1
          noise:
            table: [[0, 1, 0], [0, 0, 0], [0, 0, 0]]
            shots: 100
        seed: 1
        """)
    path.write_text(path.read_text().replace("center: 10.0", "center: 5.0").replace("strength: 0.3", "strength: 1.0"))
    assert run("oracle", path, tmp_path / "o") == EXIT_CONTRACT
    assert "worst relative gap" in capsys.readouterr().err
    rec = json.loads((tmp_path / "o" / "oracle.json").read_text())
    noise = rec["noise"]
    assert not noise["pass"] and not rec["pass"]
    # every shot applies the same X, so there is no sampling spread
    assert noise["mc_stderr"] < 1e-15 * abs(noise["noiseless_teleport"])


def test_wigner_command(tmp_path):
    path = tmp_path / "w.yaml"
    path.write_text("wigner: {alpha: 2.5, d: [4, 8, 12, 16], grid: {resolution: 128}}\n"
                    "output: {formats: [json]}\n")
    assert run("wigner", path, tmp_path / "o") == EXIT_OK
    for d in (4, 8, 12, 16):
        arr = read_raster(tmp_path / "o" / f"wigner_d{d}.wigr")
        assert arr.shape == (128, 128)
    info = json.loads((tmp_path / "o" / "wigner.json").read_text())
    assert info["isotropy_decreasing"]


def test_out_override_and_seed(tmp_path):
    path = scenario(tmp_path, f"output: {{directory: {tmp_path / 'declared'}}}\n")
    assert main(["report", "--scenario", str(path)]) == EXIT_OK
    assert (tmp_path / "declared" / "report.json").exists()
    assert run("report", path, tmp_path / "override") == EXIT_OK
    assert (tmp_path / "override" / "report.json").exists()
    assert run("report", path, tmp_path / "o", "--seed", "-3") == EXIT_VALIDATION


def test_console_script(tmp_path):
    path = scenario(tmp_path)
    proc = subprocess.run([sys.executable, "-m", "quditqet.cli", "report", "--scenario", str(path),
                           "--out", str(tmp_path / "o")], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
