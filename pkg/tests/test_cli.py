import hashlib
import json

import numpy as np
import pytest

from polarmol import cli
from polarmol.cli import ConfigError, RunConfig, main, read_table, run
from polarmol.errors import ConvergenceError
from polarmol.molecule import bare_absorption, build_bo_structure, default_grids, load_fixture

COARSE = """
[molecule]
fixture = anthracene_like
[grids]
x_spacing = 0.2
points_per_width = 3
[spectrum]
n_omega = 400
"""


def _config(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_config_is_strict():
    with pytest.raises(ConfigError, match="unknown section"):
        RunConfig.from_text("[photons]\ng = 0.1\n", task="absorb")
    with pytest.raises(ConfigError, match="unknown key"):
        RunConfig.from_text("[cavity]\ncoupling = 0.1\n", task="absorb")
    with pytest.raises(ConfigError, match="bad value"):
        RunConfig.from_text("[cavity]\nn_max = four\n", task="absorb")
    with pytest.raises(ConfigError, match="conflicts"):
        RunConfig.from_text("[run]\ntask = bare\n", task="absorb")
    with pytest.raises(ConfigError, match="two distinct"):
        RunConfig.from_text("[cavity]\ng = 0.01\n", task="scaling-report")
    with pytest.raises(ConfigError, match="g > 0"):
        RunConfig.from_text("[cavity]\ng = 0, 0.01\n", task="usc-scan")
    cfg = RunConfig.from_text(COARSE + "[cavity]\ng = 0.001, 0.002\nomega_c = vertical\n", task="absorb")
    assert cfg.g == (0.001, 0.002) and cfg.omega_c == "vertical" and cfg.x_spacing == 0.2
    assert RunConfig(**{k: v for k, v in cfg.to_dict().items()} | {"g": tuple(cfg.g)}) == cfg


def test_exit_code_for_bad_config(tmp_path, capsys):
    path = _config(tmp_path, "[cavity]\nomega = 1\n")
    assert main(["absorb", "--config", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "unknown key" in capsys.readouterr().err
    assert main(["figure", "fig9", "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    path = _config(tmp_path, "[molecule]\nfixture = benzene\n", "b.cfg")
    assert main(["bare", "--config", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_CONFIG
    assert "calibrate" in capsys.readouterr().err


def test_exit_code_for_missing_crossing(tmp_path):
    path = _config(tmp_path, COARSE + "[cavity]\nomega_c = 2.0\n")
    assert main(["nonbo", "--config", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_WINDOW


def test_exit_code_for_convergence_failure(tmp_path, monkeypatch):
    def failing(cfg, out_dir=None):
        raise ConvergenceError("did not converge", drift=1.0)
    monkeypatch.setattr(cli, "run", failing)
    assert main(["bare", "--out", str(tmp_path)]) == cli.EXIT_CONVERGENCE


def test_bare_task_outputs_and_manifest(tmp_path):
    cfg = RunConfig.from_text(COARSE, task="bare")
    manifest = json.loads(run(cfg, tmp_path).read_text())
    assert manifest["tool"] == "polarmol" and manifest["format_version"] == cli.FORMAT_VERSION
    for name, digest in manifest["files"].items():
        assert hashlib.sha256((tmp_path / name).read_bytes()).hexdigest() == digest
    pes = read_table(tmp_path / "pes.csv")
    assert set(pes) == {"R", "E_g", "E_e", "mu_eg"}
    header = (tmp_path / "pes.csv").read_text().splitlines()
    assert header[0].startswith("# polarmol") and header[1].startswith("# units: R [bohr]")
    obs = json.loads((tmp_path / "observables.json").read_text())
    assert abs(obs["observables"]["omega_vib"] - 0.18) < 0.01


def test_zero_coupling_absorption_is_bare(tmp_path):
    cfg = RunConfig.from_text(COARSE + "[cavity]\ng = 0\n", task="absorb")
    run(cfg, tmp_path)
    tab = read_table(tmp_path / "absorption_g0.0000.csv")
    p = load_fixture("anthracene_like")
    es = build_bo_structure(p, *default_grids(p, x_spacing=0.2, points_per_width=3))
    ref = bare_absorption(es, omega_ev=tab["omega"])
    # the CSV keeps 13 significant digits of omega; narrow lines amplify that to ~1e-10
    assert np.allclose(tab["sigma_boa"], ref.sigma, rtol=1e-9, atol=0)
    assert np.allclose(tab["sigma_exact"] / tab["sigma_exact"].max(), ref.sigma / ref.sigma.max(), atol=2e-3)


def test_reruns_are_byte_identical(tmp_path):
    cfg = RunConfig.from_text(COARSE + "[cavity]\ng = 0.004\n", task="absorb")
    run(cfg, tmp_path / "a")
    run(cfg, tmp_path / "b")
    for name in ("absorption_g0.0040.csv", "absorb_summary.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma["run_id"] == mb["run_id"] and ma["files"] == mb["files"]


def test_usc_scan_rows(tmp_path):
    path = _config(tmp_path, COARSE + "[cavity]\ng = 0.01, 0.02\n")
    assert main(["usc-scan", "--config", str(path), "--out", str(tmp_path / "o")]) == cli.EXIT_OK
    tab = read_table(tmp_path / "o" / "usc_scan.csv")
    assert np.all(tab["delta_E0"] < 0) and np.all(tab["photon_number"] > 0)
    assert np.isclose(tab["delta_R0"][1] / tab["delta_R0"][0], 4.0, rtol=0.05)


def test_figure_fig8(tmp_path):
    assert main(["figure", "fig8", "--out", str(tmp_path)]) == cli.EXIT_OK
    rep = json.loads((tmp_path / "fig8" / "nonbo_report.json").read_text())["g0.0020"]
    assert rep["relative_l2_P"] < 0.1
    tab = read_table(tmp_path / "fig8" / "nonbo_g0.0020.csv")
    assert {"R", "P_offdiag", "model_P_offdiag", "P2_offdiag"} <= set(tab)
