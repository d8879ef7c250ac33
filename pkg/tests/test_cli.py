import json
import shutil

import numpy as np
import pytest

from mpchannel import cli
from mpchannel import hamiltonian as ham
from mpchannel.config import ConfigError, load_config, parse_config

ZCONFIG = """
[hamiltonian]
path = z.ham
[ansatz]
layers = 1
[noise]
sigma_coh = 0
lam_low = 0
lam_high = 0
[shots]
mode = infinite
[mpc]
r = 2
eta = 0
max_sweeps = 2
[baselines]
dmrg_bonds = 1
[output]
dir = {out}
"""


@pytest.fixture
def zdir(tmp_path):
    assert cli.main(["gen-hamiltonian", "zfield", "-n", "3", "-o", str(tmp_path / "z.ham")]) == 0
    (tmp_path / "z.ini").write_text(ZCONFIG.format(out=tmp_path / "out"))
    return tmp_path


def test_gen_hamiltonian_matches_fixture(tmp_path, pkg_data):
    cli.main(["gen-hamiltonian", "tfim", "-n", "4", "-o", str(tmp_path / "t.ham")])
    assert (tmp_path / "t.ham").read_text() == (pkg_data / "tfim_N4.ham").read_text()


def test_trivial_run_has_nothing_to_gain(zdir, capsys):
    assert cli.main(["run", str(zdir / "z.ini")]) == 0
    s = json.loads((zdir / "out" / "summary.json").read_text())
    assert s["e_est"] == pytest.approx(s["e_vqe"], abs=1e-9)
    assert s["e_vqe"] == pytest.approx(-3, abs=1e-6)
    assert s["accepted"] is False
    assert s["e0"] == pytest.approx(-3)
    assert s["config_text"] == (zdir / "z.ini").read_text()
    for name in ["trajectory.csv", "best_mpc.npz", "quasistate_train.npz", "quasistate_val.npz", "angles.txt"]:
        assert (zdir / "out" / name).exists()
    assert "accepted   False" in capsys.readouterr().out


def test_rerun_is_byte_identical(zdir):
    cli.main(["run", str(zdir / "z.ini")])
    first = (zdir / "out" / "summary.json").read_bytes()
    shutil.rmtree(zdir / "out")
    cli.main(["run", str(zdir / "z.ini")])
    assert (zdir / "out" / "summary.json").read_bytes() == first


def test_finite_shot_sampling(zdir):
    text = (zdir / "z.ini").read_text().replace("mode = infinite", "mode = finite\ntrain = 300\nval = 200\nseed = 4")
    (zdir / "f.ini").write_text(text)
    assert cli.main(["sample", str(zdir / "f.ini"), "-o", str(zdir / "shots")]) == 0
    assert len((zdir / "shots" / "shots_train.csv").read_text().splitlines()) == 301
    assert len((zdir / "shots" / "shots_val.csv").read_text().splitlines()) == 201


def test_baseline_subcommand(zdir, capsys):
    assert cli.main(["baseline", str(zdir / "z.ini"), "--bonds", "1", "2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["e0"] == pytest.approx(-3) and set(out["e_dmrg"]) == {"1", "2"}


def test_verify_reports_and_exit_codes(capsys):
    assert cli.main(["verify", "prop1"]) == 0
    out = capsys.readouterr().out
    assert "max Choi distance" in out and "passed" in out
    assert cli.main(["verify", "nope"]) == cli.EXIT_CONFIG
    err = capsys.readouterr().err
    assert "tp-equivalence" in err and "variance-identity" in err


def test_verify_failure_exit_code(monkeypatch):
    from mpchannel import verify

    def failing():
        rep = verify.SuiteReport("broken")
        rep.add("x", 1.0, 0.0)
        return rep

    monkeypatch.setitem(verify.SUITES, "broken", failing)
    assert cli.main(["verify", "broken"]) == cli.EXIT_VERIFY


@pytest.mark.parametrize("edit, msg", [
    (lambda t: t.replace("path = z.ham", "path = missing.ham"), "does not exist"),
    (lambda t: t.replace("mode = infinite", "mode = finite\ntrain = 0\nval = 10"), "train and val"),
    (lambda t: t.replace("r = 2", "r = two"), "not a valid int"),
    (lambda t: t + "\n[extra]\nfoo = 1\n", "unknown section"),
    (lambda t: t.replace("eta = 0", "eta = 0\nspeed = 3"), "unknown key"),
    (lambda t: t.replace("[hamiltonian]\npath = z.ham", ""), "path is required"),
])
def test_config_errors(zdir, edit, msg, capsys):
    bad = edit((zdir / "z.ini").read_text())
    with pytest.raises(ConfigError, match=msg):
        parse_config(bad, zdir)
    (zdir / "bad.ini").write_text(bad)
    assert cli.main(["run", str(zdir / "bad.ini")]) == cli.EXIT_CONFIG
    assert "configuration error" in capsys.readouterr().err


def test_missing_config_file(tmp_path):
    assert cli.main(["run", str(tmp_path / "none.ini")]) == cli.EXIT_CONFIG


def test_shipped_configs_parse(pkg_data):
    cfg = load_config(pkg_data / "tfim_N4.ini")
    assert (cfg.r, cfg.layers, cfg.sigma_coh, cfg.lam_low, cfg.lam_high) == (2, 1, 0.01, 0.5e-3, 1.5e-3)
    shots = load_config(pkg_data / "tfim_N4_shots.ini")
    assert shots.shots_mode == "finite" and shots.shots_train == shots.shots_val == 100_000


def test_angles_from_file(zdir):
    (zdir / "angles.txt").write_text(" ".join(["0"] * 12))
    text = (zdir / "z.ini").read_text().replace("layers = 1", "layers = 1\nangles = angles.txt")
    cfg = parse_config(text, zdir)
    theta, e = cli._angles(cfg, ham.load(zdir / "z.ham"))
    assert np.array_equal(theta, np.zeros(12)) and e == pytest.approx(3)
    (zdir / "angles.txt").write_text("0 0")
    with pytest.raises(ConfigError, match="needs 12"):
        cli._angles(cfg, ham.load(zdir / "z.ham"))


def test_inline_comments_allowed(pkg_data):
    cfg = parse_config("[hamiltonian]\npath = tfim_N4.ham  ; relative to the config\n[mpc]\nr = 3  # bond\n", pkg_data)
    assert cfg.r == 3 and cfg.hamiltonian.name == "tfim_N4.ham"
