import json
import math
from pathlib import Path

import numpy as np
import pytest

from critnorm import initial_data
from critnorm.cli import EXIT_BLOWUP, EXIT_OK, EXIT_USAGE, _threads, build_parser, main
from critnorm.config import load_config, parse_config
from critnorm.errors import ConfigurationError
from critnorm.snapshot import write_snapshot
from critnorm.spectral_core import Grid, transform

from . import oracles

CONFIG_DIR = Path(__file__).resolve().parents[1] / "configs"

ZERO_CONFIG = """
grid: {n: 16}
initial: {name: zero}
solver: {t_end: 0.01, dt: 0.001}
snapshot_every: 5
monitors:
  - {kind: EnergyBalance}
  - {kind: CriterionIntegral}
  - {kind: VorticityL32}
"""

RANDOM_CONFIG = """
grid: {n: 16}
initial: {name: random_solenoidal, params: {k_max: 3.0, rms: 1.0}, seed: 5}
solver: {nu: 1.0, dt: 0.002, t_end: 0.02}
snapshot_every: 5
monitors:
  - {kind: EnergyBalance}
  - {kind: KlipsBalance}
  - {kind: CriterionIntegral, p: 5}
  - {kind: HThetaEnergy}
"""

BLOWUP_CONFIG = """
grid: {n: 16}
initial: {name: random_solenoidal, params: {rms: 1.0e+4}, seed: 1}
solver: {nu: 0.0, dt: 0.01, t_end: 2.0}
snapshot_every: 1
"""


def _write(tmp_path, text, name="run.yaml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def _norm_output(capsys):
    out = capsys.readouterr().out.strip().splitlines()
    return {line.split()[0]: float(line.split()[1]) for line in out}


class TestConfigErrors:
    @pytest.mark.parametrize(
        "text,fragment",
        [
            ("grid: {n: 16}\ninitial: {name: zero}\nbogus: 1\n", "bogus"),
            ("initial: {name: vortex_ring}\n", "vortex_ring"),
            ("initial: {name: zero}\nsolver: {dt: -1.0}\n", "dt"),
            ("initial: {name: shear, params: {wavelength: 2}}\n", "wavelength"),
            ("initial: {name: zero}\nmonitors: [{kind: Enstrophy}]\n", "Enstrophy"),
            ("initial: {name: zero}\nmonitors: [{kind: HThetaEnergy, theta: 0.7}]\n", "theta"),
            ("- just\n- a list\n", "mapping"),
            ("grid: {n: [16, 16\n", "YAML"),
        ],
    )
    def test_exit_2_and_no_output(self, tmp_path, capsys, text, fragment):
        cfg = _write(tmp_path, text)
        out = tmp_path / "out"
        assert main(["simulate", "--config", str(cfg), "--out", str(out)]) == EXIT_USAGE
        assert fragment in capsys.readouterr().err
        assert not out.exists()

    def test_missing_config_file(self, tmp_path):
        assert main(["simulate", "--config", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "o")]) == EXIT_USAGE

    def test_missing_output_dir(self, tmp_path):
        assert main(["simulate", "--config", str(_write(tmp_path, ZERO_CONFIG))]) == EXIT_USAGE

    def test_unknown_subcommand(self):
        with pytest.raises(SystemExit) as exc:
            build_parser().parse_args(["integrate"])
        assert exc.value.code == 2

    @pytest.mark.parametrize("path", sorted(CONFIG_DIR.glob("*.yaml")), ids=lambda p: p.name)
    def test_shipped_configs_parse(self, path):
        cfg = load_config(path)
        assert cfg.output_dir

    def test_config_direct_error_type(self):
        with pytest.raises(ConfigurationError):
            parse_config("initial: {name: zero}\ngrid: {n: 7}\n")


class TestThreads:
    def test_env_variable(self, monkeypatch):
        monkeypatch.setenv("CRITNORM_THREADS", "3")
        assert _threads(None) == 3
        assert _threads(2) == 2

    def test_bad_env_variable(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CRITNORM_THREADS", "many")
        assert main(["verify", "lemma5.1-holder", "--count", "2", "--refine-count", "0", "--out", str(tmp_path), "--no-figures"]) == EXIT_USAGE

    def test_default(self, monkeypatch):
        monkeypatch.delenv("CRITNORM_THREADS", raising=False)
        assert _threads(None) == 1


class TestSimulate:
    def test_zero_run(self, tmp_path):
        out = tmp_path / "zero"
        assert main(["simulate", "--config", str(_write(tmp_path, ZERO_CONFIG)), "--out", str(out), "--no-figures"]) == EXIT_OK
        for csv in sorted((out / "monitors").glob("*.csv")):
            data = np.loadtxt(csv, delimiter=",", skiprows=1)
            assert np.all(data[:, 1:] == 0.0), csv.name
        snaps = sorted((out / "snapshots").glob("*.cnf"))
        assert [p.name for p in snaps] == ["step_0000000.cnf", "step_0000005.cnf", "step_0000010.cnf"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "ok" and manifest["incomplete"] is False
        assert manifest["steps"] == 10
        assert set(manifest["files"]) >= {"snapshots/step_0000000.cnf", "monitors/energy.csv"}

    def test_manifest_hashes_match(self, tmp_path):
        import hashlib

        out = tmp_path / "zero"
        main(["simulate", "--config", str(_write(tmp_path, ZERO_CONFIG)), "--out", str(out), "--no-figures"])
        manifest = json.loads((out / "manifest.json").read_text())
        for rel, digest in manifest["files"].items():
            assert hashlib.sha256((out / rel).read_bytes()).hexdigest() == digest

    def test_seed_override_changes_run(self, tmp_path):
        cfg = _write(tmp_path, RANDOM_CONFIG)
        a, b = tmp_path / "a", tmp_path / "b"
        main(["simulate", "--config", str(cfg), "--out", str(a), "--no-figures"])
        main(["simulate", "--config", str(cfg), "--out", str(b), "--no-figures", "--seed", "6"])
        assert (a / "monitors" / "energy.csv").read_text() != (b / "monitors" / "energy.csv").read_text()

    def test_blowup_exits_3(self, tmp_path):
        out = tmp_path / "blow"
        assert main(["simulate", "--config", str(_write(tmp_path, BLOWUP_CONFIG)), "--out", str(out), "--no-figures"]) == EXIT_BLOWUP
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["status"] == "blow-up-suspected"
        assert manifest["incomplete"] is True

    def test_figures_written(self, tmp_path):
        out = tmp_path / "fig"
        assert main(["simulate", "--config", str(_write(tmp_path, ZERO_CONFIG)), "--out", str(out)]) == EXIT_OK
        pngs = sorted((out / "figures").glob("*.png"))
        assert len(pngs) == len(list((out / "monitors").glob("*.csv")))
        assert all(p.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n" for p in pngs)


class TestMonitor:
    def test_recompute_matches_simulate(self, tmp_path):
        cfg = _write(tmp_path, RANDOM_CONFIG)
        run, rec = tmp_path / "run", tmp_path / "rec"
        assert main(["simulate", "--config", str(cfg), "--out", str(run), "--no-figures"]) == EXIT_OK
        assert main(["monitor", str(run / "snapshots"), "--config", str(cfg), "--out", str(rec), "--no-figures"]) == EXIT_OK
        names = sorted(p.name for p in (run / "monitors").glob("*.csv"))
        assert names == sorted(p.name for p in (rec / "monitors").glob("*.csv"))
        for name in names:
            assert (run / "monitors" / name).read_text() == (rec / "monitors" / name).read_text(), name

    def test_missing_snapshots(self, tmp_path):
        assert main(["monitor", str(tmp_path / "none"), "--out", str(tmp_path / "o")]) == EXIT_USAGE

    def test_needs_out(self, tmp_path):
        write_snapshot(tmp_path / "a.cnf", initial_data.zero(Grid.cubic(8)))
        assert main(["monitor", str(tmp_path / "a.cnf")]) == EXIT_USAGE


class TestNorms:
    @pytest.fixture
    def tg_path(self, tmp_path):
        return write_snapshot(tmp_path / "tg.cnf", initial_data.taylor_green(Grid.cubic(16)))

    def test_taylor_green_l2(self, tg_path, capsys):
        assert main(["norms", str(tg_path), "--spec", "leb:p=2"]) == EXIT_OK
        assert math.isclose(_norm_output(capsys)["leb:p=2"], oracles.taylor_green_l2(), rel_tol=1e-11)

    def test_single_mode_htheta(self, tmp_path, capsys):
        g = Grid.cubic(16)
        f = transform(oracles.cosine_mode(16, (1, 0, 2), 0.7), g)
        path = write_snapshot(tmp_path / "m.cnf", [f], 0.0)
        assert main(["norms", str(path), "--spec", "htheta:theta=0.125", "--spec", "leb:p=2"]) == EXIT_OK
        got = _norm_output(capsys)
        assert math.isclose(got["htheta:theta=0.125"], oracles.htheta_single_mode((1, 0, 2), 0.7, 0.125), rel_tol=1e-11)
        assert math.isclose(got["leb:p=2"], 0.7 * math.sqrt(0.5) * (2 * math.pi) ** 1.5, rel_tol=1e-11)

    def test_component_selection(self, tg_path, capsys):
        assert main(["norms", str(tg_path), "--spec", "leb:p=2", "--component", "3"]) == EXIT_OK
        assert _norm_output(capsys)["leb:p=2"] == 0.0

    def test_zero_field(self, tmp_path, capsys):
        path = write_snapshot(tmp_path / "z.cnf", initial_data.zero(Grid.cubic(8)))
        specs = ["leb:p=1.5", "htheta:theta=0.125", "sobolev:s=0.5", "heat:sigma=0.5"]
        assert main(["norms", str(path), *sum((["--spec", s] for s in specs), [])]) == EXIT_OK
        assert set(_norm_output(capsys).values()) == {0.0}

    @pytest.mark.parametrize("spec,token", [("htheta:theta=0.9", "theta"), ("besovv:s=1", "besovv"), ("leb:q=2", "q")])
    def test_bad_spec(self, tg_path, capsys, spec, token):
        assert main(["norms", str(tg_path), "--spec", spec]) == EXIT_USAGE
        assert token in capsys.readouterr().err

    def test_no_spec(self, tg_path):
        assert main(["norms", str(tg_path)]) == EXIT_USAGE

    def test_corrupt_snapshot(self, tmp_path):
        bad = tmp_path / "bad.cnf"
        bad.write_bytes(b"CNF1garbage")
        assert main(["norms", str(bad), "--spec", "leb:p=2"]) == EXIT_USAGE

    def test_bad_component(self, tg_path):
        assert main(["norms", str(tg_path), "--spec", "leb:p=2", "--component", "4"]) == EXIT_USAGE


class TestVerify:
    def test_single_suite(self, tmp_path, capsys):
        out = tmp_path / "v"
        code = main(["verify", "lemma5.1-holder", "--count", "4", "--refine-count", "2", "--out", str(out)])
        assert code == EXIT_OK
        assert "lemma5.1-holder: PASS" in capsys.readouterr().out
        data = json.loads((out / "lemma5.1-holder.json").read_text())
        assert data["summary"]["passed"] is True
        assert (out / "figures" / "lemma5.1-holder.png").read_bytes()[:4] == b"\x89PNG"

    def test_unknown_suite(self, tmp_path, capsys):
        assert main(["verify", "lemma9", "--out", str(tmp_path / "v")]) == EXIT_USAGE
        assert "lemma9" in capsys.readouterr().err
        assert not (tmp_path / "v").exists()

    @pytest.mark.parametrize("args", [["--count", "0"], ["--refine-count", "-1"]])
    def test_bad_counts(self, tmp_path, args):
        assert main(["verify", "lemma5.1-holder", *args, "--out", str(tmp_path / "v")]) == EXIT_USAGE

    def test_threads_do_not_change_reports(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        base = ["verify", "lemma4.4-isoaniso", "--count", "4", "--refine-count", "1", "--no-figures"]
        main([*base, "--out", str(a), "--threads", "1"])
        main([*base, "--out", str(b), "--threads", "2"])
        assert (a / "lemma4.4-isoaniso.json").read_bytes() == (b / "lemma4.4-isoaniso.json").read_bytes()
