import json

import pytest

from hybridlgt import cli
from hybridlgt import config as CF
from hybridlgt import experiments as EX

SMALL = """\
name: small
kind: dynamics
model: {name: z2, L: 3, g: 1.0}
dynamics: {initial: [0, 1, 0], dt: 0.1, steps: 3}
"""


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(SMALL)
    return p


def test_list_experiments(capsys):
    assert cli.main(["list-experiments"]) == cli.EXIT_OK
    out = capsys.readouterr().out
    assert "vqe_z2_3site" in out and "gate-verify" in out


def test_run_writes_outputs_and_manifest(small_cfg, tmp_path, capsys):
    out = tmp_path / "o"
    assert cli.main(["run", "--config", str(small_cfg), "--out", str(out), "--seed", "5"]) == 0
    man = json.loads((out / "manifest.json").read_text())
    assert man["seed"] == 5 and man["kind"] == "dynamics"
    assert set(man["outputs"]) and (out / "dynamics.csv").exists()
    assert CF.file_sha256(out / "dynamics.csv") == man["outputs"]["dynamics.csv"]


def test_rerun_from_manifest_is_byte_identical(small_cfg, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert cli.main(["run", "--config", str(small_cfg), "--out", str(a)]) == 0
    assert cli.main(["run", "--config", str(a / "manifest.json"), "--out", str(b)]) == 0
    assert (a / "dynamics.csv").read_bytes() == (b / "dynamics.csv").read_bytes()


def test_env_var_sets_output_root(small_cfg, tmp_path, monkeypatch):
    monkeypatch.setenv(CF.OUTPUT_ROOT_ENV, str(tmp_path / "root"))
    assert cli.main(["run", "--config", str(small_cfg)]) == 0
    assert (tmp_path / "root" / "small" / "manifest.json").exists()


def test_config_errors_exit_2(tmp_path, capsys):
    assert cli.main(["run", "--config", str(tmp_path / "missing.yaml")]) == cli.EXIT_CONFIG
    bad = tmp_path / "bad.yaml"
    bad.write_text(SMALL.replace("steps: 3", "steps: 3, stepz: 1"))
    assert cli.main(["run", "--config", str(bad), "--out", str(tmp_path / "x")]) == cli.EXIT_CONFIG
    assert "bad.yaml:4" in capsys.readouterr().err
    assert cli.main(["verify", "--config", str(bad.with_name("small.yaml"))]) == cli.EXIT_CONFIG


def test_kind_mismatch_exit_2(small_cfg, tmp_path):
    assert cli.main(["resources", "--config", str(small_cfg), "--out", str(tmp_path / "r")]) == cli.EXIT_CONFIG


def test_verify_passes(tmp_path, capsys):
    rc = cli.main(["verify", "--suite", "native-gates", "--draws", "2", "--out", str(tmp_path / "v")])
    assert rc == cli.EXIT_OK
    assert json.loads((tmp_path / "v" / "verify.json").read_text())


def test_failed_verification_exit_3(small_cfg, tmp_path, monkeypatch):
    def failing(cfg, out, workers):
        return EX.RunOutcome({}, {"report": "forced failure"}, False)
    monkeypatch.setitem(EX.RUNNERS, "dynamics", failing)
    assert cli.main(["run", "--config", str(small_cfg), "--out", str(tmp_path / "f")]) == cli.EXIT_VERIFY


def test_failed_run_leaves_no_partial_output(small_cfg, tmp_path, monkeypatch):
    def crashing(cfg, out, workers):
        (out / "half.csv").write_text("partial")
        raise RuntimeError("boom")
    monkeypatch.setitem(EX.RUNNERS, "dynamics", crashing)
    with pytest.raises(RuntimeError):
        cli.main(["run", "--config", str(small_cfg), "--out", str(tmp_path / "c")])
    assert list(tmp_path.glob("*c*")) == [] or not (tmp_path / "c").exists()
    assert not any(p.name.startswith(".c.") for p in tmp_path.iterdir())


def test_resources_and_decay_subcommands(tmp_path):
    assert cli.main(["resources", "--out", str(tmp_path / "r")]) == 0
    assert (tmp_path / "r" / "costs.csv").exists()
    assert cli.main(["decay", "--out", str(tmp_path / "d")]) == 0
    assert (tmp_path / "d" / "decay_times.csv").exists()
