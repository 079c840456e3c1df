import subprocess
import sys

import pytest

from irssense.cli import main


@pytest.fixture
def config(tmp_path):
    def make(text):
        path = tmp_path / "cfg.yaml"
        path.write_text(text)
        return path
    return make


def test_beampattern_to_file(config, tmp_path):
    out = tmp_path / "bp.csv"
    assert main(["beampattern", "--config", str(config("architecture: active\n")), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "angle_deg,architecture,power_dbw"
    assert len(lines) == 1 + 1799


def test_stdout_when_no_output_path(config, capsys):
    assert main(["crlb", "--config", str(config("{}\n")), "--arch", "semi"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("architecture,target")
    assert out[1].startswith("semi_passive,0,30.0,")


def test_validation_error_exit_code(config, capsys):
    assert main(["rmse", "--config", str(config("trials: 0\n"))]) == 1
    assert "trials" in capsys.readouterr().err
    assert main(["rmse", "--config", str(config("{}\n")), "--arch", "passive", "--trials", "0"]) == 1


def test_music_on_passive_exit_code(config):
    assert main(["estimate", "--config", str(config("algorithms: [music]\n")), "--arch", "passive"]) == 1


def test_missing_config_is_io_error(tmp_path):
    assert main(["beampattern", "--config", str(tmp_path / "nope.yaml")]) == 2


def test_unwritable_output_is_io_error(config, tmp_path):
    assert main(["crlb", "--config", str(config("{}\n")), "--out", str(tmp_path / "no" / "dir.csv")]) == 2


def test_usage_error_exit_code():
    with pytest.raises(SystemExit) as exc:
        main(["fly", "--config", "x.yaml"])
    assert exc.value.code == 1


def test_dump_flags(config, tmp_path):
    out = tmp_path / "est.csv"
    cfg = config("architecture: semi_passive\nmaster_seed: 2\n")
    assert main(["estimate", "--config", str(cfg), "--out", str(out), "--dump-spectrum", "--dump-snapshots"]) == 0
    snaps = (tmp_path / "est.semi_passive.snapshots.csv").read_text().splitlines()
    assert snaps[0] == "snapshot,element,real,imag" and len(snaps) == 1 + 128 * 8
    spec = (tmp_path / "est.semi_passive.music.spectrum.csv").read_text().splitlines()
    assert spec[0] == "angle_deg,value"
    assert not (tmp_path / "est.semi_passive.esprit.spectrum.csv").exists()


def test_dump_flags_need_estimate_and_output(config):
    cfg = str(config("{}\n"))
    assert main(["crlb", "--config", cfg, "--out", "x.csv", "--dump-spectrum"]) == 1
    assert main(["estimate", "--config", cfg, "--dump-snapshots"]) == 1


def test_seed_override_changes_estimate(config, tmp_path):
    cfg = str(config("architecture: active\n"))
    a, b, c = (tmp_path / n for n in ("a.csv", "b.csv", "c.csv"))
    assert main(["estimate", "--config", cfg, "--seed", "1", "--out", str(a)]) == 0
    assert main(["estimate", "--config", cfg, "--seed", "1", "--out", str(b)]) == 0
    assert main(["estimate", "--config", cfg, "--seed", "2", "--out", str(c)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert a.read_bytes() != c.read_bytes()


def test_console_script_entry_point(config):
    proc = subprocess.run([sys.executable, "-m", "irssense.cli", "codebook", "--config",
                           str(config("codebook: {kind: directional}\n")), "--arch", "active"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.splitlines()[0] == "architecture,label,snapshot,element,phase_rad"
    assert len(proc.stdout.splitlines()) == 1 + 128
