import json

import pytest

from csforms.cli import ConfigError, cli_main, load_config


def test_mc_json(tmp_path):
    out = tmp_path / "r.json"
    code = cli_main(["mc", "--target", "so3", "--quad-order", "8", "--out", str(out)])
    assert code == 0
    data = json.loads(out.read_text())
    assert len(data) == 1 and data[0]["expected"] == -1.0 and data[0]["pass"]


def test_lens_csv(capsys):
    code = cli_main(["cs-lens", "--p", "5", "--q1", "1", "--q2", "2", "--quad-order", "10", "--format", "csv",
                     "--no-convergence"])
    out = capsys.readouterr().out.splitlines()
    assert code == 0
    assert out[0].startswith("name,param_summary,raw")
    fields = out[1].split(",")
    assert float(fields[4]) == -0.2 and fields[6] == "true"


def test_usage_errors(capsys):
    assert cli_main(["frobnicate"]) == 2
    assert cli_main(["mc", "--bogus"]) == 2
    assert cli_main([]) == 2
    assert cli_main(["cs-lens", "--p", "4", "--q1", "2"]) == 2
    assert cli_main(["mc", "--fd-step", "5"]) == 2
    assert "usage" in capsys.readouterr().err


def test_failed_criterion_exits_one(capsys):
    # an impossible tolerance makes the report fail
    assert cli_main(["fuzz", "--which", "gauge", "--trials", "1", "--tol", "1e-30"]) == 1


def test_config_file_and_override(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# comment\nquad-order = 6\ntarget = su2\nformat = csv\nno_convergence = yes\n")
    assert cli_main(["mc", "--config", str(cfg)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[1].startswith("mc_su2,")
    assert cli_main(["mc", "--config", str(cfg), "--target", "s3_real_inverse"]) == 0
    assert capsys.readouterr().out.splitlines()[1].startswith("mc_s3_real_inverse,")


def test_config_errors(tmp_path, capsys):
    bad = tmp_path / "bad.cfg"
    bad.write_text("colour = blue\n")
    with pytest.raises(ConfigError):
        load_config(str(bad))
    assert cli_main(["mc", "--config", str(bad)]) == 2
    assert cli_main(["mc", "--config", str(tmp_path / "missing.cfg")]) == 2
    bad.write_text("seed = seven\n")
    assert cli_main(["mc", "--config", str(bad)]) == 2


def test_module_entry_point():
    import subprocess
    import sys

    proc = subprocess.run([sys.executable, "-m", "csforms", "--help"], capture_output=True, text=True)
    assert proc.returncode == 0 and "cs-lens" in proc.stdout
