import json
import time

import pytest

from dirac_beltrami import config
from dirac_beltrami.cli import main
from dirac_beltrami.config import ConfigError, parse_text


def write(tmp_path, text, name="run.cfg"):
    p = tmp_path / name
    p.write_text(text, encoding="utf-8")
    return str(p)


# ---------------------------------------------------------------- config

def test_defaults_and_parsing():
    cfg = parse_text("montel", "# comment\nfamily_size = 16  # trailing\ninner = 0.2\n")
    assert cfg["family_size"] == 16 and cfg["inner"] == 0.2 and cfg["degree_max"] == 4
    cfg = parse_text("solve", "mu = 0.3+0.4j\ndealias = yes\n")
    assert cfg["mu"] == 0.3 + 0.4j and cfg["dealias"] is True
    assert parse_text("divform", "xi0 = 1, 0.5")["xi0"] == [1.0, 0.5]


@pytest.mark.parametrize("text,msg", [
    ("bogus = 1", "unknown key"),
    ("N = 7", "even"),
    ("N = abc", "bad value"),
    ("seed = 1\nseed = 2", "duplicate"),
    ("family_size = 4", "family_size"),
    ("inner = 0.6\nouter = 0.5", "inner"),
    ("command = solve", "not 'montel'"),
    ("just words", "key = value"),
])
def test_rejections(text, msg):
    with pytest.raises(ConfigError, match=msg):
        parse_text("montel", text)


def test_env_seed_override(monkeypatch):
    monkeypatch.setenv(config.SEED_ENV, "77")
    assert parse_text("solve", "seed = 3")["seed"] == 77
    monkeypatch.setenv(config.SEED_ENV, "x")
    with pytest.raises(ConfigError):
        parse_text("solve", "")


# ---------------------------------------------------------------- commands

def test_verify_identities_default_small(tmp_path, capsys):
    assert main(["verify-identities", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "identities.json").read_text())
    assert rep["passed"] and rep["failed"] == []


def test_verify_identities_negative_control(tmp_path, capsys):
    cfg = write(tmp_path, "delta_sign = -1\ntrials = 3\n")
    assert main(["verify-identities", "--config", cfg, "--out", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "FAILED: D+^2 = Lap" in err


def test_verify_identities_3d_fast(tmp_path):
    cfg = write(tmp_path, "dim = 3\nN = 16\n")
    t = time.perf_counter()
    assert main(["verify-identities", "--config", cfg, "--out", str(tmp_path)]) == 0
    assert time.perf_counter() - t < 10


def test_solve_zero_coefficient_dumps_h(tmp_path):
    import numpy as np
    from dirac_beltrami.grid import read_mvf
    cfg = write(tmp_path, "coefficient_kind = zero\nN = 16\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    F = read_mvf(tmp_path / "solution.mvf")
    assert np.abs(F.values).max() == 0 and F.poly is not None


def test_solve_oracle_and_gate(tmp_path, capsys):
    cfg = write(tmp_path, "N = 8\noracle = true\ncoefficient_kind = random\nsupport = 1.6\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "solve_report.json").read_text())
    assert rep["oracle_relative_difference"] < 1e-8
    cfg = write(tmp_path, "M = 1.0\ncoefficient_kind = random\n", "bad.cfg")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path)]) == 2
    assert "M = 1" in capsys.readouterr().err


def test_solve_from_cff(tmp_path):
    import numpy as np
    from dirac_beltrami.grid import GridSpec
    from dirac_beltrami.solver import random_grade_preserving, write_cff
    write_cff(tmp_path / "m.cff", random_grade_preserving(GridSpec(2, 16), 0.4, np.random.default_rng(0)))
    cfg = write(tmp_path, f"coefficient = {tmp_path / 'm.cff'}\n")
    assert main(["solve", "--config", cfg, "--out", str(tmp_path / "o")]) == 0
    assert main(["solve", "--config", write(tmp_path, "coefficient = /nonexistent.cff\n", "x.cfg"),
                 "--out", str(tmp_path / "o")]) == 2


def test_divform_commands(tmp_path):
    import csv
    cfg = write(tmp_path, "coefficient_kind = identity\nN = 16\n")
    assert main(["divform", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "divform.csv", newline="")))
    assert float(rows[0]["div_residual"]) == 0 and float(rows[0]["beltrami_residual"]) == 0
    cfg = write(tmp_path, "coefficient_kind = layered\nN = 64\n", "l.cfg")
    assert main(["divform", "--config", cfg, "--out", str(tmp_path)]) == 0
    rows = list(csv.DictReader(open(tmp_path / "divform.csv", newline="")))
    assert float(rows[0]["oracle_error"]) < 1e-6
    cfg = write(tmp_path, "coefficient_kind = layered\nlayer_amplitude = 1.5\n", "bad.cfg")
    assert main(["divform", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_divform_from_dfc(tmp_path):
    import numpy as np
    from dirac_beltrami.divform import random_normal_2d, write_dfc
    from dirac_beltrami.grid import GridSpec
    write_dfc(tmp_path / "a.dfc", random_normal_2d(GridSpec(2, 32), np.random.default_rng(0)))
    cfg = write(tmp_path, f"coefficient = {tmp_path / 'a.dfc'}\n")
    assert main(["divform", "--config", cfg, "--out", str(tmp_path)]) == 0


def test_montel_gate_and_small_run(tmp_path):
    cfg = write(tmp_path, "family_size = 4\n")
    assert main(["montel", "--config", cfg, "--out", str(tmp_path)]) == 2
    cfg = write(tmp_path, "family_size = 12\ndegree_max = 2\nN = 16\n", "ok.cfg")
    assert main(["montel", "--config", cfg, "--out", str(tmp_path)]) in (0, 1)
    rep = json.loads((tmp_path / "montel_report.json").read_text())
    assert rep["family_size"] == 12
    assert (tmp_path / "distances.csv").read_bytes().count(b"\r\n") == 13


def test_caccioppoli_command(tmp_path):
    cfg = write(tmp_path, "family_size = 4\nN = 16\n")
    assert main(["caccioppoli", "--config", cfg, "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "caccioppoli_report.json").read_text())
    assert rep["refinement_factor_cap"] <= 2
    cfg = write(tmp_path, "coefficient = x.cff\n", "bad.cfg")
    assert main(["caccioppoli", "--config", cfg, "--out", str(tmp_path)]) == 2


def test_reports_are_byte_identical(tmp_path):
    cfg = write(tmp_path, "family_size = 10\ndegree_max = 2\nN = 16\nthreads = 2\n")
    for d in ("a", "b"):
        main(["montel", "--config", cfg, "--out", str(tmp_path / d)])
    for name in ("montel_report.json", "distances.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    text = (tmp_path / "a" / "montel_report.json").read_text()
    assert list(json.loads(text)) == sorted(json.loads(text))


def test_usage_errors():
    assert main(["nosuch"]) == 2
    assert main(["solve", "--threads", "0"]) == 2


CONFIGS = sorted((__import__("pathlib").Path(__file__).parent.parent / "configs").glob("*.cfg"))


@pytest.mark.parametrize("path", CONFIGS, ids=lambda p: p.name)
def test_committed_configs_parse(path):
    text = path.read_text()
    command = next(l.split("=")[1].strip() for l in text.splitlines() if l.startswith("command"))
    parse_text(command, text, str(path))


def test_committed_montel_config_runs(tmp_path):
    path = next(p for p in CONFIGS if p.name == "montel.cfg")
    assert main(["montel", "--config", str(path), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "montel_report.json").read_text())
    assert rep["chain_length"] >= 8 and rep["max_consecutive_distance_over_bound"] < 0.1
