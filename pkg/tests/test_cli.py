import json

import pytest

from symres.cli import EXIT_FAIL, EXIT_PASS, EXIT_USAGE, load_config, run, ConfigError


def _run(tmp_path, command, toml=None, name="out", extra=()):
    argv = [command, "--out", str(tmp_path / name), *extra]
    if toml is not None:
        cfg = tmp_path / f"{name}.toml"
        cfg.write_text(toml)
        argv += ["--config", str(cfg)]
    return run(argv)


def test_fibre_suite_deterministic(tmp_path):
    assert _run(tmp_path, "fibre-suite", "blocks = false\n", "a") == EXIT_PASS
    assert _run(tmp_path, "fibre-suite", "blocks = false\n", "b") == EXIT_PASS
    a = (tmp_path / "a" / "report.json").read_bytes()
    assert a == (tmp_path / "b" / "report.json").read_bytes()
    assert b"wall_time" not in a
    prov = json.loads((tmp_path / "a" / "provenance.json").read_text())
    assert len(prov["config_sha256"]) == 64 and "wall_time_s" in prov
    assert (tmp_path / "a" / "summary.txt").read_text().startswith("fibre-suite: PASS")


def test_assemble_matches_golden(tmp_path):
    assert _run(tmp_path, "assemble", "m = 2\n") == EXIT_PASS
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    assert rep["verdicts"] and all(rep["verdicts"].values())


def test_assemble_wrong_sign_fails_golden(tmp_path):
    assert _run(tmp_path, "assemble", "m = 2\ntrace_sign = 1\n") == EXIT_FAIL


@pytest.mark.parametrize("toml, needle", [
    ("m = [\n", "line"),
    ("m = -1\n", "m must be"),
    ("m = 2\ntrace_sign = 3\n", "trace_sign"),
])
def test_malformed_config_is_usage_error(tmp_path, capsys, toml, needle):
    assert _run(tmp_path, "assemble", toml) == EXIT_USAGE
    assert needle in capsys.readouterr().err
    assert not (tmp_path / "out" / "report.json").exists()


def test_unknown_command_and_bad_flags(tmp_path):
    assert run(["nope"]) == EXIT_USAGE
    assert run(["fibre-suite", "--threads", "0", "--out", str(tmp_path)]) == EXIT_USAGE
    assert run(["fibre-suite", "--backend", "double"]) == EXIT_USAGE


def test_missing_config_file(tmp_path):
    assert run(["assemble", "--config", str(tmp_path / "absent.toml"), "--out", str(tmp_path)]) == EXIT_USAGE


def test_load_config_hash_depends_on_bytes(tmp_path):
    p = tmp_path / "c.toml"
    p.write_text("N = 10\n")
    _, h1 = load_config(str(p))
    p.write_text("N = 11\n")
    cfg, h2 = load_config(str(p))
    assert cfg == {"N": 11} and h1 != h2
    p.write_text("N = \n")
    with pytest.raises(ConfigError):
        load_config(str(p))


def test_section_table_is_used(tmp_path):
    toml = "[assemble]\nm = 1\n[fibre_suite]\nm_max = 1\n"
    assert _run(tmp_path, "assemble", toml) == EXIT_PASS
    assert json.loads((tmp_path / "out" / "report.json").read_text())["result"]["m"] == 1


SCAN = """
base = "H2"
modes = [0]
lambda_window = [4.5, 5.5, -0.5, 0.5]
N = 80
scan_shape = [5, 3]
clean_above = 0.0
"""


def test_empty_scan_window_passes(tmp_path):
    assert _run(tmp_path, "resonance-scan", SCAN, "s1") == EXIT_PASS
    assert _run(tmp_path, "resonance-scan", SCAN, "s2") == EXIT_PASS
    for f in ("report.json", "poles.csv", "poles.svg"):
        assert (tmp_path / "s1" / f).read_bytes() == (tmp_path / "s2" / f).read_bytes()
    csv = (tmp_path / "s1" / "poles.csv").read_text().splitlines()
    assert len(csv) == 1 and csv[0].startswith("mode,re_lambda")


def test_scan_finds_scalar_poles(tmp_path):
    toml = 'modes = [0]\nlambda_window = [-2.0, -0.25, -0.25, 0.25]\nN = 120\nscan_shape = [9, 3]\n'
    assert _run(tmp_path, "resonance-scan", toml) == EXIT_PASS
    rep = json.loads((tmp_path / "out" / "report.json").read_text())
    poles = sorted(p["lam"][0] for p in rep["result"]["reports"][0]["poles"])
    assert poles == pytest.approx([-1.5, -0.5], abs=1e-6)


def test_clean_above_fails_when_pole_present(tmp_path):
    toml = 'modes = [0]\nlambda_window = [-1.0, -0.25, -0.25, 0.25]\nN = 120\nscan_shape = [5, 3]\nclean_above = -1.0\n'
    assert _run(tmp_path, "resonance-scan", toml) == EXIT_FAIL


def test_bad_window_is_usage_error(tmp_path):
    assert _run(tmp_path, "resonance-scan", "lambda_window = [1.0, 0.0, 0.0, 0.0]\n") == EXIT_USAGE
