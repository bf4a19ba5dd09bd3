import json
import subprocess
import sys

import numpy as np
import pytest

from rkhslab import ConfigError
from rkhslab import experiment as ex

RECOVER_CFG = """
# smallest useful recovery run
kind = recover
basis = fourier
decay = poly
s = 1.0
density = spectral-mix
n = 120
r = 2.0
m_rule = auto
trials = 4
seed = 13
trunc = 256
"""


def build(text, **overrides):
    return ex.build_config(ex.parse_config(text), **overrides)


def test_parse_config_basics():
    raw = ex.parse_config("a = 1\n# comment\n b = two words # trailing\n")
    assert raw == {"a": "1", "b": "two words"}
    with pytest.raises(ConfigError):
        ex.parse_config("not a pair")


def test_unknown_key_rejected():
    with pytest.raises(ConfigError, match="bogus"):
        build(RECOVER_CFG + "bogus = 3\n")


def test_field_diagnostics_carry_the_key():
    bad = RECOVER_CFG.replace("n = 120", "n = 2")
    with pytest.raises(ConfigError, match="^n:"):
        build(bad)
    with pytest.raises(ConfigError, match="^r:"):
        build(RECOVER_CFG.replace("r = 2.0", "r = 1.0"))
    with pytest.raises(ConfigError, match="^trials:"):
        build(RECOVER_CFG.replace("trials = 4", "trials = 0"))
    with pytest.raises(ConfigError, match="^n_grid:"):
        build("kind = sweep\nn_grid = 100,200,300\n")
    with pytest.raises(ConfigError, match="^m:"):
        build(RECOVER_CFG.replace("m_rule = auto", "m_rule = fixed"))
    with pytest.raises(ConfigError, match="cannot parse"):
        build(RECOVER_CFG.replace("n = 120", "n = twelve"))


def test_config_hash_semantics():
    cfg = build(RECOVER_CFG)
    assert cfg.config_hash() == build(RECOVER_CFG).config_hash()
    assert cfg.config_hash() != build(
        RECOVER_CFG.replace("seed = 13", "seed = 14")).config_hash()
    assert cfg.config_hash() != build(
        RECOVER_CFG.replace("n = 120", "n = 121")).config_hash()
    # output location and thread count do not change results
    assert cfg.config_hash() == build(RECOVER_CFG, out="bbb",
                                      threads=4).config_hash()


def test_resolve_m_rules():
    cfg = build(RECOVER_CFG)
    model = ex.build_model(cfg)
    assert ex.resolve_m(cfg, model, 1000) == 5
    assert ex.resolve_m(cfg, model, 120) == 2  # floor clamps at 2
    fixed = build(RECOVER_CFG.replace("m_rule = auto",
                                      "m_rule = fixed\nm = 7"))
    assert ex.resolve_m(fixed, model, 120) == 7


def test_run_recover_report_shape():
    rep = ex.run(build(RECOVER_CFG))
    assert len(rep.rows) == 4
    assert rep.header[0] == "trial"
    assert all(len(row) == len(rep.header) for row in rep.rows)
    s = rep.summary
    assert s["trials"] == 4
    assert set(s["bounds"]) == {"recovery-tail-sum", "recovery-tail-sup",
                                "recovery-half-tail", "recovery-atom"}
    for payload in s["bounds"].values():
        assert "inputs" in payload and "value" in payload
    assert rep.summary_payload()["version"]


def test_run_is_deterministic():
    a = ex.run(build(RECOVER_CFG))
    b = ex.run(build(RECOVER_CFG))
    assert a.rows == b.rows
    assert a.summary_payload() == b.summary_payload()


def test_flagged_trials_count_as_failures():
    # two nodes cannot carry a 4-dimensional span: every trial flags
    cfg = build(RECOVER_CFG.replace("m_rule = auto",
                                    "m_rule = fixed\nm = 7"))
    cfg.n = 3
    with pytest.raises(Exception):
        ex.run(cfg)


def test_write_outputs(tmp_path):
    rep = ex.run(build(RECOVER_CFG))
    trials_path, summary_path = rep.write(tmp_path / "out")
    data = open(trials_path, "rb").read()
    assert data.count(b"\r\n") == len(rep.rows) + 1  # header + each row
    text = data.decode("utf-8")
    assert text.splitlines()[0] == ",".join(rep.header)
    payload = json.loads(open(summary_path).read())
    assert payload["config_hash"] == rep.config_hash
    assert payload["kind"] == "recover"
    # float cells round trip exactly through repr
    cell = text.splitlines()[1].split(",")[5]
    assert repr(float(cell)) == cell


def test_discretize_runner_weighted_flag():
    cfg = build("""
kind = discretize
basis = cosine
decay = sobolev
s = 1.0
n = 200
r = 2.0
trials = 3
seed = 2
trunc = 96
weighted = true
""")
    rep = ex.run(cfg)
    assert rep.summary["weighted"] is True
    assert {r[3] for r in rep.rows} == {1}
    assert "discretize-trace" in rep.summary["bounds"]


def test_concentration_runner_rows_per_trial():
    cfg = build("""
kind = concentration
family = sphere
dim = 6
n = 500
r = 2.0
trials = 40
seed = 4
t_points = 5
""")
    rep = ex.run(cfg)
    assert len(rep.rows) == 40
    assert "curve.csv" in rep.extra_tables
    header, curve = rep.extra_tables["curve.csv"]
    assert header[0] == "t" and len(curve) == 5


def test_sweep_needs_four_points():
    with pytest.raises(ConfigError, match="n_grid"):
        build("kind = sweep\nn_grid = 64,128,256\n")


def test_sweep_runner_table_and_slopes():
    cfg = build("""
kind = sweep
basis = fourier
decay = poly
s = 1.0
density = spectral-mix
n_grid = 128,256,512,1024
r = 2.0
trials = 2
seed = 6
trunc = 128
""")
    rep = ex.run(cfg)
    assert len(rep.rows) == 8
    slopes = rep.summary["slopes_error_scale"]
    assert set(slopes) >= {"bound_tail_sum", "baseline_p2", "baseline_scan"}
    assert len(rep.summary["table"]) == 4
    assert "table.csv" in rep.extra_tables


def run_cli(args, cwd):
    return subprocess.run([sys.executable, "-m", "rkhslab.cli"] + args,
                          cwd=cwd, capture_output=True, text=True)


def test_cli_exit_codes(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(RECOVER_CFG.replace("kind = recover\n", ""))
    good = run_cli(["recover", "--config", str(cfg), "--out",
                    str(tmp_path / "o1")], tmp_path)
    assert good.returncode == 0, good.stderr
    assert "PASS recover" in good.stdout

    bad = tmp_path / "bad.cfg"
    bad.write_text("n = 2\nr = 2.0\n")
    out = run_cli(["recover", "--config", str(bad)], tmp_path)
    assert out.returncode == 2
    assert "config error" in out.stderr and "n:" in out.stderr

    missing = run_cli(["recover", "--config", str(tmp_path / "nope.cfg")],
                      tmp_path)
    assert missing.returncode == 2


def test_cli_seed_override_changes_hash(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text(RECOVER_CFG.replace("kind = recover\n", ""))
    a = run_cli(["recover", "--config", str(cfg), "--out",
                 str(tmp_path / "a")], tmp_path)
    b = run_cli(["recover", "--config", str(cfg), "--seed", "99", "--out",
                 str(tmp_path / "b")], tmp_path)
    assert a.returncode == 0 and b.returncode == 0
    ha = [ln for ln in a.stdout.splitlines() if "config hash" in ln]
    hb = [ln for ln in b.stdout.splitlines() if "config hash" in ln]
    assert ha and hb and ha != hb
