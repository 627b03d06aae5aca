import json
import math

import pytest

from flab import ConfigError, auto_radius, make_potential, parse_config, parse_config_text
from flab.cli import main, run_subcommand
from flab.config import resolved_ini_text

MINIMAL = """
[potential]
kind = quadratic
params = 0.5

[grid]
h = 0.1
"""


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_minimal_config_defaults(tmp_path):
    cfg = parse_config(write(tmp_path, "a.ini", MINIMAL))
    assert cfg.potential_kind == "quadratic"
    assert cfg.potential_params == (0.5,)
    assert cfg.b_kind == "scharfetter-gummel"
    assert cfg.h == 0.1
    assert cfg.radius == "auto"
    assert cfg.method == "trapezoidal"
    assert cfg.formats == ("json", "csv")
    # the auto rule must cover at least sqrt(80) for this potential
    u = make_potential(cfg.potential_kind, cfg.potential_params)
    assert auto_radius(u, cfg.h) >= math.sqrt(80.0) - 1e-9


def test_auto_radius_without_convexity():
    u = make_potential("abs", [1.0])
    r = auto_radius(u, 0.5)
    assert r >= 40.0  # u(R) - min u >= 40 dominates
    flat = make_potential("custom_poly", [0.0])
    with pytest.raises(ConfigError, match="auto-selection"):
        auto_radius(flat, 0.5)


def test_negative_h_names_key():
    with pytest.raises(ConfigError, match="grid.h"):
        parse_config_text(MINIMAL.replace("h = 0.1", "h = -1"))


def test_unknown_key_suggests(tmp_path):
    bad = MINIMAL.replace("h = 0.1", "stepsize = 0.1")
    with pytest.raises(ConfigError) as err:
        parse_config_text(bad)
    msg = str(err.value)
    assert "grid.stepsize" in msg and "h" in msg


def test_unknown_section_rejected():
    with pytest.raises(ConfigError, match=r"unknown section"):
        parse_config_text(MINIMAL + "\n[grids]\nh = 0.1\n")


def test_param_count_checked():
    with pytest.raises(ConfigError, match="takes 2"):
        parse_config_text(MINIMAL.replace("kind = quadratic", "kind = double_well"))


def test_bad_method_and_format():
    with pytest.raises(ConfigError, match="time.method"):
        parse_config_text(MINIMAL + "\n[time]\nmethod = euler\n")
    with pytest.raises(ConfigError, match="outputs.formats"):
        parse_config_text(MINIMAL + "\n[outputs]\nformats = yaml\n")


def test_parse_error_carries_position():
    with pytest.raises(ConfigError, match="parse error"):
        parse_config_text("[potential\nkind = quadratic\n")


def test_resolved_roundtrip(tmp_path):
    cfg = parse_config(write(tmp_path, "a.ini", MINIMAL))
    echoed = resolved_ini_text(cfg)
    cfg2 = parse_config_text(echoed)
    assert cfg2 == cfg
    # a second echo is byte-identical (fixed float formatting)
    assert resolved_ini_text(cfg2) == echoed


SMALL_OU = """
[potential]
kind = quadratic
params = 0.5

[grid]
h = 0.25
radius = 6.0

[outputs]
dir = {out}
"""

FLAT = """
[potential]
kind = custom_poly
params = 0.0

[grid]
h = 0.25
radius = 5.0

[outputs]
dir = {out}
"""


def run_cli(tmp_path, name, text, cmd, extra=()):
    out = tmp_path / f"{name}_out"
    path = write(tmp_path, f"{name}.ini", text.format(out=out))
    code = main([cmd, "--config", path, "--quiet", *extra])
    return code, out


def test_cli_certify_ou(tmp_path):
    code, out = run_cli(tmp_path, "ou", SMALL_OU, "certify")
    assert code == 0
    payload = json.loads((out / "certify.json").read_text())
    assert payload["best"]["valid"] is True
    assert payload["best"]["method"] == "curvature"
    assert 0 < payload["best"]["kappa"] <= payload["spectral_gap"] + 1e-9
    assert (out / "resolved.ini").exists()


def test_cli_certify_flat_exits_2(tmp_path):
    code, out = run_cli(tmp_path, "flat", FLAT, "certify")
    assert code == 2
    payload = json.loads((out / "certify.json").read_text())
    assert payload["best"]["valid"] is False


def test_cli_parse_error_exits_1(tmp_path):
    path = write(tmp_path, "broken.ini", "[potential]\nkind = quadratic\nparams = 0.5\n[grid]\nh = -2\n")
    assert main(["certify", "--config", path, "--quiet"]) == 1
    assert main(["certify", "--config", str(tmp_path / "missing.ini"), "--quiet"]) == 1


def test_cli_gap_outputs(tmp_path):
    code, out = run_cli(tmp_path, "gap", SMALL_OU, "gap")
    assert code == 0
    payload = json.loads((out / "gap.json").read_text())
    assert 0.9 < payload["gap"] < 1.1
    lines = (out / "eigenfunction.csv").read_text().strip().split("\n")
    assert lines[0] == "i,x,value"
    assert len(lines) == 2 * 24 + 1 + 1  # N = 6/0.25 = 24


def test_cli_evolve_outputs(tmp_path):
    code, out = run_cli(tmp_path, "ev", SMALL_OU, "evolve")
    assert code == 0
    lines = (out / "evolve.csv").read_text().strip().split("\n")
    assert lines[0] == "t,variance,mass,min_rho,sup_norm"
    payload = json.loads((out / "evolve.json").read_text())
    assert abs(payload["fitted_rate"] - 2.0) < 0.25


def test_cli_simulate_outputs_and_seed_override(tmp_path):
    sim_cfg = SMALL_OU + "\n[sim]\nn_paths = 3000\nseed = 4\nhorizon = 5.0\n"
    code, out = run_cli(tmp_path, "sim", sim_cfg, "simulate", extra=("--seed", "9"))
    assert code == 0
    payload = json.loads((out / "ensemble.json").read_text())
    assert payload["seed"] == 9
    assert payload["n_paths"] == 3000
    assert payload["tv_to_stationary"] < 0.2


def test_cli_sweep(tmp_path):
    sweep_cfg = SMALL_OU.replace("h = 0.25", "h = 0.4 0.2")
    code, out = run_cli(tmp_path, "sweep", sweep_cfg, "sweep")
    assert code == 0
    lines = (out / "sweep.csv").read_text().strip().split("\n")
    assert lines[0] == "h,lambda_tilde,theta,b,R,kappa_R,kappa,gap"
    assert len(lines) == 3
    h_col = [float(line.split(",")[0]) for line in lines[1:]]
    assert h_col == [0.4, 0.2]


def test_cli_sweep_needs_list_only_for_sweep(tmp_path):
    cfg = parse_config_text(SMALL_OU.replace("h = 0.25", "h = 0.4 0.2").format(out=tmp_path))
    with pytest.raises(ConfigError, match="single value"):
        run_subcommand("certify", cfg)


def test_cli_validate_b(tmp_path):
    code, out = run_cli(tmp_path, "vb", SMALL_OU, "validate-b")
    assert code == 0
    payload = json.loads((out / "bcheck.json").read_text())
    assert payload["all_pass"] is True


def test_cli_determinism(tmp_path):
    _, out1 = run_cli(tmp_path, "d1", SMALL_OU, "certify")
    _, out2 = run_cli(tmp_path, "d2", SMALL_OU, "certify")
    assert (out1 / "certify.json").read_bytes() == (out2 / "certify.json").read_bytes()
    sim_cfg = SMALL_OU + "\n[sim]\nn_paths = 2000\nseed = 4\nhorizon = 2.0\n"
    _, s1 = run_cli(tmp_path, "s1", sim_cfg, "simulate")
    _, s2 = run_cli(tmp_path, "s2", sim_cfg, "simulate")
    assert (s1 / "ensemble.json").read_bytes() == (s2 / "ensemble.json").read_bytes()


def test_cli_certify_benchmark_window(tmp_path):
    # full benchmark window: h = 0.05, |x| <= 8
    cfg = SMALL_OU.replace("h = 0.25", "h = 0.05").replace("radius = 6.0", "radius = 8.0")
    code, out = run_cli(tmp_path, "bench", cfg, "certify")
    assert code == 0
    payload = json.loads((out / "certify.json").read_text())
    assert payload["best"]["method"] == "curvature"
    assert 0.85 < payload["best"]["kappa"] <= 1.0
    assert 0.95 < payload["spectral_gap"] < 1.05


def test_out_override(tmp_path):
    path = write(tmp_path, "o.ini", SMALL_OU.format(out=tmp_path / "ignored"))
    target = tmp_path / "override"
    code = main(["gap", "--config", path, "--quiet", "--out", str(target)])
    assert code == 0
    assert (target / "gap.json").exists()
    assert not (tmp_path / "ignored").exists()
