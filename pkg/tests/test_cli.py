import json
import os

import numpy as np
import pytest

from psurf import cli


def run(args):
    return cli.main([str(a) for a in args])


def write_config(path, text):
    path.write_text(text)
    return str(path)


SOLITON_SMALL = """
[potential]
kind = normalized
alpha = builtin:soliton_alpha
beta = builtin:soliton_beta

[grid]
nx = 33
ny = 33
x_range = 0, 1
y_range = 0, 1

[run]
lambdas = 1.0
trunc = 24

[output]
directory = {out}
"""


def test_build_soliton_and_determinism(tmp_path):
    cfgp = write_config(tmp_path / "c.ini", SOLITON_SMALL.format(out=tmp_path / "o1"))
    assert run(["build", cfgp]) == cli.EXIT_OK
    cfgp2 = write_config(tmp_path / "c2.ini", SOLITON_SMALL.format(out=tmp_path / "o2"))
    assert run(["build", cfgp2]) == cli.EXIT_OK
    b1 = (tmp_path / "o1" / "surface_lambda_1.csv").read_bytes()
    b2 = (tmp_path / "o2" / "surface_lambda_1.csv").read_bytes()
    assert b1 == b2
    report = json.loads((tmp_path / "o1" / "report.json").read_text())
    assert report["pass"] is True
    assert report["max_split_residual"] < 1e-9


def test_missing_config_is_config_error(tmp_path):
    assert run(["build", tmp_path / "nope.ini"]) == cli.EXIT_CONFIG


def test_malformed_key_is_config_error(tmp_path, capsys):
    cfg = write_config(tmp_path / "bad.ini", """
[potential]
kind = normalized
alpha = builtin:does_not_exist
beta = builtin:zero
""")
    assert run(["build", cfg]) == cli.EXIT_CONFIG
    assert "does_not_exist" in capsys.readouterr().err


def test_empty_lambdas_is_config_error(tmp_path):
    cfg = write_config(tmp_path / "c.ini", """
[potential]
kind = normalized
alpha = builtin:zero
beta = builtin:zero

[run]
lambdas =
""")
    assert run(["build", cfg]) == cli.EXIT_CONFIG


def test_unknown_kind_and_suite(tmp_path):
    cfg = write_config(tmp_path / "c.ini", """
[potential]
kind = elliptic
""")
    assert run(["build", cfg]) == cli.EXIT_CONFIG
    cfg2 = write_config(tmp_path / "c2.ini", """
[potential]
kind = normalized
alpha = builtin:zero
beta = builtin:zero

[verify]
suites = everything
""")
    assert run(["verify", cfg2]) == cli.EXIT_CONFIG


def test_flat_build_reports_degenerate(tmp_path):
    cfg = write_config(tmp_path / "flat.ini", """
[potential]
kind = normalized
alpha = builtin:zero
beta = builtin:zero

[grid]
nx = 17
ny = 17
x_range = -0.5, 0.5
y_range = -0.5, 0.5

[output]
directory = {out}
""".format(out=tmp_path / "o"))
    assert run(["build", cfg]) == cli.EXIT_OK
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["lambda_1.all_degenerate"] is True


def test_verify_loops_and_birkhoff(tmp_path):
    cfg = write_config(tmp_path / "v.ini", """
[potential]
kind = normalized
alpha = builtin:zero
beta = builtin:zero

[verify]
suites = loops, birkhoff

[output]
directory = {out}
""".format(out=tmp_path / "o"))
    assert run(["verify", cfg]) == cli.EXIT_OK
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["birkhoff.residual"] < 1e-9
    assert report["suite.loops"] == "pass"


def test_verify_requires_suites(tmp_path):
    cfg = write_config(tmp_path / "v.ini", """
[potential]
kind = normalized
alpha = builtin:zero
beta = builtin:zero
""")
    assert run(["verify", cfg]) == cli.EXIT_CONFIG


def test_sweep_writes_family_summary(tmp_path):
    cfg = write_config(tmp_path / "s.ini", """
[potential]
kind = normalized
alpha = builtin:soliton_alpha
beta = builtin:soliton_beta

[grid]
nx = 21
ny = 21
x_range = 0, 1
y_range = 0, 1

[run]
lambdas = 0.5, 1.0, 2.0

[tolerances]
speed = 2e-2
curvature = 2e-2

[output]
directory = {out}
formats = csv
""".format(out=tmp_path / "o"))
    assert run(["sweep", cfg]) == cli.EXIT_OK
    lines = (tmp_path / "o" / "family_summary.csv").read_text().splitlines()
    assert lines[0].startswith("lambda,")
    assert len(lines) == 4
    assert not (tmp_path / "o" / "surface_lambda_1.obj").exists()


def test_symmetry_suite_mismatch_fails(tmp_path):
    # soliton potential with the rotational-example gamma: equivariance must fail
    cfg = write_config(tmp_path / "m.ini", """
[potential]
kind = normalized
alpha = builtin:soliton_alpha
beta = builtin:soliton_beta

[grid]
nx = 9
ny = 9
x_range = 0, 1
y_range = 0, 1

[verify]
suites = symmetry

[output]
directory = {out}
""".format(out=tmp_path / "o"))
    code = run(["verify", cfg])
    assert code == cli.EXIT_VERIFY
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["pass"] is False


def test_numerical_failure_exit_code(tmp_path):
    # a hopelessly coarse integration step drifts off the unitary group
    cfg = write_config(tmp_path / "n.ini", """
[potential]
kind = normalized
alpha = builtin:soliton_alpha
beta = builtin:soliton_beta

[grid]
nx = 5
ny = 5
x_range = 0, 40
y_range = 0, 40

[run]
step_divisor = 3

[output]
directory = {out}
""".format(out=tmp_path / "o"))
    assert run(["build", cfg]) == cli.EXIT_NUMERIC


def test_symmetry_suite_amsler_passes(tmp_path):
    cfg = write_config(tmp_path / "a.ini", """
[potential]
kind = amsler3

[grid]
nx = 17
ny = 17
x_range = -2.6, -0.15
y_range = -2.6, -0.15
theta_uniform = true

[run]
trunc = 48
step_divisor = 4096
drift_lambdas = 1.0
symmetry_interp = 33

[verify]
suites = symmetry

[tolerances]
surface_symmetry = 0.05   ; interpolation-limited at this grid size

[output]
directory = {out}
""".format(out=tmp_path / "o"))
    assert run(["verify", cfg]) == cli.EXIT_OK
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["equivariance_x"] < 1e-8
    assert report["monodromy_spread"] < 1e-4
    assert "rotation_angle_measured_rad" in report


def test_table_potential_roundtrip(tmp_path):
    ts = np.linspace(-0.2, 1.2, 41)
    alpha_csv = tmp_path / "alpha.csv"
    alpha_csv.write_text("t,value\n" + "\n".join(
        "%.17g,%.17g" % (t, 4 * np.arctan(np.exp(t)) - np.pi) for t in ts) + "\n")
    beta_csv = tmp_path / "beta.csv"
    beta_csv.write_text("t,value\n" + "\n".join(
        "%.17g,%.17g" % (t, 4 * np.arctan(np.exp(t))) for t in ts) + "\n")
    cfg = write_config(tmp_path / "t.ini", """
[potential]
kind = normalized
alpha = table:alpha.csv
beta = table:beta.csv

[grid]
nx = 33
ny = 33
x_range = 0, 1
y_range = 0, 1

[output]
directory = {out}
formats = csv
""".format(out=tmp_path / "o"))
    assert run(["build", cfg]) == cli.EXIT_OK
    report = json.loads((tmp_path / "o" / "report.json").read_text())
    assert report["lambda_1.curvature_max_abs_err"] < 5e-3
