import csv
from pathlib import Path

import pytest

from app.main import main

LIMITS = {"prime_limit": 200_000, "sample_limit": 300, "density_prime_limit": 1000, "d_limit": 10}


def write_config(tmp_path: Path, body: str, **limits) -> Path:
    values = {key: value for key, value in {**LIMITS, **limits}.items() if value is not None}
    section = "[limits]\n" + "".join(f"{key} = {value}\n" for key, value in values.items())
    path = tmp_path / "experiment.toml"
    path.write_text(section + body, encoding="utf-8")
    return path


def read_csv(path: Path):
    lines = path.read_text(encoding="utf-8").splitlines()
    return lines[0], list(csv.reader(lines[1:]))


def run(subcommand: str, config: Path, output: Path, *extra: str) -> int:
    return main([subcommand, "--config", str(config), "--output", str(output), *extra])


# ==========================================================================
# SUBCOMMANDS
# ==========================================================================

def test_bound_writes_one_row_per_T(tmp_path):
    config = write_config(tmp_path, """
[function]
name = "tau"

[grid]
T = [1000.0, 10000.0, 100000.0]
""")
    out = tmp_path / "bound.csv"
    assert run("bound", config, out) == 0

    meta, rows = read_csv(out)
    assert meta.startswith("# ")
    assert "function.name=tau" in meta
    assert "subcommand=bound" in meta
    assert rows[0] == ["T", "M", "lhs", "rhs_upper", "ratio_upper", "rhs_lower", "ratio_lower",
                       "case_i", "case_ii", "case_iii", "case_iv"]
    assert [row[0] for row in rows[1:]] == ["1000.0", "10000.0", "100000.0"]
    for row in rows[1:]:
        assert 0.0 < float(row[4]) < 20.0


def test_output_is_identical_across_worker_counts(tmp_path):
    config = write_config(tmp_path, """
[grid]
T = [1000.0, 10000.0]
""")
    serial, threaded = tmp_path / "serial.csv", tmp_path / "threaded.csv"
    assert run("bound", config, serial, "--workers", "1") == 0
    assert run("bound", config, threaded, "--workers", "2") == 0
    assert serial.read_bytes() == threaded.read_bytes()


def test_sieve_verify_with_empty_sifting_range(tmp_path):
    config = write_config(tmp_path, """
[sieve]
z = 2.0
y = 100.0
side = "upper"
n_limit = 1000
""")
    out = tmp_path / "weights.csv"
    assert run("sieve-verify", config, out) == 0
    _, rows = read_csv(out)
    assert rows == [["m", "lambda", "side"], ["1", "1", "upper"]]

    _, checks = read_csv(tmp_path / "weights_checks.csv")
    assert checks[0] == ["side", "property", "violations", "checked", "witness"]
    assert all(row[2] == "0" for row in checks[1:])


def test_sieve_verify_both_sides(tmp_path):
    config = write_config(tmp_path, """
[sieve]
z = 30.0
y = 900.0
n_limit = 5000
""")
    out = tmp_path / "weights.csv"
    assert run("sieve-verify", config, out) == 0
    _, rows = read_csv(out)
    assert {row[2] for row in rows[1:]} == {"upper", "lower"}


def test_class_check(tmp_path):
    config = write_config(tmp_path, """
[function]
name = "mu_squared"

[check]
L = 3
""")
    out = tmp_path / "class.csv"
    assert run("class-check", config, out) == 0
    _, rows = read_csv(out)
    conditions = {row[0]: row for row in rows[1:]}
    assert set(conditions) == {"product", "local", "decay", "growth", "values", "lower_positivity"}
    assert conditions["growth"][1] == "true"
    assert conditions["values"][1] == "true"
    assert conditions["lower_positivity"][1] == "false"


def test_equidist(tmp_path):
    config = write_config(tmp_path, """
[grid]
T = [1000.0, 10000.0]
""")
    out = tmp_path / "equidist.csv"
    assert run("equidist", config, out) == 0
    _, rows = read_csv(out)
    assert rows[0] == ["T", "M", "d", "C_d", "h_d_M", "residual", "score"]
    assert len(rows) == 1 + 2 * 10
    assert all(float(row[6]) <= 1.0 for row in rows[1:])


def test_equidist_defaults_moduli_to_the_level(tmp_path):
    config = write_config(tmp_path, """
[grid]
T = [1000.0, 10000.0]
""", d_limit=None)
    out = tmp_path / "equidist.csv"
    assert run("equidist", config, out) == 0
    _, rows = read_csv(out)
    assert [int(row[2]) for row in rows[1:] if row[0] == "10000.0"] == list(range(1, 101))
    assert len(rows) == 1 + 31 + 100


def test_bound_leaves_lower_columns_empty_when_f_vanishes(tmp_path):
    config = write_config(tmp_path, """
[function]
name = "mu_squared"

[grid]
T = [10000.0]
""")
    out = tmp_path / "bound.csv"
    assert run("bound", config, out) == 0
    meta, rows = read_csv(out)
    assert "check.L=3" in meta
    assert "limits.prime_limit=200000" in meta
    assert rows[1][5] == "" and rows[1][6] == ""
    assert float(rows[1][4]) > 0.0


def test_lemma_sweep(tmp_path):
    config = write_config(tmp_path, """
[lemma]
id = "smooth-tail"
x = 10000.0
parameter = "z"
values = [1000.0, 100.0]
""")
    out = tmp_path / "lemma.csv"
    assert run("lemma", config, out) == 0
    meta, rows = read_csv(out)
    assert "lemma.id=smooth-tail" in meta
    assert rows[0][:7] == ["lemma", "parameter", "value", "lhs", "rhs_envelope",
                           "implied_constant", "truncation_error"]
    assert [row[2] for row in rows[1:]] == ["100.0", "1000.0"]


def test_lemma_id_from_command_line(tmp_path):
    config = write_config(tmp_path, """
[lemma]
F = "reciprocal"
x = 1000.0
""")
    out = tmp_path / "lemma.csv"
    assert run("lemma", config, out, "exp-prime-sum") == 0
    _, rows = read_csv(out)
    assert rows[1][0] == "exp-prime-sum"


def test_majorant_uses_check_columns(tmp_path):
    config = write_config(tmp_path, """
[lemma]
id = "majorant"
G = "tau"
epsilon = 1.0
sample_limit = 200
""")
    out = tmp_path / "majorant.csv"
    assert run("lemma", config, out) == 0
    _, rows = read_csv(out)
    assert rows[0] == ["condition", "passed", "slack", "witness", "checked_range"]
    assert rows[1][:2] == ["majorant", "true"]


def test_cases_writes_case_ii_table(tmp_path):
    config = write_config(tmp_path, """
[grid]
T = [10000.0]
""")
    out = tmp_path / "cases.csv"
    assert run("cases", config, out) == 0
    _, rows = read_csv(out)
    assert [row[4] for row in rows[1:]] == ["i", "ii", "iii", "iv"]
    assert (tmp_path / "cases_case_ii.csv").exists()


# ==========================================================================
# EXIT CODES
# ==========================================================================

@pytest.mark.parametrize("body", [
    "[model]\ntheta = 1.0\n",
    "[model]\nunknown = 3\n",
    "[grid]\nT = [100.0, 10.0]\n",
    "[grid\n",
    "[lemma]\nparameter = \"z\"\n",
])
def test_malformed_config_exits_2(body, tmp_path):
    config = write_config(tmp_path, body)
    assert run("bound", config, tmp_path / "out.csv") == 2
    assert not (tmp_path / "out.csv").exists()


def test_missing_config_exits_2(tmp_path):
    assert run("bound", tmp_path / "absent.toml", tmp_path / "out.csv") == 2


def test_unknown_lemma_exits_2(tmp_path):
    config = write_config(tmp_path, "")
    assert run("lemma", config, tmp_path / "out.csv", "no-such-estimate") == 2


def test_precondition_failure_exits_1(tmp_path):
    config = write_config(tmp_path, """
[grid]
T = [100.0]
""", d_limit=50)
    # level of distribution at T = 100 is 10
    assert run("equidist", config, tmp_path / "out.csv") == 1
    assert not (tmp_path / "out.csv").exists()
