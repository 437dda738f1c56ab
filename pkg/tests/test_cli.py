import json
import math
from dataclasses import replace

import pytest

from config.settings import EXPERIMENTS_DIR
from core.errors import ConfigError, GrammarError, ReportError
from core.norm_kernel import DistanceTrace
from interfaces.cli import (
    OperationSpec,
    dump_config,
    emit_plot_data,
    load_config,
    main,
    operation_seed,
    parse_config,
    run_experiment,
)
from utils.formatting import ReportRow, format_number, report_csv, report_json, slugify
from utils.validators import validate_experiment, validate_operation

MINIMAL = """\
name = "minimal"
exponent = "constant(2)"

[functions]
quarter = "indicator(0, 0.25)"

[[operations]]
op = "norm"
function = "quarter"
expect = 0.5
"""

CLOSEDNESS = """\
name = "square closedness"
seed = 3
exponent = "constant(2)"

[[operations]]
op = "closedness"
depth = 4
samples = 3
expect = "not_closed"
"""


# ── Config loading ───────────────────────────────────────────

def test_minimal_config_passes():
    config = parse_config(MINIMAL)
    assert config.operations == (OperationSpec(op="norm", function="quarter", expect=0.5),)
    bundle = run_experiment(config, write=False)
    assert len(bundle.rows) == 1
    row = bundle.rows[0]
    assert row.quantity == "norm[quarter]"
    assert row.value == pytest.approx(0.5, abs=1e-8)
    assert row.verdict == "pass"
    assert row.provenance == "closed-form"
    assert bundle.exit_code == 0


def test_misspelled_table_names_the_field_and_line():
    text = MINIMAL.replace("[functions]", "[quadratur]\nabs_tol = 1e-9\n\n[functions]")
    with pytest.raises(ConfigError) as excinfo:
        parse_config(text)
    assert excinfo.value.field == "quadratur"
    assert excinfo.value.line == 4


def test_unknown_operation_key():
    text = MINIMAL + "bogus = 1\n"
    with pytest.raises(ConfigError) as excinfo:
        parse_config(text)
    assert excinfo.value.field == "operations[0].bogus"
    assert excinfo.value.line == 11


def test_grammar_error_in_the_functions_table():
    text = MINIMAL.replace('"indicator(0, 0.25)"', '"indicator(0, 0.25"')
    with pytest.raises(GrammarError) as excinfo:
        parse_config(text)
    assert excinfo.value.field == "functions.quarter"
    assert excinfo.value.line == 5


def test_toml_syntax_error_reports_the_line():
    with pytest.raises(ConfigError) as excinfo:
        parse_config('exponent = "constant(2)"\nseed = \n')
    assert excinfo.value.line == 2


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.toml")


@pytest.mark.parametrize("path", sorted(EXPERIMENTS_DIR.glob("*.toml")), ids=lambda p: p.stem)
def test_shipped_experiments_survive_a_dump(path):
    config = load_config(path)
    assert parse_config(dump_config(config)) == config


def test_dump_is_deterministic():
    config = parse_config(MINIMAL)
    assert dump_config(config) == dump_config(parse_config(dump_config(config)))


# ── Validators ───────────────────────────────────────────────

def test_empty_experiment_warnings():
    warnings = validate_experiment({})
    assert any(w.startswith("exponent:") for w in warnings)
    assert any(w.startswith("operations:") for w in warnings)


@pytest.mark.parametrize(
    "entry, field",
    [
        ({"op": "integrate"}, "operations[0].op"),
        ({"op": "norm"}, "operations[0].function"),
        ({"op": "kozv", "expect": 1.0}, "operations[0].expect"),
        ({"op": "closedness", "expect": "open"}, "operations[0].expect"),
        ({"op": "modular", "function": "const(1)", "expect": "huge"}, "operations[0].expect"),
        ({"op": "level-set", "level": 0.5}, "operations[0].level"),
        ({"op": "dist", "function": "const(1)", "schedule": [4, 2]}, "operations[0].schedule"),
        ({"op": "verify", "target": "thm99"}, "operations[0].target"),
        ({"op": "extension"}, "operations[0].functional"),
        ({"op": "closedness", "depth": 0}, "operations[0].depth"),
        ({"op": "kozv", "depth": 3}, "operations[0].depth"),
    ],
)
def test_operation_warnings(entry, field):
    warnings = validate_operation(entry, 0)
    assert warnings
    assert warnings[0].split(":", 1)[0] == field


def test_quadrature_div_cap_must_exceed_one():
    data = {"exponent": "log", "quadrature": {"div_cap": 1.0}, "operations": [{"op": "kozv"}]}
    assert validate_experiment(data) == ["quadrature.div_cap: must be a number above 1"]


# ── Running ──────────────────────────────────────────────────

def test_reruns_are_byte_identical(tmp_path):
    config = parse_config(CLOSEDNESS)
    first = run_experiment(replace(config, out=str(tmp_path / "first")))
    second = run_experiment(replace(config, out=str(tmp_path / "second")))
    names = sorted(p.name for p in first.directory.iterdir())
    assert names == ["plotdata_closedness_depth_series.csv", "report.csv", "report.json"]
    for name in names:
        assert (first.directory / name).read_bytes() == (second.directory / name).read_bytes()


def test_closedness_plot_follows_the_indicator_norms(tmp_path):
    bundle = run_experiment(replace(parse_config(CLOSEDNESS), out=str(tmp_path)))
    series = bundle.plots["closedness.depth_series"]
    assert [x for x, _ in series] == [0.0, 1.0, 2.0, 3.0, 4.0]
    for depth, value in series:
        assert value == pytest.approx(2.0 ** (-depth / 2.0), abs=1e-6)
    verdict = bundle.rows[-1]
    assert verdict.quantity == "closedness.not_closed"
    assert verdict.verdict == "pass"
    payload = json.loads((tmp_path / "report.json").read_text())
    assert payload["meta"] == {"name": "square closedness", "seed": 3, "exponent": "constant(2)"}


def test_divergent_modular_is_an_expected_outcome():
    text = """\
exponent = "log"

[[operations]]
op = "modular"
function = "const(2.718281828459045)"
expect = "divergent"
"""
    row = run_experiment(parse_config(text), write=False).rows[0]
    assert row.value == math.inf
    assert row.verdict == "pass"


def test_level_set_of_an_unsupported_exponent_is_inconclusive():
    text = """\
exponent = "dual(log)"

[[operations]]
op = "level-set"
level = 3
"""
    bundle = run_experiment(parse_config(text), write=False)
    assert bundle.rows[0].verdict == "inconclusive"
    assert math.isnan(bundle.rows[0].value)
    assert bundle.exit_code == 1


def test_level_set_under_the_log_family():
    text = """\
exponent = "log"

[[operations]]
op = "level-set"
level = 3
expect = 0.8646647167633873
"""
    row = run_experiment(parse_config(text), write=False).rows[0]
    assert row.quantity == "level-set[3]"
    assert row.verdict == "pass"


def test_operation_seed_is_deterministic():
    assert operation_seed(7, 0) == operation_seed(7, 0)
    assert operation_seed(7, 0) != operation_seed(7, 1)
    assert operation_seed(7, 1) != operation_seed(8, 1)


# ── Plot data ────────────────────────────────────────────────

def test_emit_plot_data(tmp_path):
    path = emit_plot_data([(1.0, 0.5), (2.0, 0.25)], tmp_path / "series.csv")
    assert path.read_text() == "x,y\n1,0.5\n2,0.25\n"
    trace = DistanceTrace((2.0, 4.0), (0.5, 0.4), 0.4, 0.39, False)
    assert emit_plot_data(trace, tmp_path / "trace.csv").read_text().startswith("x,y\n2,0.5\n")


def test_emit_plot_data_rejects_bad_series(tmp_path):
    with pytest.raises(ReportError):
        emit_plot_data([], tmp_path / "empty.csv")
    with pytest.raises(ReportError):
        emit_plot_data([(1.0, 0.0), (1.0, 1.0)], tmp_path / "flat.csv")


# ── Formatting ───────────────────────────────────────────────

def test_report_row_validation():
    with pytest.raises(ReportError):
        ReportRow("x", 1.0, verdict="maybe")
    with pytest.raises(ReportError):
        ReportRow("x", 1.0, provenance="guess")


def test_number_formatting():
    assert format_number(1.0 / 3.0) == "0.333333333333"
    assert format_number(math.inf) == "inf"
    assert format_number(-math.inf) == "-inf"
    assert format_number(math.nan) == "nan"
    assert slugify("Closedness.Depth Series") == "closedness_depth_series"


def test_report_renderings():
    rows = [ReportRow("a", 0.5, 1e-6, "pass", "closed-form"), ReportRow("b", math.inf, 0.0, "n/a", "quadrature")]
    assert report_csv(rows).splitlines() == [
        "quantity,value,tolerance,verdict,provenance",
        "a,0.5,1e-06,pass,closed-form",
        "b,inf,0,n/a,quadrature",
    ]
    payload = json.loads(report_json(rows, {"name": "x"}))
    assert payload["rows"][1]["value"] == "inf"
    assert payload["meta"] == {"name": "x"}


# ── Entry point ──────────────────────────────────────────────

def test_main_exit_codes(capsys):
    assert main(["norm", "indicator(0, 0.25)", "--expect", "0.5"]) == 0
    assert "norm[indicator(0, 0.25)]" in capsys.readouterr().out
    assert main(["norm", "indicator(0, 0.25)", "--expect", "0.6"]) == 1
    assert main(["norm", "indicator(0, 0.25"]) == 2
    assert main(["norm", "const(1)", "--div-cap", "0.5"]) == 2


def test_main_runs_a_config_file(tmp_path):
    config = tmp_path / "minimal.toml"
    config.write_text(MINIMAL)
    out = tmp_path / "out"
    assert main(["run", str(config), "--out", str(out)]) == 0
    assert (out / "report.csv").read_text().startswith("quantity,value,tolerance,verdict,provenance\n")
    assert main(["run", str(tmp_path / "absent.toml")]) == 2
