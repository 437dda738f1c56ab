"""Command-line surface: one-off kernel operations and batch experiment runs.

Every subcommand is turned into a one-operation experiment and goes through
the same dispatcher as `run <config>`, so a subcommand and the equivalent
config produce the same report rows.
"""

import argparse
import json
import logging
import math
import re
import sys
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from config.settings import (
    DEFAULT_DEPTH,
    DEFAULT_SAMPLES,
    DEFAULT_SEED,
    DISTANCE_SCHEDULE,
    LOG_LEVEL,
    MAX_LEVEL_N,
    PLOT_PREFIX,
    REPORT_CSV,
    REPORT_JSON,
    RESULTS_DIR,
)
from core.errors import ConfigError, ConsistencyError, GrammarError, LpSpaceError, ReportError
from core.exponent_model import (
    Exponent,
    decreasing_rearrangement,
    eval_exponent,
    kozv_criterion,
    level_set,
)
from core.function_model import Func
from core.modular_kernel import QuadConfig, modular_scaled
from core.norm_kernel import (
    DistanceTrace,
    distance_to_E,
    dual_luxemburg_norm,
    holder_check,
    luxemburg_norm,
    orlicz_norm,
    theta,
)
from core.space_analysis import (
    Verdict,
    closedness_constants,
    direct_sum_check,
    extension_bound,
    lattice_bound_check,
    linfty_separation_check,
    proximinality_check,
    separation_delta,
)
from utils.formatting import ReportRow, format_table, plot_csv, report_csv, report_json, slugify
from utils.grammar import parse_exponent, parse_function, parse_functional
from utils.validators import VERIFY_TARGETS, validate_experiment

logger = logging.getLogger(__name__)

# Absolute tolerance, scaled by max(1, |expected|), for rows with an expected value.
CHECK_TOLERANCE = {
    "norm": 1e-6,
    "modular": 1e-8,
    "theta": 1e-5,
    "dist": 1e-3,
    "dual-norm": 1e-6,
    "rearrange": 1e-9,
    "level-set": 1e-12,
    "verify": 1e-3,
}
DEFAULT_CHECK_TOLERANCE = 1e-6
KOZV_DEFAULT_DEPTH = 20

QUADRATURE_FIELDS = {
    "abs_tol": "abs_tol",
    "rel_tol": "rel_tol",
    "max_subdiv": "max_subdivisions",
    "div_cap": "divergence_cap",
    "grading": "endpoint_grading",
    "closed_forms": "closed_forms",
}


# ── Config types ─────────────────────────────────────────────

@dataclass(frozen=True)
class OperationSpec:
    op: str
    label: str | None = None
    function: str | None = None
    other: str | None = None
    functional: str | None = None
    target: str | None = None
    expect: float | str | bool | None = None
    tolerance: float | None = None
    lam: float | None = None
    level: float | None = None
    depth: int | None = None
    samples: int | None = None
    schedule: tuple[float, ...] | None = None

    @property
    def name(self) -> str:
        if self.label:
            return self.label
        base = f"{self.op}:{self.target}" if self.target else self.op
        return f"{base}[{self.function}]" if self.function else base

    @property
    def check_tolerance(self) -> float:
        if self.tolerance is not None:
            return float(self.tolerance)
        return CHECK_TOLERANCE.get(self.op, DEFAULT_CHECK_TOLERANCE)


@dataclass(frozen=True)
class ExperimentConfig:
    exponent: str
    operations: tuple[OperationSpec, ...]
    name: str = "experiment"
    seed: int = DEFAULT_SEED
    functions: dict[str, str] = field(default_factory=dict)
    quadrature: dict = field(default_factory=dict)
    out: str = ""

    def quad_config(self) -> QuadConfig:
        return QuadConfig(**{QUADRATURE_FIELDS[key]: value for key, value in self.quadrature.items()})

    def output_dir(self) -> Path:
        return Path(self.out) if self.out else RESULTS_DIR / slugify(self.name)


@dataclass
class ReportBundle:
    rows: list[ReportRow]
    plots: dict[str, list[tuple[float, float]]]
    directory: Path | None = None

    @property
    def exit_code(self) -> int:
        return 0 if all(row.verdict in ("pass", "n/a") for row in self.rows) else 1


# ── Loading and dumping ──────────────────────────────────────

def _line_of(text: str, path: str) -> int | None:
    """1-based line of the key or table a dotted field path points at."""
    lines = text.splitlines()
    start = 0
    match = re.match(r"operations\[(\d+)\]", path)
    if match:
        headers = [i for i, line in enumerate(lines) if re.match(r"\s*\[\[\s*operations\s*\]\]", line)]
        index = int(match.group(1))
        if index < len(headers):
            start = headers[index]
    key = re.sub(r"\[\d+\]", "", path).split(".")[-1]
    if not key:
        return None
    pattern = re.compile(rf"\s*(?:\[+\s*{re.escape(key)}\s*\]+|\"?{re.escape(key)}\"?\s*=)")
    for i in range(start, len(lines)):
        if pattern.match(lines[i]):
            return i + 1
    return None


def _check_expressions(config: ExperimentConfig, text: str):
    """Parse every grammar expression so bad text fails at load time."""
    def attempt(path: str, parse, expression: str):
        try:
            return parse(expression)
        except GrammarError as exc:
            raise GrammarError(f"{path}: {exc}", field=path, line=_line_of(text, path)) from exc

    exponent = attempt("exponent", parse_exponent, config.exponent)
    for key, expression in config.functions.items():
        attempt(f"functions.{key}", lambda s: parse_function(s, exponent), expression)
    for index, op in enumerate(config.operations):
        for key in ("function", "other"):
            ref = getattr(op, key)
            if ref is not None and ref not in config.functions:
                attempt(f"operations[{index}].{key}", lambda s: parse_function(s, exponent), ref)
        if op.functional is not None:
            attempt(f"operations[{index}].functional", parse_functional, op.functional)


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    """Build an ExperimentConfig from TOML text, rejecting unknown keys."""
    try:
        data = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        match = re.search(r"line (\d+)", str(exc))
        raise ConfigError(f"{source}: {exc}", line=int(match.group(1)) if match else None) from exc

    problems = validate_experiment(data)
    if problems:
        path = problems[0].split(":", 1)[0]
        line = _line_of(text, path)
        where = f" (line {line})" if line else ""
        raise ConfigError(f"{source}{where}: {problems[0]}", field=path, line=line)

    operations = []
    for entry in data["operations"]:
        entry = dict(entry)
        if "schedule" in entry:
            entry["schedule"] = tuple(entry["schedule"])
        operations.append(OperationSpec(**entry))
    config = ExperimentConfig(
        exponent=data["exponent"],
        operations=tuple(operations),
        name=data.get("name", "experiment"),
        seed=data.get("seed", DEFAULT_SEED),
        functions=dict(data.get("functions", {})),
        quadrature=dict(data.get("quadrature", {})),
        out=data.get("out", ""),
    )
    _check_expressions(config, text)
    return config


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    return parse_config(text, str(path))


def _toml_key(key: str) -> str:
    return key if re.fullmatch(r"[A-Za-z0-9_-]+", key) else json.dumps(key)


def _toml_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_toml_value(item) for item in value) + "]"
    raise ConfigError(f"cannot write {type(value).__name__} values to TOML")


def dump_config(config: ExperimentConfig) -> str:
    """Deterministic TOML text that parse_config reads back to an equal config."""
    lines = [
        f"name = {_toml_value(config.name)}",
        f"seed = {_toml_value(config.seed)}",
        f"exponent = {_toml_value(config.exponent)}",
    ]
    if config.out:
        lines.append(f"out = {_toml_value(config.out)}")
    if config.functions:
        lines += ["", "[functions]"]
        lines += [f"{_toml_key(k)} = {_toml_value(v)}" for k, v in config.functions.items()]
    if config.quadrature:
        lines += ["", "[quadrature]"]
        lines += [f"{k} = {_toml_value(v)}" for k, v in config.quadrature.items()]
    for op in config.operations:
        lines += ["", "[[operations]]"]
        for spec_field in fields(op):
            value = getattr(op, spec_field.name)
            if value is not None:
                lines.append(f"{spec_field.name} = {_toml_value(value)}")
    return "\n".join(lines) + "\n"


def operation_seed(seed: int, index: int) -> int:
    """Seed of the index-th operation, spawned from the config seed by numpy's SeedSequence."""
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


# ── Operations ───────────────────────────────────────────────

@dataclass
class _Context:
    config: ExperimentConfig
    exponent: Exponent
    cfg: QuadConfig
    plots: dict[str, list[tuple[float, float]]] = field(default_factory=dict)

    def function(self, ref: str) -> Func:
        return parse_function(self.config.functions.get(ref, ref), self.exponent)


def _matches(value: float, expect: float, tol: float) -> bool:
    return abs(value - float(expect)) <= tol * max(1.0, abs(float(expect)))


def _checked(quantity: str, value: float, op: OperationSpec, provenance: str) -> ReportRow:
    tol = op.check_tolerance
    if op.expect is None:
        return ReportRow(quantity, value, tol, "n/a", provenance)
    verdict = "pass" if _matches(value, op.expect, tol) else "fail"
    return ReportRow(quantity, value, tol, verdict, provenance)


def _count_row(quantity: str, value: float, failures: int) -> ReportRow:
    return ReportRow(quantity, value, 0.0, "pass" if failures == 0 else "fail", "sampled")


def _run_norm(op, ctx, seed):
    result = luxemburg_norm(ctx.function(op.function), ctx.exponent, cfg=ctx.cfg)
    return [_checked(op.name, result.value, op, result.provenance)]


def _run_modular(op, ctx, seed):
    lam = float(op.lam) if op.lam is not None else 1.0
    result = modular_scaled(ctx.function(op.function), ctx.exponent, lam, ctx.cfg)
    tol = op.check_tolerance
    if not result.is_finite:
        logger.info("%s divergent: %s", op.name, result.divergence_witness)
        verdict = "n/a" if op.expect is None else ("pass" if op.expect == "divergent" else "fail")
        return [ReportRow(op.name, math.inf, tol, verdict, result.provenance)]
    if op.expect == "divergent":
        return [ReportRow(op.name, result.value, tol, "fail", result.provenance)]
    return [_checked(op.name, result.value, op, result.provenance)]


def _run_theta(op, ctx, seed):
    result = theta(ctx.function(op.function), ctx.exponent, cfg=ctx.cfg)
    return [_checked(op.name, result.value, op, result.provenance)]


def _trace_rows(op: OperationSpec, trace: DistanceTrace, ctx: _Context) -> list[ReportRow]:
    ctx.plots[op.name] = list(zip(trace.levels, trace.values))
    limit = _checked(f"{op.name}.limit", trace.limit_estimate, op, "quadrature")
    if not trace.converged:
        limit = replace(limit, verdict="inconclusive")
    return [limit, ReportRow(f"{op.name}.theta", trace.theta_crosscheck, 0.0, "n/a", "quadrature")]


def _run_dist(op, ctx, seed):
    schedule = op.schedule or DISTANCE_SCHEDULE
    trace = distance_to_E(ctx.function(op.function), ctx.exponent, schedule, cfg=ctx.cfg)
    return _trace_rows(op, trace, ctx)


def _run_dual_norm(op, ctx, seed):
    v = ctx.function(op.function)
    dual = dual_luxemburg_norm(v, ctx.exponent, cfg=ctx.cfg)
    orlicz = orlicz_norm(v, ctx.exponent, cfg=ctx.cfg)
    lower, upper = orlicz.bracket
    tol = op.check_tolerance
    equivalent = dual.value <= upper + tol and lower <= 2.0 * dual.value + tol
    ratio = orlicz.value / dual.value if dual.value > 0 else 1.0
    rows = [
        _checked(f"{op.name}.luxemburg", dual.value, op, dual.provenance),
        ReportRow(f"{op.name}.orlicz", orlicz.value, upper - lower, "n/a", "quadrature"),
        ReportRow(f"{op.name}.orlicz_ratio", ratio, tol, "pass" if equivalent else "fail", "quadrature"),
    ]
    if op.other is not None:
        check = holder_check(ctx.function(op.other), v, ctx.exponent, cfg=ctx.cfg)
        rows.append(ReportRow(f"{op.name}.holder_ratio", check.ratio, 1.0,
                              "pass" if check.holds else "fail", "quadrature"))
    return rows


def _closedness(op, ctx, seed):
    return closedness_constants(
        ctx.exponent, op.depth or DEFAULT_DEPTH, op.samples or DEFAULT_SAMPLES, seed, cfg=ctx.cfg
    )


def _closedness_rows(name: str, report, ctx: _Context) -> list[ReportRow]:
    ctx.plots[f"{name}.depth_series"] = [(float(k), c) for k, c in report.depth_series]
    return [
        ReportRow(f"{name}.c_est", report.c_est, 0.0, "n/a", "quadrature"),
        ReportRow(f"{name}.C_est", report.C_est, 0.0, "n/a", "quadrature"),
        ReportRow(f"{name}.c1_est", report.c1_est, 0.0, "n/a", "sampled"),
        ReportRow(f"{name}.c2_est", report.c2_est, 0.0, "n/a", "sampled"),
        ReportRow(f"{name}.delta_est", report.delta_est, 0.0, "n/a", "sampled"),
    ]


def _run_closedness(op, ctx, seed):
    report = _closedness(op, ctx, seed)
    rows = _closedness_rows(op.name, report, ctx)
    if op.expect is not None:
        verdict = "pass" if report.verdict.value == op.expect else "fail"
    else:
        verdict = "inconclusive" if report.verdict is Verdict.INCONCLUSIVE else "n/a"
    rows.append(ReportRow(f"{op.name}.{report.verdict.value}", report.c_est, 0.0, verdict, "quadrature"))
    return rows


def _run_kozv(op, ctx, seed):
    result = kozv_criterion(ctx.exponent, op.depth or KOZV_DEFAULT_DEPTH)
    ctx.plots[op.name] = [(float(k), r) for k, r in zip(result.levels, result.ratio_tail)]
    if op.expect is None:
        verdict = "n/a"
    else:
        verdict = "pass" if result.verdict == op.expect else "fail"
    quantity = f"{op.name}.{'unbounded' if result.verdict else 'bounded'}"
    return [ReportRow(quantity, result.tail_max, 0.0, verdict, "closed-form")]


def _run_rearrange(op, ctx, seed):
    p = ctx.exponent
    pstar = decreasing_rearrangement(p)
    depth = op.depth or DEFAULT_DEPTH
    ctx.plots[op.name] = [(2.0**-k, eval_exponent(pstar, 2.0**-k)) for k in range(depth, 0, -1)]
    gap = max(
        abs(level_set(p, n).measure - level_set(pstar, n).measure) for n in range(1, MAX_LEVEL_N + 1)
    )
    tol = op.check_tolerance
    return [ReportRow(f"{op.name}.measure_gap", gap, tol, "pass" if gap <= tol else "fail", "closed-form")]


def _run_level_set(op, ctx, seed):
    measure = level_set(ctx.exponent, float(op.level)).measure
    return [_checked(f"{op.name}[{op.level:g}]", measure, op, "closed-form")]


def _verify_prop21(op, ctx, seed):
    schedule = op.schedule or DISTANCE_SCHEDULE
    trace = distance_to_E(ctx.function(op.function), ctx.exponent, schedule, cfg=ctx.cfg)
    rows = _trace_rows(op, trace, ctx)
    gap = abs(trace.limit_estimate - trace.theta_crosscheck)
    tol = op.check_tolerance
    verdict = "inconclusive" if not trace.converged else ("pass" if gap <= tol else "fail")
    rows.append(ReportRow(f"{op.name}.identity_gap", gap, tol, verdict, "quadrature"))
    return rows


def _verify_thm11(op, ctx, seed):
    report = _closedness(op, ctx, seed)
    rows = _closedness_rows(op.name, report, ctx)
    if report.verdict is not Verdict.CLOSED:
        rows.append(ReportRow(f"{op.name}.{report.verdict.value}", report.c_est, 0.0, "inconclusive", "quadrature"))
        return rows
    samples = op.samples or DEFAULT_SAMPLES
    separation = separation_delta(ctx.exponent, report, samples, seed, cfg=ctx.cfg)
    direct = direct_sum_check(ctx.exponent, report.delta_est, samples, seed, cfg=ctx.cfg)
    for detail in separation.details + direct.details:
        logger.warning("%s: %s", op.name, detail)
    return rows + [
        _count_row(f"{op.name}.separation_min", separation.min_observed, separation.violations),
        _count_row(f"{op.name}.replay_min_ratio", separation.replay_min_ratio, separation.replay_failures),
        _count_row(f"{op.name}.projection_bound", direct.projection_bound, direct.failures),
    ]


def _verify_remark1(op, ctx, seed):
    schedule = op.schedule or DISTANCE_SCHEDULE
    tol = op.check_tolerance
    report = proximinality_check(ctx.function(op.function), ctx.exponent, schedule=schedule, cfg=ctx.cfg)
    return [
        ReportRow(f"{op.name}.distance", report.d_value, 0.0, "n/a", "quadrature"),
        ReportRow(f"{op.name}.witness_level", report.witness_level, 0.0, "n/a", "quadrature"),
        ReportRow(f"{op.name}.gap", report.gap, tol, "pass" if report.passed(tol) else "fail", "quadrature"),
    ]


def _verify_remark2(op, ctx, seed):
    samples = op.samples or DEFAULT_SAMPLES
    lattice = lattice_bound_check(ctx.exponent, samples, seed, cfg=ctx.cfg)
    rows = [_count_row(f"{op.name}.lattice_max_ratio", lattice.max_ratio, lattice.violations)]
    report = _closedness(op, ctx, seed)
    if report.verdict is not Verdict.CLOSED:
        rows.append(ReportRow(f"{op.name}.linfty_separation", math.nan, 0.0, "n/a", "sampled"))
        return rows
    check = linfty_separation_check(ctx.exponent, report.delta_est, report.c1_est, samples, seed, cfg=ctx.cfg)
    rows.append(_count_row(f"{op.name}.linfty_max_ratio", check.max_ratio, check.violations))
    return rows


VERIFIERS = {
    "prop21": _verify_prop21,
    "thm11": _verify_thm11,
    "remark1": _verify_remark1,
    "remark2": _verify_remark2,
}


def _run_verify(op, ctx, seed):
    return VERIFIERS[op.target](op, ctx, seed)


def _run_extension(op, ctx, seed):
    psi = parse_functional(op.functional)
    report = _closedness(op, ctx, seed)
    result = extension_bound(psi, ctx.exponent, report, op.samples or DEFAULT_SAMPLES, seed, cfg=ctx.cfg)
    return [
        ReportRow(f"{op.name}.cstar_norm", result.cstar_norm, 0.0, "n/a", "quadrature"),
        _count_row(f"{op.name}.bound", result.bound, result.violations),
    ]


HANDLERS = {
    "norm": _run_norm,
    "modular": _run_modular,
    "theta": _run_theta,
    "dist": _run_dist,
    "dual-norm": _run_dual_norm,
    "closedness": _run_closedness,
    "kozv": _run_kozv,
    "rearrange": _run_rearrange,
    "level-set": _run_level_set,
    "verify": _run_verify,
    "extension": _run_extension,
}


# ── Running ──────────────────────────────────────────────────

def _write(path: Path, text: str):
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8", newline="\n")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc}") from exc


def emit_plot_data(series: DistanceTrace | list[tuple[float, float]], path: str | Path) -> Path:
    """Write a two-column x,y CSV; the first column must increase strictly."""
    if isinstance(series, DistanceTrace):
        series = list(zip(series.levels, series.values))
    path = Path(path)
    _write(path, plot_csv(list(series)))
    return path


def run_experiment(config: ExperimentConfig, write: bool = True) -> ReportBundle:
    """Run every operation in config order and write the report bundle.

    Failed checks and cross-check disagreements become `fail` rows; any other
    kernel error becomes an `inconclusive` row for that operation.
    """
    ctx = _Context(config, parse_exponent(config.exponent), config.quad_config())
    rows = []
    for index, op in enumerate(config.operations):
        seed = operation_seed(config.seed, index)
        logger.info("operation %d: %s", index, op.name)
        try:
            rows.extend(HANDLERS[op.op](op, ctx, seed))
        except ConsistencyError as exc:
            logger.warning("%s failed its cross-check: %s", op.name, exc)
            rows.append(ReportRow(op.name, math.nan, op.check_tolerance, "fail", ""))
        except LpSpaceError as exc:
            logger.warning("%s inconclusive: %s", op.name, exc)
            rows.append(ReportRow(op.name, math.nan, op.check_tolerance, "inconclusive", ""))

    bundle = ReportBundle(rows, ctx.plots)
    if not write:
        return bundle

    directory = config.output_dir()
    meta = {"name": config.name, "seed": config.seed, "exponent": config.exponent}
    _write(directory / REPORT_CSV, report_csv(rows))
    _write(directory / REPORT_JSON, report_json(rows, meta))
    for name, series in ctx.plots.items():
        emit_plot_data(series, directory / f"{PLOT_PREFIX}{slugify(name)}.csv")
    bundle.directory = directory
    logger.info("wrote %d rows and %d plot series to %s", len(rows), len(ctx.plots), directory)
    return bundle


# ── Argument parsing ─────────────────────────────────────────

def _expectation(text: str):
    lowered = text.strip().lower()
    if lowered in ("true", "false"):
        return lowered == "true"
    try:
        return float(text)
    except ValueError:
        return text


def _schedule(text: str) -> list[float]:
    return [float(item) for item in text.split(",") if item.strip()]


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--exponent", default="constant(2)", help="exponent expression, e.g. 'spiked(10, 4, 2)'")
    common.add_argument("--abs-tol", type=float, help="quadrature absolute tolerance")
    common.add_argument("--rel-tol", type=float, help="quadrature relative tolerance")
    common.add_argument("--max-subdiv", type=int, help="quadrature subdivision budget")
    common.add_argument("--div-cap", type=float, help="partial-sum cap that certifies divergence")
    common.add_argument("--seed", type=int, help=f"experiment seed (default {DEFAULT_SEED})")
    common.add_argument("--depth", type=int, help="grid depth for closedness, kozv and rearrange")
    common.add_argument("--samples", type=int, help="number of seeded samples")
    common.add_argument("--out", help="directory for report.csv, report.json and plot data")
    common.add_argument("--expect", type=_expectation, help="expected value; the row passes or fails against it")
    common.add_argument("--tolerance", type=float, help="tolerance for --expect")

    parser = argparse.ArgumentParser(prog="lpvar", description="Variable-exponent Lebesgue space kernel")
    commands = parser.add_subparsers(dest="command", required=True)

    for name in ("norm", "modular", "theta", "dist", "dual-norm"):
        sub = commands.add_parser(name, parents=[common], help=f"{name} of a function")
        sub.add_argument("function", help="function expression or name")
        if name == "modular":
            sub.add_argument("--lam", type=float, help="evaluate ρ(f/λ) (default 1)")
        if name == "dist":
            sub.add_argument("--schedule", type=_schedule, help="comma-separated increasing levels")
        if name == "dual-norm":
            sub.add_argument("--other", help="x for the Hölder check ∫|x v| <= 2‖x‖‖v‖")

    for name in ("closedness", "kozv", "rearrange"):
        commands.add_parser(name, parents=[common], help=f"{name} of the exponent")
    level = commands.add_parser("level-set", parents=[common], help="measure of {p <= n}")
    level.add_argument("level", type=float)

    verify = commands.add_parser("verify", parents=[common], help="run a verification bundle")
    verify.add_argument("target", choices=VERIFY_TARGETS)
    verify.add_argument("--function", default="const(1)", help="function for prop21 and remark1")
    verify.add_argument("--schedule", type=_schedule, help="comma-separated increasing levels")

    extension = commands.add_parser("extension", parents=[common], help="trivial extension bound of a functional")
    extension.add_argument("functional", help="e.g. 'atom(0.5, 1) + density(const(1))'")

    run = commands.add_parser("run", parents=[common], help="run an experiment config")
    run.add_argument("config", help="path to a TOML experiment file")
    return parser


def _quadrature_overrides(args) -> dict:
    flags = {"abs_tol": args.abs_tol, "rel_tol": args.rel_tol, "max_subdiv": args.max_subdiv, "div_cap": args.div_cap}
    return {key: value for key, value in flags.items() if value is not None}


def config_from_args(args) -> ExperimentConfig:
    """The experiment a command line describes, validated like a config file."""
    if args.command == "run":
        config = load_config(args.config)
        operations = tuple(
            replace(op, depth=args.depth or op.depth, samples=args.samples or op.samples)
            for op in config.operations
        )
        return replace(
            config,
            operations=operations,
            seed=config.seed if args.seed is None else args.seed,
            quadrature={**config.quadrature, **_quadrature_overrides(args)},
            out=args.out or config.out,
        )

    spec = OperationSpec(
        op=args.command,
        function=getattr(args, "function", None),
        other=getattr(args, "other", None),
        functional=getattr(args, "functional", None),
        target=getattr(args, "target", None),
        expect=args.expect,
        tolerance=args.tolerance,
        lam=getattr(args, "lam", None),
        level=getattr(args, "level", None),
        depth=args.depth,
        samples=args.samples,
        schedule=tuple(args.schedule) if getattr(args, "schedule", None) else None,
    )
    config = ExperimentConfig(
        exponent=args.exponent,
        operations=(spec,),
        name=args.command,
        seed=DEFAULT_SEED if args.seed is None else args.seed,
        quadrature=_quadrature_overrides(args),
        out=args.out or "",
    )
    return parse_config(dump_config(config), f"<{args.command}>")


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        format="%(asctime)s - %(name)s - %(levelname)s - %(message)s",
        level=getattr(logging, LOG_LEVEL.upper(), logging.INFO),
    )
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        bundle = run_experiment(config, write=args.command == "run" or bool(args.out))
    except (ConfigError, ReportError) as exc:
        logger.error("%s", exc)
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(format_table(bundle.rows))
    if bundle.directory is not None:
        print(f"\nreport written to {bundle.directory}")
    return bundle.exit_code
