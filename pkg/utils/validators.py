"""Experiment-config validators."""

import math
import numbers

TOP_LEVEL_KEYS = ("name", "seed", "exponent", "out", "functions", "quadrature", "operations")
QUADRATURE_KEYS = ("abs_tol", "rel_tol", "max_subdiv", "div_cap", "grading", "closed_forms")
OPERATION_KEYS = (
    "op",
    "label",
    "function",
    "other",
    "functional",
    "target",
    "expect",
    "tolerance",
    "lam",
    "level",
    "depth",
    "samples",
    "schedule",
)

FUNCTION_OPERATIONS = ("norm", "modular", "theta", "dist", "dual-norm")
EXPONENT_OPERATIONS = ("closedness", "kozv", "rearrange", "level-set")
OPERATIONS = FUNCTION_OPERATIONS + EXPONENT_OPERATIONS + ("verify", "extension")
VERIFY_TARGETS = ("prop21", "thm11", "remark1", "remark2")
FUNCTION_TARGETS = ("prop21", "remark1")
CLOSEDNESS_VERDICTS = ("closed", "not_closed", "inconclusive")


def _is_number(value) -> bool:
    return isinstance(value, numbers.Real) and not isinstance(value, bool)


def _is_int(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool)


def unknown_keys(table: dict, allowed: tuple[str, ...], prefix: str = "") -> list[str]:
    """Dotted paths of keys in `table` that are not in `allowed`."""
    return [f"{prefix}{key}" for key in table if key not in allowed]


def validate_quadrature(table) -> list[str]:
    """Validate a [quadrature] override table. Returns list of warnings (empty = valid)."""
    if not isinstance(table, dict):
        return ["quadrature: must be a table"]
    warnings = [f"{path}: unknown key" for path in unknown_keys(table, QUADRATURE_KEYS, "quadrature.")]
    for key in ("abs_tol", "rel_tol"):
        if key in table and not (_is_number(table[key]) and table[key] > 0):
            warnings.append(f"quadrature.{key}: must be a positive number")
    if "div_cap" in table and not (_is_number(table["div_cap"]) and table["div_cap"] > 1):
        warnings.append("quadrature.div_cap: must be a number above 1")
    if "max_subdiv" in table and not (_is_int(table["max_subdiv"]) and table["max_subdiv"] > 0):
        warnings.append("quadrature.max_subdiv: must be a positive integer")
    if "grading" in table and not (_is_number(table["grading"]) and 0 < table["grading"] < 1):
        warnings.append("quadrature.grading: must lie in (0, 1)")
    if "closed_forms" in table and not isinstance(table["closed_forms"], bool):
        warnings.append("quadrature.closed_forms: must be true or false")
    return warnings


def validate_operation(entry, index: int) -> list[str]:
    """Validate one [[operations]] entry. Returns list of warnings (empty = valid)."""
    prefix = f"operations[{index}]"
    if not isinstance(entry, dict):
        return [f"{prefix}: must be a table"]
    warnings = [f"{path}: unknown key" for path in unknown_keys(entry, OPERATION_KEYS, f"{prefix}.")]

    op = entry.get("op")
    if op not in OPERATIONS:
        warnings.append(f"{prefix}.op: must be one of {', '.join(OPERATIONS)}")
        return warnings

    target = entry.get("target")
    if op == "verify" and target not in VERIFY_TARGETS:
        warnings.append(f"{prefix}.target: must be one of {', '.join(VERIFY_TARGETS)}")
    needs_function = op in FUNCTION_OPERATIONS or (op == "verify" and target in FUNCTION_TARGETS)
    for key in ("function", "other"):
        if key in entry and not isinstance(entry[key], str):
            warnings.append(f"{prefix}.{key}: must be a function name or expression")
    if needs_function and "function" not in entry:
        warnings.append(f"{prefix}.function: required for {op}")
    if op == "extension" and not isinstance(entry.get("functional"), str):
        warnings.append(f"{prefix}.functional: required for extension")

    for key in ("tolerance", "lam"):
        if key in entry and not (_is_number(entry[key]) and 0 < entry[key] < math.inf):
            warnings.append(f"{prefix}.{key}: must be a positive number")
    if "level" in entry and not (_is_number(entry["level"]) and entry["level"] >= 1):
        warnings.append(f"{prefix}.level: must be a number >= 1")
    if op == "level-set" and "level" not in entry:
        warnings.append(f"{prefix}.level: required for level-set")
    for key in ("depth", "samples"):
        if key in entry and not (_is_int(entry[key]) and entry[key] > 0):
            warnings.append(f"{prefix}.{key}: must be a positive integer")
    if op == "kozv" and _is_int(entry.get("depth")) and 0 < entry["depth"] < 4:
        warnings.append(f"{prefix}.depth: kozv needs depth >= 4")

    schedule = entry.get("schedule")
    if schedule is not None:
        if not (isinstance(schedule, list) and schedule and all(_is_number(n) for n in schedule)):
            warnings.append(f"{prefix}.schedule: must be a non-empty list of numbers")
        elif any(b <= a for a, b in zip(schedule, schedule[1:])):
            warnings.append(f"{prefix}.schedule: must be strictly increasing")

    expect = entry.get("expect")
    if expect is not None:
        if op == "closedness" and expect not in CLOSEDNESS_VERDICTS:
            warnings.append(f"{prefix}.expect: must be one of {', '.join(CLOSEDNESS_VERDICTS)}")
        elif op == "kozv" and not isinstance(expect, bool):
            warnings.append(f"{prefix}.expect: must be true or false")
        elif op == "modular" and not (_is_number(expect) or expect == "divergent"):
            warnings.append(f"{prefix}.expect: must be a number or \"divergent\"")
        elif op not in ("closedness", "kozv", "modular") and not _is_number(expect):
            warnings.append(f"{prefix}.expect: must be a number")
    return warnings


def validate_experiment(data: dict) -> list[str]:
    """Validate a parsed experiment config. Returns list of warnings (empty = valid).

    Each warning starts with the dotted path of the offending field.
    """
    warnings = [f"{path}: unknown key" for path in unknown_keys(data, TOP_LEVEL_KEYS)]
    if not isinstance(data.get("exponent"), str):
        warnings.append("exponent: required exponent expression")
    for key in ("name", "out"):
        if key in data and not isinstance(data[key], str):
            warnings.append(f"{key}: must be a string")
    if "seed" in data and not (_is_int(data["seed"]) and data["seed"] >= 0):
        warnings.append("seed: must be a non-negative integer")

    functions = data.get("functions", {})
    if not isinstance(functions, dict):
        warnings.append("functions: must be a table")
        functions = {}
    for key, value in functions.items():
        if not isinstance(value, str):
            warnings.append(f"functions.{key}: must be a function expression")

    if "quadrature" in data:
        warnings.extend(validate_quadrature(data["quadrature"]))

    operations = data.get("operations")
    if not isinstance(operations, list) or not operations:
        warnings.append("operations: need at least one [[operations]] entry")
    else:
        for index, entry in enumerate(operations):
            warnings.extend(validate_operation(entry, index))
    return warnings
