"""Text grammars for exponents, functions and functionals used in experiment configs.

    exponent   := constant(q) | piecewise(b0, .., bk; v1, .., vk) | log
                | spiked(J, s, b) | shuffle(<exponent>, seed) | rearrange(<exponent>)
                | discretize(<exponent>, depth) | dual(<exponent>)
    function   := indicator(a, b) | const(c) | poly(b0, .., bk; row1; ..; rowk)
                | analytic(tag, param) | scale(alpha, <function>) | sum(<function>, ..)
                | mask(<function>, <set>)
    set        := omega(n) | interval(a, b) | complement(<set>)
    functional := term (+ term)*,  term := atom(t, a) | density(<function>)

omega(n) is the level set {p <= n} of the experiment's exponent.
"""

import re

import numpy as np

from config.settings import SHUFFLE_DEPTH
from core.errors import GrammarError, LpSpaceError
from core.exponent_model import (
    ConstantExponent,
    DualExponent,
    Exponent,
    LevelSet,
    LogExponent,
    MeasSet,
    PiecewiseExponent,
    SpikedExponent,
    build_spiked_exponent,
    decreasing_rearrangement,
    discretize_exponent,
    dual_exponent,
    level_set,
    shuffle_exponent,
)
from core.function_model import (
    Func,
    Indicator,
    Masked,
    NamedAnalytic,
    PiecewisePoly,
    Scaled,
    Sum,
    constant_func,
)
from core.space_analysis import FunctionalSpec

TOKEN = re.compile(
    r"\s*(?:(?P<number>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)"
    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<punct>[(),;+]))"
)


def _tokenize(text: str) -> list[tuple[str, str]]:
    tokens, pos = [], 0
    text = text.rstrip()
    while pos < len(text):
        match = TOKEN.match(text, pos)
        if not match or match.end() == pos:
            raise GrammarError(f"unexpected character {text[pos:].strip()[:1]!r} at offset {pos} in {text!r}")
        kind = match.lastgroup
        tokens.append((kind, match.group(kind)))
        pos = match.end()
    return tokens


class _Parser:
    def __init__(self, text: str, exponent: Exponent | None = None):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0
        self.exponent = exponent

    def fail(self, message: str):
        raise GrammarError(f"{message} in {self.text!r}")

    def peek(self) -> tuple[str, str] | None:
        return self.tokens[self.pos] if self.pos < len(self.tokens) else None

    def take(self, kind: str, value: str | None = None) -> str:
        token = self.peek()
        if token is None or token[0] != kind or (value is not None and token[1] != value):
            expected = value or kind
            found = token[1] if token else "end of input"
            self.fail(f"expected {expected}, found {found!r}")
        self.pos += 1
        return token[1]

    def accept(self, value: str) -> bool:
        token = self.peek()
        if token is not None and token[0] == "punct" and token[1] == value:
            self.pos += 1
            return True
        return False

    def number(self) -> float:
        return float(self.take("number"))

    def integer(self) -> int:
        value = self.number()
        if value != int(value):
            self.fail(f"expected an integer, found {value}")
        return int(value)

    def numbers(self) -> list[float]:
        out = [self.number()]
        while self.accept(","):
            out.append(self.number())
        return out

    def done(self):
        if self.peek() is not None:
            self.fail(f"trailing input {self.peek()[1]!r}")

    # exponents

    def exponent_spec(self) -> Exponent:
        name = self.take("name")
        if name == "log":
            return LogExponent()
        self.take("punct", "(")
        if name == "constant":
            result = ConstantExponent(self.number())
        elif name == "piecewise":
            breaks = self.numbers()
            self.take("punct", ";")
            values = self.numbers()
            result = PiecewiseExponent(tuple(breaks), tuple(values))
        elif name == "spiked":
            levels, slope, base = self.integer(), self.comma_number(), self.comma_number()
            result = build_spiked_exponent(levels, slope, base)
        elif name == "shuffle":
            inner = self.exponent_spec()
            seed = self.comma_integer()
            grid = discretize_exponent(inner, SHUFFLE_DEPTH) if not isinstance(inner, ConstantExponent) else inner
            permutation = np.random.default_rng(seed).permutation(2**SHUFFLE_DEPTH)
            result = shuffle_exponent(grid, permutation)
        elif name == "rearrange":
            result = decreasing_rearrangement(self.exponent_spec())
        elif name == "discretize":
            inner = self.exponent_spec()
            result = discretize_exponent(inner, self.comma_integer())
        elif name == "dual":
            result = dual_exponent(self.exponent_spec())
        else:
            self.fail(f"unknown exponent {name!r}")
        self.take("punct", ")")
        return result

    def comma_number(self) -> float:
        self.take("punct", ",")
        return self.number()

    def comma_integer(self) -> int:
        self.take("punct", ",")
        return self.integer()

    # functions

    def function_spec(self) -> Func:
        name = self.take("name")
        self.take("punct", "(")
        if name == "indicator":
            a, b = self.number(), self.comma_number()
            result = Indicator(MeasSet(((a, b),)))
        elif name == "const":
            result = constant_func(self.number())
        elif name == "poly":
            breaks = self.numbers()
            rows = []
            while self.accept(";"):
                rows.append(tuple(self.numbers()))
            result = PiecewisePoly(tuple(breaks), tuple(rows))
        elif name == "analytic":
            tag = self.take("name")
            result = NamedAnalytic(tag, self.comma_number())
        elif name == "scale":
            factor = self.number()
            self.take("punct", ",")
            result = Scaled(self.function_spec(), factor)
        elif name == "sum":
            terms = [self.function_spec()]
            while self.accept(","):
                terms.append(self.function_spec())
            result = Sum(tuple(terms))
        elif name == "mask":
            inner = self.function_spec()
            self.take("punct", ",")
            result = Masked(inner, self.set_spec())
        else:
            self.fail(f"unknown function {name!r}")
        self.take("punct", ")")
        return result

    def set_spec(self) -> MeasSet:
        name = self.take("name")
        self.take("punct", "(")
        if name == "omega":
            if self.exponent is None:
                self.fail("omega(n) needs an exponent")
            result = level_set(self.exponent, self.number())
        elif name == "interval":
            a, b = self.number(), self.comma_number()
            result = MeasSet(((a, b),))
        elif name == "complement":
            result = self.set_spec().complement()
        else:
            self.fail(f"unknown set {name!r}")
        self.take("punct", ")")
        return result

    # functionals

    def functional_spec(self) -> FunctionalSpec:
        atoms, densities = [], []
        while True:
            name = self.take("name")
            self.take("punct", "(")
            if name == "atom":
                t, a = self.number(), self.comma_number()
                atoms.append((t, a))
            elif name == "density":
                densities.append(self.function_spec())
            else:
                self.fail(f"unknown functional term {name!r}")
            self.take("punct", ")")
            if not self.accept("+"):
                break
        density = None
        if densities:
            density = densities[0] if len(densities) == 1 else Sum(tuple(densities))
        return FunctionalSpec(tuple(atoms), density)


def _parse(text: str, exponent: Exponent | None, rule: str):
    if not isinstance(text, str) or not text.strip():
        raise GrammarError(f"empty {rule} specification")
    parser = _Parser(text, exponent)
    try:
        result = getattr(parser, f"{rule}_spec")()
        parser.done()
    except GrammarError:
        raise
    except LpSpaceError as exc:
        raise GrammarError(f"invalid {rule} {text!r}: {exc}") from exc
    return result


def parse_exponent(text: str) -> Exponent:
    return _parse(text, None, "exponent")


def parse_function(text: str, exponent: Exponent | None = None) -> Func:
    return _parse(text, exponent, "function")


def parse_functional(text: str) -> FunctionalSpec:
    return _parse(text, None, "functional")


# ── Formatting back to text ──────────────────────────────────

def _num(x: float) -> str:
    return repr(float(x))


def format_exponent(p: Exponent) -> str:
    """Inverse of parse_exponent for every exponent the grammar can build."""
    if isinstance(p, ConstantExponent):
        return f"constant({_num(p.value)})"
    if isinstance(p, PiecewiseExponent):
        breaks = ", ".join(_num(b) for b in p.breaks)
        values = ", ".join(_num(v) for v in p.values)
        return f"piecewise({breaks}; {values})"
    if isinstance(p, LogExponent):
        return "log"
    if isinstance(p, SpikedExponent):
        if p.mirrored:
            return f"rearrange(spiked(1, {_num(p.slope)}, {_num(p.base)}))"
        return f"spiked({p.levels}, {_num(p.slope)}, {_num(p.base)})"
    if isinstance(p, DualExponent):
        return f"dual({format_exponent(p.primal)})"
    raise GrammarError(f"no text form for {type(p).__name__}")


def _format_set(mask: MeasSet) -> str:
    if isinstance(mask, LevelSet):
        inner = f"omega({_num(mask.level)})"
        return f"complement({inner})" if mask.above else inner
    if len(mask.intervals) == 1:
        a, b = mask.intervals[0]
        return f"interval({_num(a)}, {_num(b)})"
    raise GrammarError("only single intervals and level sets have a text form")


def format_function(f: Func) -> str:
    """Inverse of parse_function (level-set masks need the same exponent to re-parse)."""
    if isinstance(f, Indicator):
        if len(f.region.intervals) != 1:
            raise GrammarError("only single-interval indicators have a text form")
        a, b = f.region.intervals[0]
        return f"indicator({_num(a)}, {_num(b)})"
    if isinstance(f, PiecewisePoly):
        if len(f.coeffs) == 1 and not any(f.coeffs[0][1:]):
            return f"const({_num(f.coeffs[0][0])})"
        rows = "; ".join(", ".join(_num(c) for c in row) for row in f.coeffs)
        return f"poly({', '.join(_num(b) for b in f.breaks)}; {rows})"
    if isinstance(f, NamedAnalytic):
        return f"analytic({f.tag}, {_num(f.param)})"
    if isinstance(f, Scaled):
        return f"scale({_num(f.factor)}, {format_function(f.inner)})"
    if isinstance(f, Sum):
        return f"sum({', '.join(format_function(term) for term in f.terms)})"
    if isinstance(f, Masked):
        return f"mask({format_function(f.inner)}, {_format_set(f.mask)})"
    raise GrammarError(f"no text form for {type(f).__name__}")
