"""Gauss-Legendre building blocks for the modular kernel.

`adaptive` integrates a batch of cells at once, bisecting the cells whose
5/10-node estimates disagree; `ladder` walks geometrically graded rungs toward
a singular endpoint and decides between convergence and divergence.
"""

import logging
import math

import numpy as np

from config.settings import (
    GAUSS_HIGH_NODES,
    GAUSS_LOW_NODES,
    LADDER_CHUNK,
    LADDER_MAX_RUNGS,
    MAX_CELL_DEPTH,
)
from core.errors import InconclusiveError, QuadratureOverflowError

logger = logging.getLogger(__name__)

_RULES = {n: np.polynomial.legendre.leggauss(n) for n in (GAUSS_LOW_NODES, GAUSS_HIGH_NODES)}


class Divergence(Exception):
    """Raised inside the kernel once an integral is certified infinite."""

    def __init__(self, witness: str, region: tuple[float, float], provenance: str = "closed-form"):
        super().__init__(witness)
        self.witness = witness
        self.region = region
        self.provenance = provenance


class Accumulator:
    """Subdivision budget shared by all cells of one evaluation."""

    def __init__(self, cfg):
        self.cfg = cfg
        self.subdivisions = 0
        self.quadrature = False

    def spend(self, count: int):
        self.subdivisions += count
        if self.subdivisions > self.cfg.max_subdivisions:
            raise InconclusiveError(
                f"subdivision budget of {self.cfg.max_subdivisions} exhausted",
                reason="budget",
            )


def t_measure(lo, hi):
    return hi - lo


def u_measure(lo, hi):
    """Lebesgue measure of the t-image of the u-cell [lo, hi), t = exp(-u)."""
    return np.exp(-lo) * -np.expm1(lo - hi)


def poly_values(coeffs: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Coefficient rows (m, k), ascending powers, evaluated at nodes (m, n)."""
    out = np.zeros_like(t) + coeffs[:, -1:]
    for column in range(coeffs.shape[1] - 2, -1, -1):
        out = out * t + coeffs[:, column:column + 1]
    return out


def _gauss(integrand, lo, hi, payload, nodes):
    x, w = _RULES[nodes]
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    t = mid[:, None] + half[:, None] * x[None, :]
    with np.errstate(over="ignore", divide="ignore", invalid="ignore", under="ignore"):
        values = integrand(t, payload)
    return half * (values @ w)


def adaptive(integrand, lo, hi, acc: Accumulator, payload=None, measure=t_measure):
    """Integrate every cell [lo_i, hi_i); returns per-cell (values, errors).

    integrand(t, payload) receives nodes shaped (cells, nodes) and the payload
    arrays aligned with the cells.
    """
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    values = np.zeros(lo.size)
    errors = np.zeros(lo.size)
    if lo.size == 0:
        return values, errors
    acc.quadrature = True
    owner = np.arange(lo.size)
    payload = {k: np.asarray(v) for k, v in (payload or {}).items()}
    cfg = acc.cfg

    depth = 0
    while lo.size:
        fine = _gauss(integrand, lo, hi, payload, GAUSS_HIGH_NODES)
        coarse = _gauss(integrand, lo, hi, payload, GAUSS_LOW_NODES)
        if np.isnan(fine).any():
            raise InconclusiveError("integrand is undefined on a quadrature cell", reason="nan")
        if np.isinf(fine).any():
            raise QuadratureOverflowError("integrand exceeds the float range on a quadrature cell")
        err = np.abs(fine - coarse)
        allowed = np.maximum(cfg.abs_tol * measure(lo, hi), cfg.rel_tol * np.abs(fine))
        done = (err <= allowed) | (depth >= MAX_CELL_DEPTH)
        np.add.at(values, owner[done], fine[done])
        np.add.at(errors, owner[done], err[done])

        split = ~done
        count = int(split.sum())
        if count == 0:
            break
        acc.spend(count)
        mid = 0.5 * (lo[split] + hi[split])
        lo = np.concatenate((lo[split], mid))
        hi = np.concatenate((mid, hi[split]))
        owner = np.concatenate((owner[split], owner[split]))
        payload = {k: np.concatenate((v[split], v[split])) for k, v in payload.items()}
        depth += 1

    return values, errors


def geometric_tail(values: list[float], remaining: int | None = None):
    """Extrapolate the rungs after the last one as a geometric series.

    Returns (tail, error) or None when the last three rungs are not decaying.
    The error is the change in the tail between the last two observed ratios.
    """
    if len(values) < 3:
        return None
    a, b, c = values[-3:]
    if b == 0.0 and c == 0.0:
        return 0.0, 0.0
    if a <= 0.0 or b <= 0.0:
        return None
    r_new, r_old = c / b, b / a
    if not (0.0 < r_new < 1.0 and 0.0 < r_old < 1.0):
        return None

    def tail(r):
        if remaining is None:
            return c * r / (1.0 - r)
        return c * r * -math.expm1(remaining * math.log(r)) / (1.0 - r)

    estimate = tail(r_new)
    return estimate, abs(estimate - tail(r_old))


def _chunk(rungs, start: int, count: int, history: list[float]):
    try:
        values, errors = rungs(start, count)
        return [float(v) for v in values], [float(e) for e in errors]
    except QuadratureOverflowError:
        if count == 1:
            if len(history) >= 2 and history[-1] >= history[-2]:
                return [math.inf], [0.0]
            raise
    out_values, out_errors = [], []
    for k in range(start, start + count):
        values, errors = _chunk(rungs, k, 1, history + out_values)
        out_values += values
        out_errors += errors
        if math.isinf(values[0]):
            break
    return out_values, out_errors


def ladder(rungs, acc: Accumulator, witness: str, region, total=None, germ_at=None, germ=None):
    """Sum rungs k = 0, 1, ... toward a singular endpoint.

    rungs(start, count) -> (values, errors) for rungs start .. start+count-1.
    Divergent once the running sum passes the divergence cap while the last
    three rungs are non-decreasing. Stops at `total` rungs, at `germ_at` (handing
    the remainder to germ(k) -> (tail, error)), or once the geometric tail
    estimate is within a quarter of the tolerance.
    """
    cfg = acc.cfg
    values: list[float] = []
    errors: list[float] = []
    running = 0.0
    k = 0
    while True:
        count = LADDER_CHUNK
        if total is not None:
            count = min(count, total - k)
        if germ_at is not None:
            count = min(count, germ_at - k)
        if count > 0:
            chunk_values, chunk_errors = _chunk(rungs, k, count, values)
            for v, e in zip(chunk_values, chunk_errors):
                values.append(v)
                errors.append(e)
                running += v
                if (
                    running > cfg.divergence_cap
                    and len(values) >= 3
                    and values[-1] >= values[-2] >= values[-3]
                ):
                    logger.debug("ladder diverged after %d rungs near %s", len(values), region)
                    raise Divergence(witness, region, provenance="quadrature")
                if math.isinf(v):
                    raise QuadratureOverflowError("ladder rung exceeds the float range")
            k += len(chunk_values)

        partial = math.fsum(values)
        error = math.fsum(errors)
        if total is not None and k >= total:
            return partial, error
        if germ_at is not None and k >= germ_at:
            tail, tail_error = germ(k)
            return partial + tail, error + tail_error

        estimate = geometric_tail(values, None if total is None else total - k)
        if estimate is not None:
            tail, tail_error = estimate
            if tail_error <= 0.25 * max(cfg.abs_tol, cfg.rel_tol * (partial + tail)):
                logger.debug("ladder settled after %d rungs, tail %.3g", k, tail)
                return partial + tail, error + tail_error
        if k >= LADDER_MAX_RUNGS:
            raise InconclusiveError(
                f"ladder near {region} neither settled nor diverged after {k} rungs",
                reason="ladder",
            )
