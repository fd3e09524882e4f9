"""Sufficient conditions for sub- and supercriticality from lattice couplings.

Subcritical side: hexagonal faces of side ``delta`` are *closed* when each
of their six triangles holds an eavesdropper and the hexagon holds no
legitimate node. Closed-face probability above 1/2 traps the origin's weak
component inside a closed circuit.

Supercritical side: square-lattice edges of length ``d`` are *open* when
both adjacent squares hold a legitimate node and the surrounding rectangle
of ``n_s`` squares holds no eavesdropper. A Peierls count over closed
circuits shows the strong component is infinite with positive probability
when the closed-edge probability ``q`` is below ``PEIERLS_CONSTANT**n_e``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import ChannelParams, GainModel, r_free, valid_edge_length

SQRT3 = math.sqrt(3.0)
PEIERLS_CONSTANT = (11.0 - 2.0 * math.sqrt(10.0)) / 27.0
INV_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

DELTA_RANGE = (1e-3, 1e3)


class PeierlsDivergence(ArithmeticError):
    """The circuit-count series does not converge (``q**(1/n_e) >= 1/3``)."""


@dataclass(frozen=True)
class HexBoundReport:
    lambda_l: float
    lambda_e: float
    delta: float
    p_closed: float
    condition_met: bool
    feasible_delta: float | None


@dataclass(frozen=True)
class SquareBoundReport:
    lambda_l: float
    lambda_e: float
    d: float
    r_free: float
    m: int
    n_s: int
    n_e: int
    q: float
    peierls_threshold: float
    condition_met: bool
    circuit_bound: float


def _log_hex_closed(lambda_l, lambda_e, delta):
    a = lambda_e * SQRT3 / 4.0 * delta * delta
    b = lambda_l * 1.5 * SQRT3 * delta * delta
    with np.errstate(divide="ignore"):
        return 6.0 * np.log(-np.expm1(-a)) - b


def hex_closed_prob(lambda_l: float, lambda_e: float, delta: float) -> float:
    """Probability that a hexagonal face of side ``delta`` is closed."""
    if not delta > 0:
        raise ValueError(f"hexagon side must be > 0, got {delta}")
    a = lambda_e * SQRT3 / 4.0 * delta * delta
    b = lambda_l * 1.5 * SQRT3 * delta * delta
    return float((-math.expm1(-a)) ** 6 * math.exp(-b))


def golden_section_max(f, lo: float, hi: float, tol: float = 1e-6, max_iter: int = 500) -> float:
    """Maximiser of a unimodal ``f`` on ``[lo, hi]`` to absolute tolerance ``tol``."""
    a, b = lo, hi
    c = b - INV_GOLDEN * (b - a)
    d = a + INV_GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - INV_GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_GOLDEN * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def best_hex_delta(lambda_l: float, lambda_e: float) -> float:
    """Side length maximising the closed-face probability (golden section on ``log delta``)."""
    if not lambda_e > 0:
        raise ValueError("eavesdropper density must be > 0")
    lo, hi = (math.log(v) for v in DELTA_RANGE)
    t = golden_section_max(lambda s: float(_log_hex_closed(lambda_l, lambda_e, math.exp(s))), lo, hi, 1e-6)
    return math.exp(t)


def hex_subcritical_search(lambda_l: float, lambda_e: float) -> float | None:
    """A side length certifying a.s. finite weak components, or None if none is found."""
    delta = best_hex_delta(lambda_l, lambda_e)
    return delta if hex_closed_prob(lambda_l, lambda_e, delta) > 0.5 else None


def hex_bound_report(lambda_l: float, lambda_e: float, delta: float | None = None) -> HexBoundReport:
    """Hexagonal-lattice check at ``delta`` (default: the optimising side length)."""
    best = best_hex_delta(lambda_l, lambda_e)
    feasible = best if hex_closed_prob(lambda_l, lambda_e, best) > 0.5 else None
    delta = best if delta is None else delta
    p = hex_closed_prob(lambda_l, lambda_e, delta)
    return HexBoundReport(lambda_l, lambda_e, delta, p, p > 0.5, feasible)


def square_margin(d: float, r_free_: float) -> int:
    """Squares of margin needed on each side of the 2x1 block to contain the four corner balls."""
    return math.ceil(r_free_ / d)


def square_n_s(d: float, r_free_: float) -> int:
    """Number of lattice squares in the eavesdropper-free rectangle around an edge."""
    if not d > 0 or r_free_ < 0:
        raise ValueError("need d > 0 and r_free >= 0")
    m = square_margin(d, r_free_)
    return (2 + 2 * m) * (1 + 2 * m)


def default_n_e(m: int) -> int:
    """Conservative dependence span: rectangles of edges ``2m+3`` squares apart never overlap."""
    return 2 * (2 * m + 3)


def square_q(lambda_l: float, lambda_e: float, d: float, n_s: int) -> float:
    """Probability that a square-lattice edge is closed."""
    if not d > 0:
        raise ValueError(f"edge length must be > 0, got {d}")
    # log of the open probability, kept in log space so q near 0 keeps its digits
    log_open = -lambda_e * n_s * d * d
    u = lambda_l * d * d
    if u == 0:
        return 1.0
    log_open += 2.0 * math.log1p(-math.exp(-u))
    return -math.expm1(log_open)


def peierls_circuit_bound(q: float, n_e: int) -> float:
    """Closed form of ``sum_n 4 n 3**(n-2) q**(n/n_e)`` over circuit lengths ``n >= 1``."""
    if not 0 <= q <= 1 or n_e < 1:
        raise ValueError("need 0 <= q <= 1 and n_e >= 1")
    x = q ** (1.0 / n_e)
    if x >= 1.0 / 3.0:
        raise PeierlsDivergence(f"q**(1/n_e) = {x} >= 1/3; circuit series diverges")
    return 4.0 * x / (3.0 * (1.0 - 3.0 * x) ** 2)


def square_supercritical_check(lambda_l: float, lambda_e: float, params: ChannelParams, model: GainModel,
                               d: float, n_e: int | None = None) -> SquareBoundReport:
    """Evaluate the square-lattice supercritical condition at edge length ``d``.

    Raises :class:`~isgraph.channel.InvalidEdgeLength` when ``d`` is too
    long for the eavesdropper-free radius to exist.
    """
    rf = r_free(params, model, d)
    m = square_margin(d, rf)
    n_s = (2 + 2 * m) * (1 + 2 * m)
    n_e = default_n_e(m) if n_e is None else int(n_e)
    if n_e < 1:
        raise ValueError("n_e must be >= 1")
    q = square_q(lambda_l, lambda_e, d, n_s)
    threshold = PEIERLS_CONSTANT ** n_e
    try:
        bound = peierls_circuit_bound(q, n_e)
    except PeierlsDivergence:
        bound = math.inf
    return SquareBoundReport(lambda_l, lambda_e, d, rf, m, n_s, n_e, q, threshold, q < threshold, bound)


def square_search(lambda_l: float, lambda_e: float, params: ChannelParams, model: GainModel,
                  n_e: int | None = None, points: int = 400) -> SquareBoundReport:
    """Report at the edge length with the largest margin ``log(threshold) - log(q)``.

    ``n_s`` and the default ``n_e`` jump with ``d``, so the margin is scanned
    on a log grid below the admissible supremum rather than bisected.
    """
    hi = min(valid_edge_length(params, model), 1e3 / math.sqrt(max(lambda_l, lambda_e, 1e-12)))
    grid = np.geomspace(hi * 1e-6, hi * (1 - 1e-9), points)
    best, best_margin = None, -math.inf
    for d in grid:
        rep = square_supercritical_check(lambda_l, lambda_e, params, model, float(d), n_e)
        margin = math.log(rep.peierls_threshold) - (math.log(rep.q) if rep.q > 0 else -math.inf)
        if margin > best_margin:
            best, best_margin = rep, margin
    return best
