"""Derivative-free scalar minimization: bracketing plus Brent's method.

brent_minimize runs the classic parabolic-interpolation-guarded-by-
golden-section iteration and guarantees that every probe stays strictly
inside the initial bracket and that the returned point is the best one
actually evaluated, never an unevaluated interpolate.  Both guarantees
matter when one evaluation costs a full encode sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

from .errors import BracketError

__all__ = [
    "SearchDomain",
    "Bracket",
    "OptimizerConfig",
    "OptimizerTrace",
    "bracket_minimum",
    "brent_minimize",
    "golden_section_minimize",
]

_GOLDEN = 0.3819660112501051  # 2 - phi
_EXPAND = 1.618033988749895  # phi
_ZEPS = 1e-11


class SearchDomain(Enum):
    LINEAR = "linear"
    LOGARITHMIC = "logarithmic"


@dataclass(frozen=True)
class Bracket:
    """Triple a < b < c with f(b) below both ends, so a minimum lies inside."""

    a: float
    b: float
    c: float
    fa: float
    fb: float
    fc: float

    def __post_init__(self) -> None:
        if not (self.a < self.b < self.c):
            raise BracketError(f"bracket abscissae not ordered: {self.a}, {self.b}, {self.c}")
        if not (self.fb < self.fa and self.fb < self.fc):
            raise BracketError(
                f"midpoint not below both ends: f={self.fa}, {self.fb}, {self.fc}"
            )


@dataclass(frozen=True)
class OptimizerConfig:
    xtol: float = 1e-4
    max_iters: int = 50
    search_domain: SearchDomain = SearchDomain.LINEAR

    def __post_init__(self) -> None:
        if self.xtol <= 0.0:
            raise ValueError(f"xtol must be positive, got {self.xtol}")
        if self.max_iters < 3:
            raise ValueError(f"max_iters must be at least 3, got {self.max_iters}")


@dataclass
class OptimizerTrace:
    """Evaluations made after bracketing, in order.

    widths holds the working interval width after each iteration; it is
    non-increasing by construction.
    """

    evaluations: list[tuple[float, float]] = field(default_factory=list)
    widths: list[float] = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def bracket_minimum(
    f: Callable[[float], float],
    x0: float,
    x1: float,
    max_expansions: int = 50,
    lo: float = -math.inf,
    hi: float = math.inf,
) -> Bracket:
    """Find a minimum bracket by golden-ratio downhill expansion from two seeds.

    Expansion is clamped to [lo, hi]; a function still heading downhill at
    a clamp (or after max_expansions steps) raises BracketError.
    """
    if x0 == x1:
        raise BracketError("bracket seeds must differ")
    a, b = x0, x1
    fa, fb = f(a), f(b)
    if fb > fa:
        a, b, fa, fb = b, a, fb, fa
    # Downhill now runs a -> b.
    for _ in range(max_expansions):
        c = b + _EXPAND * (b - a)
        c = min(max(c, lo), hi)
        if c == b:
            raise BracketError(
                f"search hit the domain edge at {b} while still descending"
            )
        fc = f(c)
        if fc > fb:
            if a > c:
                a, c, fa, fc = c, a, fc, fa
            return Bracket(a=a, b=b, c=c, fa=fa, fb=fb, fc=fc)
        a, b, fa, fb = b, c, fb, fc
    raise BracketError(
        f"no bracket after {max_expansions} expansions (function may be monotone)"
    )


def brent_minimize(
    f: Callable[[float], float],
    bracket: Bracket,
    config: OptimizerConfig,
) -> tuple[float, float, OptimizerTrace]:
    """Minimize f inside a bracket; returns (x_best, f_best, trace).

    Stops when the interval collapses below 2*xtol*|x| + tiny or after
    max_iters evaluations (then converged=False).  The result is the best
    evaluated point over the bracket and all probes.
    """
    trace = OptimizerTrace()
    a, b = bracket.a, bracket.c
    x = w = v = bracket.b
    fx = fw = fv = bracket.fb
    best = [(bracket.fa, bracket.a), (bracket.fb, bracket.b), (bracket.fc, bracket.c)]

    d = e = 0.0
    for _ in range(config.max_iters):
        m = 0.5 * (a + b)
        tol1 = config.xtol * abs(x) + _ZEPS
        tol2 = 2.0 * tol1
        if abs(x - m) <= tol2 - 0.5 * (b - a):
            trace.converged = True
            break

        use_golden = True
        if abs(e) > tol1:
            # Parabola through (x, w, v); reject degenerate or out-of-range steps.
            r = (x - w) * (fx - fv)
            q = (x - v) * (fx - fw)
            p = (x - v) * q - (x - w) * r
            q = 2.0 * (q - r)
            if q > 0.0:
                p = -p
            q = abs(q)
            e_prev, e = e, d
            if abs(p) < abs(0.5 * q * e_prev) and q * (a - x) < p < q * (b - x) and q >= 1e-21:
                d = p / q
                u = x + d
                if (u - a) < tol2 or (b - u) < tol2:
                    d = tol1 if x < m else -tol1
                use_golden = False
        if use_golden:
            e = (b if x < m else a) - x
            d = _GOLDEN * e

        u = x + (d if abs(d) >= tol1 else math.copysign(tol1, d))
        fu = f(u)
        trace.evaluations.append((u, fu))
        best.append((fu, u))

        if fu <= fx:
            if u >= x:
                a = x
            else:
                b = x
            v, w, x = w, x, u
            fv, fw, fx = fw, fx, fu
        else:
            if u < x:
                a = u
            else:
                b = u
            if fu <= fw or w == x:
                v, w = w, u
                fv, fw = fw, fu
            elif fu <= fv or v == x or v == w:
                v, fv = u, fu
        trace.widths.append(b - a)

    trace.iterations = len(trace.evaluations)
    f_best, x_best = min(best, key=lambda t: (t[0], t[1]))
    return x_best, f_best, trace


def golden_section_minimize(
    f: Callable[[float], float],
    bracket: Bracket,
    xtol: float = 1e-9,
    max_iters: int = 200,
) -> float:
    """Plain golden-section refinement of a bracket; used as a slow, simple
    cross-check for brent_minimize."""
    a, b = bracket.a, bracket.c
    x1 = b - (b - a) * (1.0 - _GOLDEN)
    x2 = a + (b - a) * (1.0 - _GOLDEN)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iters):
        if b - a <= xtol * (abs(x1) + abs(x2)) / 2.0 + _ZEPS:
            break
        if f1 < f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - (b - a) * (1.0 - _GOLDEN)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + (b - a) * (1.0 - _GOLDEN)
            f2 = f(x2)
    return x1 if f1 < f2 else x2
