"""Adaptive Gauss-Legendre quadrature for smooth oscillatory integrands on a line."""

from __future__ import annotations

import math
from functools import lru_cache

import numpy as np


class QuadratureError(ArithmeticError):
    """The adaptive rule did not reach the requested tolerance.

    ``estimate`` and ``error`` carry the best value and its error estimate.
    """

    def __init__(self, message: str, estimate: complex, error: float):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@lru_cache(maxsize=16)
def _rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def _panel(f, a: float, b: float, order: int):
    x, w = _rule(order)
    xh, wh = _rule(2 * order)
    half, mid = (b - a) / 2, (b + a) / 2
    coarse = half * np.dot(w, f(mid + half * x))
    fine = half * np.dot(wh, f(mid + half * xh))
    return fine, abs(fine - coarse)


def integrate(f, a: float, b: float, tol: float = 1e-8, panels: int = 1, order: int = 20,
              max_depth: int = 30) -> tuple[complex, float]:
    """Integrate a vectorized ``f`` over [a, b] to absolute tolerance ``tol``.

    The interval is first cut into ``panels`` equal pieces (scale this with the
    number of oscillations); each piece is compared between ``order`` and
    ``2*order`` point rules and bisected until its share of the tolerance is met.

    Returns
    -------
    value, error_estimate
    """
    if not b > a:
        raise ValueError(f"need b > a, got [{a}, {b}]")
    if panels < 1:
        raise ValueError("panels must be >= 1")
    width = b - a
    edges = np.linspace(a, b, panels + 1)
    stack = [(float(lo), float(hi), 0) for lo, hi in zip(edges[:-1], edges[1:])]
    total, total_err = 0.0, 0.0
    while stack:
        lo, hi, depth = stack.pop()
        value, err = _panel(f, lo, hi, order)
        if err <= tol * (hi - lo) / width or err < 1e-15 * abs(value):
            total += value
            total_err += err
            continue
        if depth >= max_depth:
            total += value
            raise QuadratureError(
                f"adaptive quadrature stalled on [{lo:.3g}, {hi:.3g}] with error {err:.3e}",
                total, total_err + err + sum(_panel(f, s[0], s[1], order)[1] for s in stack))
        mid = (lo + hi) / 2
        stack.append((lo, mid, depth + 1))
        stack.append((mid, hi, depth + 1))
    return total, total_err


def oscillation_panels(phase_rate: float, width: float = 1.0) -> int:
    """Initial panel count: one panel per half-wave of exp(i*phase_rate*x)."""
    return max(2, int(math.ceil(abs(phase_rate) * width / math.pi)))
