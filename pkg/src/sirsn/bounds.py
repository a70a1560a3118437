"""Analytic lower-bound curves for the normalised network length.

``solve_bound_curve`` solves the length/angle system for a route between
two unit squares ``3L`` apart whose length exceeds the straight line by a
factor at most ``1 + 2 alpha``; ``steiner_bounds`` returns the elementary
lower bounds on the Steiner-tree constant and the known lower bound on the
minimal normalised length.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.optimize import brentq, minimize_scalar

from .dyadic import ParameterError, SirsnError


class SolverError(SirsnError):
    pass


@dataclass(frozen=True)
class BoundCurvePoint:
    alpha: float
    L: float
    D: float
    theta0: float
    lower_bound: float
    residual_d: float
    residual_theta: float


def _d_equation(D, alpha, L):
    return 2.0 * math.hypot(D - 1.0, 1.5 * L + 1.0) - (1.0 + 2.0 * alpha) * (3.0 * L + 2.0)


def _theta_equation(t, alpha, L):
    return L * (1.0 / math.cos(t) - 1.0) - 4.0 * alpha * math.hypot(3.0 * L + 2.0, 1.0)


def solve_bound_curve(alpha: float, L: float | None = None) -> BoundCurvePoint:
    """Solve for ``D`` and ``theta0`` at ``L = alpha**-1/2`` (unless ``L`` is given).

    Both equations are monotone in their unknown and solvable in closed
    form; the roots are evaluated in a cancellation-free form and the
    residuals of the original equations are reported.
    """
    if not alpha > 0:
        raise ParameterError("alpha must be positive")
    if L is None:
        L = alpha ** -0.5
    if not L > 0:
        raise ParameterError("L must be positive")
    # Both equations have closed-form roots.  Evaluated directly they cancel
    # catastrophically for small alpha, so the roots are taken in a
    # well-conditioned form and the brackets only guard solvability.
    # D - 1 = (3L/2 + 1) sqrt((1 + 2 alpha)^2 - 1)
    D = 1.0 + (1.5 * L + 1.0) * 2.0 * math.sqrt(alpha * (1.0 + alpha))
    if not (_d_equation(1.0, alpha, L) <= 0 <= _d_equation(2.0 * D + 1.0, alpha, L)):
        raise SolverError(f"no root for D in [1, {2.0 * D + 1.0}] at alpha={alpha}")
    # sec(theta0) - 1 = k, i.e. 2 sin^2(theta0 / 2) = k / (1 + k)
    k = 4.0 * alpha * math.hypot(3.0 * L + 2.0, 1.0) / L
    theta0 = 2.0 * math.asin(math.sqrt(k / (2.0 * (1.0 + k))))
    if not theta0 < math.pi / 2:
        raise SolverError(f"no root for theta0 below pi/2 at alpha={alpha}")
    rd = _d_equation(D, alpha, L)
    rt = _theta_equation(theta0, alpha, L)
    return BoundCurvePoint(alpha, L, D, theta0, 1.0 / (21.0 * D * theta0), rd, rt)


def steiner_sup() -> tuple[float, float]:
    """Maximiser and maximum of (1 - exp(-pi r^2)) / (4 r) over r > 0."""
    f = lambda r: -(1.0 - math.exp(-math.pi * r * r)) / (4.0 * r)
    res = minimize_scalar(f, bounds=(0.05, 3.0), method="bounded", options={"xatol": 1e-12})
    # refine the stationary point exactly: derivative of the objective vanishes
    g = lambda r: 2.0 * math.pi * r * r * math.exp(-math.pi * r * r) - (1.0 - math.exp(-math.pi * r * r))
    r_star = brentq(g, 0.5 * res.x, min(3.0, 2.0 * res.x), xtol=1e-15)
    return r_star, -f(r_star)


def steiner_bounds() -> tuple[float, float, float]:
    """(nearest-neighbour bound 1/4, disc-covering bound sup, sqrt(1/8))."""
    return 0.25, steiner_sup()[1], math.sqrt(1.0 / 8.0)
