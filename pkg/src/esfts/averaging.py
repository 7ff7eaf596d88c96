"""Lie-bracket averaging.

Two routes to the averaged vector field of the extremum-seeking loop:

* :func:`averaged_closed_loop` is the closed form
  ``A(t) - ka * B(t) B(t)' Pi(t)``;
* :func:`averaged_field` is a generic numerical oracle built from finite
  difference Lie brackets and quadrature of the dither coefficients, used to
  check the closed form.

The small parameter of the averaging theory is ``1/omega``; nothing in here
depends on ``omega`` itself.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import ContractError, DomainError, FtsProblem, MatrixSchedule, TimeGrid, eval_schedule

VectorField = Callable[[np.ndarray], np.ndarray]
Dither = Callable[[float, np.ndarray], np.ndarray]

SIMPSON_PANELS = 2048
ZERO_MEAN_TOL = 1e-8


def simpson_weights(panels: int) -> np.ndarray:
    if panels % 2:
        raise ValueError("Simpson's rule needs an even number of panels")
    w = np.ones(panels + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w / 3.0


def _check_dither(u: Dither, period: float, t: float = 0.0) -> None:
    th = np.linspace(0.0, period, SIMPSON_PANELS + 1)
    vals = np.asarray(u(t, th), dtype=float) * np.ones_like(th)
    mean = (period / SIMPSON_PANELS) * simpson_weights(SIMPSON_PANELS) @ vals / period
    if abs(mean) > ZERO_MEAN_TOL:
        raise ContractError(f"dither has non-zero mean {mean:.3g} over its period")
    if abs(vals[0] - vals[-1]) > ZERO_MEAN_TOL:
        raise ContractError("dither is not periodic with the declared period")


@dataclass(frozen=True)
class DitheredField:
    """Input vector fields b_i(x) driven by zero-mean periodic dithers u_i(t, theta).

    Each dither must accept an array of phases ``theta``.
    """

    bhat: Sequence[VectorField]
    uhat: Sequence[Dither]
    period: float

    def __post_init__(self):
        if len(self.bhat) != len(self.uhat):
            raise ContractError("bhat and uhat must have the same length")
        if not self.period > 0:
            raise DomainError("dither period must be positive")
        for u in self.uhat:
            _check_dither(u, self.period)


def nu_coefficient(uhat_i: Dither, uhat_j: Dither, period: float, t: float = 0.0) -> float:
    """Double integral of u_i(t, s) u_j(t, theta) over 0 <= s <= theta <= period.

    Composite Simpson with 2048 panels on each axis; the inner integral over
    ``[0, theta]`` is mapped to ``[0, 1]`` so every outer node sees the same
    number of inner panels.
    """
    _check_dither(uhat_i, period, t)
    _check_dither(uhat_j, period, t)
    w = simpson_weights(SIMPSON_PANELS)
    theta = np.linspace(0.0, period, SIMPSON_PANELS + 1)
    s = np.linspace(0.0, 1.0, SIMPSON_PANELS + 1)
    inner = np.empty_like(theta)
    for m, th in enumerate(theta):
        vals = np.asarray(uhat_i(t, th * s), dtype=float) * np.ones_like(s)
        inner[m] = th / SIMPSON_PANELS * (w @ vals)
    uj = np.asarray(uhat_j(t, theta), dtype=float) * np.ones_like(theta)
    return float(period / SIMPSON_PANELS * (w @ (inner * uj)))


def jacobian_fd(f: VectorField, x: np.ndarray) -> np.ndarray:
    """Central-difference Jacobian with step 1e-6 * (1 + |x|)."""
    x = np.asarray(x, dtype=float)
    h = 1e-6 * (1.0 + np.linalg.norm(x))
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2.0 * h))
    return np.column_stack(cols)


def lie_bracket(b_i: VectorField, b_j: VectorField, x: np.ndarray) -> np.ndarray:
    """[b_i, b_j](x) = Db_j(x) b_i(x) - Db_i(x) b_j(x)."""
    x = np.asarray(x, dtype=float)
    return jacobian_fd(b_j, x) @ np.asarray(b_i(x)) - jacobian_fd(b_i, x) @ np.asarray(b_j(x))


def nu_matrix(d: DitheredField, t: float = 0.0) -> np.ndarray:
    m = len(d.uhat)
    nu = np.zeros((m, m))
    for i in range(m):
        for j in range(i + 1, m):
            nu[i, j] = nu_coefficient(d.uhat[i], d.uhat[j], d.period, t)
    return nu


def averaged_field(drift: VectorField, d: DitheredField, x: np.ndarray,
                   nu: np.ndarray | None = None) -> np.ndarray:
    """drift(x) + (1/T_u) * sum_{i<j} [b_i, b_j](x) * nu_ij.

    ``nu`` may be passed in (from :func:`nu_matrix`) to avoid repeating the
    quadrature when the same dithers are evaluated at many states.
    """
    x = np.asarray(x, dtype=float)
    if nu is None:
        nu = nu_matrix(d)
    out = np.array(drift(x), dtype=float)
    m = len(d.bhat)
    for i in range(m):
        for j in range(i + 1, m):
            if nu[i, j] != 0.0:
                out = out + lie_bracket(d.bhat[i], d.bhat[j], x) * nu[i, j] / d.period
    return out


def es_fields(p: FtsProblem, k: float, alpha: float, t: float) -> tuple[VectorField, DitheredField]:
    """Drift and dithered fields of the ES loop frozen at time ``t``.

    With theta = omega * t and 1/sqrt(eps) = sqrt(omega) the input
    alpha*sqrt(w) cos(wt) - k*sqrt(w) sin(wt) x'Pi x splits into
    b_1 = alpha*B with u_1 = cos, and b_2 = -k*B*(x'Pi x) with u_2 = sin.
    """
    A = eval_schedule(p.A, t)
    B = eval_schedule(p.B, t)[:, 0]
    Pi = eval_schedule(p.Pi, t)

    def drift(x):
        return A @ x

    def b1(x):
        return alpha * B

    def b2(x):
        return -k * B * (x @ Pi @ x)

    dith = DitheredField(bhat=[b1, b2],
                         uhat=[lambda t_, th: np.cos(th), lambda t_, th: np.sin(th)],
                         period=2.0 * np.pi)
    return drift, dith


def closed_loop_matrix(p: FtsProblem, ka: float, t):
    """A(t) - ka * B(t) B(t)' Pi(t), vectorized over ``t``."""
    A = eval_schedule(p.A, t)
    B = eval_schedule(p.B, t)
    Pi = eval_schedule(p.Pi, t)
    return A - ka * (B @ np.swapaxes(B, -1, -2)) @ Pi


def averaged_closed_loop(p: FtsProblem, ka: float, grid: TimeGrid) -> MatrixSchedule:
    """Averaged closed-loop matrix sampled on ``grid`` as a piecewise-linear schedule."""
    if ka < 0:
        raise DomainError("ka must be non-negative")
    nodes = grid.nodes
    return MatrixSchedule.sampled(nodes, closed_loop_matrix(p, ka, nodes))
