"""Ellipsoid geometry: distance between concentric similar ellipsoids and the
shrunk target ellipsoid for the averaged system."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .core import (DeltaTooLargeError, DomainError, FtsProblem, MatrixSchedule,
                   ShrinkageInfeasibleError, TimeGrid, ValidationError, eval_schedule,
                   is_pd, symmetrize)

COND_MAX = 1e12
INTERP_TOL = 1e-6


class InterpolationWarning(UserWarning):
    """Piecewise-linear shrunk ellipsoid deviates from the exact one between nodes."""


def semi_axes(Gamma: np.ndarray) -> np.ndarray:
    """gamma_i = 1/sqrt(lambda_i) for the eigenvalues lambda_i of Gamma, ascending in lambda."""
    lam = np.linalg.eigvalsh(symmetrize(np.asarray(Gamma, dtype=float)))
    if lam[0] <= 0:
        raise ValidationError("Gamma is not positive definite")
    if lam[-1] / lam[0] > COND_MAX:
        raise ValidationError(f"Gamma is ill-conditioned (cond = {lam[-1] / lam[0]:.3g})")
    return 1.0 / np.sqrt(lam)


def min_ellipsoid_distance(Gamma: np.ndarray, r: float) -> float:
    """Minimum distance between {x'Gx = 1} and {y'Gy = r^2}: (1 - r) * min_i gamma_i."""
    if not 0 < r <= 1:
        raise DomainError(f"r must lie in (0, 1], got {r}")
    return float((1.0 - r) * semi_axes(Gamma).min())


def shrink_factor(Gamma_t: np.ndarray, Delta: float) -> float:
    gmin = semi_axes(Gamma_t).min()
    if Delta < 0:
        raise DomainError("Delta must be non-negative")
    if not Delta < gmin:
        raise ShrinkageInfeasibleError(
            f"Delta = {Delta:g} is not below the smallest semi-axis {gmin:g}")
    return float(1.0 - Delta / gmin)


@dataclass(frozen=True, eq=False)
class ShrunkSpec:
    """Per-node shrink factors and the shrunk ellipsoid Gamma/r^2 on a grid."""

    grid: TimeGrid
    r: np.ndarray
    gamma_min: np.ndarray
    GammaBar: MatrixSchedule
    interp_error: float

    def at_nodes(self) -> np.ndarray:
        return self.GammaBar.sample_values


def shrunk_gamma_exact(p: FtsProblem, t) -> np.ndarray:
    """Gamma(t) / r(t)^2 evaluated exactly (vectorized over t)."""
    G = eval_schedule(p.Gamma, t)
    lam_max = np.linalg.eigvalsh(symmetrize_stack(G))[..., -1]
    r = 1.0 - p.Delta * np.sqrt(lam_max)
    return G / (r ** 2)[..., None, None]


def symmetrize_stack(M: np.ndarray) -> np.ndarray:
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def shrunk_gamma(p: FtsProblem, grid: TimeGrid) -> ShrunkSpec:
    """Shrink Gamma so that the Delta-tube around the averaged trajectory fits inside it.

    Raises :class:`DeltaTooLargeError` when Gamma_bar(t0) is not strictly
    below R, i.e. some admissible initial state already violates the shrunk
    target. A piecewise-linear deviation above 1e-6 at segment midpoints is
    reported as an :class:`InterpolationWarning`.
    """
    nodes = grid.nodes
    G = eval_schedule(p.Gamma, nodes)
    r = np.empty(nodes.size)
    gmin = np.empty(nodes.size)
    for k in range(nodes.size):
        gmin[k] = semi_axes(G[k]).min()
        r[k] = shrink_factor(G[k], p.Delta)
    Gbar = G / (r ** 2)[:, None, None]
    if not is_pd(p.R - Gbar[0]):
        raise DeltaTooLargeError(
            f"Delta = {p.Delta:g} too large: Gamma_bar(t0) = Gamma(t0)/{r[0] ** 2:.6g} "
            f"is not strictly below R (max eig of Gamma_bar(t0) - R = "
            f"{np.linalg.eigvalsh(symmetrize(Gbar[0] - p.R))[-1]:.4g})")
    mids = nodes[:-1] + 0.5 * grid.h
    err = float(np.max(np.abs(0.5 * (Gbar[:-1] + Gbar[1:]) - shrunk_gamma_exact(p, mids))))
    if err > INTERP_TOL:
        warnings.warn(f"piecewise-linear Gamma_bar deviates by {err:.2e} (> {INTERP_TOL:g}) at "
                      f"segment midpoints; refine the grid to tighten it", InterpolationWarning,
                      stacklevel=2)
    return ShrunkSpec(grid=grid, r=r, gamma_min=gmin,
                      GammaBar=MatrixSchedule.sampled(nodes, Gbar), interp_error=err)
