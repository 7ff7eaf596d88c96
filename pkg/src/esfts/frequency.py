"""Minimum dithering frequency from the approximate distance bound.

With rho = Delta / ((alpha + k) * eta * |B|) the requirement on u = 1/sqrt(omega)
is the quadratic

    k * kappa * |B| * u**2 + 2 * u <= rho,

whose root gives the second-order frequency; dropping the u**2 term gives the
first-order frequency (2 / rho)**2.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import expm

from .averaging import closed_loop_matrix
from .core import DomainError, FtsProblem, MatrixSchedule, TimeGrid, default_split, eval_schedule

ETA_REFINE = 10


class ApproximationRegimeWarning(UserWarning):
    """omega**1.5 is not large compared with ||dGamma/dt|| and ||Gamma A||."""


@dataclass(frozen=True)
class FrequencyBound:
    kappa: float
    eta: float
    omega_2nd: float
    omega_1st: float
    b_norm: float
    k: float
    alpha: float
    Delta: float

    def to_dict(self) -> dict:
        return asdict(self)


def kappa(Gamma: MatrixSchedule, grid: TimeGrid) -> float:
    """max over nodes of lambda_max(Gamma) / sqrt(lambda_min(Gamma))."""
    lam = np.linalg.eigvalsh(symmetrize_stack(eval_schedule(Gamma, grid.nodes)))
    return float(np.max(lam[:, -1] / np.sqrt(lam[:, 0])))


def symmetrize_stack(M):
    return 0.5 * (M + np.swapaxes(M, -1, -2))


def b_norm(p: FtsProblem, grid: TimeGrid) -> float:
    B = eval_schedule(p.B, grid.nodes)
    return float(np.max(np.linalg.norm(B[:, :, 0], axis=1)))


def transition_matrices(p: FtsProblem, ka: float, grid: TimeGrid) -> tuple[np.ndarray, np.ndarray]:
    """Phi(t, t0) of the averaged closed loop by RK4 on ``grid``; returns (times, Phi)."""
    ts = grid.nodes
    h = grid.h
    mids = ts[:-1] + 0.5 * h
    A_nodes = closed_loop_matrix(p, ka, ts)
    A_mids = closed_loop_matrix(p, ka, mids)
    Phi = np.empty((ts.size, p.n, p.n))
    Phi[0] = np.eye(p.n)
    X = Phi[0]
    for i in range(grid.N):
        k1 = A_nodes[i] @ X
        k2 = A_mids[i] @ (X + 0.5 * h * k1)
        k3 = A_mids[i] @ (X + 0.5 * h * k2)
        k4 = A_nodes[i + 1] @ (X + h * k3)
        X = X + h / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
        Phi[i + 1] = X
    return ts, Phi


def eta(p: FtsProblem, ka: float, grid: TimeGrid, method: str = "transition") -> float:
    """Largest spectral norm of the averaged closed-loop propagator over the horizon.

    ``transition`` integrates dPhi/dt = Abar(t) Phi on the grid refined 10x;
    ``exp_of_integral`` takes expm of the trapezoidal integral of Abar, which
    coincides with the former only when the Abar(t) commute.
    """
    fine = grid.refine(ETA_REFINE)
    if method == "transition":
        _, Phi = transition_matrices(p, ka, fine)
    elif method == "exp_of_integral":
        Ab = closed_loop_matrix(p, ka, fine.nodes)
        steps = 0.5 * fine.h * (Ab[1:] + Ab[:-1])
        integ = np.concatenate([np.zeros((1, p.n, p.n)), np.cumsum(steps, axis=0)])
        Phi = np.stack([expm(M) for M in integ])
    else:
        raise DomainError(f"unknown eta method {method!r}")
    return float(np.max(np.linalg.norm(Phi, ord=2, axis=(1, 2))))


def min_frequency(k: float, alpha: float, b_norm: float, kappa: float, eta: float,
                  Delta: float) -> FrequencyBound:
    for name, v in (("k", k), ("alpha", alpha), ("b_norm", b_norm), ("kappa", kappa),
                    ("eta", eta), ("Delta", Delta)):
        if not v > 0:
            raise DomainError(f"{name} must be positive, got {v}")
    rho = Delta / ((alpha + k) * eta * b_norm)
    if not rho > 0 or not math.isfinite(rho):
        raise DomainError(f"right-hand side rho = {rho} must be positive")
    omega_1st = (2.0 / rho) ** 2
    c = k * kappa * b_norm
    if c < 1e-14:
        omega_2nd = omega_1st
    else:
        # positive root of c u^2 + 2u - rho, in the cancellation-free form
        u = 2.0 * rho / (2.0 + math.sqrt(4.0 + 4.0 * c * rho))
        omega_2nd = max(1.0 / u ** 2, omega_1st)
    return FrequencyBound(kappa=kappa, eta=eta, omega_2nd=omega_2nd, omega_1st=omega_1st,
                          b_norm=b_norm, k=k, alpha=alpha, Delta=Delta)


def bound_lhs(omega: float, k: float, kappa: float, b_norm: float) -> float:
    """2/sqrt(omega) + k kappa |B| / omega."""
    return 2.0 / math.sqrt(omega) + k * kappa * b_norm / omega


def regime_scale(p: FtsProblem, grid: TimeGrid) -> float:
    """max over nodes of ||dGamma/dt|| and ||Gamma A|| (central differences for the derivative)."""
    ts = grid.nodes
    G = eval_schedule(p.Gamma, ts)
    A = eval_schedule(p.A, ts)
    dG = np.gradient(G, ts, axis=0)
    return float(max(np.max(np.linalg.norm(dG, ord=2, axis=(1, 2))),
                     np.max(np.linalg.norm(G @ A, ord=2, axis=(1, 2)))))


def check_regime(p: FtsProblem, grid: TimeGrid, omega: float, factor: float = 100.0) -> bool:
    scale = regime_scale(p, grid)
    ok = omega ** 1.5 >= factor * scale
    if not ok:
        warnings.warn(f"omega^1.5 = {omega ** 1.5:.3g} is below {factor:g} x {scale:.3g}; "
                      f"the frequency estimate may be unreliable", ApproximationRegimeWarning,
                      stacklevel=2)
    return ok


def frequency_bound(p: FtsProblem, ka: float, grid: TimeGrid,
                    split: tuple[float, float] | None = None,
                    eta_method: str = "transition") -> FrequencyBound:
    k, alpha = split if split is not None else default_split(ka)
    fb = min_frequency(k, alpha, b_norm(p, grid), kappa(p.Gamma, grid),
                       eta(p, ka, grid, eta_method), p.Delta)
    check_regime(p, grid, fb.omega_2nd)
    return fb
