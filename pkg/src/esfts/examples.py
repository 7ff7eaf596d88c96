"""Builtin problems ex1, ex2, ex3.

Each entry carries the plant and FTS data, the default synthesis grid, and
the gain product / frequencies reported alongside the example in the
literature (``reported``), which are reference values, not inputs.

=======  =====================================  ==============================
field    ex1 / ex2                              ex3
=======  =====================================  ==============================
A        [[0, 0.01], [-0.1, 0.15]]              (1 + t/10) [[0.5, -0.1], [0, -0.15]]
B        (0, 1) / (0, cos(2 pi t / 10))         (1, 0)
R        I / 0.4                                diag(6.25, 9.375)
Gamma    I / 0.5                                diag(4, 6) exp(t / 10)
Pi       Gamma                                  Gamma
t0, T    0, 10                                  0, 5
Delta    0.09                                   0.0735
grid     step 0.1 / step 0.01                   300 intervals
=======  =====================================  ==============================
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ConfigError, FtsProblem, MatrixSchedule, TimeGrid


@dataclass(frozen=True)
class BuiltinExample:
    problem: FtsProblem
    grid_n: int
    reported_ka: float
    reported_omega_2nd: float
    reported_omega_1st: float

    @property
    def grid(self) -> TimeGrid:
        return TimeGrid(self.problem.t0, self.problem.T, self.grid_n)


def _ex1() -> BuiltinExample:
    p = FtsProblem(
        A=MatrixSchedule.constant([[0.0, 0.01], [-0.1, 0.15]]),
        B=MatrixSchedule.constant([[0.0], [1.0]]),
        R=np.eye(2) / 0.4,
        Gamma=MatrixSchedule.constant(np.eye(2) / 0.5),
        Pi=None, t0=0.0, T=10.0, Delta=0.09, name="ex1")
    return BuiltinExample(p, grid_n=100, reported_ka=0.04,
                          reported_omega_2nd=750.0, reported_omega_1st=739.0)


def _ex2() -> BuiltinExample:
    p = FtsProblem(
        A=MatrixSchedule.constant([[0.0, 0.01], [-0.1, 0.15]]),
        B=MatrixSchedule.scalar_profile([[0.0], [1.0]], "cosine", 10.0),
        R=np.eye(2) / 0.4,
        Gamma=MatrixSchedule.constant(np.eye(2) / 0.5),
        Pi=None, t0=0.0, T=10.0, Delta=0.09, name="ex2")
    return BuiltinExample(p, grid_n=1000, reported_ka=0.11,
                          reported_omega_2nd=1931.0, reported_omega_1st=1902.0)


def _ex3() -> BuiltinExample:
    p = FtsProblem(
        A=MatrixSchedule.scalar_profile([[0.5, -0.1], [0.0, -0.15]], "affine", 1.0, 0.1),
        B=MatrixSchedule.constant([[1.0], [0.0]]),
        R=np.diag([6.25, 9.375]),
        Gamma=MatrixSchedule.scalar_profile(np.diag([4.0, 6.0]), "exp_rate", 0.1),
        Pi=None, t0=0.0, T=5.0, Delta=0.0735, name="ex3")
    return BuiltinExample(p, grid_n=300, reported_ka=0.14,
                          reported_omega_2nd=1714.0, reported_omega_1st=1656.0)


_BUILDERS = {"ex1": _ex1, "ex2": _ex2, "ex3": _ex3}
NAMES = tuple(_BUILDERS)


def get_example(name: str) -> BuiltinExample:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise ConfigError(f"unknown example {name!r}; choose from {', '.join(NAMES)}") from None
