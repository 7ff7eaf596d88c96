"""Domain types shared by every stage of the pipeline.

Time-varying matrices are restricted to three schedule kinds (constant,
piecewise-linear samples, scalar profile times a fixed matrix) so that a
problem can always be written to and read back from a JSON file.
"""
from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

SYM_RTOL = 1e-10
PD_RTOL = 1e-12
DOMAIN_RTOL = 1e-9


class FtsError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ValidationError(FtsError):
    exit_code = 2


class ConfigError(ValidationError):
    pass


class DomainError(ValidationError):
    pass


class ContractError(ValidationError):
    pass


class DefinitenessError(ValidationError):
    pass


class WellPosednessError(ValidationError):
    pass


class ShrinkageInfeasibleError(ValidationError):
    pass


class DeltaTooLargeError(ValidationError):
    pass


class AssemblyError(ValidationError):
    pass


class SynthesisError(FtsError):
    exit_code = 3


class SolverError(SynthesisError):
    pass


class SynthesisFailedError(SynthesisError):
    pass


class VerificationError(FtsError):
    exit_code = 4


class DivergenceError(FtsError):
    exit_code = 4

    def __init__(self, message: str, time: float):
        super().__init__(message)
        self.time = time


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# --------------------------------------------------------------------------
# scalar profiles

def _profile_one(t):
    return np.ones_like(t)


def _profile_cosine(t, period):
    return np.cos(2.0 * np.pi * t / period)


def _profile_exp_rate(t, rate):
    return np.exp(rate * t)


def _profile_affine(t, a, b):
    return a + b * t


PROFILES = {
    "one": (_profile_one, 0),
    "cosine": (_profile_cosine, 1),
    "exp_rate": (_profile_exp_rate, 1),
    "affine": (_profile_affine, 2),
}

KINDS = ("Constant", "SampledLinear", "ScalarProfile")


@dataclass(frozen=True, eq=False)
class MatrixSchedule:
    """A real matrix-valued function of time M(t).

    ``Constant`` returns ``base``; ``SampledLinear`` linearly interpolates the
    ``(time, matrix)`` samples; ``ScalarProfile`` returns ``profile(t) * base``.
    ``domain`` is the closed interval on which evaluation is allowed (``None``
    means unrestricted; sampled schedules always use the sample span).
    """

    kind: str
    base: np.ndarray | None = None
    sample_times: np.ndarray | None = None
    sample_values: np.ndarray | None = None
    profile: str = "one"
    profile_args: tuple[float, ...] = ()
    domain: tuple[float, float] | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown schedule kind {self.kind!r}")
        if self.kind == "SampledLinear":
            ts = np.asarray(self.sample_times, dtype=float)
            vs = np.asarray(self.sample_values, dtype=float)
            if ts.ndim != 1 or ts.size < 2:
                raise ConfigError("SampledLinear needs at least two samples")
            if vs.ndim != 3 or vs.shape[0] != ts.size:
                raise ConfigError("sample matrices must share dimensions")
            if np.any(np.diff(ts) <= 0):
                raise ConfigError("sample times must be strictly increasing")
            object.__setattr__(self, "sample_times", _frozen(ts))
            object.__setattr__(self, "sample_values", _frozen(vs))
            object.__setattr__(self, "domain", (float(ts[0]), float(ts[-1])))
        else:
            b = np.asarray(self.base, dtype=float)
            if b.ndim == 1:
                b = b[:, None]
            if b.ndim != 2:
                raise ConfigError("schedule base must be a matrix")
            object.__setattr__(self, "base", _frozen(b))
        if self.kind == "ScalarProfile":
            if self.profile not in PROFILES:
                raise ConfigError(f"unknown profile {self.profile!r}")
            nargs = PROFILES[self.profile][1]
            if len(self.profile_args) != nargs:
                raise ConfigError(
                    f"profile {self.profile!r} takes {nargs} argument(s), got {len(self.profile_args)}")
            object.__setattr__(self, "profile_args", tuple(float(a) for a in self.profile_args))

    # constructors --------------------------------------------------------
    @classmethod
    def constant(cls, m, domain=None) -> "MatrixSchedule":
        return cls("Constant", base=m, domain=domain)

    @classmethod
    def sampled(cls, times, values) -> "MatrixSchedule":
        return cls("SampledLinear", sample_times=times, sample_values=values)

    @classmethod
    def scalar_profile(cls, base, profile: str, *args, domain=None) -> "MatrixSchedule":
        return cls("ScalarProfile", base=base, profile=profile, profile_args=tuple(args), domain=domain)

    @property
    def shape(self) -> tuple[int, int]:
        if self.kind == "SampledLinear":
            return self.sample_values.shape[1:]
        return self.base.shape

    def with_domain(self, t0: float, t1: float) -> "MatrixSchedule":
        if self.kind == "SampledLinear":
            lo, hi = self.domain
            tol = DOMAIN_RTOL * max(t1 - t0, 1.0)
            if lo > t0 + tol or hi < t1 - tol:
                raise ConfigError(f"samples span [{lo}, {hi}] but must cover [{t0}, {t1}]")
            return self
        return dataclasses.replace(self, domain=(float(t0), float(t1)))

    def map_matrices(self, fn) -> "MatrixSchedule":
        """Apply ``fn`` to every stored matrix (used for symmetrization)."""
        if self.kind == "SampledLinear":
            vals = np.stack([fn(v) for v in self.sample_values])
            return dataclasses.replace(self, sample_values=vals)
        return dataclasses.replace(self, base=fn(self.base))

    def __call__(self, t):
        return eval_schedule(self, t)

    # serialization ----------------------------------------------------------
    def to_dict(self) -> dict:
        if self.kind == "Constant":
            return {"kind": "Constant", "base": self.base.tolist()}
        if self.kind == "ScalarProfile":
            return {"kind": "ScalarProfile", "base": self.base.tolist(),
                    "profile": {"name": self.profile, "args": list(self.profile_args)}}
        return {"kind": "SampledLinear",
                "samples": [{"t": float(t), "value": v.tolist()}
                            for t, v in zip(self.sample_times, self.sample_values)]}

    @classmethod
    def from_json(cls, obj) -> "MatrixSchedule":
        """Build a schedule from a tagged object, or a bare nested list (constant)."""
        if isinstance(obj, (list, tuple)):
            return cls.constant(obj)
        if not isinstance(obj, dict) or "kind" not in obj:
            raise ConfigError(f"schedule must be a matrix or a tagged object, got {obj!r}")
        kind = obj["kind"]
        if kind == "Constant":
            return cls.constant(obj["base"])
        if kind == "ScalarProfile":
            prof = obj.get("profile", {"name": "one", "args": []})
            if isinstance(prof, str):
                prof = {"name": prof, "args": []}
            return cls.scalar_profile(obj["base"], prof["name"], *prof.get("args", []))
        if kind == "SampledLinear":
            samples = obj["samples"]
            return cls.sampled([s["t"] for s in samples], [s["value"] for s in samples])
        raise ConfigError(f"unknown schedule kind {kind!r}")


def eval_schedule(s: MatrixSchedule, t):
    """Evaluate a schedule at a scalar time or a 1-D array of times.

    Scalar ``t`` gives an ``(n, m)`` array, array ``t`` gives ``(len(t), n, m)``.
    """
    scalar = np.ndim(t) == 0
    tt = np.atleast_1d(np.asarray(t, dtype=float))
    if s.domain is not None:
        lo, hi = s.domain
        tol = DOMAIN_RTOL * max(hi - lo, 1.0)
        if np.any(tt < lo - tol) or np.any(tt > hi + tol):
            bad = tt[(tt < lo - tol) | (tt > hi + tol)][0]
            raise DomainError(f"t = {bad} outside schedule domain [{lo}, {hi}]")
    if s.kind == "Constant":
        out = np.broadcast_to(s.base, (tt.size,) + s.base.shape)
    elif s.kind == "ScalarProfile":
        fn, _ = PROFILES[s.profile]
        out = fn(tt, *s.profile_args)[:, None, None] * s.base
    else:
        ts, vs = s.sample_times, s.sample_values
        tc = np.clip(tt, ts[0], ts[-1])
        idx = np.clip(np.searchsorted(ts, tc, side="right") - 1, 0, ts.size - 2)
        w = (tc - ts[idx]) / (ts[idx + 1] - ts[idx])
        out = vs[idx] + w[:, None, None] * (vs[idx + 1] - vs[idx])
        # exact at nodes
        hit, hit_end = tc == ts[idx], tc == ts[idx + 1]
        if np.any(hit) or np.any(hit_end):
            out = np.array(out)
            out[hit] = vs[idx[hit]]
            out[hit_end] = vs[idx[hit_end] + 1]
    if scalar:
        return np.array(out[0])
    return np.array(out)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t0 = tau_0 < ... < tau_N = t0 + T."""

    t0: float
    T: float
    N: int

    def __post_init__(self):
        if self.N < 2:
            raise ConfigError("time grid needs N >= 2 intervals")
        if not self.T > 0:
            raise ConfigError("horizon T must be positive")

    @classmethod
    def from_nodes(cls, nodes: Sequence[float]) -> "TimeGrid":
        nodes = np.asarray(nodes, dtype=float)
        if nodes.size < 3:
            raise ConfigError("time grid needs N >= 2 intervals")
        grid = cls(float(nodes[0]), float(nodes[-1] - nodes[0]), nodes.size - 1)
        if np.max(np.abs(nodes - grid.nodes)) > 1e-12 * max(abs(grid.T), abs(grid.t0), 1.0):
            raise ConfigError("only uniform time grids are supported")
        return grid

    @classmethod
    def with_step(cls, t0: float, T: float, step: float) -> "TimeGrid":
        return cls(t0, T, int(round(T / step)))

    @property
    def h(self) -> float:
        return self.T / self.N

    @property
    def nodes(self) -> np.ndarray:
        return self.t0 + self.T * np.arange(self.N + 1) / self.N

    @property
    def t1(self) -> float:
        return self.t0 + self.T

    def refine(self, factor: int) -> "TimeGrid":
        return TimeGrid(self.t0, self.T, self.N * factor)


@dataclass(frozen=True, eq=False)
class FtsProblem:
    """Plant (A, B) plus finite-time stability data (R, Gamma, Pi, t0, T, Delta)."""

    A: MatrixSchedule
    B: MatrixSchedule
    R: np.ndarray
    Gamma: MatrixSchedule
    Pi: MatrixSchedule | None
    t0: float
    T: float
    Delta: float
    name: str = "problem"

    def __post_init__(self):
        object.__setattr__(self, "R", _frozen(self.R))
        if self.Pi is None:
            object.__setattr__(self, "Pi", self.Gamma)
        t1 = self.t0 + self.T
        for attr in ("A", "B", "Gamma", "Pi"):
            object.__setattr__(self, attr, getattr(self, attr).with_domain(self.t0, t1))

    @property
    def n(self) -> int:
        return self.R.shape[0]

    @property
    def t1(self) -> float:
        return self.t0 + self.T

    def replace(self, **kw) -> "FtsProblem":
        if "Gamma" in kw and "Pi" not in kw and self.Pi is self.Gamma:
            kw["Pi"] = None
        return dataclasses.replace(self, **kw)

    def flipped(self) -> "FtsProblem":
        """Same problem with the input direction reversed (B -> -B)."""
        return self.replace(B=self.B.map_matrices(lambda m: -m), name=self.name + "-flipB")

    def to_dict(self) -> dict:
        d = {"n": self.n, "A": self.A.to_dict(), "B": self.B.to_dict(), "R": self.R.tolist(),
             "Gamma": self.Gamma.to_dict(), "t0": self.t0, "T": self.T, "Delta": self.Delta}
        if self.Pi is not self.Gamma:
            d["Pi"] = self.Pi.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict, name: str = "problem") -> "FtsProblem":
        missing = [k for k in ("A", "B", "R", "Gamma", "t0", "T", "Delta") if k not in d]
        if missing:
            raise ConfigError(f"problem file is missing fields {missing}")
        p = cls(A=MatrixSchedule.from_json(d["A"]), B=MatrixSchedule.from_json(d["B"]),
                R=np.asarray(d["R"], dtype=float), Gamma=MatrixSchedule.from_json(d["Gamma"]),
                Pi=MatrixSchedule.from_json(d["Pi"]) if d.get("Pi") is not None else None,
                t0=float(d["t0"]), T=float(d["T"]), Delta=float(d["Delta"]),
                name=d.get("name", name))
        if "n" in d and int(d["n"]) != p.n:
            raise ConfigError(f"declared n = {d['n']} but R is {p.n}x{p.n}")
        return p

    @classmethod
    def load(cls, path) -> "FtsProblem":
        path = Path(path)
        with path.open() as fh:
            return cls.from_dict(json.load(fh), name=path.stem)

    def dump(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")


@dataclass(frozen=True)
class ControllerParams:
    """Gains of u = alpha*sqrt(w)*cos(w t) - k*sqrt(w)*sin(w t)*x'Pi x."""

    k: float
    alpha: float
    omega: float
    phase: float = 0.0

    def __post_init__(self):
        for name in ("k", "alpha", "omega"):
            if not getattr(self, name) > 0:
                raise DomainError(f"controller parameter {name} must be strictly positive")

    @property
    def ka(self) -> float:
        return self.k * self.alpha


# --------------------------------------------------------------------------
# validation

def is_symmetric(m: np.ndarray, rtol: float = SYM_RTOL) -> bool:
    scale = max(np.linalg.norm(m), 1e-300)
    return np.linalg.norm(m - m.T) <= rtol * scale


def is_pd(m: np.ndarray, rtol: float = PD_RTOL) -> bool:
    lam = np.linalg.eigvalsh(0.5 * (m + m.T))
    return lam[0] > rtol * np.linalg.norm(m, 2)


def symmetrize(m: np.ndarray) -> np.ndarray:
    return 0.5 * (m + m.T)


def semi_axes(G: np.ndarray) -> np.ndarray:
    """Semi-axis lengths gamma_i of {x : x' G x = 1}, i.e. 1/sqrt(eig(G))."""
    return 1.0 / np.sqrt(np.linalg.eigvalsh(symmetrize(G)))


def _check_spd(m, what):
    if not is_symmetric(m):
        raise DefinitenessError(f"{what} is not symmetric")
    if not is_pd(m):
        raise DefinitenessError(f"{what} is not positive definite")


def validate_problem(p: FtsProblem, grid: TimeGrid) -> FtsProblem:
    """Check every problem invariant on ``grid`` and return the symmetrized problem.

    Raises a subclass of :class:`ValidationError` naming the first violation.
    """
    n = p.n
    if p.R.shape != (n, n):
        raise ConfigError(f"R must be square, got {p.R.shape}")
    for name, want in (("A", (n, n)), ("B", (n, 1)), ("Gamma", (n, n)), ("Pi", (n, n))):
        got = tuple(getattr(p, name).shape)
        if got != want:
            raise ConfigError(f"{name} has shape {got}, expected {want}")
    if not p.T > 0:
        raise ConfigError("horizon T must be positive")
    if not p.Delta > 0:
        raise ConfigError("Delta must be positive")
    tol = DOMAIN_RTOL * max(p.T, 1.0)
    if abs(grid.t0 - p.t0) > tol or abs(grid.t1 - p.t1) > tol:
        raise ConfigError(f"grid [{grid.t0}, {grid.t1}] does not match problem [{p.t0}, {p.t1}]")

    _check_spd(p.R, "R")
    nodes = grid.nodes
    Gs = eval_schedule(p.Gamma, nodes)
    Ps = eval_schedule(p.Pi, nodes)
    gmin = np.inf
    for k, t in enumerate(nodes):
        _check_spd(Gs[k], f"Gamma at node {k} (t = {t:g})")
        _check_spd(Ps[k], f"Pi at node {k} (t = {t:g})")
        gmin = min(gmin, semi_axes(Gs[k]).min())
    if not is_pd(p.R - Gs[0]):
        raise WellPosednessError("Gamma(t0) must be strictly smaller than R")
    if not p.Delta < gmin:
        raise ShrinkageInfeasibleError(
            f"Delta = {p.Delta:g} is not below the smallest semi-axis {gmin:g} of Gamma")

    sym = symmetrize
    return p.replace(R=sym(p.R), Gamma=p.Gamma.map_matrices(sym),
                     Pi=None if p.Pi is p.Gamma else p.Pi.map_matrices(sym))


def default_split(ka: float) -> tuple[float, float]:
    """k = alpha = sqrt(ka)."""
    if ka < 0:
        raise DomainError("ka must be non-negative")
    s = math.sqrt(ka)
    return s, s


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"
