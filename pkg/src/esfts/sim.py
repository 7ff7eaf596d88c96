"""Fixed-step RK4 simulation of the dithered loop, its average and the open loop.

All three systems share one kernel: x' = A(t) x + B(t) * (c(t) - s(t) * x'Pi(t)x)
with c(t) = alpha sqrt(w) cos(w t + phi) and s(t) = k sqrt(w) sin(w t + phi).
The averaged and open-loop systems use c = s = 0 and the matching A. Schedule
data is precomputed at every half step, and the kernel integrates a batch of
initial states at once.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numba
import numpy as np

from .averaging import closed_loop_matrix
from .core import (ContractError, ControllerParams, DivergenceError, DomainError, FtsProblem,
                   eval_schedule)
from .geometry import shrunk_gamma_exact

log = logging.getLogger(__name__)

DIVERGENCE_CAP = 1e6
MAX_REPORT_SAMPLES = 20000


@numba.njit(cache=True)
def _rk4_kernel(X0, A_h, B_h, Pi_h, c_h, s_h, dt, n_steps, cap):
    runs, n = X0.shape
    out = np.empty((n_steps + 1, runs, n))
    blown = np.full(runs, -1)
    out[0] = X0
    x = np.empty(n)
    kk = np.empty((4, n))
    tmp = np.empty(n)
    for r in range(runs):
        for i in range(n):
            x[i] = X0[r, i]
        for step in range(n_steps):
            if blown[r] >= 0:
                out[step + 1, r] = x
                continue
            j = 2 * step
            for stage in range(4):
                if stage == 0:
                    jj = j
                    for i in range(n):
                        tmp[i] = x[i]
                elif stage == 3:
                    jj = j + 2
                    for i in range(n):
                        tmp[i] = x[i] + dt * kk[2, i]
                else:
                    jj = j + 1
                    for i in range(n):
                        tmp[i] = x[i] + 0.5 * dt * kk[stage - 1, i]
                quad = 0.0
                for a in range(n):
                    acc = 0.0
                    for b in range(n):
                        acc += Pi_h[jj, a, b] * tmp[b]
                    quad += tmp[a] * acc
                u = c_h[jj] - s_h[jj] * quad
                for a in range(n):
                    acc = 0.0
                    for b in range(n):
                        acc += A_h[jj, a, b] * tmp[b]
                    kk[stage, a] = acc + B_h[jj, a] * u
            nrm = 0.0
            for i in range(n):
                x[i] = x[i] + dt / 6.0 * (kk[0, i] + 2.0 * kk[1, i] + 2.0 * kk[2, i] + kk[3, i])
                nrm += x[i] * x[i]
            if not nrm <= cap * cap:
                blown[r] = step + 1
            out[step + 1, r] = x
    return out, blown


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Fine-grid state history; ``decimated`` thins it for reporting."""

    times: np.ndarray
    states: np.ndarray
    kind: str

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    def decimated(self, max_samples: int = MAX_REPORT_SAMPLES) -> "Trajectory":
        stride = max(1, math.ceil(self.times.size / max_samples))
        idx = np.arange(0, self.times.size, stride)
        if idx[-1] != self.times.size - 1:
            idx = np.append(idx, self.times.size - 1)
        return Trajectory(self.times[idx], self.states[idx], self.kind)


@dataclass(frozen=True)
class RunMetrics:
    max_dist: float
    max_v: float
    max_v_avg: float
    fts_ok: bool
    dist_ok: bool

    @property
    def ok(self) -> bool:
        return self.fts_ok and self.dist_ok


def closed_loop_dt(p: FtsProblem, omega: float, steps_per_period: int = 40) -> tuple[float, int]:
    """Step size and count: dt <= min(2 pi / (omega * steps_per_period), T / 10000), landing on t0 + T."""
    if not omega > 0:
        raise DomainError("omega must be positive")
    target = min(2.0 * math.pi / (omega * steps_per_period), p.T / 10000.0)
    n_steps = int(math.ceil(p.T / target - 1e-9))
    return p.T / n_steps, n_steps


def _half_times(p: FtsProblem, n_steps: int) -> np.ndarray:
    return p.t0 + p.T * np.arange(2 * n_steps + 1) / (2 * n_steps)


def _run(p: FtsProblem, A_h, c_h, s_h, X0, n_steps, with_input: bool):
    th = _half_times(p, n_steps)
    n = p.n
    if with_input:
        B_h = eval_schedule(p.B, th)[:, :, 0]
        Pi_h = eval_schedule(p.Pi, th)
    else:
        B_h = np.zeros((th.size, n))
        Pi_h = np.zeros((th.size, n, n))
    X0 = np.atleast_2d(np.asarray(X0, dtype=float))
    if X0.shape[1] != n or not np.all(np.isfinite(X0)):
        raise ContractError(f"initial states must be finite {n}-vectors")
    out, blown = _rk4_kernel(X0, np.ascontiguousarray(A_h), np.ascontiguousarray(B_h),
                             np.ascontiguousarray(Pi_h), np.ascontiguousarray(c_h),
                             np.ascontiguousarray(s_h), p.T / n_steps, n_steps, DIVERGENCE_CAP)
    times = th[::2]
    blow_t = np.where(blown >= 0, times[np.maximum(blown, 0)], np.nan)
    return times, out, blow_t


def _closed_loop_batch(p: FtsProblem, c: ControllerParams, X0, n_steps):
    th = _half_times(p, n_steps)
    sw = math.sqrt(c.omega)
    ph = c.omega * th + c.phase
    return _run(p, eval_schedule(p.A, th), c.alpha * sw * np.cos(ph), c.k * sw * np.sin(ph),
                X0, n_steps, True)


def _linear_batch(p: FtsProblem, A_h, X0, n_steps):
    z = np.zeros(A_h.shape[0])
    return _run(p, A_h, z, z, X0, n_steps, False)


def _single(times, out, blow_t, kind) -> Trajectory:
    if np.isfinite(blow_t[0]):
        raise DivergenceError(f"{kind} trajectory left |x| <= {DIVERGENCE_CAP:g} at t = {blow_t[0]:.6g}",
                              float(blow_t[0]))
    return Trajectory(times, out[:, 0, :], kind)


def simulate_closed_loop(p: FtsProblem, c: ControllerParams, x0, steps_per_period: int = 40) -> Trajectory:
    """Integrate the dithered loop from x(t0) = x0 with fixed-step RK4."""
    _, n_steps = closed_loop_dt(p, c.omega, steps_per_period)
    return _single(*_closed_loop_batch(p, c, [x0], n_steps), "closed_loop")


def _steps_for_dt(p: FtsProblem, dt: float) -> int:
    if not dt > 0:
        raise DomainError("dt must be positive")
    if dt > p.T / 1000.0 * (1 + 1e-12):
        raise DomainError(f"dt = {dt:g} exceeds T/1000 = {p.T / 1000:g}")
    return int(math.ceil(p.T / dt - 1e-9))


def simulate_averaged(p: FtsProblem, ka: float, x0, dt: float) -> Trajectory:
    n_steps = _steps_for_dt(p, dt)
    A_h = closed_loop_matrix(p, ka, _half_times(p, n_steps))
    return _single(*_linear_batch(p, A_h, [x0], n_steps), "averaged")


def simulate_open_loop(p: FtsProblem, x0, dt: float) -> Trajectory:
    n_steps = _steps_for_dt(p, dt)
    A_h = eval_schedule(p.A, _half_times(p, n_steps))
    return _single(*_linear_batch(p, A_h, [x0], n_steps), "open_loop")


def quad_form(G: np.ndarray, X: np.ndarray) -> np.ndarray:
    """x(t)' G(t) x(t) for stacked G (T, n, n) and X (T, n)."""
    return np.einsum("ti,tij,tj->t", X, G, X)


def trajectory_metrics(x: Trajectory, xbar: Trajectory, p: FtsProblem) -> RunMetrics:
    """Compare a dithered trajectory with its average on a common fine time base.

    When ``xbar`` is on a coarser grid, each of its samples is paired with the
    nearest sample of ``x`` (no interpolation across dither periods).
    """
    if x.times.size == xbar.times.size and np.allclose(x.times, xbar.times, rtol=0, atol=1e-12 * max(p.T, 1)):
        X = x.states
    else:
        idx = np.clip(np.rint((xbar.times - x.times[0]) / x.dt).astype(int), 0, x.times.size - 1)
        if np.max(np.abs(x.times[idx] - xbar.times)) > 0.5 * x.dt * (1 + 1e-9) or x.dt > xbar.dt * (1 + 1e-9):
            raise ContractError("trajectories do not share a fine time grid")
        X = x.states[idx]
    dist = np.linalg.norm(X - xbar.states, axis=1)
    v = quad_form(eval_schedule(p.Gamma, x.times), x.states)
    vbar = quad_form(shrunk_gamma_exact(p, xbar.times), xbar.states)
    max_dist = float(dist.max())
    max_v = float(v.max())
    return RunMetrics(max_dist=max_dist, max_v=max_v, max_v_avg=float(vbar.max()),
                      fts_ok=bool(max_v < 1.0), dist_ok=bool(max_dist < p.Delta))


# --------------------------------------------------------------------------
# Monte Carlo

def sample_initial_states(R: np.ndarray, runs: int, seed: int, lo: float = 0.8, hi: float = 1.0) -> np.ndarray:
    """Uniform random directions scaled so that x0' R x0 is uniform on [lo, hi].

    Run i draws from its own stream seeded by (seed, i).
    """
    n = R.shape[0]
    out = np.empty((runs, n))
    for i in range(runs):
        rng = np.random.default_rng([seed, i])
        d = rng.standard_normal(n)
        d /= np.linalg.norm(d)
        level = rng.uniform(lo, hi)
        out[i] = d * math.sqrt(level / (d @ R @ d))
    return out


@dataclass
class SuiteSummary:
    runs: int
    passes: int
    fts_passes: int
    dist_passes: int
    worst_max_dist: float
    worst_max_v: float
    worst_max_v_avg: float
    worst_run: int
    per_run: list[dict] = field(default_factory=list)


@dataclass
class VerificationReport:
    seed: int
    omega: float
    k: float
    alpha: float
    ka: float
    steps_per_period: int
    x0: list
    nominal: SuiteSummary
    sign_flip: SuiteSummary | None

    @property
    def passed(self) -> bool:
        ok = self.nominal.passes == self.nominal.runs
        if self.sign_flip is not None:
            ok = ok and self.sign_flip.passes == self.sign_flip.runs
        return ok

    def to_dict(self) -> dict:
        d = {"seed": self.seed, "omega": self.omega, "k": self.k, "alpha": self.alpha, "ka": self.ka,
             "steps_per_period": self.steps_per_period, "x0": self.x0}
        d.update({key: val for key, val in asdict(self.nominal).items()})
        d["sign_flip"] = asdict(self.sign_flip) if self.sign_flip is not None else None
        d["passed"] = self.passed
        return d


def _suite(p, c, ka, X0, steps_per_period, jobs=1):
    _, n_steps = closed_loop_dt(p, c.omega, steps_per_period)
    if jobs > 1 and X0.shape[0] > 1:
        chunks = np.array_split(X0, min(jobs, X0.shape[0]))
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            parts = list(ex.map(_closed_loop_batch, [p] * len(chunks), [c] * len(chunks),
                                chunks, [n_steps] * len(chunks)))
        times = parts[0][0]
        out = np.concatenate([q[1] for q in parts], axis=1)
        blow = np.concatenate([q[2] for q in parts])
    else:
        times, out, blow = _closed_loop_batch(p, c, X0, n_steps)
    A_h = closed_loop_matrix(p, ka, _half_times(p, n_steps))
    _, avg, blow_avg = _linear_batch(p, A_h, X0, n_steps)
    per_run, metrics = [], []
    for r in range(X0.shape[0]):
        entry = {"x0": X0[r].tolist()}
        if np.isfinite(blow[r]) or np.isfinite(blow_avg[r]):
            entry.update(diverged=True, divergence_time=float(np.nanmin([blow[r], blow_avg[r]])),
                         fts_ok=False, dist_ok=False, max_dist=math.inf, max_v=math.inf,
                         max_v_avg=math.inf)
            metrics.append(None)
        else:
            m = trajectory_metrics(Trajectory(times, out[:, r], "closed_loop"),
                                   Trajectory(times, avg[:, r], "averaged"), p)
            entry.update(diverged=False, **asdict(m))
            metrics.append(m)
        per_run.append(entry)

    def worst(key):
        return max(e[key] for e in per_run)

    wr = int(np.argmax([e["max_v"] if math.isfinite(e["max_v"]) else math.inf for e in per_run]))
    summary = SuiteSummary(
        runs=len(per_run),
        passes=sum(1 for e in per_run if e["fts_ok"] and e["dist_ok"]),
        fts_passes=sum(1 for e in per_run if e["fts_ok"]),
        dist_passes=sum(1 for e in per_run if e["dist_ok"]),
        worst_max_dist=worst("max_dist"), worst_max_v=worst("max_v"),
        worst_max_v_avg=worst("max_v_avg"), worst_run=wr, per_run=per_run)
    return summary, (times, out, avg)


def monte_carlo_verify(p: FtsProblem, c: ControllerParams, ka: float, runs: int, seed: int,
                       steps_per_period: int = 40, flip_b: bool = True,
                       x0s: Sequence | None = None, jobs: int = 1,
                       return_data: bool = False):
    """Simulate ``runs`` random initial states (x0'R x0 uniform on [0.8, 1]) for the
    dithered loop and its average, then repeat with B -> -B.

    Divergent runs are recorded as failures. With ``return_data`` the fine
    trajectories of the nominal suite are returned alongside the report.
    """
    if runs < 1:
        raise DomainError("runs must be >= 1")
    X0 = sample_initial_states(p.R, runs, seed) if x0s is None else np.atleast_2d(np.asarray(x0s, float))
    nominal, data = _suite(p, c, ka, X0, steps_per_period, jobs)
    flipped = _suite(p.flipped(), c, ka, X0, steps_per_period, jobs)[0] if flip_b else None
    rep = VerificationReport(seed=seed, omega=c.omega, k=c.k, alpha=c.alpha, ka=ka,
                             steps_per_period=steps_per_period, x0=X0.tolist(),
                             nominal=nominal, sign_flip=flipped)
    log.info("verification: %d/%d nominal, %s flipped", nominal.passes, nominal.runs,
             f"{flipped.passes}/{flipped.runs}" if flipped else "-")
    return (rep, data) if return_data else rep


def convergence_study(p: FtsProblem, c: ControllerParams, omegas: Sequence[float], x0, ka: float | None = None,
                      steps_per_period: int = 40) -> list[tuple[float, float]]:
    """max |x - xbar| for each dither frequency, same initial state and gains."""
    omegas = list(omegas)
    if any(b <= a for a, b in zip(omegas, omegas[1:])):
        raise DomainError("omegas must be strictly increasing")
    ka = c.ka if ka is None else ka
    rows = []
    for w in omegas:
        cw = ControllerParams(c.k, c.alpha, w, c.phase)
        _, n_steps = closed_loop_dt(p, w, steps_per_period)
        times, out, blow = _closed_loop_batch(p, cw, [x0], n_steps)
        A_h = closed_loop_matrix(p, ka, _half_times(p, n_steps))
        _, avg, blow_avg = _linear_batch(p, A_h, [x0], n_steps)
        if np.isfinite(blow[0]) or np.isfinite(blow_avg[0]):
            rows.append((w, math.inf))
            continue
        rows.append((w, float(np.max(np.linalg.norm(out[:, 0] - avg[:, 0], axis=1)))))
    return rows
