import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.linalg import expm

from esfts.averaging import closed_loop_matrix
from esfts.core import ContractError, ControllerParams, DivergenceError, DomainError, eval_schedule
from esfts.examples import get_example
from esfts.sim import (_half_times, _linear_batch, closed_loop_dt, convergence_study, monte_carlo_verify,
                       quad_form, sample_initial_states, simulate_averaged, simulate_closed_loop,
                       simulate_open_loop, trajectory_metrics)

from conftest import scalar_problem

EX3_OMEGA = 443.5  # omega_2nd for ex3 at ka = 0.14


def _ex3_controller(omega=EX3_OMEGA):
    s = math.sqrt(0.14)
    return ControllerParams(s, s, omega)


def test_rk4_is_fourth_order():
    p = get_example("ex1").problem.replace(T=1.0)
    x0 = np.array([0.25, 0.25])
    ref = expm(closed_loop_matrix(p, 0.04, 0.0)) @ x0
    errs = []
    for n in (2, 4):
        _, out, _ = _linear_batch(p, closed_loop_matrix(p, 0.04, _half_times(p, n)), [x0], n)
        errs.append(np.linalg.norm(out[-1, 0] - ref))
    assert errs[0] / errs[1] >= 12.0


def test_open_loop_matches_expm():
    p = get_example("ex1").problem
    x0 = np.array([0.25, 0.25])
    tr = simulate_open_loop(p, x0, 1e-3)
    A = eval_schedule(p.A, 0.0)
    for i in (0, 2500, 10000):
        assert np.allclose(tr.states[i], expm(A * tr.times[i]) @ x0, atol=1e-12)
    v = quad_form(eval_schedule(p.Gamma, tr.times), tr.states)
    assert v.max() == pytest.approx(0.69, abs=0.01)


def test_divergence_reports_time():
    p = scalar_problem(a=30.0)
    with pytest.raises(DivergenceError) as e:
        simulate_open_loop(p, [1.0], 1e-3)
    assert e.value.time == pytest.approx(math.log(1e6) / 30.0, abs=2e-3)


def test_step_rules():
    p = get_example("ex3").problem
    dt, n = closed_loop_dt(p, 1000.0, 40)
    assert dt <= 2 * math.pi / (1000.0 * 40) and dt <= p.T / 10000 and n * dt == pytest.approx(p.T)
    with pytest.raises(DomainError):
        simulate_averaged(p, 0.1, [0.1, 0.1], p.T / 500)
    with pytest.raises(DomainError):
        closed_loop_dt(p, 0.0)


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 6))
def test_initial_states(seed, runs):
    R = get_example("ex3").problem.R
    X = sample_initial_states(R, runs, seed)
    lv = np.einsum("ri,ij,rj->r", X, R, X)
    assert np.all((lv >= 0.8 - 1e-12) & (lv <= 1.0 + 1e-12))
    assert np.array_equal(sample_initial_states(R, runs + 2, seed)[:runs], X)


def test_metrics_need_common_grid():
    p = get_example("ex3").problem
    c = _ex3_controller()
    x = simulate_closed_loop(p, c, [0.2, 0.1])
    xb = simulate_averaged(p, 0.14, [0.2, 0.1], p.T / 2000)
    with pytest.raises(ContractError):
        trajectory_metrics(xb, x, p)
    m = trajectory_metrics(x, xb, p)
    assert m.max_dist < p.Delta


def test_closed_loop_deterministic_and_decimated():
    p = get_example("ex3").problem
    a = simulate_closed_loop(p, _ex3_controller(), [0.3, -0.1])
    b = simulate_closed_loop(p, _ex3_controller(), [0.3, -0.1])
    assert np.array_equal(a.states, b.states)
    d = a.decimated()
    assert d.times.size <= 20000 and d.times[-1] == a.times[-1] and d.times[0] == a.times[0]


def test_dither_resolution():
    p = get_example("ex3").problem
    x0 = sample_initial_states(p.R, 1, 7)[0]
    dist = []
    for spp in (40, 80):
        x = simulate_closed_loop(p, _ex3_controller(), x0, spp)
        xb = simulate_averaged(p, 0.14, x0, x.dt)
        dist.append(trajectory_metrics(x, xb, p).max_dist)
    assert abs(dist[1] - dist[0]) < 0.01 * dist[0]


def test_monte_carlo_ex3_and_jobs():
    p = get_example("ex3").problem
    rep = monte_carlo_verify(p, _ex3_controller(), 0.14, runs=4, seed=7)
    assert rep.passed and rep.sign_flip.passes == 4
    d = rep.to_dict()
    assert {"runs", "passes", "worst_max_dist", "worst_max_v", "sign_flip", "seed"} <= set(d)
    par = monte_carlo_verify(p, _ex3_controller(), 0.14, runs=4, seed=7, jobs=2, flip_b=False)
    assert par.nominal.worst_max_dist == rep.nominal.worst_max_dist
    with pytest.raises(DomainError):
        monte_carlo_verify(p, _ex3_controller(), 0.14, runs=0, seed=7)


def test_divergent_runs_fail():
    p = scalar_problem(a=30.0, rho=2.0)
    rep = monte_carlo_verify(p, ControllerParams(0.01, 0.01, 100.0), 1e-4, runs=2, seed=0,
                             flip_b=False)
    assert not rep.passed and rep.nominal.per_run[0]["diverged"]


def test_convergence_study_rate():
    p = get_example("ex3").problem
    x0 = sample_initial_states(p.R, 1, 7)[0]
    rows = convergence_study(p, _ex3_controller(), [EX3_OMEGA, 4 * EX3_OMEGA], x0, ka=0.14)
    # leading order 1/sqrt(omega): a 4x frequency roughly halves the distance
    assert rows[1][1] <= 0.75 * rows[0][1]
    with pytest.raises(DomainError):
        convergence_study(p, _ex3_controller(), [2.0, 1.0], x0)
