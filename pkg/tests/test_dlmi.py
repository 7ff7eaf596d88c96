import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esfts.core import DomainError, SolverError, SynthesisFailedError, TimeGrid, eval_schedule
from esfts.dlmi import (RESIDUAL_TOL, assemble_lmi, certificate_residual, extract_gain, from_coords,
                        scan_gain, scan_values, solve_feasibility, sym_coords)
from esfts.geometry import shrunk_gamma

from conftest import scalar_problem
from oracles import random_spd, scalar_threshold


@given(st.integers(1, 4), st.integers(0, 10 ** 6))
def test_sym_coords_round_trip(n, seed):
    Q = random_spd(np.random.default_rng(seed), n)
    assert np.array_equal(from_coords(sym_coords(Q), n), Q)


def test_scan_values():
    assert scan_values(0.01, 0.05) == [0.0, 0.01, 0.02, 0.03, 0.04, 0.05]
    with pytest.raises(DomainError):
        scan_values(0.0, 1.0)


def _scalar_sdp(ka, N=4):
    p = scalar_problem()
    grid = TimeGrid(0.0, 1.0, N)
    spec = shrunk_gamma(p, grid)
    return p, spec, grid, assemble_lmi(p, spec, ka, grid)


def test_block_layout_and_values():
    ka = 0.2
    p, spec, grid, sdp = _scalar_sdp(ka)
    assert len(sdp.blocks) == 2 * grid.N + (grid.N + 1) + 1
    assert sdp.margin_is_shift()
    Q = np.array([0.6, 0.62, 0.65, 0.7, 0.72])
    m = 0.003
    z = sdp.pack(Q[:, None, None], m)
    abar = 0.5 - ka
    h = grid.h
    Gbar = spec.at_nodes()[:, 0, 0]
    want = {("interval", 0, "left"): -(Q[1] - Q[0]) / h + 2 * abar * Q[0] + m,
            ("interval", 0, "right"): -(Q[1] - Q[0]) / h + 2 * abar * Q[1] + m,
            ("cap", 2): Q[2] + m - 1 / Gbar[2],
            ("initial",): 1 / 2.0 + m - Q[0]}
    got = {blk.tag: blk.value(z)[0, 0] for blk in sdp.blocks}
    for tag, val in want.items():
        assert got[tag] == pytest.approx(val, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("a,rho,T,N", [(0.5, 2.0, 1.0, 100), (1.0, 1.5, 2.0, 50)])
def test_scalar_scan_matches_closed_form(a, rho, T, N):
    p = scalar_problem(a=a, rho=rho, T=T)
    grid = TimeGrid(0.0, T, N)
    spec = shrunk_gamma(p, grid)
    th = scalar_threshold(a, 1.0, 1.0, rho, T, 0.01, N)
    res = scan_gain(p, spec, grid, step=0.01)
    assert res.ka == pytest.approx(np.ceil(th * 100) / 100)
    for ka, feasible in ((th - 2e-3, False), (th + 2e-3, True)):
        assert solve_feasibility(assemble_lmi(p, spec, ka, grid)).feasible is feasible


def test_backends_agree():
    p, spec, grid, sdp = _scalar_sdp(0.3, N=20)
    a = solve_feasibility(sdp, "clarabel")
    b = solve_feasibility(sdp, "cvxpy")
    assert a.margin == pytest.approx(b.margin, abs=1e-5)
    with pytest.raises(SolverError):
        solve_feasibility(sdp, "nope")


def test_infeasible_scan_raises():
    p = scalar_problem(a=5.0)
    grid = TimeGrid(0.0, 1.0, 20)
    with pytest.raises(SynthesisFailedError, match="best margin"):
        scan_gain(p, shrunk_gamma(p, grid), grid, step=0.5, ka_max=1.0)


def test_ex3_synthesis(ex3_synthesis):
    p, res = ex3_synthesis
    assert res.ka == pytest.approx(0.14)
    assert res.scan[-2][0] == pytest.approx(0.13) and res.scan[-2][1] <= 1e-7
    assert res.margin > 1e-7 and res.residual <= RESIDUAL_TOL
    assert certificate_residual(p, res) <= -(res.margin - 1e-7)
    Q = res.Q
    assert np.all(np.linalg.eigvalsh(Q)[:, 0] > 0)
    d = res.to_dict()
    assert d["ka"] == res.ka and len(d["Q"]) == res.grid.N + 1


def test_extract_gain():
    p = scalar_problem(b=2.0, g=1.5)
    grid = TimeGrid(0.0, 1.0, 4)
    K, k, alpha = extract_gain(p, 0.09, grid)
    assert (k, alpha) == pytest.approx((0.3, 0.3))
    assert eval_schedule(K, 0.5)[0, 0] == pytest.approx(-0.09 * 2.0 * 1.5)
    assert extract_gain(p, 0.09, grid, split=(0.1, 0.9))[1:] == (0.1, 0.9)
    with pytest.raises(DomainError):
        extract_gain(p, 0.09, grid, split=(0.1, 0.1))


def test_text_export():
    _, _, _, sdp = _scalar_sdp(0.1, N=2)
    txt = sdp.to_text()
    assert txt.startswith("sdp n=1 nodes=3 vars=4")
    assert txt.count("\nblock ") == len(sdp.blocks)


@settings(max_examples=10, deadline=None)
@given(st.floats(0.0, 2.0))
def test_feasible_points_satisfy_blocks(ka):
    _, _, _, sdp = _scalar_sdp(ka, N=10)
    res = solve_feasibility(sdp)
    z = sdp.pack(res.Q, res.margin)
    assert sdp.residual(z) <= RESIDUAL_TOL
