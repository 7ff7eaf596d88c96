import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from esfts.core import (ConfigError, ControllerParams, DefinitenessError, DivergenceError, DomainError,
                        FtsProblem, MatrixSchedule, ShrinkageInfeasibleError, SynthesisFailedError,
                        TimeGrid, ValidationError, VerificationError, WellPosednessError,
                        default_split, dumps, eval_schedule, validate_problem)
from esfts.examples import NAMES, get_example

finite = st.floats(-10, 10, allow_nan=False)


def test_constant_and_profiles():
    base = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert np.array_equal(eval_schedule(MatrixSchedule.constant(base), 3.3), base)
    cos = MatrixSchedule.scalar_profile(base, "cosine", 10.0)
    assert np.allclose(eval_schedule(cos, 2.5), np.cos(np.pi / 2) * base)
    ex = MatrixSchedule.scalar_profile(base, "exp_rate", 0.1)
    assert np.allclose(eval_schedule(ex, 5.0), np.exp(0.5) * base)
    af = MatrixSchedule.scalar_profile(base, "affine", 1.0, 0.1)
    assert np.allclose(eval_schedule(af, 2.0), 1.2 * base)


def test_vectorized_shape():
    s = MatrixSchedule.constant(np.eye(3)[:, :1])
    assert eval_schedule(s, np.linspace(0, 1, 7)).shape == (7, 3, 1)
    assert eval_schedule(s, 0.5).shape == (3, 1)


@given(st.lists(finite, min_size=3, max_size=3), st.floats(0, 1))
def test_sampled_linear_interpolation(vals, w):
    ts = [0.0, 1.0, 3.0]
    s = MatrixSchedule.sampled(ts, np.array(vals)[:, None, None])
    for t, v in zip(ts, vals):
        assert eval_schedule(s, t)[0, 0] == v  # exact at nodes
    t = 1.0 + 2.0 * w
    assert eval_schedule(s, t)[0, 0] == pytest.approx(vals[1] + w * (vals[2] - vals[1]), abs=1e-12)


def test_domain_and_config_errors():
    s = MatrixSchedule.sampled([0.0, 1.0], np.zeros((2, 1, 1)))
    with pytest.raises(DomainError):
        eval_schedule(s, 1.1)
    with pytest.raises(ConfigError):
        MatrixSchedule.sampled([0.0, 0.0], np.zeros((2, 1, 1)))
    with pytest.raises(ConfigError):
        MatrixSchedule.scalar_profile(np.eye(2), "cosine")
    with pytest.raises(ConfigError):
        MatrixSchedule.scalar_profile(np.eye(2), "sawtooth", 1.0)
    with pytest.raises(ConfigError):
        TimeGrid(0.0, 1.0, 1)
    with pytest.raises(ConfigError):
        TimeGrid.from_nodes([0.0, 0.3, 1.0])


def test_grid():
    g = TimeGrid(1.0, 2.0, 4)
    assert np.allclose(g.nodes, [1.0, 1.5, 2.0, 2.5, 3.0])
    assert g.h == 0.5 and g.t1 == 3.0
    assert TimeGrid.from_nodes(g.nodes) == g
    assert g.refine(3).N == 12


@pytest.mark.parametrize("name", NAMES)
def test_example_round_trip(name, tmp_path):
    p = get_example(name).problem
    path = tmp_path / "p.json"
    p.dump(path)
    q = FtsProblem.load(path)
    ts = np.linspace(p.t0, p.t1, 11)
    for field in ("A", "B", "Gamma", "Pi"):
        assert np.array_equal(eval_schedule(getattr(p, field), ts), eval_schedule(getattr(q, field), ts))
    assert np.array_equal(p.R, q.R) and (p.T, p.Delta) == (q.T, q.Delta)


def test_bare_list_is_constant():
    assert MatrixSchedule.from_json([[1, 0], [0, 1]]).kind == "Constant"


def test_missing_fields():
    with pytest.raises(ConfigError):
        FtsProblem.from_dict({"A": [[0]]})


def _base(**kw):
    d = dict(A=MatrixSchedule.constant(np.zeros((2, 2))), B=MatrixSchedule.constant([[0.0], [1.0]]),
             R=np.eye(2) * 2.5, Gamma=MatrixSchedule.constant(np.eye(2) * 2.0), Pi=None,
             t0=0.0, T=1.0, Delta=0.05)
    d.update(kw)
    return FtsProblem(**d)


def test_validation_errors():
    g = TimeGrid(0.0, 1.0, 10)
    validate_problem(_base(), g)
    with pytest.raises(DefinitenessError):
        validate_problem(_base(R=np.array([[1.0, 0.0], [0.0, -1.0]])), g)
    with pytest.raises(DefinitenessError, match="node 0"):
        validate_problem(_base(Gamma=MatrixSchedule.constant([[1.0, 2.0], [0.0, 1.0]])), g)
    with pytest.raises(WellPosednessError):
        validate_problem(_base(R=np.eye(2) * 1.9), g)
    with pytest.raises(ShrinkageInfeasibleError):
        validate_problem(_base(Delta=0.8), g)
    with pytest.raises(ConfigError):
        validate_problem(_base(), TimeGrid(0.0, 2.0, 10))
    with pytest.raises(ConfigError):
        validate_problem(_base(B=MatrixSchedule.constant(np.eye(2))), g)


def test_validation_symmetrizes():
    G = np.array([[2.0, 1e-12], [0.0, 2.0]])
    p = validate_problem(_base(Gamma=MatrixSchedule.constant(G)), TimeGrid(0.0, 1.0, 4))
    M = eval_schedule(p.Gamma, 0.0)
    assert np.array_equal(M, M.T)


def test_flipped():
    p = _base()
    assert np.array_equal(eval_schedule(p.flipped().B, 0.3), -eval_schedule(p.B, 0.3))


def test_controller_params():
    c = ControllerParams(0.2, 0.5, 100.0)
    assert c.ka == pytest.approx(0.1)
    for bad in ((0, 1, 1), (1, -1, 1), (1, 1, 0)):
        with pytest.raises(DomainError):
            ControllerParams(*bad)
    assert default_split(0.04) == pytest.approx((0.2, 0.2))


def test_exit_codes():
    assert ValidationError.exit_code == 2
    assert SynthesisFailedError.exit_code == 3
    assert VerificationError.exit_code == 4
    assert DivergenceError("x", 1.0).time == 1.0


@settings(max_examples=25)
@given(st.dictionaries(st.text(min_size=1, max_size=5), finite, max_size=6))
def test_dumps_is_canonical(d):
    assert dumps(d) == dumps(dict(reversed(list(d.items()))))
    assert json.loads(dumps(d)) == d
