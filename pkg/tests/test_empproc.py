import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from epl.distmodel import CantorCdf, Exponential, StdNormal, Uniform01
from epl.empproc import StepFunction, ecdf_build, empirical_process, sup_distance, u_process_eval
from epl.errors import ParameterError
from epl.verify import ks_statistic


def grid_sup(proc, approx, lo, hi, size=100_001):
    """Dense-grid oracle; jump locations and the doubles just left of them are added to the grid."""
    t = np.linspace(lo, hi, size)
    t = np.union1d(t, np.concatenate([proc.ecdf.breakpoints, approx.breakpoints]))
    t = np.union1d(t, np.nextafter(t, -np.inf))
    return float(np.max(np.abs(proc.as_function_of(t) - approx(t))))


def test_ecdf_count():
    f = ecdf_build(np.array([0.2, 0.8, 0.5]))
    assert f(0.5) == pytest.approx(2 / 3, abs=1e-16)


def test_ecdf_ties_merge():
    f = ecdf_build(np.array([0.5, 0.5]))
    assert f.breakpoints.tolist() == [0.5]
    assert f.jumps.tolist() == [1.0]


def test_ecdf_at_max_is_one():
    x = np.random.default_rng(0).random(37)
    assert ecdf_build(x)(x.max()) == 1.0


def test_ecdf_errors():
    with pytest.raises(ParameterError):
        ecdf_build(np.array([]))
    with pytest.raises(ParameterError):
        ecdf_build(np.array([0.1, np.nan]))


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=1, max_size=40))
def test_ecdf_is_distribution_function(xs):
    f = ecdf_build(np.array(xs))
    assert f.values[0] == 0.0 and f.values[-1] == pytest.approx(1.0, abs=1e-15)
    assert np.all(f.jumps > 0)
    assert f.jumps.sum() == pytest.approx(1.0, abs=1e-14)
    t = np.array(xs)
    counts = (t[None, :] <= t[:, None]).sum(axis=1) / len(xs)
    assert np.allclose(f(t), counts, atol=1e-15)


def test_step_function_right_continuous_and_left_limit():
    s = StepFunction([0.0, 1.0], [5.0, 6.0, 7.0])
    assert s(-1.0) == 5.0 and s(0.0) == 6.0 and s(1.0) == 7.0
    assert s.left_limit(1.0) == 6.0 and s.left_limit(0.0) == 5.0
    with pytest.raises(ParameterError):
        StepFunction([1.0, 0.0], [0.0, 1.0, 2.0])
    with pytest.raises(ParameterError):
        StepFunction([1.0], [0.0])


def test_step_function_csv():
    text = StepFunction([0.25, 0.5], [0.0, 0.1, 0.3]).to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "breakpoint,value"
    assert lines[1] == "-inf,0"
    assert lines[2] == "0.25,0.10000000000000001"
    assert len(lines) == 4


def test_u_process_examples():
    proc = empirical_process(np.array([0.1, 0.2, 0.6, 0.9]), Uniform01())
    assert u_process_eval(proc, 0.5) == pytest.approx(0.0, abs=1e-15)
    proc = empirical_process(np.array([0.1, 0.2, 0.3, 0.9]), Uniform01())
    assert u_process_eval(proc, 0.5) == pytest.approx(0.5, abs=1e-15)
    assert u_process_eval(proc, -1.0) == 0.0


def test_sup_distance_against_scaled_ecdf():
    x = np.random.default_rng(1).random(50)
    proc = empirical_process(x, Uniform01())
    approx = StepFunction(ecdf_build(x).breakpoints, math.sqrt(50) * ecdf_build(x).values)
    # U_n minus sqrt(n) F_n is -sqrt(n) F, whose sup over [0, 1] is sqrt(n)
    assert sup_distance(proc, approx) == pytest.approx(math.sqrt(50), abs=1e-12)


def test_sup_distance_single_point():
    proc = empirical_process(np.array([0.5]), Uniform01())
    assert sup_distance(proc) == pytest.approx(0.5, abs=1e-15)
    assert grid_sup(proc, StepFunction.constant(0.0), 0, 1) == pytest.approx(0.5, abs=1e-6)


@pytest.mark.parametrize("c", [0.0, 0.3, -1.2])
def test_sup_distance_shift_by_constant(c):
    x = np.random.default_rng(2).random(40)
    proc = empirical_process(x, Uniform01())
    a = StepFunction([0.3, 0.6], [0.1, -0.2, 0.4])
    assert abs(sup_distance(proc, a.shifted(c)) - sup_distance(proc, a)) <= abs(c) + 1e-15


@pytest.mark.parametrize("model,seed", [(Uniform01(), 3), (CantorCdf(), 4), (Exponential(2.0), 5)])
def test_sup_distance_against_grid_oracle(model, seed):
    rng = np.random.default_rng(seed)
    x = model.quantile(rng.random(20))
    proc = empirical_process(x, model)
    lo, hi = model.support
    a = StepFunction(np.sort(rng.random(3)), rng.normal(size=4) * 0.3)
    exact = sup_distance(proc, a)
    hi_g = hi if np.isfinite(hi) else 12.0
    oracle = grid_sup(proc, a, lo, hi_g)
    assert abs(exact - oracle) <= 1e-6


def test_sup_distance_infinite_support_includes_tails():
    proc = empirical_process(np.array([0.0]), StdNormal())
    assert sup_distance(proc) == pytest.approx(0.5, abs=1e-15)
    # approx constant far out on both sides contributes at the limits
    a = StepFunction([-100.0, 100.0], [0.7, 0.0, -0.9])
    assert sup_distance(proc, a) >= 0.9


@pytest.mark.parametrize("n", [1, 10, 257])
def test_sup_matches_ks_statistic(n):
    x = np.random.default_rng(n).random(n)
    proc = empirical_process(x, Uniform01())
    assert sup_distance(proc) / math.sqrt(n) == pytest.approx(ks_statistic(x, Uniform01()), abs=1e-14)


def test_sup_distance_domain_restriction():
    proc = empirical_process(np.array([0.2, 0.9]), Uniform01())
    assert sup_distance(proc, domain=(0.3, 0.6)) <= sup_distance(proc) + 1e-15
