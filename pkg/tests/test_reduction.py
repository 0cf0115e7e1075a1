import json
import math

import numpy as np
import pytest
from scipy import optimize

from epl.distmodel import CantorCdf, DistributionModel, Exponential, Normal, StdNormal, Uniform01
from epl.errors import ConsistencyError, ParameterError, ResolutionError
from epl.procgen import ProcessSpec, generate
from epl.reduction import (
    BadIntervalSet,
    build_reduction,
    find_bad_intervals,
    reduce_path,
    verify_transport,
)

EXP2 = Exponential(2.0)
Y_STAR = optimize.brentq(lambda y: 1.0 - math.exp(-2.0 * y) - y, 0.5, 1.0, xtol=1e-15)


class PiecewiseLinear(DistributionModel):
    """Continuous CDF interpolating the given knots."""

    form = "piecewise-linear"

    def __init__(self, xs, fs):
        self.xs = np.asarray(xs, dtype=float)
        self.fs = np.asarray(fs, dtype=float)

    @property
    def support(self):
        return float(self.xs[0]), float(self.xs[-1])

    def cdf(self, t):
        return np.interp(t, self.xs, self.fs)


# two unit-slope stretches separated by a flat gap of width 1/8
TWO_BUMPS = PiecewiseLinear([0, 0.25, 0.375, 0.625, 2], [0, 0.25, 0.25, 0.5, 1])


def test_y_star_oracle_brackets():
    assert 0.79 < Y_STAR < 0.80
    assert Y_STAR == pytest.approx(0.7968, abs=1e-4)


def test_uniform_single_interval():
    bad = find_bad_intervals(Uniform01())
    assert bad.intervals == ((0.0, 1.0),)


def test_std_normal_has_none():
    assert find_bad_intervals(StdNormal()).intervals == ()
    # grid-scan oracle on [-8, 8]: h = F - t strictly decreasing
    t = np.linspace(-8, 8, 200_001)
    assert np.all(np.diff(StdNormal().cdf(t) - t) < 0)


def test_exponential_endpoint():
    bad = find_bad_intervals(EXP2)
    assert len(bad) == 1
    x, y = bad.intervals[0]
    assert x == 0.0
    assert abs(y - Y_STAR) < 1e-6
    assert bad.residuals[0] <= 1e-8


def test_cantor_whole_unit_interval():
    assert find_bad_intervals(CantorCdf()).intervals == ((0.0, 1.0),)


def test_two_components_have_unit_growth():
    bad = find_bad_intervals(TWO_BUMPS)
    assert len(bad) == 2
    (x1, y1), (x2, y2) = bad.intervals
    assert (x1, y1, x2, y2) == pytest.approx((0.0, 0.25, 0.375, 0.625), abs=1e-9)
    for x, y in bad.intervals:
        assert abs(TWO_BUMPS.cdf(y) - TWO_BUMPS.cdf(x) - (y - x)) <= 1e-8
    assert bad.total_length <= 1.0


def test_coarse_grid_resolution_error():
    with pytest.raises(ResolutionError):
        find_bad_intervals(TWO_BUMPS, grid_size=11)


def test_overlapping_bad_intervals_raise_consistency_error():
    # density above 1 on a bump: maximal bad intervals overlap and their union is not bad
    with pytest.raises(ConsistencyError):
        find_bad_intervals(Normal(0.0, 0.1))


def test_scan_range_must_cover_mass():
    with pytest.raises(ParameterError):
        find_bad_intervals(StdNormal(), scan_range=(-1.0, 1.0))
    with pytest.raises(ParameterError):
        find_bad_intervals(Uniform01(), grid_size=2)


def test_json_layout():
    data = json.loads(find_bad_intervals(EXP2).to_json())
    assert set(data[0]) == {"x", "y", "lemma_residual"}


def test_build_rejects_inconsistent_intervals():
    bogus = BadIntervalSet(((0.0, 2.0),), (0.0,), 1e-10)
    with pytest.raises(ConsistencyError):
        build_reduction(EXP2, bogus)


def test_uniform_reduction_is_identity():
    g = build_reduction(Uniform01())
    t = np.linspace(0, 1, 1001)
    assert np.array_equal(g(t), t)
    assert np.allclose(g.reduced_model.cdf(t), t, atol=1e-15)


def test_normal_reduction_is_probability_transform():
    g = build_reduction(StdNormal())
    t = np.linspace(-4, 4, 101)
    assert np.array_equal(g(t), StdNormal().cdf(t))
    u = np.linspace(0, 1, 101)
    assert np.allclose(g.reduced_model.cdf(u), u, atol=1e-15)


def test_exponential_pieces_and_continuity():
    g = build_reduction(EXP2)
    left = np.linspace(0, Y_STAR - 1e-6, 100)
    right = np.linspace(Y_STAR + 1e-6, 5, 100)
    assert np.allclose(g(left), left, atol=1e-12)
    assert np.allclose(g(right), 1 - np.exp(-2 * right), atol=1e-15)
    assert abs(Y_STAR - (1 - math.exp(-2 * Y_STAR))) < 1e-14
    assert abs(float(g(Y_STAR - 1e-12)) - float(g(Y_STAR + 1e-12))) < 1e-11


@pytest.mark.parametrize("model", [EXP2, StdNormal(), Uniform01(), CantorCdf(), TWO_BUMPS])
def test_g_is_one_lipschitz_and_monotone(model):
    g = build_reduction(model)
    rng = np.random.default_rng(0)
    lo, hi = g.bad.scan_range
    s, t = rng.uniform(lo - 1, hi + 1, (2, 100_000))
    assert np.all(np.abs(g(s) - g(t)) <= np.abs(s - t) + 1e-12)
    grid = np.linspace(lo - 1, hi + 1, 100_001)
    assert np.all(np.diff(g(grid)) >= 0)


def test_modulus_transfer():
    g = build_reduction(EXP2)
    G = g.reduced_model
    for d in (1e-3, 1e-2, 0.05, 0.2):
        assert G.omega(d) <= max(float(EXP2.omega(d)), d) + 1e-9


def test_reduced_cdf_identity_off_bad_image():
    g = build_reduction(EXP2)
    u = np.linspace(float(g(Y_STAR)) + 1e-9, 1.0, 10_001)
    assert np.max(np.abs(g.reduced_model.cdf(u) - u)) <= 1e-9


def test_reduced_cdf_is_law_of_reduced_sample():
    g = build_reduction(EXP2)
    x = EXP2.quantile(np.random.default_rng(4).random(200_000))
    y = g(x)
    u = np.linspace(0.05, 0.95, 19)
    emp = np.array([np.mean(y <= v) for v in u])
    assert np.max(np.abs(emp - g.reduced_model.cdf(u))) < 0.005


def test_reduced_antiderivative_against_quadrature():
    from scipy import integrate

    G = build_reduction(EXP2).reduced_model
    want = integrate.quad(G.cdf, 0.1, 0.9, points=[0.7968], epsabs=1e-13)[0]
    assert G.antiderivative(0.9) - G.antiderivative(0.1) == pytest.approx(want, abs=1e-10)


def test_reduce_path_properties():
    g = build_reduction(EXP2)
    assert np.all(reduce_path(g, np.full(5, 0.3)) == float(g(0.3)))
    x = np.sort(EXP2.quantile(np.random.default_rng(1).random(50)))
    y = reduce_path(g, x)
    assert np.all(np.diff(y) >= 0) and y.min() >= 0 and y.max() <= 1
    ident = build_reduction(Uniform01())
    u = np.random.default_rng(2).random(20)
    assert np.array_equal(reduce_path(ident, u), u)


def test_reduce_path_keeps_provenance():
    path = generate(ProcessSpec.iid(EXP2), 30, 3, 1)
    out = reduce_path(build_reduction(EXP2), path)
    assert out.spec == path.spec and out.master_seed == 3 and out.replicate_id == 1


def test_transport_exponential():
    g = build_reduction(EXP2)
    path = generate(ProcessSpec.iid(EXP2), 100, 11, 0)
    t = np.linspace(-0.5, 4.0, 1000)
    assert verify_transport(path, EXP2, g, t) < 1e-10


def test_transport_identity_is_exact():
    g = build_reduction(Uniform01())
    x = np.random.default_rng(3).random(100)
    assert verify_transport(x, Uniform01(), g, np.linspace(0, 1, 1000)) == 0.0


def test_transport_single_sample():
    g = build_reduction(EXP2)
    assert verify_transport(np.array([0.4]), EXP2, g, np.linspace(0, 3, 301)) < 1e-12


def test_g_csv_samples():
    text = build_reduction(EXP2).to_csv_samples(11)
    lines = text.strip().split("\n")
    assert lines[0] == "t,g" and len(lines) == 12
