"""Reduction of an arbitrary continuous marginal to a bounded one.

An interval [x, y] with x < y is *bad* when F(y) - F(x) >= y - x, i.e. when
h(t) = F(t) - t satisfies h(y) >= h(x).  A point t is covered by some bad
interval exactly when there are x <= t <= y, x < y, with h(x) <= h(y); on a
grid this is a comparison of a running minimum from the left with a running
maximum from the right.  The reduction g follows F off the covered set and
has unit slope across each covered component, so that g is 1-Lipschitz and
U_n(t) = V_n(g(t)) with V_n the empirical process of Y_i = g(X_i).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .distmodel import DistributionModel, _prep, _wrap
from .empproc import ecdf_build
from .errors import ConsistencyError, ParameterError, ResolutionError

__all__ = [
    "BadIntervalSet",
    "ReductionMap",
    "ReducedCdf",
    "find_bad_intervals",
    "build_reduction",
    "reduce_path",
    "verify_transport",
    "default_scan_range",
]

DEFAULT_GRID = 100_000
DEFAULT_TOL = 1e-10
LEMMA_TOL = 1e-8
TAIL_MASS = 1e-12
_RANGE_SLACK = 1e-9


@dataclass(frozen=True)
class BadIntervalSet:
    intervals: tuple
    residuals: tuple
    tol: float
    scan_range: tuple = (float("-inf"), float("inf"))

    @property
    def total_length(self):
        return float(sum(y - x for x, y in self.intervals))

    def __len__(self):
        return len(self.intervals)

    def to_list(self):
        return [{"x": x, "y": y, "lemma_residual": r} for (x, y), r in zip(self.intervals, self.residuals)]

    def to_json(self):
        return json.dumps(self.to_list(), indent=2)


def default_scan_range(model):
    """Support of the model, with unbounded ends cut at the 1e-12 tail quantiles."""
    lo, hi = model.support
    if not np.isfinite(lo):
        lo = float(model.quantile(TAIL_MASS))
    if not np.isfinite(hi):
        hi = float(model.quantile(1.0 - TAIL_MASS))
    return float(lo), float(hi)


def _running(hv):
    pmin_in = np.minimum.accumulate(hv)
    smax_in = np.maximum.accumulate(hv[::-1])[::-1]
    pmin_ex = np.concatenate([[np.inf], pmin_in[:-1]])
    smax_ex = np.concatenate([smax_in[1:], [-np.inf]])
    return pmin_in, pmin_ex, smax_in, smax_ex


def _bisect(pred, a, b, tol):
    """pred(a) is False, pred(b) is True; returns (last False, first True)."""
    for _ in range(200):
        if b - a <= tol:
            break
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:
            break
        if pred(mid):
            b = mid
        else:
            a = mid
    return a, b


def find_bad_intervals(model, scan_range=None, grid_size=DEFAULT_GRID, tol=DEFAULT_TOL, lemma_tol=LEMMA_TOL):
    """Maximal components of the union of bad intervals of ``model``.

    Endpoints are refined to ``tol``; the returned endpoints sit just outside
    the covered set.  Each component must satisfy F(y) - F(x) = y - x within
    ``lemma_tol``; a covered component that fails it is not itself a bad
    interval (overlapping bad intervals chained together) and raises
    :class:`ConsistencyError`.
    """
    if not model.continuous:
        raise ParameterError("bad-interval scan needs a continuous distribution function")
    if int(grid_size) != grid_size or grid_size < 3:
        raise ParameterError("grid_size must be an integer >= 3")
    if not tol > 0:
        raise ParameterError("tol must be positive")
    lo, hi = default_scan_range(model) if scan_range is None else map(float, scan_range)
    if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
        raise ParameterError(f"scan range must be a finite interval, got [{lo}, {hi}]")
    s_lo, s_hi = model.support
    if float(model.cdf(lo)) > _RANGE_SLACK + (TAIL_MASS if not np.isfinite(s_lo) else 0.0) or \
            1.0 - float(model.cdf(hi)) > _RANGE_SLACK + (TAIL_MASS if not np.isfinite(s_hi) else 0.0):
        raise ParameterError(f"scan range [{lo}, {hi}] leaves more than {_RANGE_SLACK:g} probability outside")
    return _scan(model, lo, hi, int(grid_size), tol, lemma_tol, rescan=True)


def _scan(model, lo, hi, grid_size, tol, lemma_tol, rescan):
    grid = np.linspace(lo, hi, int(grid_size))
    cell = (hi - lo) / (int(grid_size) - 1)
    hv = np.asarray(model.cdf(grid), dtype=float) - grid
    pmin_in, pmin_ex, smax_in, smax_ex = _running(hv)
    covered = (pmin_in <= smax_ex) | (pmin_ex <= smax_in)

    def h(t):
        return float(model.cdf(t)) - t

    # run boundaries
    edges = np.flatnonzero(np.diff(covered.astype(np.int8)))
    starts = [0] if covered[0] else []
    ends = []
    for e in edges:
        if covered[e + 1]:
            starts.append(e + 1)
        else:
            ends.append(e)
    if covered[-1]:
        ends.append(covered.size - 1)

    intervals = []
    residuals = []
    for i, j in zip(starts, ends):
        if j - i < 1:
            raise ResolutionError(
                f"covered run near t={grid[i]:.6g} spans a single grid cell; increase grid_size"
            )
        if i == 0:
            x = lo
        else:
            # covered(t) for t in (grid[i-1], grid[i]): either t starts an
            # interval reaching the covered grid point beyond, or a point left
            # of t pairs with t or beyond
            a0, b0 = grid[i - 1], grid[i]
            left_min, right_max = pmin_in[i - 1], smax_in[i]

            def cov_left(t, left_min=left_min, right_max=right_max):
                ht = h(t)
                return ht <= right_max or left_min <= max(ht, right_max)

            x, _ = _bisect(cov_left, a0, b0, tol)
        if j == covered.size - 1:
            y = hi
        else:
            a0, b0 = grid[j], grid[j + 1]
            left_min, right_max = pmin_in[j], smax_in[j + 1]

            def unc_right(t, left_min=left_min, right_max=right_max):
                ht = h(t)
                return not (left_min <= ht or min(ht, left_min) <= right_max)

            _, y = _bisect(unc_right, a0, b0, tol)
        if intervals and x - intervals[-1][1] < cell:
            raise ResolutionError(
                f"components ending at {intervals[-1][1]:.10g} and starting at {x:.10g} are closer "
                f"than one grid cell ({cell:.3g}); increase grid_size"
            )
        res = abs(h(y) - h(x))
        if res > lemma_tol and rescan:
            # pairs covering points of a maximal component lie inside it, so a
            # finer scan of [x, y] alone tells merged neighbours from overlaps
            try:
                inner = _scan(model, x, y, grid_size, tol, lemma_tol, rescan=False)
            except ConsistencyError:
                inner = None
            if inner is not None and len(inner) != 1:
                raise ResolutionError(
                    f"covered run [{x:.10g}, {y:.10g}] splits into {len(inner)} components on a finer "
                    f"grid; cells of width {cell:.3g} cannot separate them, increase grid_size"
                )
        if res > lemma_tol:
            raise ConsistencyError(
                f"covered component [{x:.10g}, {y:.10g}] has |F(y)-F(x)-(y-x)| = {res:.3g}; "
                "it is a union of overlapping bad intervals, not a single bad interval"
            )
        intervals.append((float(x), float(y)))
        residuals.append(float(res))
    return BadIntervalSet(tuple(intervals), tuple(residuals), float(tol), (float(lo), float(hi)))


class ReducedCdf(DistributionModel):
    """G = F o g^{-1}: F(x_i + u - F(x_i)) on the image of each bad interval,
    the identity elsewhere."""

    form = "reduced"

    def __init__(self, reduction):
        self._r = reduction

    @property
    def support(self):
        return (0.0, 1.0)

    def cdf(self, u):
        u, scalar = _prep(u)
        r = self._r
        out = np.clip(u, 0.0, 1.0)
        for (x, y), fx, gy in zip(r.bad.intervals, r._fx, r._gy):
            sel = (u >= fx) & (u <= gy)
            if np.any(sel):
                out = np.where(sel, r.model.cdf(x + (u - fx)), out)
        return _wrap(np.clip(out, 0.0, 1.0), scalar)

    def antiderivative(self, v):
        v, scalar = _prep(v)
        r = self._r
        vc = np.clip(v, 0.0, 1.0)
        out = 0.5 * vc * vc
        for (x, y), fx, gy in zip(r.bad.intervals, r._fx, r._gy):
            # replace the identity contribution on [fx, min(v, gy)] by the shifted F
            top = np.clip(vc, fx, gy)
            shifted = r.model.antiderivative(x + (top - fx)) - r.model.antiderivative(x)
            out = out - 0.5 * (top * top - fx * fx) + shifted
        out = out + np.maximum(v - 1.0, 0.0)
        return _wrap(out, scalar)

    def omega(self, delta, grid_size=20001):
        """Grid estimate of sup |G(u+delta) - G(u)|."""
        d, scalar = _prep(delta)
        grid = np.linspace(0.0, 1.0, grid_size)
        gv = self.cdf(grid)
        out = np.array([np.max(self.cdf(np.minimum(grid + dd, 1.0)) - gv) if dd > 0 else 0.0 for dd in d.reshape(-1)])
        return _wrap(out.reshape(d.shape), scalar)

    def to_dict(self):
        return {"form": self.form, "intervals": [list(iv) for iv in self._r.bad.intervals]}


@dataclass(frozen=True, eq=False)
class ReductionMap:
    """g(t) = F(x_i) + t - x_i on the bad interval [x_i, y_i], F(t) elsewhere.

    Endpoints returned by the scan satisfy F(x_i) + y_i - x_i >= F(y_i) up to
    the lemma tolerance; capping the unit-slope piece at F(y_i) keeps g
    continuous and 1-Lipschitz exactly.
    """

    model: DistributionModel
    bad: BadIntervalSet

    def __post_init__(self):
        xs = np.array([iv[0] for iv in self.bad.intervals], dtype=float)
        ys = np.array([iv[1] for iv in self.bad.intervals], dtype=float)
        if xs.size and (np.any(ys <= xs) or np.any(xs[1:] <= ys[:-1])):
            raise ConsistencyError("bad intervals must be disjoint, sorted and nondegenerate")
        fx = np.asarray(self.model.cdf(xs), dtype=float).reshape(-1)
        fy = np.asarray(self.model.cdf(ys), dtype=float).reshape(-1)
        gy = np.minimum(fx + (ys - xs), fy) if xs.size else fx
        object.__setattr__(self, "_xs", xs)
        object.__setattr__(self, "_ys", ys)
        object.__setattr__(self, "_fx", fx)
        object.__setattr__(self, "_fy", fy)
        object.__setattr__(self, "_gy", gy)

    def __call__(self, t):
        t, scalar = _prep(t)
        out = np.asarray(self.model.cdf(t), dtype=float)
        if self._xs.size:
            k = np.searchsorted(self._xs, t, side="right") - 1
            kc = np.clip(k, 0, None)
            inside = (k >= 0) & (t <= self._ys[kc])
            lin = np.minimum(self._fx[kc] + (t - self._xs[kc]), self._fy[kc])
            out = np.where(inside, lin, out)
        return _wrap(out, scalar)

    def inverse(self, u):
        """g^{-1}(u) = sup{s : g(s) <= u}."""
        u, scalar = _prep(u)
        flat = u.reshape(-1)
        out = np.asarray(self.model.quantile_clamped(flat), dtype=float).copy()
        for x, fx, gy in zip(self._xs, self._fx, self._gy):
            sel = (flat >= fx) & (flat < gy)
            out[sel] = x + (flat[sel] - fx)
        return _wrap(out.reshape(u.shape), scalar)

    @property
    def reduced_model(self):
        return ReducedCdf(self)

    def to_csv_samples(self, n=1001):
        lo, hi = self.bad.scan_range
        t = np.linspace(lo, hi, n)
        lines = ["t,g"] + [f"{a:.17g},{b:.17g}" for a, b in zip(t, self(t))]
        return "\n".join(lines) + "\n"


def build_reduction(model, bad=None, lemma_tol=LEMMA_TOL):
    """Assemble g from a validated bad-interval set (scanned if not given)."""
    if bad is None:
        bad = find_bad_intervals(model, lemma_tol=lemma_tol)
    for x, y in bad.intervals:
        res = abs(float(model.cdf(y)) - float(model.cdf(x)) - (y - x))
        if res > lemma_tol:
            raise ConsistencyError(f"interval [{x}, {y}] violates F(y)-F(x)=y-x by {res:.3g}")
    return ReductionMap(model, bad)


def reduce_path(g, path):
    """Y_i = g(X_i); keeps ProcessPath provenance when given one."""
    vals = np.asarray(getattr(path, "values", path), dtype=float)
    out = np.clip(np.asarray(g(vals), dtype=float), 0.0, 1.0)
    if hasattr(path, "spec"):
        from .procgen import ProcessPath

        return ProcessPath(out, path.spec, path.master_seed, path.replicate_id)
    return out


def verify_transport(path, model, g, t_grid):
    """max over t of |U_n(t) - V_n(g(t))| with V_n built from (g(X), G)."""
    x = np.asarray(getattr(path, "values", path), dtype=float)
    n = x.size
    t = np.asarray(t_grid, dtype=float)
    y = np.asarray(reduce_path(g, x), dtype=float)
    fn = ecdf_build(x)
    gn = ecdf_build(y)
    big_g = g.reduced_model
    rn = math.sqrt(n)
    u = rn * (fn(t) - model.cdf(t))
    gt = g(t)
    v = rn * (gn(gt) - big_g.cdf(gt))
    return float(np.max(np.abs(u - v))) if t.size else 0.0
