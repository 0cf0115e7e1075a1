"""Monte Carlo checks of the standing assumptions and of the limit process.

Each check returns a report dataclass with ``to_dict`` (JSON-ready scalars)
and ``rows`` (a header plus tabular series for CSV).  Replicate ``r`` always
uses the stream of :func:`epl.procgen.replicate_rng` for ``(seed, r)``, so
reports do not depend on the number of worker threads.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .chaining import build_partition, smoothed_process
from .distmodel import DistributionModel, EmpiricalReference, Normal
from .empproc import ecdf_build, empirical_process, sup_distance
from .errors import ApplicabilityError, ParameterError
from .procgen import generate, markov_step, reference_cdf, replicate_rng, stationary_draws

__all__ = [
    "LipschitzFn",
    "Indicator",
    "CltReport",
    "Moment4Report",
    "CovKernelReport",
    "ErgodicityReport",
    "TightnessReport",
    "TrendReport",
    "ks_statistic",
    "long_run_variance",
    "lrv_estimate",
    "clt_check",
    "moment4_scan",
    "cov_kernel",
    "ergodicity_probe",
    "tightness_probe",
    "wilson_interval",
    "smoothing_trend",
    "reference_mean",
    "iid_fourth_moment",
    "bridge_covariance",
    "modulus_sup",
]

_QUAD_POINTS = 2**16
_ERGODIC_KEY = 2**31 - 2


# --- test functions -----------------------------------------------------------


@dataclass(frozen=True, eq=False)
class LipschitzFn:
    """A bounded Lipschitz function with its constants.

    ``norm`` is sup|f| + Lip(f) and ``m_f`` is max(1, sup|f|).
    """

    name: str
    func: object
    lip: float
    sup_bound: float

    def __call__(self, x):
        return self.func(np.asarray(x, dtype=float))

    @property
    def m_f(self):
        return max(1.0, self.sup_bound)

    @property
    def norm(self):
        return self.sup_bound + self.lip

    @property
    def is_constant(self):
        return self.lip == 0.0

    def shifted(self, c):
        """f - c."""
        f = self.func
        return LipschitzFn(f"{self.name}-{c:g}", lambda x: f(x) - c, self.lip, self.sup_bound + abs(c))

    def check(self, grid):
        """(max slope on grid, max |f| on grid); both must respect the constants."""
        grid = np.sort(np.asarray(grid, dtype=float))
        v = self(grid)
        dx = np.diff(grid)
        ok = dx > 0
        slope = float(np.max(np.abs(np.diff(v)[ok] / dx[ok]))) if np.any(ok) else 0.0
        return slope, float(np.max(np.abs(v)))

    @classmethod
    def identity(cls, bound=1.0):
        return cls("identity", lambda x: x, 1.0, float(bound))

    @classmethod
    def centered_identity(cls, center=0.5, bound=1.0):
        return cls("centered-identity", lambda x: x - center, 1.0, float(bound) + abs(center))

    @classmethod
    def constant(cls, c=1.0):
        return cls("constant", lambda x: np.full(np.shape(x), float(c)), 0.0, abs(float(c)))

    @classmethod
    def ramp(cls, a, b):
        """1 left of a, linear to 0 at b (the chaining kernels)."""
        if not b > a:
            raise ParameterError("ramp needs b > a")
        return cls(
            f"ramp[{a:g},{b:g}]",
            lambda x: np.clip((b - x) / (b - a), 0.0, 1.0),
            1.0 / (b - a),
            1.0,
        )

    @classmethod
    def piecewise_linear(cls, nodes, values):
        nodes = np.asarray(nodes, dtype=float)
        values = np.asarray(values, dtype=float)
        if nodes.size < 2 or nodes.size != values.size or np.any(np.diff(nodes) <= 0):
            raise ParameterError("piecewise-linear needs >= 2 strictly increasing nodes with matching values")
        lip = float(np.max(np.abs(np.diff(values) / np.diff(nodes))))
        return cls("piecewise-linear", lambda x: np.interp(x, nodes, values), lip, float(np.max(np.abs(values))))

    @classmethod
    def from_name(cls, name, bound=1.0):
        table = {
            "identity": lambda: cls.identity(bound),
            "id": lambda: cls.identity(bound),
            "centered-identity": lambda: cls.centered_identity(0.5, bound),
            "constant": lambda: cls.constant(1.0),
        }
        if name not in table:
            raise ParameterError(f"unknown test function {name!r}; choose from {sorted(table)}")
        return table[name]()


@dataclass(frozen=True)
class Indicator:
    """1{x <= t}."""

    t: float

    def __call__(self, x):
        return (np.asarray(x, dtype=float) <= self.t).astype(float)

    @property
    def name(self):
        return f"indicator({self.t:g})"


# --- small statistics helpers ---------------------------------------------------


def ks_statistic(sample, model):
    """sup_t |F_n(t) - F(t)| evaluated at the jumps and their left limits."""
    x = np.asarray(sample, dtype=float).reshape(-1)
    if x.size == 0:
        raise ParameterError("KS statistic of an empty sample")
    ecdf = ecdf_build(x)
    pts = ecdf.breakpoints
    f = np.asarray(model.cdf(pts), dtype=float)
    return float(max(np.max(np.abs(ecdf(pts) - f)), np.max(np.abs(f - ecdf.left_limit(pts)))))


def wilson_interval(successes, trials, confidence=0.95):
    if trials <= 0:
        return (0.0, 1.0)
    ci = stats.binomtest(int(successes), int(trials)).proportion_ci(confidence_level=confidence, method="wilson")
    return (float(ci.low), float(ci.high))


def lrv_estimate(values, lag=None):
    """gamma_0 + 2 sum_{k=1}^{L} (1 - k/(L+1)) gamma_k, clamped at 0."""
    v = np.asarray(values, dtype=float).reshape(-1)
    n = v.size
    if n < 2:
        raise ParameterError("long-run variance needs at least two observations")
    L = int(math.floor(n ** (1.0 / 3.0))) if lag is None else int(lag)
    if L < 0 or L > n // 10 and lag is not None:
        raise ParameterError(f"lag must lie in 0..n/10 = {n // 10}, got {L}")
    c = v - v.mean()
    if not np.any(c):
        return 0.0
    g0 = float(np.dot(c, c)) / n
    acc = g0
    for k in range(1, L + 1):
        acc += 2.0 * (1.0 - k / (L + 1.0)) * float(np.dot(c[:-k], c[k:])) / n
    return max(acc, 0.0)


def reference_mean(f, model, points=_QUAD_POINTS):
    """E f(X_0) and E|f(X_0) - E f(X_0)| by midpoint quadrature in the quantile scale."""
    u = (np.arange(points) + 0.5) / points
    q = np.asarray(model.quantile(u), dtype=float)
    v = f(q)
    mu = math.fsum(v.tolist()) / points
    return mu, math.fsum(np.abs(v - mu).tolist()) / points


def _map(fn, ids, threads):
    ids = list(ids)
    if threads and threads > 1 and len(ids) > 1:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            return list(pool.map(fn, ids))
    return [fn(i) for i in ids]


def _fit_slope(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 2:
        return float("nan")
    return float(np.polyfit(x, y, 1)[0])


# --- long-run variance and CLT ---------------------------------------------------


def long_run_variance(spec, f, n, lag=None, master_seed=0, replicate_id=0):
    """Bartlett long-run variance of f(X_1..X_n) for one generated path."""
    path = generate(spec, n, master_seed, replicate_id)
    return lrv_estimate(f(path.values), lag)


@dataclass
class CltReport:
    n: int
    replicates: int
    sigma2_hat: float
    ks: float
    threshold: float
    passed: bool
    degenerate: bool
    center: float
    warnings: list = field(default_factory=list)
    sums: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def to_dict(self):
        return {
            "n": self.n,
            "replicates": self.replicates,
            "sigma2_hat": self.sigma2_hat,
            "ks": self.ks,
            "threshold": self.threshold,
            "pass": self.passed,
            "degenerate": self.degenerate,
            "center": self.center,
            "warnings": list(self.warnings),
        }

    def rows(self):
        return [("replicate", "normalized_sum")] + [(i, float(s)) for i, s in enumerate(self.sums)]


def _center_for(spec, f, center, pooled):
    if isinstance(center, (int, float)) and not isinstance(center, bool):
        return float(center)
    model = reference_cdf(spec)
    if center == "pooled" or (center == "auto" and isinstance(model, EmpiricalReference)):
        return pooled()
    return reference_mean(f, model)[0]


def clt_check(spec, f, n, reps, threshold=0.05, master_seed=0, lag=None, center="auto", threads=1):
    """KS distance of R normalized sums n^{-1/2} sum (f(X_i) - E f) from N(0, sigma2_hat).

    ``sigma2_hat`` averages the per-replicate Bartlett estimates.  Centering
    uses the exact marginal mean when the marginal is known in closed form and
    the pooled mean of all replicates otherwise.
    """
    if int(n) != n or n < 10:
        raise ParameterError("n must be an integer >= 10")
    if int(reps) != reps or reps < 2:
        raise ParameterError("need at least two replicates")
    warnings = []
    if reps < 100:
        warnings.append(f"only {reps} replicates: KS test has little power")

    def one(r):
        fx = f(generate(spec, n, master_seed, r).values)
        return math.fsum(fx.tolist()), lrv_estimate(fx, lag)

    res = _map(one, range(int(reps)), threads)
    totals = np.array([a for a, _ in res])
    lrvs = np.array([b for _, b in res])
    mu = _center_for(spec, f, center, lambda: math.fsum(totals.tolist()) / (reps * n))
    sums = (totals - n * mu) / math.sqrt(n)
    sigma2 = float(np.mean(lrvs))
    if f.is_constant or sigma2 <= 0.0:
        return CltReport(int(n), int(reps), 0.0, float("nan"), threshold, False, True, mu, warnings, sums)
    ks = ks_statistic(sums, Normal(0.0, math.sqrt(sigma2)))
    return CltReport(int(n), int(reps), sigma2, ks, threshold, bool(ks < threshold), False, mu, warnings, sums)


# --- fourth moments ----------------------------------------------------------------


def iid_fourth_moment(n, mu2, mu4):
    """E(S_n^4) = n mu4 + 3 n (n-1) mu2^2 for i.i.d. centered summands."""
    return n * mu4 + 3.0 * n * (n - 1) * mu2**2


@dataclass
class Moment4Report:
    n_list: list
    moments: list
    bounds: list
    ratios: list
    max_ratio: float
    slope: float
    slope_threshold: float
    passed: bool
    alpha: float
    beta: float
    f_norm: float
    m_f: float
    l1: float
    replicates: int

    def to_dict(self):
        return {
            "n_list": list(self.n_list),
            "moments": list(self.moments),
            "ratios": list(self.ratios),
            "max_ratio": self.max_ratio,
            "slope": self.slope,
            "slope_threshold": self.slope_threshold,
            "pass": self.passed,
            "alpha": self.alpha,
            "beta": self.beta,
            "f_norm": self.f_norm,
            "m_f": self.m_f,
            "l1": self.l1,
            "replicates": self.replicates,
        }

    def rows(self):
        out = [("n", "moment4", "bound", "ratio")]
        out += [(n, m, b, r) for n, m, b, r in zip(self.n_list, self.moments, self.bounds, self.ratios)]
        return out


def moment4_scan(spec, f, n_list, reps, alpha=3.0, beta=2.0, master_seed=0, slope_threshold=0.1, threads=1):
    """Monte Carlo E(sum f(X_i))^4 against m_f^3 (n |f|_1 log^a(1+|f|) + n^2 |f|_1^2 log^b(1+|f|)).

    f is centered under the marginal first.  Since the constant in front of
    the bound is unknown the check is on the trend: the least-squares slope of
    log ratio against log n must stay below ``slope_threshold``.
    """
    n_list = [int(n) for n in n_list]
    if not n_list:
        raise ParameterError("n_list must not be empty")
    if any(n < 1 for n in n_list):
        raise ParameterError("every n must be positive")
    if alpha < 0 or beta < 0:
        raise ParameterError("alpha and beta must be nonnegative")
    if int(reps) != reps or reps < 2:
        raise ParameterError("need at least two replicates")
    model = reference_cdf(spec)
    mu, _ = reference_mean(f, model)
    fc = f.shifted(mu)
    _, l1 = reference_mean(fc, model)
    norm = fc.norm
    mf = fc.m_f
    nmax = max(n_list)

    def one(r):
        # prefix sums of a single path give every n in the list
        fx = fc(generate(spec, nmax, master_seed, r).values)
        cs = np.cumsum(fx)
        return np.array([cs[n - 1] for n in n_list])

    sums = np.vstack(_map(one, range(int(reps)), threads))
    moments = [math.fsum((sums[:, i] ** 4).tolist()) / reps for i in range(len(n_list))]
    la = math.log1p(norm)
    bounds = [mf**3 * (n * l1 * la**alpha + n * n * l1 * l1 * la**beta) for n in n_list]
    ratios = [m / b if b > 0 else float("inf") for m, b in zip(moments, bounds)]
    finite = all(np.isfinite(ratios)) and all(r > 0 for r in ratios)
    slope = _fit_slope(np.log(n_list), np.log(ratios)) if finite and len(n_list) > 1 else 0.0
    passed = bool(finite and slope <= slope_threshold)
    return Moment4Report(
        n_list, moments, bounds, ratios, float(max(ratios)), slope, slope_threshold, passed,
        float(alpha), float(beta), float(norm), float(mf), float(l1), int(reps),
    )


# --- covariance kernel -------------------------------------------------------------


@dataclass
class CovKernelReport:
    labels: list
    empirical: np.ndarray
    predicted: np.ndarray
    stderr: np.ndarray
    lag: int
    n: int
    replicates: int
    tolerance: float
    expected: np.ndarray | None = None

    @property
    def discrepancy(self):
        return float(np.max(np.abs(self.empirical - self.predicted)))

    @property
    def max_error(self):
        if self.expected is None:
            return float("nan")
        return float(np.max(np.abs(self.empirical - self.expected)))

    @property
    def passed(self):
        ref = self.predicted if self.expected is None else self.expected
        return bool(np.max(np.abs(self.empirical - ref)) <= self.tolerance)

    def to_dict(self):
        d = {
            "labels": list(self.labels),
            "lag": self.lag,
            "n": self.n,
            "replicates": self.replicates,
            "tolerance": self.tolerance,
            "discrepancy": self.discrepancy,
            "pass": self.passed,
        }
        if self.expected is not None:
            d["max_error_vs_expected"] = self.max_error
        return d

    def rows(self):
        head = ("s", "t", "empirical", "predicted", "stderr") + (("expected",) if self.expected is not None else ())
        out = [head]
        for i, a in enumerate(self.labels):
            for j, b in enumerate(self.labels):
                row = (a, b, float(self.empirical[i, j]), float(self.predicted[i, j]), float(self.stderr[i, j]))
                if self.expected is not None:
                    row += (float(self.expected[i, j]),)
                out.append(row)
        return out


def _as_test_fn(obj):
    if isinstance(obj, (LipschitzFn, Indicator)):
        return obj
    return Indicator(float(obj))


def cov_kernel(spec, test_fns, n, reps, lag=None, master_seed=0, tolerance=0.03, expected=None, threads=1):
    """Covariances of the normalized sums n^{-1/2} sum (a(X_i) - E a) for every pair of test functions.

    Numbers in ``test_fns`` stand for indicators 1{x <= t}.  The prediction is
    the truncated series sum_{|k| <= L} Cov(a(X_0), b(X_k)) estimated from
    lagged cross-covariances pooled over replicates.
    """
    fns = [_as_test_fn(o) for o in test_fns]
    if not fns:
        raise ParameterError("need at least one test function")
    if int(reps) != reps or reps < 2:
        raise ParameterError("need at least two replicates")
    n = int(n)
    L = int(math.floor(n ** (1.0 / 3.0))) if lag is None else int(lag)
    if not (0 <= L < n):
        raise ParameterError("lag must lie in 0..n-1")
    model = reference_cdf(spec)
    means = np.array(
        [float(model.cdf(g.t)) if isinstance(g, Indicator) else reference_mean(g, model)[0] for g in fns]
    )
    p = len(fns)

    def one(r):
        x = generate(spec, n, master_seed, r).values
        vals = np.vstack([g(x) for g in fns])  # (p, n)
        normalized = (vals.sum(axis=1) - n * means) / math.sqrt(n)
        c = vals - vals.mean(axis=1, keepdims=True)
        cross = np.empty((L + 1, p, p))
        for k in range(L + 1):
            cross[k] = c[:, : n - k] @ c[:, k:].T / n  # Cov(a(X_0), b(X_k))
        return normalized, cross

    res = _map(one, range(int(reps)), threads)
    u = np.vstack([a for a, _ in res])
    cross = np.mean(np.stack([b for _, b in res]), axis=0)
    emp = np.atleast_2d(np.cov(u, rowvar=False, ddof=1))
    pred = cross[0] + sum(cross[k] + cross[k].T for k in range(1, L + 1))
    um = u - u.mean(axis=0)
    prod = um[:, :, None] * um[:, None, :]
    se = prod.std(axis=0, ddof=1) / math.sqrt(reps)
    labels = [g.t if isinstance(g, Indicator) else g.name for g in fns]
    exp = None if expected is None else np.asarray(expected, dtype=float)
    return CovKernelReport(labels, emp, pred, se, L, n, int(reps), float(tolerance), exp)


def bridge_covariance(points):
    s = np.asarray(points, dtype=float)
    return np.minimum.outer(s, s) - np.multiply.outer(s, s)


# --- geometric ergodicity ---------------------------------------------------------


@dataclass
class ErgodicityReport:
    k_list: list
    diffs: list
    theta_hat: float
    degenerate: bool
    start_grid: list
    inner: int

    def to_dict(self):
        return {
            "k_list": list(self.k_list),
            "theta_hat": self.theta_hat,
            "degenerate": self.degenerate,
            "inner": self.inner,
            "start_points": len(self.start_grid),
        }

    def rows(self):
        return [("k", "max_abs_diff")] + list(zip(self.k_list, self.diffs))


def ergodicity_probe(spec, f, k_list=tuple(range(1, 11)), start_grid=None, inner=10_000, master_seed=0):
    """Fit theta in max_x |E(f(X_k) | X_0 = x) - E f(X_0)| ~ C theta^k.

    Every start point and the stationary ensemble are driven by the same
    innovations (common random numbers), so the differences isolate the
    memory of the start point.
    """
    if not spec.is_markov:
        raise ApplicabilityError(f"process kind {spec.kind!r} has no Markov transition here")
    k_list = sorted(int(k) for k in k_list)
    if not k_list or k_list[0] < 1:
        raise ParameterError("k_list must hold positive integers")
    rng = replicate_rng(master_seed, _ERGODIC_KEY)
    stat = stationary_draws(spec, int(inner), rng)
    if start_grid is None:
        start_grid = np.linspace(stat.min(), stat.max(), 21)
    starts = np.asarray(start_grid, dtype=float)
    # one state per (start point, inner sample) plus the stationary row
    state = np.vstack([np.repeat(starts[:, None], inner, axis=1), stat[None, :]])
    diffs = []
    kmax = k_list[-1]
    want = set(k_list)
    for k in range(1, kmax + 1):
        shared = np.random.Generator(np.random.Philox(np.random.SeedSequence(master_seed, spawn_key=(_ERGODIC_KEY, k))))
        noise_rng = _FixedRng(shared.random(inner))
        state = markov_step(spec, state, noise_rng)
        if k in want:
            fv = f(state).mean(axis=1)
            diffs.append(float(np.max(np.abs(fv[:-1] - fv[-1]))))
    pos = [(k, d) for k, d in zip(k_list, diffs) if d > 1e-300]
    degenerate = f.is_constant or len(pos) < 2
    theta = float("nan") if degenerate else math.exp(_fit_slope([k for k, _ in pos], np.log([d for _, d in pos])))
    return ErgodicityReport(k_list, diffs, theta, bool(degenerate), starts.tolist(), int(inner))


class _FixedRng:
    """Hands the same innovation row to every chain."""

    def __init__(self, row):
        self._row = row

    def random(self, shape):
        return np.broadcast_to(self._row, shape)


# --- tightness ---------------------------------------------------------------------


def _sparse_max(vals):
    table = [vals]
    j = 1
    while (1 << j) <= vals.size:
        prev = table[-1]
        half = 1 << (j - 1)
        table.append(np.maximum(prev[:-half], prev[half:]))
        j += 1
    return table


def _range_max(table, lo, hi):
    """max vals[lo..hi] (inclusive) for arrays of bounds with lo <= hi."""
    length = hi - lo + 1
    j = np.floor(np.log2(length)).astype(int)
    out = np.empty(lo.size)
    for level in np.unique(j):
        sel = j == level
        t = table[level]
        out[sel] = np.maximum(t[lo[sel]], t[hi[sel] - (1 << level) + 1])
    return out


def modulus_sup(x, model, delta, interior_grid=64):
    """sup_{|t-s| < delta} |U_n(t) - U_n(s)| for the sample ``x``.

    Upward excursions need a window from just below one order statistic to
    another, so they are enumerated exactly.  Downward excursions pin one
    window end at a sample point or a support end; the other end slides over
    a gap.  For uniform F the mass of a sliding window is its length and the
    computation is exact; otherwise the window mass is maximized over
    ``interior_grid`` positions per gap.
    """
    xs = np.sort(np.asarray(x, dtype=float))
    n = xs.size
    rn = math.sqrt(n)
    lo_s, hi_s = model.support
    uniform = getattr(model, "form", "") == "uniform"
    F = lambda t: np.asarray(model.cdf(t), dtype=float)
    fx = F(xs)
    idx = np.arange(n)

    # upward: (q - p + 1)/n - (F(x_q) - F(x_p)) with x_q - x_p < delta
    pmin = np.searchsorted(xs, xs - delta, side="right")
    pmin = np.minimum(pmin, idx)
    table = _sparse_max(fx - idx / n)  # maximize F(x_p) - p/n
    up = (idx + 1) / n - fx + _range_max(table, pmin, idx)
    best_up = float(np.max(up)) if n else 0.0

    # downward: windows (a, b) free of interior points apart from the counted ones
    lo_end = lo_s if np.isfinite(lo_s) else float(model.quantile(1e-12))
    hi_end = hi_s if np.isfinite(hi_s) else float(model.quantile(1.0 - 1e-12))
    pts = np.concatenate([[min(lo_end, xs[0])], xs, [max(hi_end, xs[-1])]])
    fp = F(pts)
    best_down = 0.0
    # (a) both ends at points: window (pts[p], pts[r]) open on the right, counts p+1..r-1
    m = pts.size
    all_idx = np.arange(m)
    rmin = np.searchsorted(pts, pts - delta, side="right")
    rmin = np.minimum(rmin, all_idx)
    # value = F(pts[r]) - F(pts[p]) - (r - p - 1)/n, maximize -F(pts[p]) + p/n over p in [rmin, r-1]
    table2 = _sparse_max(-fp + all_idx / n)
    valid = rmin <= all_idx - 1
    rr = all_idx[valid]
    if rr.size:
        cand = fp[rr] - (rr - 1) / n + _range_max(table2, rmin[valid], rr - 1)
        best_down = max(best_down, float(np.max(cand)))
    # (b)/(c) one end pinned, the other slides to length delta
    right = pts + delta
    cnt_r = np.searchsorted(pts[1:-1], right, side="left") - np.searchsorted(pts[1:-1], pts, side="right")
    mass_r = F(right) - fp
    best_down = max(best_down, float(np.max(mass_r - cnt_r / n)))
    left = pts - delta
    cnt_l = np.searchsorted(pts[1:-1], pts, side="left") - np.searchsorted(pts[1:-1], left, side="right")
    mass_l = fp - F(left)
    best_down = max(best_down, float(np.max(mass_l - cnt_l / n)))
    if not uniform:
        # slide a length-delta window inside every gap wider than delta
        gaps = np.flatnonzero(np.diff(pts) > delta)
        for g in gaps:
            a, b = pts[g], pts[g + 1]
            s = np.linspace(a, b - delta, interior_grid)
            mass = F(s + delta) - F(s)
            best_down = max(best_down, float(np.max(mass)))
    return rn * max(best_up, best_down)


@dataclass
class TightnessReport:
    delta: float
    eps: float
    n: int
    replicates: int
    exceed: int
    estimate: float
    wilson: tuple
    sups: np.ndarray = field(default_factory=lambda: np.empty(0), repr=False)

    def to_dict(self):
        return {
            "delta": self.delta,
            "eps": self.eps,
            "n": self.n,
            "replicates": self.replicates,
            "exceed": self.exceed,
            "estimate": self.estimate,
            "wilson_low": self.wilson[0],
            "wilson_high": self.wilson[1],
        }

    def rows(self):
        return [("replicate", "modulus_sup")] + [(i, float(s)) for i, s in enumerate(self.sups)]


def tightness_probe(spec, n, delta, eps, reps, master_seed=0, model=None, threads=1):
    """Fraction of replicates with sup_{|t-s|<delta} |U_n(t) - U_n(s)| >= eps."""
    if not (0 < delta):
        raise ParameterError("delta must be positive")
    if not eps > 0:
        raise ParameterError("eps must be positive")
    if int(reps) != reps or reps < 1:
        raise ParameterError("need at least one replicate")
    model = model or reference_cdf(spec)
    sups = np.array(_map(lambda r: modulus_sup(generate(spec, n, master_seed, r).values, model, delta),
                         range(int(reps)), threads))
    k = int(np.count_nonzero(sups >= eps))
    return TightnessReport(float(delta), float(eps), int(n), int(reps), k, k / reps, wilson_interval(k, reps), sups)


# --- smoothing error trend ---------------------------------------------------------


@dataclass
class TrendReport:
    m_list: list
    medians: list
    bands: list
    n: int
    replicates: int
    strictly_decreasing: bool
    separated: bool

    def to_dict(self):
        return {
            "m_list": list(self.m_list),
            "medians": list(self.medians),
            "median_bands": [list(b) for b in self.bands],
            "n": self.n,
            "replicates": self.replicates,
            "strictly_decreasing": self.strictly_decreasing,
            "bands_separated": self.separated,
        }

    def rows(self):
        return [("m", "median", "band_low", "band_high")] + [
            (m, md, b[0], b[1]) for m, md, b in zip(self.m_list, self.medians, self.bands)
        ]


def _median_band(values, confidence=0.95):
    """Distribution-free confidence band for the median from binomial order statistics."""
    v = np.sort(values)
    R = v.size
    lo, hi = stats.binom.interval(confidence, R, 0.5)
    lo = int(max(lo - 1, 0))
    hi = int(min(hi, R - 1))
    return float(v[lo]), float(v[hi])


def smoothing_trend(spec, n, m_list, reps, master_seed=0, model=None, threads=1):
    """Medians over replicates of sup_t |U_n(t) - U_n^(m)(t)| for each m."""
    model = model or reference_cdf(spec)
    parts = [build_partition(model, m) for m in m_list]

    def one(r):
        x = generate(spec, n, master_seed, r).values
        proc = empirical_process(x, model)
        return [sup_distance(proc, smoothed_process(x, p).process) for p in parts]

    table = np.array(_map(one, range(int(reps)), threads))
    med = [float(np.median(table[:, i])) for i in range(len(parts))]
    bands = [_median_band(table[:, i]) for i in range(len(parts))]
    dec = all(a > b for a, b in zip(med, med[1:]))
    sep = all(a[0] > b[1] for a, b in zip(bands, bands[1:]))
    return TrendReport([int(m) for m in m_list], med, bands, int(n), int(reps), bool(dec), bool(sep))
