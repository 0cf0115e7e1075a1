"""Lipschitz chaining approximation of the empirical process.

The support of F is cut at the quantiles t_j = F^{-1}(j/m).  On the cell
[t_{j-1}, t_j) the indicator 1{x <= t} is replaced by the ramp phi_j that
falls from 1 at t_{j-2} to 0 at t_{j-1}; this gives the smoothed process
U_n^(m).  The gap between F_n(t) and its smoothed version is split along a
chain of ever steeper ramps anchored at the dyadic refinement points s_l^(k)
of the cell, which telescopes exactly.

Ramp kernels
------------
``ramp(x; a, b)`` is 1 for x <= a, (b - x)/(b - a) on (a, b] and 0 beyond;
it equals phi((x - b)/(b - a)).  Its mean under F is the average of F over
[a, b], which every model provides in closed form through its antiderivative.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distmodel import DistributionModel
from .empproc import StepFunction, ecdf_build
from .errors import (
    CoarsePartitionError,
    ConsistencyError,
    DegeneratePartitionError,
    DomainError,
    ParameterError,
)

__all__ = [
    "phi_eval",
    "ramp",
    "Partition",
    "DyadicRefinement",
    "SmoothedProcess",
    "ChainTerms",
    "build_partition",
    "refine_level",
    "chain_index",
    "smoothed_process",
    "choose_chain_depth",
    "chain_decomposition",
    "chain_budget",
    "bound_shape",
    "psi_difference_l1",
    "ramp_slope_bound",
    "MIN_GAP",
]

MIN_GAP = 1e-12


def phi_eval(u):
    """1 on (-inf, -1], -u on (-1, 0], 0 on (0, inf)."""
    u = np.asarray(u, dtype=float)
    out = np.where(u <= -1.0, 1.0, np.where(u <= 0.0, -u, 0.0))
    return float(out) if out.ndim == 0 else out


def ramp(x, a, b):
    """phi((x - b) / (b - a)): 1 left of a, linear down to 0 at b."""
    x = np.asarray(x, dtype=float)
    out = np.where(x <= a, 1.0, np.where(x <= b, (b - x) / (b - a), 0.0))
    return float(out) if out.ndim == 0 else out


def _check_cells(m):
    if int(m) != m or m < 2:
        raise ParameterError(f"partition needs an integer m >= 2, got {m}")
    return int(m)


@dataclass(frozen=True, eq=False)
class Partition:
    model: DistributionModel
    m: int
    points: np.ndarray

    @property
    def h(self):
        return 1.0 / self.m

    @property
    def primed(self):
        return np.arange(self.m + 1) / self.m

    def cell_of(self, t):
        """Index j with t in [t_{j-1}, t_j); t = t_m belongs to the last cell."""
        t = float(t)
        if not (self.points[0] <= t <= self.points[-1]):
            raise DomainError(f"t={t!r} lies outside [t_0, t_m] = [{self.points[0]}, {self.points[-1]}]")
        j = int(np.searchsorted(self.points, t, side="right"))
        return min(max(j, 1), self.m)


def build_partition(model, m):
    """Quantile partition t_j = F^{-1}(j/m), j = 0..m."""
    m = _check_cells(m)
    if not model.continuous:
        raise ParameterError("chaining needs a continuous distribution function")
    pts = np.asarray(model.quantile(np.arange(m + 1) / m), dtype=float)
    gaps = np.diff(pts)
    bad = np.flatnonzero(~(gaps >= MIN_GAP))
    if bad.size:
        j = int(bad[0]) + 1
        raise DegeneratePartitionError(f"quantile points t_{j - 1} and t_{j} are closer than {MIN_GAP:g}")
    pts.setflags(write=False)
    return Partition(model, m, pts)


def _primed(partition, j, k, l):
    # (2^k (j-1) + l) / (m 2^k): level k-1 points reappear bit-for-bit at even l
    return (float(2**k * (j - 1) + l)) / float(partition.m * 2**k)


def _point(partition, j, k, l):
    return float(partition.model.quantile_clamped(_primed(partition, j, k, l)))


@dataclass(frozen=True, eq=False)
class DyadicRefinement:
    """Points s_l^(k), l = -1..2^k+1, of cell j; ``points[l + 1]`` holds s_l."""

    partition: Partition
    j: int
    k: int
    points: np.ndarray

    def s(self, l):
        return float(self.points[l + 1])

    @property
    def primed(self):
        return np.array([_primed(self.partition, self.j, self.k, l) for l in range(-1, 2**self.k + 2)])


def _check_cell(partition, j, k):
    if int(j) != j or not (1 <= j <= partition.m):
        raise ParameterError(f"cell index must be in 1..{partition.m}, got {j}")
    if int(k) != k or k < 0:
        raise ParameterError(f"level must be a nonnegative integer, got {k}")


def refine_level(partition, j, k):
    """Materialize all refinement points of cell ``j`` at level ``k``."""
    _check_cell(partition, j, k)
    ls = np.arange(-1, 2**k + 2)
    primed = (2.0**k * (j - 1) + ls) / (partition.m * 2.0**k)
    pts = np.asarray(partition.model.quantile_clamped(primed), dtype=float)
    pts.setflags(write=False)
    return DyadicRefinement(partition, int(j), int(k), pts)


def chain_index(ref, t):
    """l(k, t) = max{l in [0, 2^k] : s_l^(k) <= t}."""
    p = ref.partition
    t = float(t)
    lo, hi = p.points[ref.j - 1], p.points[ref.j]
    if not (lo <= t < hi or (ref.j == p.m and t == hi)):
        raise DomainError(f"t={t!r} is not in cell {ref.j} = [{lo}, {hi})")
    inner = ref.points[1 : 2**ref.k + 2]
    return int(np.searchsorted(inner, t, side="right")) - 1


def _locate(partition, j, k, t, cache):
    """Chain index at level k without materializing the level: start from the
    F-based guess and walk until s_l <= t < s_{l+1}."""

    def s(l):
        key = (k, l)
        if key not in cache:
            cache[key] = _point(partition, j, k, l)
        return cache[key]

    top = 2**k
    u = float(partition.model.cdf(t))
    g = int(math.floor(u * partition.m * top)) - top * (j - 1)
    g = min(max(g, 0), top)
    while g < top and s(g + 1) <= t:
        g += 1
    while g > 0 and s(g) > t:
        g -= 1
    return g, s


@dataclass(frozen=True, eq=False)
class SmoothedProcess:
    """U_n^(m)(t) = sqrt(n) (F_n^(m)(t) - F^(m)(t)), constant on every cell."""

    partition: Partition
    cell_values: np.ndarray
    cell_means: np.ndarray
    n: int

    @property
    def f_nm(self):
        """F_n^(m) as a step function."""
        return StepFunction(self.partition.points[1:-1], self.cell_values)

    @property
    def f_m(self):
        return StepFunction(self.partition.points[1:-1], self.cell_means)

    @property
    def process(self):
        rn = math.sqrt(self.n)
        return StepFunction(self.partition.points[1:-1], rn * (self.cell_values - self.cell_means))

    def __call__(self, t):
        return self.process(t)


def _values(path):
    return np.asarray(getattr(path, "values", path), dtype=float).reshape(-1)


def _cell_kernel_bounds(partition, j):
    """Ramp (t_{j-2}, t_{j-1}) of phi_j, or None for j = 1."""
    if j == 1:
        return None
    a, b = float(partition.points[j - 2]), float(partition.points[j - 1])
    if not (np.isfinite(a) and np.isfinite(b)) or not (b - a >= MIN_GAP):
        raise DegeneratePartitionError(f"zero-width or unbounded ramp for phi_{j} on [{a}, {b}]")
    return a, b


def smoothed_process(path, partition):
    """Cell values (1/n) sum phi_j(X_i) and means E phi_j(X_0)."""
    x = _values(path)
    if x.size == 0:
        raise ParameterError("empty path")
    m = partition.m
    vals = np.zeros(m)
    means = np.zeros(m)
    for j in range(2, m + 1):
        a, b = _cell_kernel_bounds(partition, j)
        vals[j - 1] = np.mean(ramp(x, a, b))
        means[j - 1] = float(partition.model.mean_over(a, b))
    vals.setflags(write=False)
    means.setflags(write=False)
    return SmoothedProcess(partition, vals, means, int(x.size))


def choose_chain_depth(n, h, eps):
    """K = 4 + floor(log2(sqrt(n) h / eps)), evaluated without log rounding.

    The floor is the largest integer p with eps * 2**p <= sqrt(n) h; scaling
    by powers of two is exact, so the comparison decides p exactly for the
    double q = sqrt(n) h.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"n must be a positive integer, got {n}")
    if not (h > 0 and eps > 0):
        raise ParameterError("h and eps must be positive")
    q = math.sqrt(n) * h
    if q < eps:
        raise CoarsePartitionError(f"sqrt(n)*h/eps = {q / eps:.6g} < 1; lower eps or raise n")
    _, e = math.frexp(q / eps)
    p = e - 1
    while math.ldexp(eps, p + 1) <= q:
        p += 1
    while math.ldexp(eps, p) > q:
        p -= 1
    return 4 + p


def chain_budget(k, eps):
    """eps_k = eps / (4 k (k + 1)); these sum to eps / 4 over k >= 1."""
    if int(k) != k or k < 1:
        raise ParameterError("k must be a positive integer")
    return eps / (4.0 * k * (k + 1))


def bound_shape(n, h, eps, alpha, beta, gamma, D=1.0):
    """Shapes of the two terms bounding P(sup |U_n - U_n^(m)| > eps).

    term1 = n**(alpha/(2 gamma) - 1) / eps**(4 + alpha/gamma) * (4 + log(sqrt(n) h / eps))**9
    term2 = h**(1 - beta/gamma) / eps**4
    with the unknown universal constant set to 1.  ``D`` is accepted for
    symmetry with the modulus condition and does not change the shape.
    """
    if not gamma > max(alpha / 2.0, beta):
        raise ParameterError(f"need gamma > max(alpha/2, beta); got gamma={gamma}, alpha={alpha}, beta={beta}")
    if not (n >= 1 and h > 0 and eps > 0):
        raise ParameterError("n >= 1, h > 0 and eps > 0 are required")
    ratio = math.sqrt(n) * h / eps
    if ratio < 1:
        raise CoarsePartitionError("sqrt(n)*h/eps < 1")
    term1 = n ** (alpha / (2 * gamma) - 1.0) / eps ** (4 + alpha / gamma) * (4.0 + math.log(ratio)) ** 9
    term2 = h ** (1.0 - beta / gamma) / eps**4
    return term1, term2


@dataclass(frozen=True, eq=False)
class ChainTerms:
    """Telescoping decomposition of F_n(t) - F_n^(m)(t) along the chain at t.

    ``terms[k-1]`` = (1/n) sum_i (kappa_k(X_i) - kappa_{k-1}(X_i)) with
    kappa_k the level-k ramp at index l(k, t); ``boundary`` =
    (1/n) sum_i (1{X_i <= t} - kappa_K(X_i)).  ``centered`` holds
    sqrt(n) (term - E term) for the level terms.
    """

    t: float
    j: int
    K: int
    indices: tuple
    ramps: tuple
    terms: np.ndarray
    boundary: float
    target: float
    residual: float
    centered: np.ndarray
    sandwich_violations: int
    upper_kernel: tuple

    def rows(self):
        """(k, l, term, residual) rows; k = K+1 carries the boundary term."""
        out = [(k, self.indices[k], float(self.terms[k - 1]), self.residual) for k in range(1, self.K + 1)]
        out.append((self.K + 1, self.indices[self.K], float(self.boundary), self.residual))
        return out


def chain_decomposition(path, partition, t, K, check=True):
    """Decompose F_n(t) - F_n^(m)(t) into K level terms and a boundary term."""
    if int(K) != K or K < 1:
        raise ParameterError(f"K must be a positive integer, got {K}")
    K = int(K)
    x = _values(path)
    if x.size == 0:
        raise ParameterError("empty path")
    n = x.size
    j = partition.cell_of(t)
    t = float(t)
    cache = {}
    indices = []
    ramps = []
    for k in range(K + 1):
        l, s = _locate(partition, j, k, t, cache)
        indices.append(l)
        if j == 1 and l == 0:
            ramps.append(None)  # kappa identically zero in the first cell
            continue
        a, b = s(l - 1), s(l)
        if not (np.isfinite(a) and np.isfinite(b)) or not (b - a >= MIN_GAP):
            raise DegeneratePartitionError(
                f"ramp at level {k}, index {l} of cell {j} is degenerate: [{a!r}, {b!r}]"
            )
        ramps.append((a, b))
    for k in range(1, K + 1):
        if indices[k - 1] != indices[k] // 2:
            raise ConsistencyError(
                f"chain index law broken at level {k}: l(k-1)={indices[k - 1]}, l(k)={indices[k]}"
            )

    model = partition.model

    def kernel(r):
        return np.zeros(n) if r is None else ramp(x, r[0], r[1])

    def mean(r):
        return 0.0 if r is None else float(model.mean_over(r[0], r[1]))

    kap = [kernel(r) for r in ramps]
    ind = (x <= t).astype(float)
    terms = np.array([np.mean(kap[k] - kap[k - 1]) for k in range(1, K + 1)])
    boundary = float(np.mean(ind - kap[K]))
    means = [mean(r) for r in ramps]
    rn = math.sqrt(n)
    centered = np.array([rn * (terms[k - 1] - (means[k] - means[k - 1])) for k in range(1, K + 1)])

    f_n = float(np.count_nonzero(x <= t)) / n
    phi_j = _cell_kernel_bounds(partition, j)
    f_nm = 0.0 if phi_j is None else float(np.mean(ramp(x, *phi_j)))
    target = f_n - f_nm
    residual = abs(math.fsum(terms.tolist()) + boundary - target)

    # upper kernel at index l(K, t) + 2; unusable ramps (clamped at the right
    # end of the support) are replaced by the indicator of x <= s_{l+1}
    lK = indices[K]
    top = 2**K
    if lK + 2 > top + 1:
        upper = None
        upper_vals = np.ones(n)
    else:
        s = _locate(partition, j, K, t, cache)[1]
        a, b = s(lK + 1), s(lK + 2)
        if np.isfinite(a) and np.isfinite(b) and b - a >= MIN_GAP:
            upper = (a, b)
            upper_vals = ramp(x, a, b)
        else:
            upper = (a, a)
            upper_vals = (x <= a).astype(float)

    violations = 0
    if check:
        phi_vals = np.zeros(n) if phi_j is None else ramp(x, *phi_j)
        bad = phi_vals > kap[0]
        for k in range(1, K + 1):
            bad |= kap[k - 1] > kap[k]
        bad |= kap[K] > ind
        bad |= ind > upper_vals
        violations = int(np.count_nonzero(bad))

    return ChainTerms(
        t=t,
        j=j,
        K=K,
        indices=tuple(indices),
        ramps=tuple(ramps),
        terms=terms,
        boundary=boundary,
        target=target,
        residual=residual,
        centered=centered,
        sandwich_violations=violations,
        upper_kernel=upper,
    )


def psi_difference_l1(partition, j, k, l):
    """E |kappa_k - kappa_{k-1}| for level-k index l and its parent floor(l/2).

    Both kernels are ramps; their difference has constant sign (the finer
    kernel dominates) so the L1 norm is the difference of means.  ``l`` may be
    an array of indices.
    """
    if k < 1:
        raise ParameterError("k must be at least 1")
    ls = np.asarray(l)
    if ls.dtype.kind not in "iu" or np.any((ls < 0) | (ls > 2**k)):
        raise ParameterError(f"index must be an integer in 0..{2**k}")
    model = partition.model

    def mean(kk, idx):
        base = float(2**kk * (j - 1))
        scale = float(partition.m * 2**kk)
        a = np.asarray(model.quantile_clamped((base + idx - 1) / scale), dtype=float)
        b = np.asarray(model.quantile_clamped((base + idx) / scale), dtype=float)
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.asarray(model.mean_over(a, b), dtype=float)
        # kappa is identically zero at index 0 of the first cell
        return np.where((j == 1) & (idx == 0), 0.0, out)

    out = mean(k, ls) - mean(k - 1, ls // 2)
    return float(out) if out.ndim == 0 else out


def ramp_slope_bound(D, gamma, k, h):
    """1 + exp((D 2^k / h)^(1/gamma)): Lipschitz bound for level-k ramps under
    omega(delta) <= D |log delta|^(-gamma)."""
    z = (D * 2.0**k / h) ** (1.0 / gamma)
    return math.inf if z > 709.0 else 1.0 + math.exp(z)
