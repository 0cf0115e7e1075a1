"""Finite orbits of stationary processes with reproducible per-replicate seeding.

Replicate ``r`` of a run with master seed ``s`` draws from its own Philox
stream keyed by ``SeedSequence(s, spawn_key=(r,))``.  A path is therefore a
pure function of ``(spec, n, s, r)`` and replicates can be generated in any
order or in parallel.
"""

from __future__ import annotations

import bisect
import functools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy import signal

from .distmodel import CantorCdf, DistributionModel, EmpiricalReference, Uniform01, model_from_dict
from .errors import ConstraintError, DomainError, NumericError, ParameterError, PrecisionError

__all__ = [
    "ProcessSpec",
    "ProcessPath",
    "CoefficientRule",
    "IntervalLayout",
    "generate",
    "generate_batch",
    "gouezel_layout",
    "gouezel_apply",
    "reference_cdf",
    "replicate_rng",
    "markov_step",
    "stationary_draws",
    "KINDS",
]

KINDS = ("iid-uniform", "cantor", "geometric", "nar", "gouezel", "iid-model")

_ALIASES = {
    "IidUniform": "iid-uniform",
    "iid_uniform": "iid-uniform",
    "CantorLinear": "cantor",
    "cantor-linear": "cantor",
    "GeometricLinear": "geometric",
    "NonlinearAR": "nar",
    "GouezelMap": "gouezel",
    "IidModel": "iid-model",
}

NAR_LINKS = ("linear", "tanh")
MAX_CANTOR_DEPTH = 40
GOUEZEL_TAIL_TOL = 1e-12
_CHUNK = 20  # 3**20 < 2**53: a 20-digit ternary block is an exact double


@dataclass(frozen=True)
class CoefficientRule:
    """Power-law coefficients a_n = 1 / (scale * n**power) with an integral tail bound."""

    scale: float = 100.0
    power: float = 3.0

    def __post_init__(self):
        if not (self.scale > 0 and self.power > 1):
            raise ParameterError("coefficient rule needs scale > 0 and power > 1")

    def __call__(self, n):
        n = np.asarray(n, dtype=float)
        return 1.0 / (self.scale * n**self.power)

    def tail(self, cutoff):
        """Upper bound on sum_{n > cutoff} a_n."""
        return 1.0 / (self.scale * (self.power - 1.0) * float(cutoff) ** (self.power - 1.0))

    def cutoff_for(self, tol):
        """Smallest cutoff with 4 * tail(cutoff) < tol."""
        c = math.ceil((4.0 / (tol * self.scale * (self.power - 1.0))) ** (1.0 / (self.power - 1.0)))
        while 4.0 * self.tail(c) >= tol:
            c += 1
        return max(c, 1)


@dataclass(frozen=True)
class ProcessSpec:
    """Declarative description of one of the shipped stationary processes.

    ``kind`` is one of ``iid-uniform``, ``cantor`` (X_k = sum_{i>=1} 2 e_{k-i} / 3**i
    with fair bits e), ``geometric`` (X_k = scale * sum_{i>=0} theta**i e_{k-i},
    e uniform on [0, 1)), ``nar`` (X_k = f(X_{k-1}) + Y_k with f = rho*x or
    rho*tanh(x) and Y uniform on [0, 2 * noise_half_width]), ``gouezel``
    (orbits of the expanding map built by :func:`gouezel_layout`) and
    ``iid-model`` (i.i.d. draws from ``model``).
    """

    kind: str = "iid-uniform"
    theta: float = 0.5
    scale: float = 1.0
    rho: float = 0.5
    noise_half_width: float = 0.25
    nar_map: str = "linear"
    n_branches: int = 4
    rule: CoefficientRule = field(default_factory=CoefficientRule)
    trunc_depth: int = 40
    burn_in: int | None = None
    model: DistributionModel | None = None

    def __post_init__(self):
        kind = _ALIASES.get(self.kind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind not in KINDS:
            raise ParameterError(f"unknown process kind {self.kind!r}")
        if not (0 < self.theta < 1):
            raise ParameterError(f"theta must lie in (0, 1), got {self.theta}")
        if not (0 < self.rho < 1):
            raise ParameterError(f"rho must lie in (0, 1), got {self.rho}")
        if not (self.noise_half_width > 0):
            raise ParameterError("noise_half_width must be positive")
        if self.nar_map not in NAR_LINKS:
            raise ParameterError(f"nar_map must be one of {NAR_LINKS}")
        if int(self.n_branches) != self.n_branches or self.n_branches < 1:
            raise ParameterError("n_branches must be a positive integer")
        if int(self.trunc_depth) != self.trunc_depth or self.trunc_depth < 1:
            raise ParameterError("trunc_depth must be a positive integer")
        if kind == "cantor" and self.trunc_depth > MAX_CANTOR_DEPTH:
            raise ParameterError(f"cantor trunc_depth above {MAX_CANTOR_DEPTH} is below double precision")
        if self.burn_in is not None and (int(self.burn_in) != self.burn_in or self.burn_in < 0):
            raise ParameterError("burn_in must be a nonnegative integer")
        if kind == "iid-model" and self.model is None:
            raise ParameterError("iid-model needs a distribution model")
        if kind == "gouezel":
            gouezel_layout(self.rule, self.n_branches)

    # constructors named after the processes
    @classmethod
    def iid_uniform(cls):
        return cls("iid-uniform")

    @classmethod
    def cantor_linear(cls, trunc_depth=40):
        return cls("cantor", trunc_depth=trunc_depth)

    @classmethod
    def geometric_linear(cls, theta=0.5, scale=1.0, trunc_depth=40):
        return cls("geometric", theta=theta, scale=scale, trunc_depth=trunc_depth)

    @classmethod
    def nonlinear_ar(cls, rho=0.5, noise_half_width=0.25, nar_map="linear", burn_in=None):
        return cls("nar", rho=rho, noise_half_width=noise_half_width, nar_map=nar_map, burn_in=burn_in)

    @classmethod
    def gouezel_map(cls, n_branches=4, rule=None):
        return cls("gouezel", n_branches=n_branches, rule=rule or CoefficientRule())

    @classmethod
    def iid(cls, model):
        return cls("iid-model", model=model)

    @property
    def effective_burn_in(self):
        if self.burn_in is not None:
            return int(self.burn_in)
        return 1000 if self.kind == "nar" else 0

    @property
    def truncation_error(self):
        """Sup-norm bound on the error from truncating the moving average."""
        if self.kind == "cantor":
            return 3.0 ** -self.trunc_depth
        if self.kind == "geometric":
            return abs(self.scale) * self.theta**self.trunc_depth / (1.0 - self.theta)
        return 0.0

    @property
    def is_markov(self):
        return self.kind in ("nar", "geometric")

    def to_dict(self):
        d = {
            "kind": self.kind,
            "theta": self.theta,
            "scale": self.scale,
            "rho": self.rho,
            "noise_half_width": self.noise_half_width,
            "nar_map": self.nar_map,
            "n_branches": self.n_branches,
            "coef_scale": self.rule.scale,
            "coef_power": self.rule.power,
            "trunc_depth": self.trunc_depth,
            "burn_in": self.effective_burn_in,
        }
        if self.model is not None:
            d["model"] = self.model.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d.pop("seed", None)
        rule = CoefficientRule(float(d.pop("coef_scale", 100.0)), float(d.pop("coef_power", 3.0)))
        model = d.pop("model", None)
        if model is not None and not isinstance(model, DistributionModel):
            model = model_from_dict(model)
        known = {k: d[k] for k in ("kind", "theta", "scale", "rho", "noise_half_width", "nar_map",
                                   "n_branches", "trunc_depth", "burn_in") if k in d}
        for k in ("n_branches", "trunc_depth", "burn_in"):
            if known.get(k) is not None:
                known[k] = int(known[k])
        return cls(rule=rule, model=model, **known)


@dataclass(frozen=True, eq=False)
class ProcessPath:
    values: np.ndarray
    spec: ProcessSpec
    master_seed: int
    replicate_id: int

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)


def replicate_rng(master_seed, replicate_id):
    """Independent Philox stream for one replicate."""
    if int(master_seed) != master_seed or master_seed < 0:
        raise ParameterError(f"master seed must be a nonnegative integer, got {master_seed}")
    if int(replicate_id) != replicate_id or replicate_id < 0:
        raise ParameterError(f"replicate id must be a nonnegative integer, got {replicate_id}")
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(replicate_id),))
    return np.random.Generator(np.random.Philox(ss))


# --- generators --------------------------------------------------------------


def _cantor_values(bits, n, depth):
    """X_k = sum_{i=1}^{depth} 2 e_{k-i} 3**-i, evaluated exactly in 20-digit blocks.

    ``bits`` holds e_{1-depth}, ..., e_{n-1} in time order.
    """
    digits = 2.0 * np.asarray(bits, dtype=float)
    win = sliding_window_view(digits, depth)[:n, ::-1]  # column i-1 holds e_{k-i}
    n_chunks = -(-depth // _CHUNK)
    acc = np.zeros(n)
    base = 3.0**_CHUNK
    for c in reversed(range(n_chunks)):
        cols = win[:, c * _CHUNK : (c + 1) * _CHUNK]
        w = 3.0 ** np.arange(_CHUNK - 1, _CHUNK - 1 - cols.shape[1], -1)
        acc = (cols @ w + acc) / base
    return np.clip(acc, 0.0, 1.0)


def _nar_link(spec):
    if spec.nar_map == "linear":
        return lambda x: spec.rho * x
    return lambda x: spec.rho * np.tanh(x)


def _nar_run(spec, x0, noise):
    """Iterate X_k = f(X_{k-1}) + Y_k; returns X_1..X_len(noise)."""
    if spec.nar_map == "linear":
        out, _ = signal.lfilter([1.0], [1.0, -spec.rho], noise, zi=[spec.rho * x0])
        return out
    f = _nar_link(spec)
    out = np.empty(noise.size)
    x = x0
    for i, y in enumerate(noise):
        x = float(f(x)) + y
        out[i] = x
    return out


def _open_uniform(rng, size):
    # uniform on (0, 1): keeps quantiles of unbounded models finite
    return rng.random(size) + 2.0**-54


def generate(spec, n, master_seed=0, replicate_id=0, bit_source=None):
    """Realize X_1..X_n of ``spec`` for one replicate.

    ``bit_source`` (cantor only) replaces the random fair bits by
    ``bit_source(size)``; it exists to test the digit arithmetic.
    """
    if int(n) != n or n < 1:
        raise ParameterError(f"path length must be a positive integer, got {n}")
    n = int(n)
    rng = replicate_rng(master_seed, replicate_id)
    kind = spec.kind
    if kind == "iid-uniform":
        values = rng.random(n)
    elif kind == "iid-model":
        values = spec.model.quantile_clamped(_open_uniform(rng, n))
    elif kind == "cantor":
        depth = spec.trunc_depth
        size = n + depth - 1
        bits = rng.integers(0, 2, size=size) if bit_source is None else np.asarray(bit_source(size))
        if bits.shape != (size,) or not np.all((bits == 0) | (bits == 1)):
            raise ParameterError("bit source must return an array of 0/1 of the requested size")
        values = _cantor_values(bits, n, depth)
    elif kind == "geometric":
        depth = spec.trunc_depth
        e = rng.random(n + depth - 1)
        w = spec.scale * spec.theta ** np.arange(depth)
        values = sliding_window_view(e, depth)[:, ::-1] @ w
    elif kind == "nar":
        burn = spec.effective_burn_in
        noise = 2.0 * spec.noise_half_width * rng.random(n + burn)
        values = _nar_run(spec, 0.0, noise)[burn:]
    elif kind == "gouezel":
        layout = gouezel_layout(spec.rule, spec.n_branches)
        x = float(rng.random())
        for _ in range(spec.effective_burn_in):
            x = gouezel_apply(layout, x)
        values = np.empty(n)
        for i in range(n):
            values[i] = x
            x = gouezel_apply(layout, x)
    else:  # pragma: no cover - guarded by ProcessSpec
        raise ParameterError(kind)
    return ProcessPath(values, spec, int(master_seed), int(replicate_id))


def generate_batch(spec, n, master_seed, replicate_ids, threads=1):
    """Stack replicate paths into an array of shape (len(replicate_ids), n).

    The result does not depend on ``threads``.
    """
    ids = [int(r) for r in replicate_ids]
    if threads is None or threads <= 1 or len(ids) < 2:
        rows = [generate(spec, n, master_seed, r).values for r in ids]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            rows = list(pool.map(lambda r: generate(spec, n, master_seed, r).values, ids))
    return np.vstack(rows) if rows else np.empty((0, n))


# --- Markov representation -------------------------------------------------


def markov_step(spec, x, rng):
    """One transition of the Markov chain behind ``nar`` and ``geometric`` specs."""
    x = np.asarray(x, dtype=float)
    if spec.kind == "nar":
        return _nar_link(spec)(x) + 2.0 * spec.noise_half_width * rng.random(x.shape)
    if spec.kind == "geometric":
        return spec.theta * x + spec.scale * rng.random(x.shape)
    raise ParameterError(f"{spec.kind} has no Markov transition in this package")


def stationary_draws(spec, size, rng):
    """Independent draws from the stationary marginal, one per chain."""
    if spec.kind == "geometric":
        w = spec.scale * spec.theta ** np.arange(spec.trunc_depth)
        return rng.random((size, spec.trunc_depth)) @ w
    if spec.kind == "nar":
        x = np.zeros(size)
        for _ in range(spec.effective_burn_in):
            x = markov_step(spec, x, rng)
        return x
    if spec.kind == "cantor":
        bits = rng.integers(0, 2, size=(size, spec.trunc_depth))
        return np.clip(bits @ (2.0 * 3.0 ** -np.arange(1, spec.trunc_depth + 1)), 0.0, 1.0)
    if spec.kind == "iid-model":
        return spec.model.quantile_clamped(_open_uniform(rng, size))
    return rng.random(size)


_REFERENCE_KEY = 2**31 - 1


@functools.lru_cache(maxsize=32)
def reference_cdf(spec, sample_size=100_000, seed=20240601):
    """Marginal distribution of ``spec``.

    Exact for iid-uniform, cantor, gouezel (Lebesgue-invariant) and
    iid-model.  For geometric and nar the marginal is estimated from
    ``sample_size`` independent stationary draws.
    """
    if spec.kind in ("iid-uniform", "gouezel"):
        return Uniform01()
    if spec.kind == "cantor":
        return CantorCdf()
    if spec.kind == "iid-model":
        return spec.model
    rng = replicate_rng(seed, _REFERENCE_KEY)
    return EmpiricalReference(stationary_draws(spec, int(sample_size), rng))


# --- Gouezel map -------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class IntervalLayout:
    """Geometry of the expanding map.

    ``lefts[n-1]`` is the left end of I_n = [4 sum_{i<n} a_i, 4 sum_{i<=n} a_i);
    I_n splits into I_n^(1) and I_n^(2) of length 2 a_n each.  The rest of the
    unit interval, [S, 1), is cut into ``n_branches`` affine pieces mapped onto
    [0, 1).  Branches beyond ``cutoff`` are dropped; their total length is at
    most ``tail_bound``.
    """

    coefficients: np.ndarray
    lefts: np.ndarray
    n_branches: int
    cutoff: int
    tail_bound: float

    @property
    def bad_region_end(self):
        return float(self.lefts[-1])

    @property
    def piece_width(self):
        return (1.0 - self.bad_region_end) / self.n_branches

    def branch_intervals(self, n):
        left = float(self.lefts[n - 1])
        a = float(self.coefficients[n - 1])
        return (left, left + 2 * a), (left + 2 * a, left + 4 * a)

    def pieces(self):
        s, w = self.bad_region_end, self.piece_width
        return [(s + i * w, s + (i + 1) * w if i < self.n_branches - 1 else 1.0) for i in range(self.n_branches)]

    def v(self, n, u):
        """Inverse branch onto I_n^(1); derivative a_n (1 + 2 cos^2(2 pi n^4 u))."""
        a = self.coefficients[n - 1]
        k = 4.0 * math.pi * float(n) ** 4
        return self.lefts[n - 1] + a * (2.0 * np.asarray(u) + np.sin(k * np.asarray(u)) / k)

    def w(self, n, u):
        """Inverse branch onto I_n^(2); derivative a_n (1 + 2 sin^2(2 pi n^4 u))."""
        a = self.coefficients[n - 1]
        k = 4.0 * math.pi * float(n) ** 4
        return self.lefts[n - 1] + 2.0 * a + a * (2.0 * np.asarray(u) - np.sin(k * np.asarray(u)) / k)

    @functools.cached_property
    def _lefts_list(self):
        return self.lefts.tolist()

    @functools.cached_property
    def _coef_list(self):
        return self.coefficients.tolist()


@functools.lru_cache(maxsize=8)
def _layout_cached(rule, n_branches, cutoff):
    a = rule(np.arange(1, cutoff + 1))
    lefts = np.concatenate([[0.0], np.cumsum(4.0 * a)])
    a.setflags(write=False)
    lefts.setflags(write=False)
    return IntervalLayout(a, lefts, int(n_branches), int(cutoff), 4.0 * rule.tail(cutoff))


def gouezel_layout(rule=None, n_branches=4, cutoff=None, tail_tol=GOUEZEL_TAIL_TOL):
    rule = rule or CoefficientRule()
    if int(n_branches) != n_branches or n_branches < 1:
        raise ParameterError("n_branches must be a positive integer")
    if cutoff is None:
        cutoff = rule.cutoff_for(tail_tol)
    if int(cutoff) != cutoff or cutoff < 1:
        raise ParameterError("cutoff must be a positive integer")
    tail = 4.0 * rule.tail(cutoff)
    if tail >= tail_tol:
        raise PrecisionError(f"neglected tail 4*sum_(n>{cutoff}) a_n <= {tail:.3g} is not below {tail_tol:g}")
    total = 4.0 * math.fsum(rule(np.arange(1, int(cutoff) + 1)).tolist()) + tail
    if total >= 1.0:
        raise ConstraintError(f"coefficients violate 4*sum(a_n) < 1 (got {total:.6g})")
    return _layout_cached(rule, int(n_branches), int(cutoff))


_ONE_MINUS = 1.0 - 2.0**-53


def _invert_branch(rem, k, sign):
    """Solve 2u + sign*sin(k u)/k = rem on [0, 1] (left side is increasing)."""
    lo, hi = 0.0, 1.0
    u = min(max(0.5 * rem, 0.0), 1.0)
    for _ in range(200):
        g = 2.0 * u + sign * math.sin(k * u) / k - rem
        if g > 0:
            hi = u
        else:
            lo = u
        step = g / (2.0 + sign * math.cos(k * u))
        nu = u - step
        if not (lo <= nu <= hi):
            nu = 0.5 * (lo + hi)
        if g == 0.0 or nu == u or hi - lo <= 4.0 * math.ulp(max(u, 1e-300)):
            return nu
        u = nu
    raise NumericError("inverse-branch iteration did not converge")


def gouezel_apply(layout, x):
    """Forward map T(x) for x in [0, 1)."""
    x = float(x)
    if not (0.0 <= x < 1.0):
        raise DomainError(f"Gouezel map is defined on [0, 1), got {x!r}")
    s = layout.bad_region_end
    if x >= s:
        wdt = layout.piece_width
        i = min(int((x - s) / wdt), layout.n_branches - 1)
        y = (x - (s + i * wdt)) / wdt
        return min(max(y, 0.0), _ONE_MINUS)
    lefts = layout._lefts_list
    n = bisect.bisect_right(lefts, x)
    n = min(max(n, 1), layout.cutoff)
    left = lefts[n - 1]
    a = layout._coef_list[n - 1]
    k = 4.0 * math.pi * float(n) ** 4
    if x < left + 2.0 * a:
        base, sign = left, 1.0
    else:
        base, sign = left + 2.0 * a, -1.0
    u = _invert_branch((x - base) / a, k, sign)
    resid = abs(base + a * (2.0 * u + sign * math.sin(k * u) / k) - x)
    if resid >= 1e-12:
        raise NumericError(f"branch inversion residual {resid:.3g} at x={x!r}")
    return min(max(u, 0.0), _ONE_MINUS)
