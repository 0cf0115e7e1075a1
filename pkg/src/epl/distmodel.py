"""Marginal distribution functions, their generalized inverses and moduli.

Every model exposes the same small surface:

``cdf(t)``
    F(t) = P(X <= t), vectorized, clamped to 0/1 outside the support.
``quantile(u)``
    The generalized inverse ``sup{s in support : F(s) <= u}`` for u in [0, 1].
``antiderivative(x)``
    A(x) = integral of F from the left support end to x.  Means of the ramp
    kernels used by the chaining construction are averages of F, i.e.
    ``(A(b) - A(a)) / (b - a)``.
``omega(delta)``
    The modulus of continuity sup{|F(s) - F(t)| : |s - t| < delta}.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy import special

from .errors import DomainError, ParameterError

__all__ = [
    "DistributionModel",
    "Uniform01",
    "CantorCdf",
    "Exponential",
    "Normal",
    "StdNormal",
    "EmpiricalReference",
    "ModulusReport",
    "cdf_eval",
    "quantile",
    "log_modulus_report",
    "model_from_dict",
    "CANTOR_DIM",
]

CANTOR_DIM = math.log(2.0) / math.log(3.0)

BISECTION_TOL = 1e-12

_FIX_BITS = 62
_FIX_MASK = np.uint64((1 << _FIX_BITS) - 1)
_FIX_SCALE = float(2**_FIX_BITS)
# t * 2**62 is an exact integer for every double t >= 2**-10.
_FAST_PATH_MIN = 2.0**-10
_CANTOR_DEPTH = 64


def _wrap(out, scalar):
    if scalar:
        return float(np.asarray(out).reshape(-1)[0])
    return out


def _prep(x):
    arr = np.asarray(x, dtype=float)
    return arr, arr.ndim == 0


class DistributionModel:
    """Base class; subclasses are immutable value objects."""

    form = "abstract"

    @property
    def support(self):
        raise NotImplementedError

    @property
    def continuous(self):
        return True

    def cdf(self, t):
        raise NotImplementedError

    def antiderivative(self, x):
        raise NotImplementedError

    def omega(self, delta):
        raise NotImplementedError

    def quantile(self, u):
        u, scalar = _prep(u)
        if np.any((u < 0) | (u > 1)) or np.any(np.isnan(u)):
            raise DomainError("quantile level must lie in [0, 1]")
        return _wrap(self._quantile(u.reshape(-1)).reshape(u.shape), scalar)

    def quantile_clamped(self, u):
        """Generalized inverse extended to all real levels.

        Levels below 0 have an empty defining set and map to the left support
        end; levels above 1 map to the right support end.
        """
        u, scalar = _prep(u)
        flat = u.reshape(-1)
        lo, hi = self.support
        out = np.empty_like(flat)
        below = flat < 0
        above = flat >= 1
        mid = ~(below | above)
        out[below] = lo
        out[above] = hi
        if np.any(mid):
            out[mid] = self._quantile(flat[mid])
        return _wrap(out.reshape(u.shape), scalar)

    def mean_over(self, a, b):
        """Average of F over [a, b]; equals E of the ramp kernel falling from a to b."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        return (self.antiderivative(b) - self.antiderivative(a)) / (b - a)

    def _quantile(self, u):
        return _bisect_quantile(self, u)

    def to_dict(self):
        return {"form": self.form}


def _bisect_quantile(model, u, tol=BISECTION_TOL):
    """sup{s : F(s) <= u} by monotone bisection, for u in [0, 1)."""
    lo_s, hi_s = model.support
    out = np.full(u.shape, hi_s, dtype=float)
    work = u < 1
    if not np.any(work):
        return out
    uu = u[work]
    lo = np.full(uu.shape, lo_s if np.isfinite(lo_s) else -1.0)
    hi = np.full(uu.shape, hi_s if np.isfinite(hi_s) else 1.0)
    empty = np.zeros(uu.shape, dtype=bool)
    if not np.isfinite(lo_s):
        for _ in range(2100):
            bad = model.cdf(lo) > uu
            if not np.any(bad):
                break
            lo = np.where(bad, lo * 2.0, lo)
            empty |= bad & ~np.isfinite(lo * 2.0)
        empty |= model.cdf(lo) > uu
    if not np.isfinite(hi_s):
        for _ in range(2100):
            small = model.cdf(hi) <= uu
            if not np.any(small):
                break
            hi = np.where(small, hi * 2.0, hi)
    for _ in range(400):
        if np.all(hi - lo <= tol * np.maximum(1.0, np.abs(lo))):
            break
        mid = 0.5 * (lo + hi)
        ok = model.cdf(mid) <= uu
        lo = np.where(ok, mid, lo)
        hi = np.where(ok, hi, mid)
    res = np.where(empty, lo_s, lo)
    out[work] = res
    return out


@dataclass(frozen=True)
class Uniform01(DistributionModel):
    form = "uniform"

    @property
    def support(self):
        return (0.0, 1.0)

    def cdf(self, t):
        t, scalar = _prep(t)
        return _wrap(np.clip(t, 0.0, 1.0), scalar)

    def _quantile(self, u):
        return np.asarray(u, dtype=float).copy()

    def antiderivative(self, x):
        x, scalar = _prep(x)
        out = np.where(x <= 0, 0.0, np.where(x >= 1, x - 0.5, 0.5 * x * x))
        return _wrap(out, scalar)

    def mean_over(self, a, b):
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        inside = (a >= 0) & (b <= 1)
        generic = super().mean_over(a, b)
        return np.where(inside, 0.5 * (a + b), generic)

    def omega(self, delta):
        d, scalar = _prep(delta)
        return _wrap(np.clip(d, 0.0, 1.0), scalar)


# --- Cantor function -------------------------------------------------------


def _cantor_fast(t):
    """Exact ternary scan for t in [2**-10, 1).  Returns (c(t), int_0^t c)."""
    p = (t * _FIX_SCALE).astype(np.uint64)
    cdf = np.zeros(t.shape)
    integ = np.zeros(t.shape)
    active = np.ones(t.shape, dtype=bool)
    half = 0.5
    sixth = 1.0
    three = np.uint64(3)
    shift = np.uint64(_FIX_BITS)
    for _ in range(_CANTOR_DEPTH):
        p3 = p * three
        d = p3 >> shift
        p = p3 & _FIX_MASK
        y = p.astype(float) / _FIX_SCALE
        one = active & (d == 1)
        two = active & (d == 2)
        cdf[one] += half
        integ[one] += sixth * (1.0 / 12.0 + y[one] / 6.0)
        cdf[two] += half
        integ[two] += sixth * (0.25 + y[two] / 6.0)
        active &= d != 1
        if not np.any(active):
            break
        half *= 0.5
        sixth /= 6.0
    return cdf, integ


def _cantor_exact(t):
    """Same scan with Python integers; used for 0 < t < 2**-10."""
    frac = Fraction(t)
    p, q = frac.numerator, frac.denominator
    cdf = Fraction(0)
    integ = Fraction(0)
    half = Fraction(1, 2)
    sixth = Fraction(1)
    for _ in range(_CANTOR_DEPTH):
        p *= 3
        d, p = divmod(p, q)
        y = Fraction(p, q)
        if d == 1:
            cdf += half
            integ += sixth * (Fraction(1, 12) + y / 6)
            break
        if d == 2:
            cdf += half
            integ += sixth * (Fraction(1, 4) + y / 6)
        half /= 2
        sixth /= 6
    return float(cdf), float(integ)


def _cantor_eval(x):
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1)
    cdf = np.where(flat >= 1, 1.0, 0.0)
    integ = np.where(flat >= 1, flat - 0.5, 0.0)
    fast = (flat >= _FAST_PATH_MIN) & (flat < 1)
    if np.any(fast):
        c, i = _cantor_fast(flat[fast])
        cdf[fast] = c
        integ[fast] = i
    for idx in np.flatnonzero((flat > 0) & (flat < _FAST_PATH_MIN)):
        cdf[idx], integ[idx] = _cantor_exact(float(flat[idx]))
    return cdf.reshape(x.shape), integ.reshape(x.shape)


_CANTOR_WEIGHTS = 2.0 * 3.0 ** -np.arange(1, _CANTOR_DEPTH + 1)


@dataclass(frozen=True)
class CantorCdf(DistributionModel):
    """The Cantor function on [0, 1].

    Values come from the ternary digits of t: digits 0 and 2 become binary 0
    and 1, and the scan stops at the first digit 1, which contributes a final
    binary 1.  Digits are extracted exactly, so the only error is truncation
    after 64 digits.
    """

    form = "cantor"

    @property
    def support(self):
        return (0.0, 1.0)

    def cdf(self, t):
        t, scalar = _prep(t)
        return _wrap(_cantor_eval(t)[0], scalar)

    def antiderivative(self, x):
        x, scalar = _prep(x)
        return _wrap(_cantor_eval(x)[1], scalar)

    def _quantile(self, u):
        # Binary digits of u map to ternary digits 0/2.  A double has a
        # terminating binary expansion, which selects the right end of the
        # plateau, i.e. the sup in the generalized inverse.
        u = np.asarray(u, dtype=float).copy()
        out = np.zeros(u.shape)
        top = u >= 1
        for w in _CANTOR_WEIGHTS:
            u *= 2.0
            bit = u >= 1.0
            u[bit] -= 1.0
            out[bit] += w
        out[top] = 1.0
        return out

    def omega(self, delta):
        # Hoelder bound with constant 1, exact at delta = 3**-k.
        d, scalar = _prep(delta)
        return _wrap(np.minimum(np.clip(d, 0.0, None) ** CANTOR_DIM, 1.0), scalar)


@dataclass(frozen=True)
class Exponential(DistributionModel):
    rate: float = 1.0
    form = "exp"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ParameterError(f"exponential rate must be positive, got {self.rate}")

    @property
    def support(self):
        return (0.0, math.inf)

    def cdf(self, t):
        t, scalar = _prep(t)
        out = np.where(t <= 0, 0.0, -np.expm1(-self.rate * np.maximum(t, 0.0)))
        return _wrap(out, scalar)

    def _quantile(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(u >= 1, math.inf, -np.log1p(-u) / self.rate)

    def antiderivative(self, x):
        x, scalar = _prep(x)
        xp = np.maximum(x, 0.0)
        out = xp + np.expm1(-self.rate * xp) / self.rate
        return _wrap(np.where(x <= 0, 0.0, out), scalar)

    def omega(self, delta):
        d, scalar = _prep(delta)
        return _wrap(-np.expm1(-self.rate * np.clip(d, 0.0, None)), scalar)

    def to_dict(self):
        return {"form": self.form, "rate": self.rate}


@dataclass(frozen=True)
class Normal(DistributionModel):
    loc: float = 0.0
    scale: float = 1.0
    form = "normal"

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ParameterError(f"normal scale must be positive, got {self.scale}")

    @property
    def support(self):
        return (-math.inf, math.inf)

    def cdf(self, t):
        t, scalar = _prep(t)
        return _wrap(special.ndtr((t - self.loc) / self.scale), scalar)

    def _quantile(self, u):
        u = np.asarray(u, dtype=float)
        # ndtri(0) = -inf is the empty-sup convention (left support end).
        return self.loc + self.scale * special.ndtri(u)

    def antiderivative(self, x):
        # Measured from -inf: integral of Phi is z*Phi(z) + phi(z).
        x, scalar = _prep(x)
        z = (x - self.loc) / self.scale
        pdf = np.exp(-0.5 * z * z) / math.sqrt(2 * math.pi)
        out = self.scale * (z * special.ndtr(z) + pdf)
        return _wrap(np.where(np.isneginf(z), 0.0, out), scalar)

    def omega(self, delta):
        d, scalar = _prep(delta)
        return _wrap(2.0 * special.ndtr(np.clip(d, 0.0, None) / (2.0 * self.scale)) - 1.0, scalar)

    def to_dict(self):
        return {"form": self.form, "loc": self.loc, "scale": self.scale}


def StdNormal():
    return Normal(0.0, 1.0)


@dataclass(frozen=True, eq=False)
class EmpiricalReference(DistributionModel):
    """Continuous piecewise-linear CDF through the order statistics of a sample.

    F(x_(k)) = (k - 1) / (M - 1), so the support is [x_(1), x_(M)].  The
    distance to the true marginal CDF is at most ``error_bound`` with
    probability ``confidence`` (DKW inequality plus the 1/M interpolation
    offset).
    """

    sample: np.ndarray = field(repr=False)
    confidence: float = 0.999
    form = "empirical"

    def __post_init__(self):
        s = np.sort(np.asarray(self.sample, dtype=float).reshape(-1))
        if s.size < 2:
            raise ParameterError("empirical reference needs at least two points")
        if not np.all(np.isfinite(s)):
            raise ParameterError("empirical reference sample contains non-finite values")
        s.setflags(write=False)
        object.__setattr__(self, "sample", s)
        object.__setattr__(self, "_levels", np.linspace(0.0, 1.0, s.size))

    @property
    def size(self):
        return self.sample.size

    @property
    def error_bound(self):
        alpha = 1.0 - self.confidence
        return math.sqrt(math.log(2.0 / alpha) / (2.0 * self.size)) + 1.0 / self.size

    @property
    def support(self):
        return (float(self.sample[0]), float(self.sample[-1]))

    def cdf(self, t):
        t, scalar = _prep(t)
        return _wrap(np.interp(t, self.sample, self._levels, left=0.0, right=1.0), scalar)

    def _quantile(self, u):
        return np.interp(u, self._levels, self.sample)

    def antiderivative(self, x):
        x, scalar = _prep(x)
        s, lv = self.sample, self._levels
        seg = 0.5 * (lv[1:] + lv[:-1]) * np.diff(s)
        cum = np.concatenate([[0.0], np.cumsum(seg)])
        xc = np.clip(x, s[0], s[-1])
        k = np.clip(np.searchsorted(s, xc, side="right") - 1, 0, s.size - 2)
        f = np.interp(xc, s, lv)
        part = cum[k] + 0.5 * (lv[k] + f) * (xc - s[k])
        out = part + np.maximum(x - s[-1], 0.0)
        return _wrap(out, scalar)

    def omega(self, delta):
        d, scalar = _prep(delta)
        flat = d.reshape(-1)
        out = np.empty(flat.shape)
        for i, dd in enumerate(flat):
            # The increment over a window of a piecewise-linear F peaks with
            # one window edge on a knot.
            starts = np.concatenate([self.sample, self.sample - dd])
            out[i] = np.max(self.cdf(starts + dd) - self.cdf(starts)) if dd > 0 else 0.0
        return _wrap(out.reshape(d.shape), scalar)

    def to_dict(self):
        return {
            "form": self.form,
            "size": int(self.size),
            "error_bound": self.error_bound,
            "confidence": self.confidence,
        }


def model_from_dict(d):
    form = d.get("form")
    if form in ("uniform", "uniform01", "Uniform01"):
        return Uniform01()
    if form in ("cantor", "CantorCdf"):
        return CantorCdf()
    if form in ("exp", "exponential", "Exponential"):
        return Exponential(float(d.get("rate", 1.0)))
    if form in ("normal", "StdNormal", "std-normal"):
        return Normal(float(d.get("loc", 0.0)), float(d.get("scale", 1.0)))
    if form == "empirical" and "sample" in d:
        return EmpiricalReference(np.asarray(d["sample"], dtype=float))
    raise ParameterError(f"unknown distribution form {form!r}")


def cdf_eval(model, t):
    return model.cdf(t)


def quantile(model, u):
    return model.quantile(u)


@dataclass
class ModulusReport:
    gamma: float
    grid: np.ndarray
    omega: np.ndarray
    d_required: np.ndarray
    minimal_d: float
    satisfied: bool
    resolution: float = 0.0
    form: str = ""

    def to_dict(self):
        return {
            "form": self.form,
            "gamma": self.gamma,
            "grid": [float(x) for x in self.grid],
            "omega": [float(x) for x in self.omega],
            "minimal_D": self.minimal_d,
            "satisfied": self.satisfied,
            "resolution": self.resolution,
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2)

    def rows(self):
        return [("delta", "omega", "D_required")] + [
            (float(a), float(b), float(c)) for a, b, c in zip(self.grid, self.omega, self.d_required)
        ]


def log_modulus_report(model, gamma, deltas):
    """Smallest D with omega_F(delta) <= D |log delta|^-gamma on the given grid."""
    if not gamma > 0:
        raise ParameterError(f"gamma must be positive, got {gamma}")
    grid = np.sort(np.asarray(deltas, dtype=float).reshape(-1))
    if grid.size == 0:
        raise ParameterError("delta grid is empty")
    if grid[0] <= 0 or grid[-1] > 0.5:
        raise ParameterError("delta grid must lie in (0, 1/2]")
    om = np.maximum.accumulate(np.asarray(model.omega(grid), dtype=float))
    req = om * np.abs(np.log(grid)) ** gamma
    minimal = float(np.max(req))
    resolution = 2.0 * model.error_bound if isinstance(model, EmpiricalReference) else 0.0
    return ModulusReport(
        gamma=float(gamma),
        grid=grid,
        omega=om,
        d_required=req,
        minimal_d=minimal,
        satisfied=bool(math.isfinite(minimal)),
        resolution=resolution,
        form=model.form,
    )
