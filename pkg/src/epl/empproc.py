"""Empirical distribution functions and empirical processes as exact step functions.

Sup-norms are computed exactly.  Between two consecutive breakpoints the
ECDF and any step approximation are constant, so U_n(t) - a(t) moves
monotonically with the continuous F there.  The supremum over the real line
is therefore attained at a breakpoint, at a left limit, or at an end of the
support.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .distmodel import DistributionModel
from .errors import ParameterError

__all__ = [
    "StepFunction",
    "EmpiricalProcess",
    "ecdf_build",
    "empirical_process",
    "u_process_eval",
    "sup_distance",
]


@dataclass(frozen=True, eq=False)
class StepFunction:
    """Right-continuous piecewise-constant function.

    ``values[0]`` applies left of ``breakpoints[0]``; ``values[i]`` applies on
    ``[breakpoints[i-1], breakpoints[i])`` and the last value on
    ``[breakpoints[-1], inf)``.
    """

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        b = np.array(self.breakpoints, dtype=float).reshape(-1)
        v = np.array(self.values, dtype=float).reshape(-1)
        if v.size != b.size + 1:
            raise ParameterError("a step function needs one more value than breakpoints")
        if b.size and not np.all(np.diff(b) > 0):
            raise ParameterError("breakpoints must be strictly increasing")
        b.setflags(write=False)
        v.setflags(write=False)
        object.__setattr__(self, "breakpoints", b)
        object.__setattr__(self, "values", v)

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = self.values[np.searchsorted(self.breakpoints, t, side="right")]
        return float(out) if out.ndim == 0 else out

    def left_limit(self, t):
        t = np.asarray(t, dtype=float)
        out = self.values[np.searchsorted(self.breakpoints, t, side="left")]
        return float(out) if out.ndim == 0 else out

    @property
    def jumps(self):
        return np.diff(self.values)

    def shifted(self, c):
        return StepFunction(self.breakpoints, self.values + c)

    @classmethod
    def constant(cls, c=0.0):
        return cls(np.empty(0), np.array([c], dtype=float))

    def to_csv(self, path=None):
        """Rows ``breakpoint,value`` (value on [breakpoint, next)); the first row
        holds ``-inf`` and the value left of all breakpoints."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["breakpoint", "value"])
        w.writerow(["-inf", f"{self.values[0]:.17g}"])
        for b, v in zip(self.breakpoints, self.values[1:]):
            w.writerow([f"{b:.17g}", f"{v:.17g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", encoding="utf-8") as fh:
                fh.write(text)
        return text


def ecdf_build(path):
    """F_n(t) = #{i : X_i <= t} / n with ties merged into one jump."""
    x = np.asarray(getattr(path, "values", path), dtype=float).reshape(-1)
    if x.size == 0:
        raise ParameterError("cannot build an ECDF from an empty path")
    if not np.all(np.isfinite(x)):
        raise ParameterError("path contains non-finite values")
    pts, counts = np.unique(x, return_counts=True)
    vals = np.concatenate([[0.0], np.cumsum(counts) / x.size])
    return StepFunction(pts, vals)


@dataclass(frozen=True, eq=False)
class EmpiricalProcess:
    ecdf: StepFunction
    model: DistributionModel
    n: int

    def __call__(self, t):
        return u_process_eval(self, t)

    def as_function_of(self, t):
        """Vectorized U_n on an array of points."""
        return math.sqrt(self.n) * (self.ecdf(t) - self.model.cdf(t))


def empirical_process(path, model):
    x = np.asarray(getattr(path, "values", path), dtype=float).reshape(-1)
    return EmpiricalProcess(ecdf_build(x), model, int(x.size))


def u_process_eval(proc, t):
    """U_n(t) = sqrt(n) (F_n(t) - F(t))."""
    out = math.sqrt(proc.n) * (np.asarray(proc.ecdf(t)) - np.asarray(proc.model.cdf(t)))
    return float(out) if np.ndim(out) == 0 else out


def sup_distance(proc, approx=None, domain=None):
    """Exact sup over t of |U_n(t) - approx(t)| on the model support.

    ``approx`` defaults to the zero function, giving sup |U_n|.  ``domain``
    restricts the supremum to a closed interval inside the support.
    """
    if approx is None:
        approx = StepFunction.constant(0.0)
    lo, hi = proc.model.support if domain is None else domain
    rn = math.sqrt(proc.n)
    pts = np.union1d(proc.ecdf.breakpoints, approx.breakpoints)
    pts = pts[(pts > lo) & (pts <= hi)]
    ends = [p for p in (lo, hi) if np.isfinite(p)]
    if ends:
        pts = np.union1d(pts, ends)
    f = proc.model.cdf(pts)
    right = rn * (proc.ecdf(pts) - f) - approx(pts)
    left = rn * (proc.ecdf.left_limit(pts) - f) - approx.left_limit(pts)
    if np.isfinite(lo):
        left = left[pts > lo] if pts.size else left
    cands = [np.abs(right), np.abs(left)]
    if not np.isfinite(lo):
        cands.append(np.array([abs(approx.values[0])]))
    if not np.isfinite(hi):
        cands.append(np.array([abs(approx.values[-1])]))
    cands = [c for c in cands if c.size]
    return float(max(c.max() for c in cands)) if cands else 0.0
