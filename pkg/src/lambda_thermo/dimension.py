"""Hausdorff dimensions of the escaping and hyperbolic sets, truncated-system
dimensions, and the two matrix routes to cylinder sums."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .errors import DomainError, NonConvergenceError
from .spectra import Kind, build, perron_root, pressure_closed

__all__ = [
    "DimensionReport",
    "CylinderSum",
    "t1",
    "t1_bisection",
    "dim_escaping",
    "dim_hyperbolic",
    "dim_truncated",
    "dimension_report",
    "cylinder_sum",
]

_LOG4 = math.log(4.0)


def _check(lam) -> float:
    lam = float(lam)
    if not (0.0 < lam < 1.0):
        raise DomainError(f"lambda must lie in (0, 1), got {lam!r}")
    return lam


def t1(lam) -> float:
    """First zero of the pressure: 1 if lam <= 1/2, else -log 4 / log(lam(1-lam))."""
    lam = _check(lam)
    if lam <= 0.5:
        return 1.0
    return -_LOG4 / math.log(lam * (1.0 - lam))


def t1_bisection(lam, lo: float = 0.01, hi: float = 4.0, xtol: float = 1e-13) -> float:
    """Zero of t -> pressure_closed(lam, t) by bracketing root search."""
    lam = _check(lam)
    f = lambda t: pressure_closed(lam, t)
    if not f(lo) > 0.0 > f(hi):
        raise NonConvergenceError(f"pressure does not change sign on [{lo}, {hi}]")
    return brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)


def dim_escaping(lam) -> float:
    """dim_H of the set of points whose orbits tend to 0."""
    lam = _check(lam)
    if lam <= 0.5:
        return -_LOG4 / math.log(lam * (1.0 - lam))
    return 1.0


def dim_hyperbolic(lam) -> float:
    """Hyperbolic dimension of F_lam, equal to dim_escaping(1 - lam)."""
    lam = _check(lam)
    return dim_escaping(1.0 - lam)


def dim_truncated(lam, K: int, lo: float = 1e-3, hi: float = 8.0, tol: float = 1e-8) -> float:
    """Zero in t of log x_{t,K}, the dimension of the set of points whose
    orbits stay in W_1..W_K (leading eigenvalue of the kind-B truncation)."""
    lam = _check(lam)
    if K < 2:
        raise DomainError("K must be >= 2")
    log_lam, log_1m = math.log(lam), math.log1p(-lam)

    def f(t):
        return t * log_1m + math.log(perron_root(K, math.exp(t * log_lam)))

    f_lo, f_hi = f(lo), f(hi)
    if not f_lo > 0.0 > f_hi:
        raise NonConvergenceError(
            f"log x_(t,K) does not change sign on [{lo}, {hi}]: "
            f"f({lo}) = {f_lo!r}, f({hi}) = {f_hi!r}"
        )
    return brentq(f, lo, hi, xtol=tol * 1e-3)


@dataclass(frozen=True)
class DimensionReport:
    lam: float
    dim_escaping: float
    dim_hyperbolic: float
    t1: float
    method: str

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "dim_escaping": self.dim_escaping,
            "dim_hyperbolic": self.dim_hyperbolic,
            "t1": self.t1,
            "method": self.method,
        }


def dimension_report(lam, method: str = "closed_form") -> DimensionReport:
    lam = _check(lam)
    if method == "closed_form":
        t = t1(lam)
    elif method == "root_find":
        t = t1_bisection(lam)
    else:
        raise DomainError(f"unknown method {method!r}")
    return DimensionReport(lam, dim_escaping(lam), dim_hyperbolic(lam), t, method)


@dataclass(frozen=True)
class CylinderSum:
    """Sum over admissible n-words in W_1..W_K of |cylinder|^t, two ways."""

    log_via_A: float
    log_via_B: float

    @property
    def via_A(self) -> float:
        return math.exp(self.log_via_A)

    @property
    def via_B(self) -> float:
        return math.exp(self.log_via_B)


def cylinder_sum(lam, t, n: int, K: int) -> CylinderSum:
    """w A^(n-1) 1 and 1 B^(n-1) w with w_j = |W_j|^t, accumulated with
    per-step renormalisation so that large n never overflows."""
    lam = _check(lam)
    if n < 1 or K < 2:
        raise DomainError("need n >= 1 and K >= 2")
    t = float(t)
    j = np.arange(K)
    w = np.exp(t * (j * math.log(lam) + math.log1p(-lam)))
    A = build(Kind.A, K, lam, t)
    B = build(Kind.B, K, lam, t)

    def accumulate(vec, apply):
        log_scale = 0.0
        for _ in range(n - 1):
            vec = apply(vec)
            s = vec.max()
            log_scale += math.log(s)
            vec = vec / s
        return log_scale + math.log(vec.sum())

    return CylinderSum(accumulate(w, A.left_apply), accumulate(w, B.right_apply))
