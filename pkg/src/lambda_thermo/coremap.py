"""Exact coding and iteration of the countably branched map F_lambda.

The unit interval (0, 1] is cut into the Markov partition
``W_n = (lam**n, lam**(n-1)]``.  On ``W_1`` the map is ``x -> (x - lam)/(1 - lam)``
and on ``W_n`` (n >= 2) it is ``x -> (x - lam**n)/(lam*(1 - lam))``, so every
branch is affine and maps its cell onto a union of whole cells.

Points are carried as ``(state, rel)`` pairs: the cell index together with
the relative position inside the cell.  The state coordinate never passes
through a floating-point power of ``lam``, so orbits can drift to arbitrarily
deep cells without underflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, InadmissibleWordError

__all__ = [
    "MapParams",
    "StatePoint",
    "CylinderWord",
    "PotentialParams",
    "partition_index",
    "encode",
    "step",
    "itinerary",
    "log_abs_deriv",
    "ergodic_sum_phi",
    "log_cylinder_length",
    "cylinder_length",
    "is_admissible",
    "partition_index_array",
    "step_arrays",
]


@dataclass(frozen=True)
class MapParams:
    lam: float

    def __post_init__(self):
        lam = float(self.lam)
        if not (0.0 < lam < 1.0) or math.isnan(lam):
            raise DomainError(f"lambda must lie in (0, 1), got {self.lam!r}")

    @property
    def log_lam(self) -> float:
        return math.log(float(self.lam))


@dataclass(frozen=True)
class StatePoint:
    """A point of (0, 1] as (cell index, relative coordinate in (0, 1])."""

    state: int
    rel: float

    def __post_init__(self):
        if int(self.state) != self.state or self.state < 1:
            raise DomainError(f"state must be an integer >= 1, got {self.state!r}")
        if not (0.0 < self.rel <= 1.0):
            raise DomainError(f"rel must lie in (0, 1], got {self.rel!r}")

    def x(self, params: MapParams) -> float:
        """Reconstruct the real coordinate (may underflow for deep states)."""
        lam = float(params.lam)
        return lam ** (self.state - 1) * (lam + self.rel * (1.0 - lam))


@dataclass(frozen=True)
class CylinderWord:
    symbols: tuple

    def __post_init__(self):
        object.__setattr__(self, "symbols", tuple(int(s) for s in self.symbols))
        if any(s < 1 for s in self.symbols):
            raise InadmissibleWordError(f"symbols must be >= 1: {self.symbols}")

    def __len__(self):
        return len(self.symbols)

    def __iter__(self):
        return iter(self.symbols)

    @property
    def admissible(self) -> bool:
        return is_admissible(self.symbols)


@dataclass(frozen=True)
class PotentialParams:
    """Exponent t of the geometric potential and an optional shift p.

    ``p=None`` means "use the conformal pressure".
    """

    t: float
    p: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.t):
            raise DomainError("t must be finite")
        if self.p is not None and not math.isfinite(self.p):
            raise DomainError("p must be finite")


def _params(params) -> MapParams:
    return params if isinstance(params, MapParams) else MapParams(params)


def _symbols(word) -> tuple:
    if isinstance(word, CylinderWord):
        return word.symbols
    return CylinderWord(tuple(word)).symbols


def is_admissible(symbols: Sequence[int]) -> bool:
    """True when every transition satisfies e_{k+1} >= e_k - 1."""
    return all(b >= a - 1 for a, b in zip(symbols, symbols[1:])) and all(
        s >= 1 for s in symbols
    )


def _require_admissible(word) -> tuple:
    symbols = _symbols(word)
    if not symbols:
        raise InadmissibleWordError("empty word")
    if not is_admissible(symbols):
        raise InadmissibleWordError(f"inadmissible word {symbols}")
    return symbols


def partition_index(x: float, params) -> int:
    """Return the unique n with lam**n < x <= lam**(n-1)."""
    params = _params(params)
    lam = float(params.lam)
    if not (0.0 < x <= 1.0):
        raise DomainError(f"x must lie in (0, 1], got {x!r}")
    n = max(1, int(math.floor(math.log(x) / params.log_lam)) + 1)
    # the log guess can be off by one at cell boundaries
    while x <= lam**n:
        n += 1
    while n > 1 and x > lam ** (n - 1):
        n -= 1
    return n


def _rel_in_cell(x: float, n: int, lam: float) -> float:
    lo = lam**n
    rel = (x - lo) / (lam ** (n - 1) * (1.0 - lam))
    return min(rel, 1.0)


def encode(x: float, params) -> StatePoint:
    """Convert a real x in (0, 1] to its (state, rel) representation."""
    params = _params(params)
    n = partition_index(x, params)
    return StatePoint(n, _rel_in_cell(x, n, float(params.lam)))


def step(pt: StatePoint, params) -> StatePoint:
    """Image of ``pt`` under F_lambda, computed in (state, rel) coordinates.

    On W_1 the image is the real number ``rel`` itself.  On W_n with n >= 2
    the image is ``rel * lam**(n-2)``, which lies in the cell of ``rel``
    shifted down by n - 2 with the same relative coordinate.
    """
    params = _params(params)
    inner = encode(pt.rel, params)
    if pt.state == 1:
        return inner
    return StatePoint(inner.state + pt.state - 2, inner.rel)


def itinerary(pt: StatePoint, n: int, params) -> CylinderWord:
    """States visited by pt, F(pt), ..., F^{n-1}(pt)."""
    if n < 1:
        raise DomainError("n must be >= 1")
    params = _params(params)
    out = []
    for _ in range(n):
        out.append(pt.state)
        pt = step(pt, params)
    return CylinderWord(tuple(out))


def log_abs_deriv(state: int, params) -> float:
    """log|F'| on W_state: slope 1/(1-lam) on W_1 and 1/(lam(1-lam)) beyond."""
    params = _params(params)
    lam = float(params.lam)
    if state < 1:
        raise DomainError("state must be >= 1")
    if state == 1:
        return -math.log1p(-lam)
    return -math.log(lam) - math.log1p(-lam)


def ergodic_sum_phi(word, tp, params) -> float:
    """Birkhoff sum of Phi_t = -t log|F'| along the symbols of an admissible word."""
    symbols = _require_admissible(word)
    t = tp.t if isinstance(tp, PotentialParams) else float(tp)
    if t == 0:
        return 0.0
    params = _params(params)
    return -t * sum(log_abs_deriv(s, params) for s in symbols)


def log_cylinder_length(word, params) -> float:
    """Natural log of the Lebesgue length of the cylinder [e_0 ... e_{n-1}]."""
    symbols = _require_admissible(word)
    params = _params(params)
    lam = float(params.lam)
    log_inv_slopes = -sum(log_abs_deriv(s, params) for s in symbols[:-1])
    last = symbols[-1]
    return log_inv_slopes + (last - 1) * math.log(lam) + math.log1p(-lam)


def cylinder_length(word, params) -> float:
    return math.exp(log_cylinder_length(word, params))


# vectorised kernels used by the interval simulator


def partition_index_array(x: np.ndarray, lam: float) -> np.ndarray:
    """Vectorised :func:`partition_index` for an array of x in (0, 1]."""
    x = np.asarray(x, dtype=float)
    n = np.floor(np.log(x) / math.log(lam)).astype(np.int64) + 1
    np.maximum(n, 1, out=n)
    for _ in range(3):
        low = x <= np.power(lam, n)
        n[low] += 1
        high = (n > 1) & (x > np.power(lam, n - 1))
        n[high] -= 1
        if not (low.any() or high.any()):
            break
    return n


def step_arrays(states: np.ndarray, rels: np.ndarray, lam: float):
    """Apply :func:`step` to arrays of states and relative coordinates."""
    m = partition_index_array(rels, lam)
    lo = np.power(lam, m)
    new_rel = (rels - lo) / (np.power(lam, m - 1) * (1.0 - lam))
    np.minimum(new_rel, 1.0, out=new_rel)
    new_states = np.where(states == 1, m, m + states - 2)
    return new_states, new_rel

