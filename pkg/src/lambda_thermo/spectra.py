"""Truncated weight matrices, their characteristic polynomials and Perron data.

Every matrix kind handled here is, up to a positive scale and a diagonal
similarity, the K x K matrix ``N(q)`` whose first row is all ones and whose
rows i >= 2 equal ``q`` on the band ``j >= i - 1``:

======== ================== ====== ==========
kind     scale              q      similarity
======== ================== ====== ==========
A        (1-lam)^t          lam^t  diag(q^(i-1))
B        (1-lam)^t          lam^t  none
A-hat    (lam(1-lam))^t     1      diag(lam^(t(i-1)))
B-hat    (lam(1-lam))^t     1      none
D        1/2                1/2    none
======== ================== ====== ==========

The leading principal minors of ``sI - N(q)`` are ``(-1)^k alpha_k(s)`` and obey
a three-term recurrence, which gives an exact M-matrix test for "s lies above
the spectral radius".  That test drives a bisection for the Perron root; a
structured O(K) shifted solve then supplies the left Perron vector.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, NonConvergenceError

__all__ = [
    "Kind",
    "TruncatedOperator",
    "CharPoly",
    "SpectralResult",
    "PhaseTransitionReport",
    "lambda_t",
    "build",
    "char_poly",
    "char_poly_binomial",
    "char_poly_equal_AB",
    "perron_root",
    "spectral_radius",
    "leading_eigen",
    "eigvec_recurrence_check",
    "psi",
    "psi_prime",
    "psi_second",
    "pressure_closed",
    "t0",
    "phase_transition_report",
    "pressure_curve",
]


class Kind(str, enum.Enum):
    A = "A"
    B = "B"
    A_HAT = "A-hat"
    B_HAT = "B-hat"
    D = "D"

    @classmethod
    def parse(cls, value) -> "Kind":
        if isinstance(value, Kind):
            return value
        key = str(value).strip().replace("_", "-")
        for k in cls:
            if k.value.lower() == key.lower():
                return k
        raise DomainError(f"unknown operator kind {value!r}")


def lambda_t(lam, t):
    """lam**t, kept exact when lam is rational and t is an integer."""
    if isinstance(lam, Rational) and isinstance(t, int) and not isinstance(t, bool):
        return Fraction(lam) ** t
    return float(lam) ** float(t)


def _check_lam(lam):
    if not (0 < lam < 1):
        raise DomainError(f"lambda must lie in (0, 1), got {lam!r}")


@dataclass(frozen=True)
class TruncatedOperator:
    """K x K nonnegative weight matrix of a given kind, applied in O(K).

    Row ``i`` (1-based) is ``h_i * g**(j - lo_i)`` on columns ``j >= lo_i`` with
    ``lo_1 = 1`` and ``lo_i = i - 1`` otherwise; ``g`` is ``lam**t`` for the
    A kinds and 1 for the others.
    """

    kind: Kind
    K: int
    lam: float = 0.5
    t: float = 1.0
    h: np.ndarray = field(init=False, repr=False, compare=False)
    g: float = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if int(self.K) != self.K or self.K < 1:
            raise DomainError(f"K must be a positive integer, got {self.K!r}")
        object.__setattr__(self, "K", int(self.K))
        if self.kind is not Kind.D:
            _check_lam(self.lam)
        q = float(self.q)
        lam, t = float(self.lam), float(self.t)
        one_minus = (1.0 - lam) ** t
        both = (lam * (1.0 - lam)) ** t
        h = np.empty(self.K)
        if self.kind is Kind.A:
            g = q
            h[:] = one_minus
        elif self.kind is Kind.A_HAT:
            g = q
            h[:] = one_minus
            h[0] = one_minus * q
        elif self.kind is Kind.B:
            g = 1.0
            h[:] = both
            h[0] = one_minus
        elif self.kind is Kind.B_HAT:
            g = 1.0
            h[:] = both
        else:
            g = 1.0
            h[:] = 0.25
            h[0] = 0.5
        object.__setattr__(self, "h", h)
        object.__setattr__(self, "g", g)

    @property
    def q(self):
        if self.kind is Kind.D:
            return Fraction(1, 2)
        return lambda_t(self.lam, self.t)

    @property
    def scale(self) -> float:
        """Positive factor c with M similar to c * N(q_norm)."""
        lam, t = float(self.lam), float(self.t)
        if self.kind in (Kind.A, Kind.B):
            return (1.0 - lam) ** t
        if self.kind in (Kind.A_HAT, Kind.B_HAT):
            return (lam * (1.0 - lam)) ** t
        return 0.5

    @property
    def q_norm(self):
        if self.kind in (Kind.A, Kind.B):
            return self.q
        if self.kind in (Kind.A_HAT, Kind.B_HAT):
            return 1
        return Fraction(1, 2)

    @property
    def similar_to_normal(self) -> bool:
        """True for the A kinds, which are diagonally similar to their B twin."""
        return self.kind in (Kind.A, Kind.A_HAT)

    def _lo(self) -> np.ndarray:
        lo = np.arange(self.K) - 1
        lo[0] = 0
        return lo  # 0-based first nonzero column per row

    def dense(self) -> np.ndarray:
        K = self.K
        j = np.arange(K)[None, :]
        lo = self._lo()[:, None]
        with np.errstate(under="ignore"):
            vals = self.h[:, None] * np.power(self.g, np.maximum(j - lo, 0))
        return np.where(j >= lo, vals, 0.0)

    def left_apply(self, v: np.ndarray) -> np.ndarray:
        """Row-vector product v^T M."""
        v = np.asarray(v, dtype=float)
        w = v * self.h
        z = np.zeros(self.K)
        z[0] = w[0]
        if self.K > 1:
            z[0] += w[1]
            z[1:-1] = w[2:]
        if self.g == 1.0:
            return np.cumsum(z)
        return lfilter([1.0], [1.0, -self.g], z)

    def right_apply(self, v: np.ndarray) -> np.ndarray:
        """Column-vector product M v."""
        v = np.asarray(v, dtype=float)
        if self.g == 1.0:
            suffix = np.cumsum(v[::-1])[::-1]
        else:
            suffix = lfilter([1.0], [1.0, -self.g], v[::-1])[::-1]
        return self.h * suffix[self._lo()]


def build(kind, K: int, lam: float = 0.5, t: float = 1.0) -> TruncatedOperator:
    return TruncatedOperator(Kind.parse(kind), K, lam, t)


def _normal_dense_exact(kind: Kind, K: int, q) -> list:
    """Normalised matrix (A or B divided by (1-lam)^t) with entries in q's field."""
    one = q ** 0
    rows = []
    for i in range(1, K + 1):
        lo = 1 if i == 1 else i - 1
        row = []
        for j in range(1, K + 1):
            if j < lo:
                row.append(0 * one)
            elif kind is Kind.A:
                row.append(q ** (j - lo))
            elif i == 1:
                row.append(one)
            else:
                row.append(q * one)
        rows.append(row)
    return rows


# characteristic polynomials


@dataclass(frozen=True)
class CharPoly:
    """alpha_{t,K}(s) = det(N_K - s I) with ascending coefficients."""

    K: int
    q: object
    coefficients: tuple

    def __call__(self, s):
        acc = 0 * s
        for c in reversed(self.coefficients):
            acc = acc * s + c
        return acc

    @property
    def exact(self) -> bool:
        return all(isinstance(c, Rational) for c in self.coefficients)

    def roots(self) -> np.ndarray:
        return np.roots([float(c) for c in reversed(self.coefficients)])

    def largest_real_root(self) -> float:
        """Largest real companion-matrix root, polished by Newton steps.

        Companion eigenvalues lose digits once K exceeds ~20 and so does
        Horner on the expanded coefficients; the polish evaluates alpha and
        alpha' through the three-term recurrence instead.
        """
        r = self.roots()
        real = r[np.abs(r.imag) <= 1e-6 * np.maximum(1.0, np.abs(r))].real
        x = float(real.max())
        q = float(self.q)
        for _ in range(50):
            a0, a1, d0, d1 = 1.0, 1.0 - x, 0.0, -1.0
            for _ in range(self.K - 1):
                a0, a1, d0, d1 = a1, -x * (a1 + q * a0), d1, -(a1 + q * a0) - x * (d1 + q * d0)
            step = a1 / d1
            x -= step
            if abs(step) <= 4 * np.finfo(float).eps * abs(x):
                break
        return float(x)


def _poly_shift_scale(p: list, c) -> list:
    """Return c * s * p(s)."""
    return [0 * c] + [c * a for a in p]


def _poly_add(p: list, r: list) -> list:
    n = max(len(p), len(r))
    p = p + [0 * p[0]] * (n - len(p))
    r = r + [0 * r[0]] * (n - len(r))
    return [a + b for a, b in zip(p, r)]


def char_poly(K: int, lam=None, t=None, *, q=None) -> CharPoly:
    """Coefficients of alpha_{t,K} from alpha_K = -s alpha_{K-1} - s q alpha_{K-2}.

    Pass ``q`` directly, or ``lam`` and ``t``.  Rational ``q`` (e.g. a
    :class:`~fractions.Fraction` ``lam`` with integer ``t``) gives exact
    coefficients.
    """
    if K < 1:
        raise DomainError("K must be >= 1")
    if q is None:
        q = lambda_t(lam, t)
    one = q ** 0 if isinstance(q, Rational) else 1.0
    prev, cur = [one], [one, -one]
    for _ in range(2, K + 1):
        prev, cur = cur, _poly_add(_poly_shift_scale(cur, -one), _poly_shift_scale(prev, -q))
    return CharPoly(K, q, tuple(cur))


def char_poly_binomial(K: int, q) -> CharPoly:
    """Closed form alpha_K = (-1)^K (gamma_K - gamma_{K-1}),
    gamma_k(s) = sum_j C(k-j, j) (-q)^j s^(k-j)."""

    def gamma(k):
        coeffs = [0 * q] * (k + 1)
        for j in range(k // 2 + 1):
            coeffs[k - j] += math.comb(k - j, j) * (-q) ** j
        return coeffs

    diff = _poly_add(gamma(K), [-c for c in gamma(K - 1)])
    sign = -1 if K % 2 else 1
    return CharPoly(K, q, tuple(sign * c for c in diff))


def _det_exact(rows: list):
    """Determinant by Gaussian elimination over an exact field."""
    m = [list(r) for r in rows]
    n = len(m)
    det = m[0][0] ** 0
    for c in range(n):
        piv = next((r for r in range(c, n) if m[r][c] != 0), None)
        if piv is None:
            return 0 * det
        if piv != c:
            m[c], m[piv] = m[piv], m[c]
            det = -det
        det *= m[c][c]
        inv = 1 / m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] * inv
            if f:
                m[r] = [a - f * b for a, b in zip(m[r], m[c])]
    return det


def char_poly_equal_AB(K: int, lam=None, t=None, *, q=None, exact_bound: int = 12) -> bool:
    """Do det(A_K - sI) and det(B_K - sI) agree (after removing (1-lam)^t)?

    With rational q and K <= exact_bound both determinants are evaluated
    exactly at the K + 1 points s = 0..K, which pins down degree-K
    polynomials.  Otherwise coefficients from numpy are compared at 1e-10.
    """
    if q is None:
        q = lambda_t(lam, t)
    if isinstance(q, Rational) and K <= exact_bound:
        q = Fraction(q)
        A = _normal_dense_exact(Kind.A, K, q)
        B = _normal_dense_exact(Kind.B, K, q)
        for s in range(K + 1):
            shift = lambda M: [
                [v - (s if i == j else 0) for j, v in enumerate(row)] for i, row in enumerate(M)
            ]
            if _det_exact(shift(A)) != _det_exact(shift(B)):
                return False
        return True
    qf = float(q)
    A = np.array(_normal_dense_exact(Kind.A, K, qf), dtype=float)
    B = np.array(_normal_dense_exact(Kind.B, K, qf), dtype=float)
    ca, cb = np.poly(A), np.poly(B)
    return bool(np.allclose(ca, cb, rtol=1e-10, atol=1e-10 * max(1.0, np.abs(cb).max())))


# Perron root and vector


def _above_spectral_radius(s: float, K: int, q: float) -> bool:
    """True iff sI - N_K(q) is a nonsingular M-matrix, i.e. s > rho(N_K(q)).

    Uses positivity of all leading principal minors beta_k = (-1)^k alpha_k(s),
    tracked through ratios beta_k / beta_{k-1} to avoid overflow.
    """
    ratio = s - 1.0
    if ratio <= 0.0:
        return False
    sq = s * q
    for _ in range(K - 1):
        ratio = s - sq / ratio
        if ratio <= 0.0:
            return False
    return True


def perron_root(K: int, q) -> float:
    """Spectral radius of N_K(q) by bisection on the M-matrix criterion."""
    if K < 1:
        raise DomainError("K must be >= 1")
    q = float(q)
    if K == 1:
        return 1.0
    lo, hi = 1.0, 2.0
    while not _above_spectral_radius(hi, K, q):
        lo, hi = hi, 2.0 * hi
    while hi - lo > 4.0 * math.ulp(hi):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if _above_spectral_radius(mid, K, q):
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def spectral_radius(op: TruncatedOperator) -> float:
    return op.scale * perron_root(op.K, op.q_norm)


def _log_left_vector(K: int, q: float, root: float, qs: float | None = None) -> np.ndarray:
    """log of the left Perron vector of N_K(q) (or, given ``qs``, of its
    similar twin diag(qs^(i-1))^-1 N diag(qs^(i-1))), last entry shifted to 0.

    Differencing consecutive columns of v^T N = root v^T gives
    ``q v_{j+1} = root (v_j - v_{j-1})`` and, from the last column,
    ``v_{K-1} = v_K``.  Run backwards this recurrence is dominated by the
    slowly growing mode, which is the one the Perron vector follows, so it
    is stable.  For the twin u_j = qs^(j-1) v_j the same relations read
    ``u_{j-1} = (u_j - u_{j+1} q / (root qs)) / qs`` and ``u_{K-1} = u_K/qs``.  A running
    exponent offset keeps values representable.
    """
    L = np.zeros(K)
    if K == 1:
        return L
    if qs is not None:
        nxt, cur = 1.0, 1.0 / qs
        c = q / (root * qs)
        step = lambda a, b: (a - c * b) / qs
    else:
        nxt, cur = 1.0, 1.0
        c = q / root
        step = lambda a, b: a - c * b
    offset = 0.0

    def rescale(cur, nxt, offset):
        if cur < 1e-150:
            return cur * 1e150, nxt * 1e150, offset - _LOG_1E150
        if cur > 1e150:
            return cur * 1e-150, nxt * 1e-150, offset + _LOG_1E150
        return cur, nxt, offset

    cur, nxt, offset = rescale(cur, nxt, offset)
    L[K - 2] = math.log(cur) + offset
    for j in range(K - 3, -1, -1):
        cur, nxt = step(cur, nxt), cur
        if not cur > 0.0:
            raise NonConvergenceError(
                "column recurrence lost positivity", residual=float("nan"), iterations=K - 2 - j
            )
        cur, nxt, offset = rescale(cur, nxt, offset)
        L[j] = math.log(cur) + offset
    return L


_LOG_1E150 = 150.0 * math.log(10.0)


@dataclass
class SpectralResult:
    """Leading eigenvalue and left Perron vector of a truncated operator.

    ``left_vector`` is scaled so its first entry is 1 (``normalization ==
    "first"``); when that would overflow it is scaled to unit sup-norm
    instead (``"max"``).  ``residual`` is
    ``max|v^T M - value v^T| / (value * max|v|)``.  ``log_vector`` holds the
    entrywise log of the vector, shifted to maximum 0; it keeps the head
    entries that underflow in ``left_vector``.
    """

    value: float
    left_vector: np.ndarray
    iterations: int
    residual: float
    kind: Kind
    K: int
    method: str
    normalization: str = "first"
    log_vector: np.ndarray | None = field(default=None, repr=False)


def _residual(op: TruncatedOperator, v: np.ndarray, value: float) -> float:
    scale = np.abs(v).max()
    return float(np.abs(op.left_apply(v) - value * v).max() / (value * scale))


def _normalise(L: np.ndarray):
    """Scale exp(L) to v_1 = 1 if that stays finite, else to unit sup-norm."""
    if L[0] >= L.max() - 700.0:
        return np.exp(L - L[0]), "first"
    return np.exp(L - L.max()), "max"


def _power(op, tol, max_iter):
    # left and right iterates together: the two-sided Rayleigh quotient
    # (v M w)/(v w) has error quadratic in the vector errors, which matters
    # because these matrices are far from normal
    v = np.ones(op.K)
    w = np.ones(op.K)
    history = []
    best = (math.inf, float("nan"))
    for it in range(1, max_iter + 1):
        vm = op.left_apply(v)
        rayleigh = float(vm @ w / (v @ w))
        history.append(rayleigh)
        candidates = [rayleigh]
        if len(history) >= 3:
            a0, a1, a2 = history[-3:]
            denom = a2 - 2.0 * a1 + a0
            if denom != 0.0:
                candidates.append(a2 - (a2 - a1) ** 2 / denom)
        vmax = np.abs(v).max()
        for val in candidates:
            if val > 0:
                res = float(np.abs(vm - val * v).max() / (val * vmax))
                if res < best[0]:
                    best = (res, val)
        if best[0] <= tol:
            return best[1], v, it, best[0]
        v = vm / np.abs(vm).max()
        mw = op.right_apply(w)
        w = mw / np.abs(mw).max()
        best = (math.inf, float("nan"))
    raise NonConvergenceError(
        f"power iteration did not reach tol={tol:g} in {max_iter} iterations",
        residual=float(np.abs(op.left_apply(v) - history[-1] * v).max() / history[-1]),
        iterations=max_iter,
    )


def _recurrence(op):
    qn = float(op.q_norm)
    root = perron_root(op.K, qn)
    value = op.scale * root
    L = _log_left_vector(op.K, qn, root, float(op.q) if op.similar_to_normal else None)
    v = np.exp(L - L.max())
    return value, v, 0, _residual(op, v, value), L


def leading_eigen(
    op: TruncatedOperator, tol: float = 1e-12, max_iter: int = 10**6, method: str = "auto"
) -> SpectralResult:
    """Perron eigenvalue and left eigenvector of ``op``.

    ``method="power"`` runs plain power iteration on the left action with
    Aitken extrapolation of the Rayleigh sequence.  ``method="recurrence"``
    takes the eigenvalue from the M-matrix bisection and the vector from the
    backward column recurrence, both O(K).  ``"auto"`` uses power iteration
    for K <= 64 and the recurrence beyond, where the spectral gap can shrink
    like 1/K^2 and the vector spans hundreds of orders of magnitude.
    """
    if method == "auto":
        method = "power" if op.K <= 64 else "recurrence"
    if method == "power":
        value, v, it, res = _power(op, tol, max_iter)
        L = np.log(v)
    elif method == "recurrence":
        value, v, it, res, L = _recurrence(op)
        if not res <= tol:
            raise NonConvergenceError(
                f"recurrence residual {res:.3g} exceeds tol={tol:g}", residual=res, iterations=0
            )
    else:
        raise DomainError(f"unknown method {method!r}")
    v, norm = _normalise(L)
    return SpectralResult(value, v, it, res, op.kind, op.K, method, norm, L - L.max())


def eigvec_recurrence_check(result: SpectralResult, lam, t) -> float:
    """Largest relative defect of the kind-B left vector against the
    recurrence a_n = r (a_{n-1} - a_{n-2}), r = x / (lam^t (1-lam)^t).

    With a_0 = 0, a_1 = 1 the vector is v_j = a_j - a_{j-1}/lam^t, a fixed
    combination of shifts of a, so v obeys the same recurrence.  The defect
    is measured locally on consecutive ratios (which stay representable when
    the head of v underflows) together with v_2 / v_1 = r - lam^(-t).
    Iterating a_n forward instead would amplify the rounding of r through
    the spurious 1/lam^t mode.
    """
    if result.kind is not Kind.B:
        raise DomainError("needs a kind-B result")
    q = float(lambda_t(lam, t))
    r = result.value / (q * (1.0 - float(lam)) ** float(t))
    L = result.log_vector if result.log_vector is not None else np.log(result.left_vector)
    if result.K < 2:
        return 0.0
    v2 = r - 1.0 / q
    worst = abs(math.exp(L[1] - L[0]) - v2) / abs(v2) if v2 != 0 else abs(math.exp(L[1] - L[0]))
    for j in range(2, result.K - 1):  # 0-based index of v_{j+1}
        pred = r * (math.exp(L[j - 1] - L[j]) - math.exp(L[j - 2] - L[j]))
        worst = max(worst, abs(pred - 1.0))
    return worst


# the closed-form pressure


def psi(lam, t) -> float:
    """(1-lam)^t / (1 - lam^t)."""
    if t == 0:
        raise DomainError("psi has a pole at t = 0")
    lam, t = float(lam), float(t)
    return (1.0 - lam) ** t / -math.expm1(t * math.log(lam))


def _dlogpsi(lam, t):
    q = lam**t
    return math.log1p(-lam) + q / (1.0 - q) * math.log(lam)


def psi_prime(lam, t) -> float:
    lam, t = float(lam), float(t)
    return psi(lam, t) * _dlogpsi(lam, t)


def psi_second(lam, t) -> float:
    lam, t = float(lam), float(t)
    q = lam**t
    d = _dlogpsi(lam, t)
    return psi(lam, t) * (d * d + q / (1.0 - q) ** 2 * math.log(lam) ** 2)


def pressure_closed(lam, t) -> float:
    """log psi(t) when lam^t <= 1/2, log(4 lam^t (1-lam)^t) otherwise."""
    lam, t = float(lam), float(t)
    _check_lam(lam)
    q = lam**t
    if q <= 0.5:
        return t * math.log1p(-lam) - math.log1p(-q)
    return math.log(4.0) + t * (math.log(lam) + math.log1p(-lam))


def t0(lam) -> float:
    """Phase-transition exponent -log 2 / log lam, where lam^t = 1/2."""
    lam = float(lam)
    _check_lam(lam)
    return -math.log(2.0) / math.log(lam)


@dataclass(frozen=True)
class PhaseTransitionReport:
    lam: float
    t0: float
    left_first: float
    right_first: float
    left_second: float
    right_second: float

    @property
    def expected_first(self) -> float:
        return math.log(self.lam * (1.0 - self.lam))

    @property
    def expected_right_second(self) -> float:
        return 2.0 * math.log(self.lam) ** 2

    def consistent(self, tol_first: float = 1e-6, tol_second: float = 1e-4) -> bool:
        return (
            abs(self.left_first - self.expected_first) <= tol_first
            and abs(self.right_first - self.expected_first) <= tol_first
            and abs(self.left_second) <= tol_second
            and abs(self.right_second - self.expected_right_second) <= tol_second
        )


def _one_sided(f, x0, h):
    """First and second one-sided derivatives (h > 0 right, h < 0 left),
    each with one Richardson level."""

    def d1(hh):
        return (-3.0 * f(x0) + 4.0 * f(x0 + hh) - f(x0 + 2.0 * hh)) / (2.0 * hh)

    def d2(hh):
        return (f(x0) - 2.0 * f(x0 + hh) + f(x0 + 2.0 * hh)) / (hh * hh)

    first = (4.0 * d1(h / 2.0) - d1(h)) / 3.0
    second = 2.0 * d2(h / 2.0) - d2(h)
    return first, second


def phase_transition_report(lam, h: float = 1e-4) -> PhaseTransitionReport:
    lam = float(lam)
    tc = t0(lam)
    f = lambda t: pressure_closed(lam, t)
    lf, ls = _one_sided(f, tc, -h)
    rf, rs = _one_sided(f, tc, h)
    return PhaseTransitionReport(lam, tc, lf, rf, ls, rs)


def pressure_curve(lam, t_grid: Sequence[float], K_schedule: Sequence[int] = (8, 32, 128, 512)):
    """Rows ``{"t", "P_closed", "x_K": {K: x_{t,K}}, "envelope_ok"}``.

    ``x_{t,K}`` is the leading eigenvalue of the kind-B truncation.  The
    envelope ``log 4 + t log(1-lam) >= P >= log 4 + t log(lam(1-lam))`` is
    checked for t >= 0 (None otherwise).
    """
    lam = float(lam)
    _check_lam(lam)
    rows = []
    for t in t_grid:
        t = float(t)
        p = pressure_closed(lam, t)
        q = lam**t
        xs = {int(K): (1.0 - lam) ** t * perron_root(int(K), q) for K in K_schedule}
        env = None
        if t >= 0:
            upper = math.log(4.0) + t * math.log1p(-lam)
            lower = math.log(4.0) + t * math.log(lam * (1.0 - lam))
            slack = 1e-12 * max(1.0, abs(p))
            env = lower - slack <= p <= upper + slack
        rows.append({"t": t, "P_closed": p, "x_K": xs, "envelope_ok": env})
    return rows
