"""Conformal, invariant and equilibrium measures of the state chain in closed form.

All masses here live on the one-cylinders ``W_k`` and have geometric-type
tails, so every tail sum is evaluated analytically.  Throughout,
``q = lam**t`` and ``Phi_t = -t log|F'|``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .coremap import _require_admissible
from .errors import (
    DomainError,
    NoConformalMeasureError,
    NoInvariantMeasureError,
)
from .spectra import pressure_closed

__all__ = [
    "StateMeasure",
    "ConformalSolution",
    "VariationalValue",
    "BOUNDARY_TOL",
    "conformal_pressure",
    "conformal_solution",
    "conformal_measure",
    "conformal_residual",
    "invariant_measure",
    "acip",
    "density_ratio",
    "transition_probability",
    "stationarity_residual",
    "cylinder_conformal_mass",
    "log_cylinder_conformal_mass",
    "gibbs_ratio",
    "eigenfunction",
    "eigenfunction_residual",
    "rho_integral",
    "variational_value",
]

BOUNDARY_TOL = 1e-12
"""|lam^t - 1/2| below this routes to the null-recurrent boundary case."""

_LAWS = ("geometric", "poly-geometric", "two-term")


def _q(lam, t) -> float:
    lam = float(lam)
    if not (0.0 < lam < 1.0):
        raise DomainError(f"lambda must lie in (0, 1), got {lam!r}")
    return lam ** float(t)


def _geometric_tail_sums(gamma: float, k: int, one_minus: float):
    """(sum_{j>=k} g^j, sum j g^j, sum j^2 g^j) divided by g^k."""
    s0 = 1.0 / one_minus
    s1 = gamma / one_minus**2
    s2 = gamma * (1.0 + gamma) / one_minus**3
    return s0, k * s0 + s1, k * k * s0 + 2 * k * s1 + s2


@dataclass(frozen=True)
class StateMeasure:
    """Measure on the states k = 1, 2, ... with a closed-form tail law.

    ``params`` is ``(C, gamma)`` for "geometric" (mass C gamma^k),
    ``(A, B, gamma)`` for "poly-geometric" (mass (A + B k) gamma^k) and
    ``(A_plus, r_plus, A_minus, r_minus)`` for "two-term".
    """

    law: str
    params: tuple
    normalized: bool = True

    def __post_init__(self):
        if self.law not in _LAWS:
            raise DomainError(f"unknown law {self.law!r}")
        object.__setattr__(self, "params", tuple(float(x) for x in self.params))
        rates = self._terms()
        if any(not (0.0 < g < 1.0) for _, _, g, _ in rates):
            raise DomainError(f"rates must lie in (0, 1): {self.params}")

    def _terms(self):
        """(constant, linear, rate, 1 - rate); mass(k) = sum (a + b k) g^k.

        For two terms r_+ + r_- = 1, so each 1 - r is the other root.
        """
        p = self.params
        if self.law == "geometric":
            return [(p[0], 0.0, p[1], 1.0 - p[1])]
        if self.law == "poly-geometric":
            return [(p[0], p[1], p[2], 1.0 - p[2])]
        return [(p[0], 0.0, p[1], p[3]), (p[2], 0.0, p[3], p[1])]

    @property
    def rate(self) -> float:
        """Dominant decay rate; ``*_scaled`` values are divided by rate**k."""
        return max(g for a, b, g, _ in self._terms() if a or b)

    def mass_scaled(self, k):
        k = np.asarray(k, dtype=float)
        R = self.rate
        return sum((a + b * k) * (g / R) ** k for a, b, g, _ in self._terms())

    def tail_scaled(self, k: int, moment: int = 0) -> float:
        """sum_{j >= k} j^moment mass(j), divided by rate**k."""
        R = self.rate
        total = 0.0
        for a, b, g, om in self._terms():
            s = _geometric_tail_sums(g, k, om)
            if moment > 1 and b:
                raise DomainError("second moments of poly-geometric laws are not needed")
            if moment == 0:
                val = a * s[0] + b * s[1]
            elif moment == 1:
                val = a * s[1] + b * s[2]
            else:
                val = a * s[2]
            total += val * (g / R) ** k
        return float(total)

    def mass(self, k):
        out = self.mass_scaled(k) * np.power(self.rate, np.asarray(k, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def masses(self, n: int) -> np.ndarray:
        return np.asarray(self.mass(np.arange(1, n + 1)), dtype=float)

    def tail(self, k: int) -> float:
        """sum_{j >= k} mass(j)."""
        return self.tail_scaled(k) * self.rate**k

    def moment_tail(self, k: int) -> float:
        """sum_{j >= k} j mass(j)."""
        return self.tail_scaled(k, 1) * self.rate**k

    def second_moment_tail(self, k: int) -> float:
        return self.tail_scaled(k, 2) * self.rate**k

    def total(self) -> float:
        return self.tail(1)

    def positive(self, prefix: int = 1000) -> bool:
        """Positivity of every mass: a prefix scan plus tail-sign analysis.

        A single term is positive iff its coefficient is (linear laws: the
        coefficient at k and the slope).  For two terms, mass(k)/r_+^k =
        A_+ + A_- (r_-/r_+)^k is monotone in k, so with A_+ > 0 the infimum
        over k >= 1 is attained at k = 1 or approached as k -> infinity.
        """
        if np.any(self.mass_scaled(np.arange(1, prefix + 1)) <= 0.0):
            return False
        if self.law == "geometric":
            return self.params[0] > 0
        if self.law == "poly-geometric":
            A, B, _ = self.params
            return B >= 0 and A + B * prefix > 0
        a_plus, r_plus, a_minus, r_minus = self.params
        if a_plus == 0.0:
            return a_minus > 0
        return a_plus > 0 and a_plus + a_minus * (r_minus / r_plus) > 0

    def to_dict(self, n_masses: int = 32) -> dict:
        names = {
            "geometric": ("C", "gamma"),
            "poly-geometric": ("A", "B", "gamma"),
            "two-term": ("A_plus", "r_plus", "A_minus", "r_minus"),
        }[self.law]
        return {
            "law": self.law,
            "parameters": dict(zip(names, self.params)),
            "normalized": self.normalized,
            "masses": [float(m) for m in self.masses(n_masses)],
        }


@dataclass(frozen=True)
class ConformalSolution:
    c: float
    r_plus: float
    r_minus: float
    A_plus: float
    A_minus: float


@dataclass(frozen=True)
class VariationalValue:
    entropy: float
    integral: float
    sum: float
    log_psi: float


def conformal_pressure(lam, t) -> float:
    """Smallest p admitting a (t, p)-conformal measure."""
    return pressure_closed(lam, t)


def conformal_solution(lam, t, p) -> ConformalSolution:
    """Roots and coefficients of x_k = A_+ r_+^k + A_- r_-^k for p with 4c < 1.

    The coefficients solve x_1 = c/q, x_2 = c.  A_- can be negative (when
    q > r_+); positivity of the masses is then still guaranteed because
    x_1 > 0 and x_k / r_+^k is increasing.
    """
    q = _q(lam, t)
    lam, t = float(lam), float(t)
    c = math.exp(-p + t * (math.log(lam) + math.log1p(-lam)))
    disc = 1.0 - 4.0 * c
    if disc <= 0.0:
        raise NoConformalMeasureError(f"4c = {4 * c!r} >= 1: no two-term solution")
    root = math.sqrt(disc)
    r_plus = 0.5 * (1.0 + root)
    r_minus = 2.0 * c / (1.0 + root)  # = (1 - root)/2 without cancellation
    a_plus = c * (q - r_minus) / (q * (r_plus - 2.0 * c))
    a_minus = c * (r_plus - q) / (q * (2.0 * c - r_minus))
    return ConformalSolution(c, r_plus, r_minus, a_plus, a_minus)


def conformal_measure(lam, t, p=None, tol: float = BOUNDARY_TOL) -> StateMeasure:
    """Normalised (t, p)-conformal measure on the cells W_k.

    At the conformal pressure this is the geometric law (1-q) q^(k-1) for
    q < 1/2 and the poly-geometric law ((k-1) + (1 - k/2)/q) 2^-k for
    q >= 1/2.  Above it the two-term law from the linear recurrence
    x_{k+1} - x_k + c x_{k-1} = 0 is returned.
    """
    q = _q(lam, t)
    P = conformal_pressure(lam, t)
    if p is None:
        p = P
    if p < P - tol * max(1.0, abs(P)):
        raise NoConformalMeasureError(
            f"p = {p!r} lies below the conformal pressure {P!r}: masses would turn negative"
        )
    if abs(p - P) <= tol * max(1.0, abs(P)):
        if q < 0.5 - tol:
            return StateMeasure("geometric", ((1.0 - q) / q, q))
        return StateMeasure("poly-geometric", (1.0 / q - 1.0, 1.0 - 0.5 / q, 0.5))
    sol = conformal_solution(lam, t, p)
    return StateMeasure("two-term", (sol.A_plus, sol.r_plus, sol.A_minus, sol.r_minus))


def conformal_residual(measure: StateMeasure, lam, t, p, k_max: int = 100) -> float:
    """Largest relative defect of the conformality equations for k <= k_max:
    m(W_1) = e^-p (1-lam)^t sum_{j>=1} m(W_j) and
    m(W_k) = e^-p (lam(1-lam))^t sum_{j>=k-1} m(W_j) for k >= 2."""
    if k_max < 2:
        raise DomainError("k_max must be >= 2")
    lam, t = float(lam), float(t)
    e1 = math.exp(-p + t * math.log1p(-lam))
    c = e1 * lam**t
    R = measure.rate
    worst = abs(measure.mass_scaled(1) - e1 * measure.tail_scaled(1)) / abs(measure.mass_scaled(1))
    for k in range(2, k_max + 1):
        m = float(measure.mass_scaled(k))
        worst = max(worst, abs(m - c * measure.tail_scaled(k - 1) / R) / abs(m))
    return float(worst)


def invariant_measure(lam, t) -> StateMeasure:
    """Stationary law v_i = ((1-2q)/q) (q/(1-q))^i of the conformal kernel."""
    q = _q(lam, t)
    if not q < 0.5:
        raise NoInvariantMeasureError(
            f"lam^t = {q!r} >= 1/2: no invariant probability absolutely continuous "
            "w.r.t. the conformal measure"
        )
    return StateMeasure("geometric", ((1.0 - 2.0 * q) / q, q / (1.0 - q)))


def acip(lam) -> StateMeasure:
    """Invariant probability absolutely continuous w.r.t. Lebesgue (lam < 1/2)."""
    lam = float(lam)
    if lam == 0.5:
        raise NoInvariantMeasureError("lambda = 1/2: Lebesgue is null recurrent, no acip")
    if lam > 0.5:
        raise NoInvariantMeasureError("lambda > 1/2: Lebesgue measure is dissipative, no acip")
    return invariant_measure(lam, 1.0)


def density_ratio(n: int, lam, t) -> float:
    """mu_t(W_n) / m_t(W_n) = (1-2q) / (1-q)^(n+1)."""
    q = _q(lam, t)
    if not q < 0.5:
        raise NoInvariantMeasureError("density ratio needs lam^t < 1/2")
    return (1.0 - 2.0 * q) / (1.0 - q) ** (n + 1)


def transition_probability(i: int, j: int, lam, t) -> float:
    """Probability of W_i -> W_j under the conformal measure m_t.

    From W_1 it is (1-q) q^(j-1); from W_i, i >= 2, it is (1-q) q^(j-i+1)
    on j >= i-1.  Only meaningful for q < 1/2.
    """
    q = _q(lam, t)
    lo = max(i - 1, 1)
    if j < lo:
        return 0.0
    return (1.0 - q) * q ** (j - lo)


def stationarity_residual(lam, t, k_max: int = 100) -> float:
    """max_{j <= k_max} |(v P)_j - v_j| / v_j with the sum over i closed form.

    (v P)_j = v_1 P_{1j} + sum_{i=2}^{j+1} v_i P_{ij}, a finite sum.  Each
    term is formed relative to v_j in logs, since v_j itself underflows
    for small lam^t.
    """
    inv = invariant_measure(lam, t)
    q = _q(lam, t)
    log_q, log_1mq = math.log(q), math.log1p(-q)
    log_g = math.log(inv.params[1])

    def log_p(i, j):
        return log_1mq + (j - max(i - 1, 1)) * log_q

    worst = 0.0
    for j in range(1, k_max + 1):
        terms = [math.exp((i - j) * log_g + log_p(i, j)) for i in range(1, j + 2)]
        worst = max(worst, abs(math.fsum(terms) - 1.0))
    return worst


def _potential_at_pressure(lam, t):
    """log e^(Phi_t - P) on W_1 and on W_k, k >= 2, at P = log psi(t)."""
    q = _q(lam, t)
    return math.log1p(-q), math.log(q) + math.log1p(-q)


def log_cylinder_conformal_mass(word, lam, t) -> float:
    """log m_t([e_0 ... e_{n-1}]) for the conformal measure at p = log psi(t).

    Conformality pulls the cylinder forward n - 1 times onto W_{e_{n-1}}:
    m = exp(S_{n-1} Phi_t - (n-1) p) m_t(W_{e_{n-1}}).
    """
    symbols = _require_admissible(word)
    q = _q(lam, t)
    if not q < 0.5:
        raise DomainError("conformal cylinder masses are implemented for lam^t < 1/2")
    one, other = _potential_at_pressure(lam, t)
    head = sum(one if s == 1 else other for s in symbols[:-1])
    last = symbols[-1]
    return head + math.log1p(-q) + (last - 1) * math.log(q)


def cylinder_conformal_mass(word, lam, t) -> float:
    return math.exp(log_cylinder_conformal_mass(word, lam, t))


def gibbs_ratio(word, lam, t) -> float:
    """mu_t([w]) / exp(S_n Phi_t - n p) at p = log psi(t).

    Along a path the kernel divided by e^(Phi_t - p) is q^(e_{k+1} - e_k),
    so the product telescopes and the ratio is
    (1-2q)/(1-q)^(1+e_0) * g(e_{n-1}) with g(1) = 1, g(k) = q^(k-2).
    It grows without bound in e_0 and tends to 0 in e_{n-1}.
    """
    symbols = _require_admissible(word)
    q = _q(lam, t)
    if not q < 0.5:
        raise NoInvariantMeasureError("gibbs ratio needs lam^t < 1/2")
    e0, last = symbols[0], symbols[-1]
    log_g = 0.0 if last == 1 else (last - 2) * math.log(q)
    return math.exp(math.log1p(-2.0 * q) - (1 + e0) * math.log1p(-q) + log_g)


def eigenfunction(lam, t, j_max: int, tol: float = BOUNDARY_TOL) -> np.ndarray:
    """h_j = (1-q)^-(j-1), j = 1..j_max: transfer-operator eigenfunction for psi(t)."""
    q = _q(lam, t)
    if q > 0.5 + tol:
        raise DomainError("lam^t > 1/2 is transient: no eigenfunction is produced")
    return np.power(1.0 - q, -np.arange(j_max, dtype=float))


def eigenfunction_residual(lam, t, j_max: int) -> float:
    """max_i |(1-lam)^t h_1 + (lam(1-lam))^t sum_{j=2}^{i+1} h_j - psi h_i| / (psi h_i)."""
    lam, t = float(lam), float(t)
    h = eigenfunction(lam, t, j_max + 1)
    a = (1.0 - lam) ** t
    b = (lam * (1.0 - lam)) ** t
    psi_t = math.exp(pressure_closed(lam, t))
    csum = np.cumsum(h[1:])  # csum[i-1] = sum_{j=2}^{i+1} h_j
    lhs = a * h[0] + b * csum[:j_max]
    rhs = psi_t * h[:j_max]
    return float(np.max(np.abs(lhs - rhs) / rhs))


def rho_integral(lam, t, tol: float = BOUNDARY_TOL) -> float:
    """sum_i (q/(1-q))^(i-1) = (1-q)/(1-2q); +inf at q = 1/2 (divergence)."""
    q = _q(lam, t)
    if q > 0.5 + tol:
        raise DomainError("rho integral is defined for lam^t <= 1/2")
    if q >= 0.5 - tol:
        return math.inf
    return (1.0 - q) / (1.0 - 2.0 * q)


def variational_value(lam, t) -> VariationalValue:
    """Entropy plus potential integral of the equilibrium Markov measure.

    Every row of the kernel is a geometric law (1-q) q^m, m >= 0, whose
    entropy is -log(1-q) - q log q / (1-q); the chain spends mass
    1 - v_1 = q/(1-q) outside W_1.
    """
    lam_f, t_f = float(lam), float(t)
    q = _q(lam, t)
    if not q < 0.5:
        raise NoInvariantMeasureError("no equilibrium state for lam^t >= 1/2")
    log_q = t_f * math.log(lam_f)
    entropy = -math.log1p(-q) - q / (1.0 - q) * log_q
    integral = t_f * math.log1p(-lam_f) + q / (1.0 - q) * log_q
    return VariationalValue(entropy, integral, entropy + integral, pressure_closed(lam_f, t_f))
