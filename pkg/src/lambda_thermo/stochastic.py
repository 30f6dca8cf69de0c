"""The state chain as a random walk: sampling, drift, classification and
local partition functions.

Simulations are reproducible bit for bit: walker ``w`` draws from its own
Philox stream seeded by ``(seed, w)``, walkers are processed in fixed-size
blocks, and blocks merge through integer sums in block order, so the thread
count never changes a result.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import accumulate
from numbers import Rational

import numpy as np

from .coremap import step_arrays
from .errors import DomainError
from .measures import BOUNDARY_TOL, conformal_measure, rho_integral
from .spectra import lambda_t

__all__ = [
    "WalkConfig",
    "WalkStats",
    "Classification",
    "RecurrenceSeries",
    "HIST_CAP",
    "drift",
    "drift_general",
    "kernel_sample",
    "make_rng",
    "simulate_chain",
    "simulate_interval",
    "classify",
    "partition_Z",
    "partition_Z_column_sum",
    "null_column",
    "null_column_closed",
    "null_column_literal_binomial",
    "NULL_COLUMNS_DISPLAYED",
    "recurrence_series",
]

HIST_CAP = 512
"""States 1..HIST_CAP get their own occupation bin; deeper states share one."""

_BLOCK = 1024
_CHUNK = 1024
_RETURN_CAP = 100_000


def drift(lam) -> float:
    """Mean one-step displacement (2 lam - 1)/(1 - lam) of the Lebesgue chain off W_1."""
    lam = float(lam)
    if not (0.0 < lam < 1.0):
        raise DomainError("lambda must lie in (0, 1)")
    return (2.0 * lam - 1.0) / (1.0 - lam)


def drift_general(i: int, lam, t, p=None) -> float:
    """E[j - i] for the transition W_i -> W_j weighted by the (t, p)-conformal measure.

    The kernel is m(W_j) / sum_{k >= lo} m(W_k) on j >= lo = max(i-1, 1).
    On the geometric branch this is (2q-1)/(1-q) for every i >= 2; from
    W_1 the walk cannot step down and the drift is q/(1-q).  On the
    poly-geometric branch (q > 1/2, p = P_Conf) it is 2B/(A + B i) with
    mass (A + B k) 2^-k, positive but tending to 0.
    """
    if i < 1:
        raise DomainError("state must be >= 1")
    m = conformal_measure(lam, t, p)
    lo = max(i - 1, 1)
    mean = m.tail_scaled(lo, 1) / m.tail_scaled(lo)
    return float(mean - i)


def make_rng(seed: int, walker: int) -> np.random.Generator:
    """Counter-based stream for one walker, derived only from (seed, walker)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(seed), int(walker)])))


def _geometric(u: np.ndarray, log_q: float) -> np.ndarray:
    """Inverse CDF on u in (0, 1]: P(G >= m) = q^m."""
    return np.floor(np.log(u) / log_q).astype(np.int64)


def kernel_sample(i: int, lam, t, rng: np.random.Generator, size=None):
    """Draw j from (1-q) q^(j - lo), j >= lo = max(i-1, 1), by one uniform each."""
    q = float(lambda_t(lam, t))
    if not (0.0 < q < 1.0):
        raise DomainError("lam^t must lie in (0, 1)")
    u = 1.0 - rng.random(size)
    g = _geometric(np.asarray(u), math.log(q))
    out = max(i - 1, 1) + g
    return int(out) if size is None else out


@dataclass(frozen=True)
class WalkConfig:
    lam: float
    t: float = 1.0
    n_steps: int = 10_000
    n_walkers: int = 100
    seed: int = 0
    escape_threshold: int = 50
    initial_state: int | str = 1

    def __post_init__(self):
        if not (0.0 < float(self.lam) < 1.0):
            raise DomainError("lambda must lie in (0, 1)")
        if self.n_steps < 1 or self.n_walkers < 1:
            raise DomainError("n_steps and n_walkers must be >= 1")
        if self.escape_threshold < 2:
            raise DomainError("escape_threshold must be >= 2")
        if isinstance(self.initial_state, str):
            if self.initial_state != "uniform":
                raise DomainError("initial_state must be a state >= 1 or 'uniform'")
        elif int(self.initial_state) < 1:
            raise DomainError("initial_state must be >= 1")
        if not (0 <= int(self.seed) < 2**64):
            raise DomainError("seed must be a 64-bit unsigned integer")


@dataclass
class WalkStats:
    """Aggregated statistics over all walkers.

    ``occupation`` has HIST_CAP + 1 entries: frequencies of states
    1..HIST_CAP, then the overflow bin; it counts the states visited after
    each step.  ``occupation_stderr`` is the across-walker standard error of
    each bin.  A walker has escaped when, at the horizon, it last exceeded
    the threshold without dropping below half of it since.
    """

    occupation: np.ndarray
    occupation_stderr: np.ndarray
    occupation_counts: np.ndarray
    escape_fraction: float
    mean_displacement: float
    var_displacement: float
    return_times: np.ndarray
    max_state: int
    n_walkers: int
    n_steps: int
    mode: str = "chain"
    extra: dict = field(default_factory=dict)

    def to_dict(self, max_return_samples: int = 1000) -> dict:
        return {
            "mode": self.mode,
            "n_walkers": self.n_walkers,
            "n_steps": self.n_steps,
            "escape_fraction": self.escape_fraction,
            "mean_displacement": self.mean_displacement,
            "var_displacement": self.var_displacement,
            "max_state": self.max_state,
            "occupation": [float(x) for x in self.occupation],
            "occupation_stderr": [float(x) for x in self.occupation_stderr],
            "return_time_count": int(self.return_times.size),
            "return_times": [int(x) for x in self.return_times[:max_return_samples]],
        }

    def histogram_rows(self):
        """(bin label, frequency, stderr) per nonempty bin; the last label is '>HIST_CAP'."""
        rows = []
        for b, (f, e) in enumerate(zip(self.occupation, self.occupation_stderr), start=1):
            if self.occupation_counts[b - 1]:
                label = str(b) if b <= HIST_CAP else f">{HIST_CAP}"
                rows.append((label, float(f), float(e)))
        return rows


@dataclass
class _BlockResult:
    counts: np.ndarray  # per-bin visit totals
    counts_sq: np.ndarray  # per-bin sum over walkers of count^2
    escaped: int
    disp_sum: int
    disp_sq: int
    max_state: int
    returns: np.ndarray


def _initial_states(cfg: WalkConfig, rngs, interval: bool):
    n = len(rngs)
    lam = float(cfg.lam)
    if cfg.initial_state != "uniform":
        states = np.full(n, int(cfg.initial_state), dtype=np.int64)
        rels = np.array([1.0 - r.random() for r in rngs]) if interval else None
        return states, rels
    # Lebesgue-uniform x: the cell is geometric, the position inside it uniform
    v = np.array([1.0 - r.random() for r in rngs])
    states = 1 + _geometric(v, math.log(lam))
    rels = np.array([1.0 - r.random() for r in rngs]) if interval else None
    return states, rels


def _run_block(cfg: WalkConfig, first: int, n: int, interval: bool) -> _BlockResult:
    rngs = [make_rng(cfg.seed, w) for w in range(first, first + n)]
    states, rels = _initial_states(cfg, rngs, interval)
    start = states.copy()
    log_q = math.log(float(lambda_t(cfg.lam, cfg.t))) if not interval else 0.0
    lam = float(cfg.lam)
    T = cfg.escape_threshold
    nbins = HIST_CAP + 1
    per_walker = np.zeros((n, nbins), dtype=np.int64)
    flag = np.zeros(n, dtype=bool)
    last_visit = np.where(states == 1, 0, -1).astype(np.int64)
    returns = []
    n_returns = 0
    max_state = int(states.max())
    done = 0
    offsets = np.arange(n, dtype=np.int64)[None, :] * nbins
    while done < cfg.n_steps:
        c = min(_CHUNK, cfg.n_steps - done)
        traj = np.empty((c, n), dtype=np.int64)
        if interval:
            for s in range(c):
                states, rels = step_arrays(states, rels, lam)
                traj[s] = states
        else:
            u = np.empty((c, n))
            for w, r in enumerate(rngs):
                u[:, w] = r.random(c)
            g = _geometric(1.0 - u, log_q)
            for s in range(c):
                states = np.maximum(states - 1, 1) + g[s]
                traj[s] = states
        for s in range(c):
            row = traj[s]
            flag |= row > T
            flag &= ~(row < T / 2)
        max_state = max(max_state, int(traj.max()))
        bins = np.minimum(traj, nbins) - 1
        per_walker += np.bincount((bins + offsets).ravel(), minlength=n * nbins).reshape(n, nbins)
        # return times to W_1, walker-major within the chunk
        w_idx, t_idx = np.nonzero((traj == 1).T)
        if w_idx.size:
            times = done + t_idx.astype(np.int64) + 1
            prev = np.empty_like(times)
            prev[1:] = times[:-1]
            first_hit = np.ones(times.size, dtype=bool)
            first_hit[1:] = w_idx[1:] != w_idx[:-1]
            prev[first_hit] = last_visit[w_idx[first_hit]]
            ok = prev >= 0
            if n_returns < _RETURN_CAP:
                gaps = (times - prev)[ok][: _RETURN_CAP - n_returns]
                returns.append(gaps)
                n_returns += gaps.size
            last_hit = np.ones(times.size, dtype=bool)
            last_hit[:-1] = w_idx[1:] != w_idx[:-1]
            last_visit[w_idx[last_hit]] = times[last_hit]
        done += c
    disp = states - start
    return _BlockResult(
        counts=per_walker.sum(axis=0),
        counts_sq=(per_walker * per_walker).sum(axis=0),
        escaped=int(flag.sum()),
        disp_sum=int(disp.sum()),
        disp_sq=int((disp * disp).sum()),
        max_state=max_state,
        returns=np.concatenate(returns) if returns else np.zeros(0, dtype=np.int64),
    )


def _threads(threads) -> int:
    if threads is None:
        env = os.environ.get("LAMBDA_THERMO_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


def _simulate(cfg: WalkConfig, interval: bool, threads) -> WalkStats:
    blocks = [(b, min(_BLOCK, cfg.n_walkers - b)) for b in range(0, cfg.n_walkers, _BLOCK)]
    nthreads = min(_threads(threads), len(blocks))
    if nthreads == 1:
        results = [_run_block(cfg, b, n, interval) for b, n in blocks]
    else:
        with ThreadPoolExecutor(nthreads) as pool:
            results = list(pool.map(lambda bn: _run_block(cfg, bn[0], bn[1], interval), blocks))
    counts = sum(r.counts for r in results)
    counts_sq = sum(r.counts_sq for r in results)
    W, N = cfg.n_walkers, cfg.n_steps
    occupation = counts / (W * N)
    if W > 1:
        mean_f = counts / (W * N)
        var_f = (counts_sq / N**2 - W * mean_f**2) / (W - 1)
        stderr = np.sqrt(np.maximum(var_f, 0.0) / W)
    else:
        stderr = np.full(counts.shape, np.nan)
    disp_sum = sum(r.disp_sum for r in results)
    disp_sq = sum(r.disp_sq for r in results)
    mean_disp = disp_sum / W
    var_disp = (disp_sq - disp_sum * Fraction(disp_sum, W)) / (W - 1) if W > 1 else 0.0
    returns = np.concatenate([r.returns for r in results])[:_RETURN_CAP]
    return WalkStats(
        occupation=occupation,
        occupation_stderr=stderr,
        occupation_counts=counts,
        escape_fraction=sum(r.escaped for r in results) / W,
        mean_displacement=float(mean_disp),
        var_displacement=float(var_disp),
        return_times=returns,
        max_state=max(r.max_state for r in results),
        n_walkers=W,
        n_steps=N,
        mode="interval" if interval else "chain",
    )


def simulate_chain(config: WalkConfig, threads=None) -> WalkStats:
    """Independent trajectories of the state chain with kernel (1-q) q^(j - lo)."""
    q = float(lambda_t(config.lam, config.t))
    if not (0.0 < q < 1.0):
        raise DomainError("lam^t must lie in (0, 1)")
    return _simulate(config, False, threads)


def simulate_interval(config: WalkConfig, threads=None) -> WalkStats:
    """Cell sequences of F_lambda from random points, iterated in (state, rel) form.

    Starting points are random (uniform by default); after that the map is
    deterministic and ``config.t`` plays no role.  Floating-point orbits at
    lam = 1/2 are dyadic and collapse onto 1 within ~53 steps, so statistics
    there reflect rounding rather than the map.
    """
    return _simulate(config, True, threads)


@dataclass(frozen=True)
class Classification:
    regime: str
    q: float
    rho_integral_finite: bool | None
    drift_sign: int

    def to_dict(self) -> dict:
        return {
            "regime": self.regime,
            "lambda_t": self.q,
            "rho_integral_finite": self.rho_integral_finite,
            "drift_sign": self.drift_sign,
        }


def classify(lam, t, tol: float = BOUNDARY_TOL, probe_state: int = 1000) -> Classification:
    """Positive recurrent, null recurrent or transient by comparing lam^t with 1/2.

    Certificates: finiteness of the integral of the eigenfunction against
    the conformal measure (not defined in the transient regime) and the sign
    of the conformal drift at ``probe_state`` (0 if below 1e-12 in size).
    """
    lam = float(lam)
    if not (0.0 < lam < 1.0):
        raise DomainError("lambda must lie in (0, 1)")
    q = lam ** float(t)
    if abs(q - 0.5) < tol:
        regime = "null_recurrent"
    elif q < 0.5:
        regime = "positive_recurrent"
    else:
        regime = "transient"
    finite = None if regime == "transient" else math.isfinite(rho_integral(lam, t, tol))
    d = drift_general(probe_state, lam, t) if q < 1.0 else math.inf
    sign = 0 if abs(d) < 1e-12 else (1 if d > 0 else -1)
    return Classification(regime, q, finite, sign)


# local partition functions


def _normalized_weights(q):
    """Row-1 and band weights of the kind-B matrix divided by e^{P_Conf}."""
    if q <= 0.5:
        return 1 - q, q * (1 - q)
    return 1 / (4 * q), q**0 / 4


def _left_power_apply(u: list, w1, wb) -> list:
    """u^T M for the band-constant matrix with row 1 = w1, rows >= 2 = wb on j >= i-1."""
    K = len(u)
    tail = list(accumulate(u[1:]))  # tail[m] = u_2 + ... + u_{m+2}
    out = []
    for j in range(1, K + 1):
        s = u[0] * w1
        top = min(j + 1, K)  # rows 2..top reach column j
        if top >= 2:
            s += wb * tail[top - 2]
        out.append(s)
    return out


def _exact_q(lam, t, q):
    if q is not None:
        return Fraction(q) if isinstance(q, (Rational, str)) else float(q)
    qq = lambda_t(lam, t)
    return Fraction(qq) if isinstance(qq, Rational) else qq


def partition_Z(k: int, e0: int = 1, lam=None, t=None, *, q=None, K: int | None = None):
    """e^{-k P} Z_k at [e0]: the (e0, e0) entry of (B / e^{P_Conf})^k.

    The matrix is truncated at K = k + e0 + 1, which is exact because a
    loop of length k from e0 never climbs above e0 + k.  With rational q
    (a Fraction ``q``, or a Fraction ``lam`` with integer ``t``) the
    result is an exact Fraction.
    """
    if k < 1 or e0 < 1:
        raise DomainError("k and e0 must be >= 1")
    q = _exact_q(lam, t, q)
    need = k + e0 + 1
    K = need if K is None else K
    if K < need:
        raise DomainError(f"truncation K must be >= {need}")
    w1, wb = _normalized_weights(q)
    zero = 0 * w1
    u = [zero] * K
    u[e0 - 1] = w1**0
    for _ in range(k):
        u = _left_power_apply(u, w1, wb)
    return u[e0 - 1]


def partition_Z_column_sum(k: int) -> Fraction:
    """1 . D^{k-1} . e_1 at lam^t = 1/2, which equals 2 (D^k)_{1,1}."""
    col = null_column(k - 1) if k > 1 else [Fraction(1)]
    return sum(col, Fraction(0))


def null_column(k: int) -> list:
    """First column of D^k (row 1 = 1/2, rows >= 2 = 1/4 on j >= i-1), exact, length k+2."""
    if k < 0:
        raise DomainError("k must be >= 0")
    K = k + 2
    v = [Fraction(0)] * K
    v[0] = Fraction(1)
    for _ in range(k):
        suffix = list(accumulate(reversed(v)))[::-1]  # suffix[j] = v_j + ... + v_K
        v = [Fraction(1, 2) * suffix[0]] + [Fraction(1, 4) * suffix[i - 1] for i in range(1, K)]
    return v


def null_column_closed(k: int) -> list:
    """(D^k)_{1,1} = C(2k, k)/4^k and (D^k)_{i,1} = C(2k-i+1, k-i+1)/4^k, 2 <= i <= k+1."""
    out = [Fraction(math.comb(2 * k, k), 4**k)]
    out += [Fraction(math.comb(2 * k - i + 1, k - i + 1), 4**k) for i in range(2, k + 2)]
    return out + [Fraction(0)]


def null_column_literal_binomial(k: int) -> list:
    """The binomial formula with p_{k,i} = C(k + 2(i-1), 2(i-1)) read literally.

    Kept for comparison: it disagrees with the exact columns for k >= 2.
    """
    p = lambda kk, i: math.comb(kk + 2 * (i - 1), 2 * (i - 1))
    out = [Fraction(p(k, k), 2 ** (2 * k - 1))]
    out += [Fraction(p(k, k - i + 2), 2 ** (2 * k)) for i in range(2, k + 2)]
    return out + [Fraction(0)]


NULL_COLUMNS_DISPLAYED = {
    1: [Fraction(1, 2), Fraction(1, 4)],
    2: [Fraction(3, 8), Fraction(3, 16), Fraction(1, 16)],
    3: [Fraction(10, 32), Fraction(10, 64), Fraction(4, 64), Fraction(1, 64)],
    4: [Fraction(35, 128), Fraction(35, 256), Fraction(15, 256), Fraction(5, 256), Fraction(1, 256)],
    5: [Fraction(126, 512)] + [Fraction(n, 1024) for n in (126, 56, 21, 6, 1)],
}
"""Reference values of the first column of D^k for k = 1..5."""


@dataclass
class RecurrenceSeries:
    terms: np.ndarray
    partial_sums: np.ndarray
    slope: float
    verdict: str
    regime: str

    def to_dict(self, stride: int | None = None) -> dict:
        n = self.terms.size
        stride = stride or max(1, n // 1000)
        idx = np.arange(0, n, stride)
        return {
            "regime": self.regime,
            "verdict": self.verdict,
            "loglog_slope": self.slope,
            "n": [int(i + 1) for i in idx],
            "term": [float(self.terms[i]) for i in idx],
            "partial_sum": [float(self.partial_sums[i]) for i in idx],
        }


def recurrence_series(lam, t, N: int, *, q=None, K_cap: int = 2048,
                      tol: float = BOUNDARY_TOL) -> RecurrenceSeries:
    """Terms e^{-nP} Z_n at [1] for n <= N, their partial sums and a verdict.

    At lam^t = 1/2 the terms are C(2n, n)/4^n, generated by the ratio
    (2n-1)/(2n).  Elsewhere they come from float matrix powers truncated at
    min(N + 2, K_cap) states; a loop of length n at W_1 stays below state
    n/2 + 2, so terms are exact up to n = 2 (K_cap - 2).  The verdict reads the log-log slope of the
    terms over the last decade: near 0 (constant terms, divergent), near
    -1/2 (divergent), or below -1 (convergent).
    """
    if N < 10:
        raise DomainError("N must be >= 10")
    qv = float(_exact_q(lam, t, q))
    if abs(qv - 0.5) < tol:
        n = np.arange(1, N + 1)
        terms = np.cumprod((2.0 * n - 1.0) / (2.0 * n))
        regime = "null_recurrent"
    else:
        regime = "positive_recurrent" if qv < 0.5 else "transient"
        w1, wb = (float(x) for x in _normalized_weights(qv))
        K = min(N + 2, K_cap)
        # the column M^n e_1 stays bounded (entries are return weights), the row does not
        v = np.zeros(K)
        v[0] = 1.0
        terms = np.empty(N)
        for i in range(N):
            suffix = np.cumsum(v[::-1])[::-1]
            new = np.empty(K)
            new[0] = w1 * suffix[0]
            new[1:] = wb * suffix[:-1]
            v = new
            terms[i] = v[0]
    partial = np.cumsum(terms)
    lo = max(1, N // 10)
    x = np.log(np.arange(lo, N + 1))
    y = np.log(np.maximum(terms[lo - 1:], np.finfo(float).tiny))
    slope = float(np.polyfit(x, y, 1)[0])
    verdict = "convergent" if slope < -1.0 else "divergent"
    return RecurrenceSeries(terms, partial, slope, verdict, regime)
