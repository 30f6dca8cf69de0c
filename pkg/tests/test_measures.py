import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from lambda_thermo import (
    DomainError,
    NoConformalMeasureError,
    NoInvariantMeasureError,
    StateMeasure,
    acip,
    conformal_measure,
    conformal_pressure,
    conformal_residual,
    conformal_solution,
    cylinder_conformal_mass,
    density_ratio,
    eigenfunction,
    eigenfunction_residual,
    ergodic_sum_phi,
    gibbs_ratio,
    invariant_measure,
    is_admissible,
    pressure_closed,
    psi,
    rho_integral,
    stationarity_residual,
    transition_probability,
    variational_value,
)

lams = st.floats(0.05, 0.95)
ts = st.floats(0.05, 4.0)


def q_below_half(lam, t):
    return lam**t < 0.5 - 1e-6


def test_conformal_pressure_examples():
    assert conformal_pressure(0.3, 1.0) == pytest.approx(0.0, abs=1e-15)
    assert conformal_pressure(0.7, 1.0) == pytest.approx(math.log(0.84), abs=1e-15)
    for lam in np.linspace(0.05, 0.95, 10):
        for t in np.linspace(-1, 4, 11):
            assert conformal_pressure(lam, t) == pytest.approx(pressure_closed(lam, t), abs=1e-15)


def test_conformal_measure_examples():
    m = conformal_measure(0.5, 1.0, 0.0)
    assert np.allclose(m.masses(40), 2.0 ** -np.arange(1, 41), rtol=1e-14, atol=0)
    for lam, t in ((0.7, 1.0), (0.9, 0.5), (0.25, 0.5)):
        q = lam**t
        m = conformal_measure(lam, t)
        assert m.law == "poly-geometric"
        assert m.mass(1) == pytest.approx(1 / (4 * q), rel=1e-14)
        assert m.mass(2) == pytest.approx(0.25, rel=1e-14)
    m = conformal_measure(0.3, 1.0, 0.1)
    assert m.law == "two-term"
    assert conformal_residual(m, 0.3, 1.0, 0.1) < 1e-12


def test_below_pressure_is_rejected():
    with pytest.raises(NoConformalMeasureError):
        conformal_measure(0.3, 1.0, -0.01)
    with pytest.raises(NoConformalMeasureError):
        conformal_measure(0.7, 1.0, math.log(0.84) - 1e-3)


def test_geometric_law_matches_closed_form():
    for lam, t in ((0.3, 1.0), (0.2, 0.5), (0.6, 3.0)):
        q = lam**t
        m = conformal_measure(lam, t)
        k = np.arange(1, 60)
        assert np.allclose(m.masses(59), (1 - q) * q ** (k - 1), rtol=1e-13, atol=0)


@given(lams, ts)
def test_residual_at_the_pressure(lam, t):
    m = conformal_measure(lam, t)
    assert conformal_residual(m, lam, t, conformal_pressure(lam, t)) < 1e-13


@given(lams, ts, st.floats(1e-6, 5.0))
def test_residual_above_the_pressure(lam, t, dp):
    p = conformal_pressure(lam, t) + dp
    m = conformal_measure(lam, t, p)
    assert m.law == "two-term"
    assert conformal_residual(m, lam, t, p) < 1e-12


@given(lams, ts, st.one_of(st.just(0.0), st.floats(1e-6, 5.0)))
def test_masses_positive_and_normalised(lam, t, dp):
    m = conformal_measure(lam, t, conformal_pressure(lam, t) + dp)
    assert m.positive()
    assert m.total() == pytest.approx(1.0, abs=1e-12)
    prefix = math.fsum(m.masses(400))
    assert prefix + m.tail(401) == pytest.approx(1.0, abs=1e-12)


def test_perturbed_measure_has_large_residual():
    lam, t = 0.3, 1.0
    m = conformal_measure(lam, t)

    class Bumped:
        rate = m.rate

        def mass_scaled(self, k):
            return m.mass_scaled(k) * (1.01 if k == 3 else 1.0)

        def tail_scaled(self, k, moment=0):
            extra = 0.01 * m.mass_scaled(3) * m.rate ** (3 - k) if k <= 3 else 0.0
            return m.tail_scaled(k) + extra

    assert conformal_residual(Bumped(), lam, t, 0.0) > 1e-3


def test_conformal_solution_roots():
    for lam, t, dp in ((0.3, 1.0, 0.1), (0.7, 2.0, 0.5), (0.9, 1.0, 1e-3)):
        p = conformal_pressure(lam, t) + dp
        s = conformal_solution(lam, t, p)
        for r in (s.r_plus, s.r_minus):
            assert r * r - r + s.c == pytest.approx(0.0, abs=1e-15)
        assert 0 < s.r_minus <= 0.5 <= s.r_plus < 1


def test_negative_A_minus_still_positive():
    # A_minus < 0 happens when lam^t > r_plus; masses remain positive
    lam, t = 0.9, 1.0
    p = conformal_pressure(lam, t) + 0.2
    s = conformal_solution(lam, t, p)
    assert s.A_minus < 0
    assert conformal_measure(lam, t, p).positive()


def test_state_measure_validation():
    with pytest.raises(DomainError):
        StateMeasure("geometric", (1.0, 1.5))
    with pytest.raises(DomainError):
        StateMeasure("cubic", (1.0, 0.5))
    d = conformal_measure(0.7, 1.0).to_dict()
    assert d["law"] == "poly-geometric" and len(d["masses"]) == 32 and set(d["parameters"]) == {"A", "B", "gamma"}



@pytest.mark.parametrize("lam, t", [(1 / 3, 1.0), (1 / 9, 0.5), (0.6, math.log(3) / math.log(1 / 0.6))])
def test_invariant_measure_one_third(lam, t):
    m = invariant_measure(lam, t)
    assert np.allclose(m.masses(50), 2.0 ** -np.arange(1, 51), rtol=1e-12, atol=0)
    assert m.total() == pytest.approx(1.0, abs=1e-15)


def test_acip():
    assert np.allclose(acip(1 / 3).masses(30), 2.0 ** -np.arange(1, 31), rtol=1e-13, atol=0)
    assert acip(0.4).mass(1) == pytest.approx(1 / 3, rel=1e-14)
    with pytest.raises(NoInvariantMeasureError, match="null recurrent"):
        acip(0.5)
    with pytest.raises(NoInvariantMeasureError, match="dissipative"):
        acip(0.7)
    with pytest.raises(NoInvariantMeasureError):
        invariant_measure(0.8, 1.0)


@given(lams, ts)
def test_stationarity(lam, t):
    assume(q_below_half(lam, t))
    assert stationarity_residual(lam, t) < 1e-12


def test_density_ratio():
    lam, t = 1 / 3, 1.0
    assert density_ratio(1, lam, t) == pytest.approx(0.75, rel=1e-14)
    for lam, t in ((0.3, 1.0), (0.2, 2.0), (0.45, 1.0)):
        q = lam**t
        inv, conf = invariant_measure(lam, t), conformal_measure(lam, t)
        for n in range(1, 51):
            assert density_ratio(n + 1, lam, t) / density_ratio(n, lam, t) == pytest.approx(1 / (1 - q))
            assert density_ratio(n, lam, t) * conf.mass(n) == pytest.approx(inv.mass(n), rel=1e-12)


def test_transition_rows_sum_to_one():
    for i in (1, 2, 7):
        row = [transition_probability(i, j, 0.3, 1.0) for j in range(1, 200)]
        assert math.fsum(row) == pytest.approx(1.0, abs=1e-15)
        assert all(p == 0 for p in row[: max(i - 2, 0)])


def admissible_words(draw_list):
    word = [draw_list[0]]
    for s in draw_list[1:]:
        word.append(max(s, word[-1] - 1))
    return tuple(word)


def test_cylinder_mass_one_symbol():
    for lam, t in ((0.3, 1.0), (0.2, 0.5)):
        m = conformal_measure(lam, t)
        for k in range(1, 20):
            assert cylinder_conformal_mass((k,), lam, t) == pytest.approx(m.mass(k), rel=1e-13)


@given(lams, ts, st.lists(st.integers(1, 8), min_size=1, max_size=5))
def test_cylinder_mass_additivity(lam, t, raw):
    assume(q_below_half(lam, t))
    w = admissible_words(raw)
    q = lam**t
    lo = max(1, w[-1] - 1)
    hi = lo + 60
    children = [cylinder_conformal_mass(w + (j,), lam, t) for j in range(lo, hi + 1)]
    tail = children[-1] * q / (1 - q)  # children are geometric in j with ratio q
    assert math.fsum(children) + tail == pytest.approx(cylinder_conformal_mass(w, lam, t), rel=1e-12)


def test_cylinder_mass_is_conformal():
    rng = np.random.default_rng(11)
    for _ in range(100):
        lam, t = rng.uniform(0.05, 0.45), rng.uniform(1.0, 3.0)
        w = admissible_words(list(rng.integers(1, 7, rng.integers(2, 6))))
        p = conformal_pressure(lam, t)
        head = w[:-1]
        # F^{n-1} maps [w] onto W_{e_{n-1}} with Jacobian e^{-S Phi_t}
        expected = math.exp(ergodic_sum_phi(head, t, lam) - len(head) * p) * conformal_measure(lam, t).mass(w[-1])
        assert cylinder_conformal_mass(w, lam, t) == pytest.approx(expected, rel=1e-12)


def test_gibbs_ratio_depends_on_endpoints_only():
    lam, t = 0.3, 1.0
    rng = np.random.default_rng(2)
    e0, last, n = 3, 4, 7
    values = set()
    count = 0
    while count < 100:
        interior = tuple(int(x) for x in rng.integers(1, 9, n - 2))
        w = (e0,) + interior + (last,)
        if not is_admissible(w):
            continue
        values.add(round(gibbs_ratio(w, lam, t), 12))
        count += 1
    assert len(values) == 1


def markov_gibbs_oracle(word, lam, t):
    """mu_t([w]) e^{n p - S_n Phi_t} straight from the stationary chain."""
    inv = invariant_measure(lam, t)
    mass = inv.mass(word[0])
    for a, b in zip(word, word[1:]):
        mass *= transition_probability(a, b, lam, t)
    return mass * math.exp(len(word) * conformal_pressure(lam, t) - ergodic_sum_phi(word, t, lam))


def test_gibbs_ratio_against_chain():
    for w in ((1,), (2, 1), (3, 2, 5), (1, 1, 4, 3), (6, 5, 4, 8)):
        for lam, t in ((0.3, 1.0), (0.2, 1.5)):
            assert gibbs_ratio(w, lam, t) == pytest.approx(markov_gibbs_oracle(w, lam, t), rel=1e-12)


def test_gibbs_ratio_is_unbounded():
    lam, t = 0.3, 1.0
    grows = [gibbs_ratio(tuple(range(e0, 1, -1)), lam, t) for e0 in range(3, 30)]
    assert all(b > a for a, b in zip(grows, grows[1:]))
    falls = [gibbs_ratio((2, last), lam, t) for last in range(2, 30)]
    assert all(b < a for a, b in zip(falls, falls[1:]))


def test_eigenfunction():
    assert np.allclose(eigenfunction(0.5, 1.0, 10), 2.0 ** np.arange(10))
    assert eigenfunction(0.3, 1.0, 5)[0] == 1.0
    assert eigenfunction_residual(1 / 3, 1.0, 40) < 1e-12
    q_third = (1 / 3) ** 1.0
    assert q_third < 0.5
    with pytest.raises(DomainError):
        eigenfunction(0.8, 1.0, 5)


def test_rho_integral():
    assert rho_integral(0.5, 1.0) == math.inf
    assert rho_integral(1 / 3, 1.0) == pytest.approx(2.0)
    vals = [rho_integral(0.5 - d, 1.0) for d in (0.1, 0.01, 0.001, 1e-6)]
    assert all(b > a for a, b in zip(vals, vals[1:]))


@given(lams, ts)
def test_variational_identity(lam, t):
    assume(q_below_half(lam, t))
    v = variational_value(lam, t)
    assert v.sum == pytest.approx(math.log(psi(lam, t)), abs=1e-12)
    assert v.log_psi == pytest.approx(v.sum, abs=1e-12)


def test_variational_errors_and_continuity():
    with pytest.raises(NoInvariantMeasureError):
        variational_value(0.7, 1.0)
    lam = 0.3
    tc = math.log(0.5) / math.log(lam)
    v = variational_value(lam, tc + 1e-9)
    assert v.sum == pytest.approx(math.log(4 * (lam * (1 - lam)) ** tc), abs=1e-6)


def test_entropy_against_truncated_chain():
    from lambda_thermo.acceptance import brute_entropy

    brute = brute_entropy(1 / 3, 1.0, 200)
    assert brute == pytest.approx(variational_value(1 / 3, 1.0).entropy, abs=1e-10)
    # an independent sanity value: geometric row entropy is 3 log(3)/2 - log 2 at q = 1/3
    assert brute == pytest.approx(-math.log(2 / 3) + 0.5 * math.log(3), abs=1e-10)
