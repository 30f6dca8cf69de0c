import math
from fractions import Fraction

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lambda_thermo import (
    DomainError,
    Kind,
    NonConvergenceError,
    build,
    char_poly,
    char_poly_binomial,
    char_poly_equal_AB,
    eigvec_recurrence_check,
    lambda_t,
    leading_eigen,
    perron_root,
    phase_transition_report,
    pressure_closed,
    pressure_curve,
    psi,
    psi_prime,
    psi_second,
    spectral_radius,
    t0,
)

KINDS = [Kind.A, Kind.B, Kind.A_HAT, Kind.B_HAT, Kind.D]


def test_build_examples():
    A = build("A", 2, 0.5, 1.0).dense()
    assert np.allclose(A, [[0.5, 0.25], [0.5, 0.25]])
    D = build("D", 5).dense()
    assert np.allclose(D[0], 0.5) and np.allclose(D[1], 0.25)
    assert np.allclose(D[2], [0, 0.25, 0.25, 0.25, 0.25])
    Bh = build("B-hat", 6, 0.3, 1.7).dense()
    band = (0.3 * 0.7) ** 1.7
    for i in range(6):
        for j in range(6):
            assert Bh[i, j] == pytest.approx(band if j >= i - 1 else 0.0, rel=1e-15)


def test_hat_kinds_are_parent_minors():
    for kind, hat in ((Kind.A, Kind.A_HAT), (Kind.B, Kind.B_HAT)):
        parent = build(kind, 9, 0.4, 1.3).dense()
        minor = build(hat, 8, 0.4, 1.3).dense()
        if kind is Kind.A:
            # the A-hat kind is similar to the minor; compare spectra
            assert np.allclose(
                np.sort(np.abs(np.linalg.eigvals(parent[1:, 1:]))),
                np.sort(np.abs(np.linalg.eigvals(minor))),
            )
        else:
            assert np.allclose(parent[1:, 1:], minor)


@pytest.mark.parametrize("kind", KINDS)
def test_band_structure(kind):
    M = build(kind, 12, 0.35, 1.4).dense()
    i, j = np.indices(M.shape)
    assert np.all(M[j < i - 1] == 0)
    assert np.all(M[j >= i - 1] > 0)


@pytest.mark.parametrize("kind", KINDS)
@given(K=st.integers(1, 200), lam=st.floats(0.05, 0.95), t=st.floats(0.0, 4.0), seed=st.integers(0, 9))
def test_apply_matches_dense(kind, K, lam, t, seed):
    op = build(kind, K, lam, t)
    M = op.dense()
    v = np.random.default_rng(seed).uniform(-1, 1, K)
    scale = np.abs(M).sum() * np.abs(v).max() + 1e-300
    assert np.abs(op.left_apply(v) - v @ M).max() <= 1e-13 * scale
    assert np.abs(op.right_apply(v) - M @ v).max() <= 1e-13 * scale


def test_build_rejects_bad_input():
    with pytest.raises(DomainError):
        build("B", 0, 0.5, 1.0)
    with pytest.raises(DomainError):
        build("B", 4, 1.2, 1.0)
    with pytest.raises((DomainError, ValueError)):
        build("Q", 4, 0.5, 1.0)


def test_lambda_t_exact_for_rationals():
    assert lambda_t(Fraction(2, 3), 2) == Fraction(4, 9)
    assert isinstance(lambda_t(0.3, 1.5), float)


def test_char_poly_table():
    q = Fraction(2, 7)
    assert char_poly(1, q=q).coefficients == (1, -1)
    assert char_poly(2, q=q).coefficients == (0, -(q + 1), 1)
    assert char_poly(3, q=q).coefficients == (0, -q, 2 * q + 1, -1)
    assert char_poly(3, q=q).exact


@pytest.mark.parametrize("q", [Fraction(1, 3), Fraction(2, 5), Fraction(1, 2), Fraction(3, 5)])
def test_char_poly_recurrence_and_binomial_form(q):
    for K in range(3, 16):
        s = Fraction(7, 5)
        lhs = char_poly(K, q=q)(s)
        rhs = -s * char_poly(K - 1, q=q)(s) - s * q * char_poly(K - 2, q=q)(s) if K > 2 else None
        assert lhs == rhs
        assert char_poly(K, q=q).coefficients == char_poly_binomial(K, q).coefficients


@pytest.mark.parametrize("q", [Fraction(1, 3), Fraction(1, 4), Fraction(2, 5), Fraction(1, 2)])
def test_char_poly_at_one_over_one_minus_q(q):
    r = 1 / (1 - q)
    for K in range(1, 21):
        assert r ** (-K) * char_poly(K, q=q)(r) == (-1) ** K * q**K


def test_char_poly_is_the_determinant():
    q = Fraction(3, 8)
    for K in range(1, 8):
        M = np.array(build("B", K, 0.5, 1.0).dense()) * 0  # shape only
        N = [[float(q) if (i > 0 and j >= i - 1) else (1.0 if i == 0 else 0.0) for j in range(K)] for i in range(K)]
        for s in (0.3, 1.1, 2.0):
            det = np.linalg.det(np.array(N) - s * np.eye(K))
            assert char_poly(K, q=q)(s) == pytest.approx(det, abs=1e-12)
        assert M.shape == (K, K)


@pytest.mark.parametrize("K, q", [(K, Fraction(1, 3)) for K in range(1, 7)] + [(8, Fraction(2, 5)), (12, Fraction(3, 5))])
def test_char_poly_equal_AB_exact(K, q):
    assert char_poly_equal_AB(K, q=q)


def test_char_poly_equal_AB_float_fallback():
    assert char_poly_equal_AB(6, 0.37, 1.3)
    assert char_poly_equal_AB(15, q=Fraction(1, 3))  # above the exact bound


def surd(K, q):
    return {
        2: q + 1,
        3: (2 * q + 1 + math.sqrt(4 * q * q + 1)) / 2,
        4: (3 * q + 1 + math.sqrt(5 * q * q - 2 * q + 1)) / 2,
    }[K]


@given(lam=st.floats(0.05, 0.95), t=st.floats(0.1, 3.0), K=st.sampled_from([2, 3, 4]))
def test_small_K_surds(lam, t, K):
    res = leading_eigen(build("B", K, lam, t), method="power")
    assert res.value == pytest.approx((1 - lam) ** t * surd(K, lam**t), rel=1e-12, abs=1e-14)


@given(lam=st.floats(0.05, 0.95), t=st.floats(0.1, 3.0), K=st.integers(2, 30))
def test_char_poly_root_matches_eigenvalue(lam, t, K):
    cp = char_poly(K, lam, t)
    res = leading_eigen(build("B", K, lam, t))
    assert cp.largest_real_root() * (1 - lam) ** t == pytest.approx(res.value, abs=1e-8)


@given(lam=st.floats(0.05, 0.95), t=st.floats(0.0, 3.0), K=st.integers(2, 64))
def test_power_and_recurrence_agree(lam, t, K):
    op = build("B", K, lam, t)
    a = leading_eigen(op, method="power")
    b = leading_eigen(op, method="recurrence")
    assert a.value == pytest.approx(b.value, rel=1e-13)
    assert a.value == pytest.approx(spectral_radius(op), rel=1e-13)


def test_left_vector_properties():
    for lam, t in ((0.3, 1.0), (0.5, 1.0), (0.8, 2.0)):
        for K in (5, 30, 200):
            res = leading_eigen(build("B", K, lam, t))
            v = res.left_vector
            assert res.normalization == "first" and v[0] == 1.0
            assert np.all(v > 0)
            assert np.all(np.diff(v) >= -1e-12 * v[1:])
            assert res.residual <= 1e-12
            assert v[-2] == pytest.approx(v[-1], rel=1e-12)


def test_eigvec_recurrence_check():
    for lam, t in ((0.3, 1.0), (0.7, 1.0), (0.5, 2.0)):
        for K in (6, 40, 300):
            res = leading_eigen(build("B", K, lam, t))
            assert eigvec_recurrence_check(res, lam, t) < 1e-10
            q = lam**t
            r = res.value / (q * (1 - lam) ** t)
            v = res.left_vector
            if res.normalization == "first":
                assert v[1] == pytest.approx(r - 1 / q, rel=1e-10)
                assert v[2] == pytest.approx(r * r - (1 + 1 / q) * r, rel=1e-10)


def mp_left_vector(K, q, dps=80):
    """Left Perron vector of N_K(q) by a dense high-precision solve."""
    mp.mp.dps = dps
    q = mp.mpf(q)
    N = mp.matrix(K, K)
    for j in range(K):
        N[0, j] = 1
    for i in range(1, K):
        for j in range(i - 1, K):
            N[i, j] = q

    def f(s):
        a0, a1 = mp.mpf(1), 1 - s
        for _ in range(K - 1):
            a0, a1 = a1, -s * a1 - s * q * a0
        return a1

    guess = mp.mpf(perron_root(K, float(q)))
    root = mp.findroot(f, (guess * (1 - mp.mpf(10) ** -9), guess * (1 + mp.mpf(10) ** -9)), solver="anderson")
    M = N.T - root * mp.eye(K)
    for j in range(K):
        M[K - 1, j] = 1 if j == 0 else 0
    rhs = mp.matrix(K, 1)
    rhs[K - 1] = 1
    return root, mp.lu_solve(M, rhs)


@pytest.mark.parametrize("q", [0.3, 0.5, 0.8])
def test_left_vector_against_high_precision(q):
    K = 70
    root, v = mp_left_vector(K, q)
    res = leading_eigen(build("B", K, 0.5, math.log(q) / math.log(0.5)), method="recurrence")
    assert res.value / 0.5 ** (math.log(q) / math.log(0.5)) == pytest.approx(float(root), rel=1e-14)
    exact = np.array([float(v[j] / v[0]) for j in range(K)])
    assert np.allclose(res.left_vector, exact, rtol=1e-10, atol=0)


@pytest.mark.parametrize("kind", [Kind.A, Kind.B, Kind.B_HAT, Kind.D])
def test_large_K_residual(kind):
    res = leading_eigen(build(kind, 100_000, 0.6, 1.0))
    assert res.residual <= 1e-12
    assert np.all(np.isfinite(res.log_vector))


def test_power_nonconvergence_reports_residual():
    with pytest.raises(NonConvergenceError) as err:
        leading_eigen(build("B", 50, 0.5, 1.0), method="power", max_iter=3)
    assert err.value.iterations == 3 and err.value.residual > 0


def mp_x(K, q, dps=60):
    mp.mp.dps = dps
    qq = mp.mpf(q)

    def f(s):
        a0, a1 = mp.mpf(1), 1 - s
        for _ in range(K - 1):
            a0, a1 = a1, -s * a1 - s * qq * a0
        return a1

    lo = mp.mpf(perron_root(K, q)) * (1 - mp.mpf(10) ** -9)
    hi = 1 / (1 - qq)  # the limit r, where r^-K alpha_K(r) = (-q)^K is nonzero
    return mp.findroot(f, (lo, hi), solver="anderson")


def test_monotone_beyond_double_resolution():
    # at lam = 0.3, t = 1 the deficit 1 - x_K drops below 1e-16 near K = 42;
    # 60 digits still see it shrink
    q, scale = mp.mpf(0.3), mp.mpf(0.7)
    xs = [mp_x(K, q) * scale for K in range(30, 90, 4)]
    assert all(b > a for a, b in zip(xs, xs[1:]))
    assert all(x < 1 for x in xs)


def test_psi_examples_and_shape():
    for lam in (0.1, 0.5, 0.9):
        assert psi(lam, 1.0) == pytest.approx(1.0, rel=1e-15)
    assert psi(0.5, 2.0) == pytest.approx(1 / 3)
    with pytest.raises(DomainError):
        psi(0.5, 0.0)
    for lam in (0.2, 0.5, 0.8):
        for t in np.linspace(0.05, 10, 60):
            assert psi_prime(lam, t) < 0 < psi_second(lam, t)


@given(lam=st.floats(0.05, 0.95), t=st.floats(0.05, 5))
def test_psi_derivatives_against_finite_differences(lam, t):
    h = 1e-5 * max(1.0, t)
    fd1 = (psi(lam, t + h) - psi(lam, t - h)) / (2 * h)
    fd2 = (psi(lam, t + h) - 2 * psi(lam, t) + psi(lam, t - h)) / h**2
    assert psi_prime(lam, t) == pytest.approx(fd1, rel=1e-6, abs=1e-9)
    assert psi_second(lam, t) == pytest.approx(fd2, rel=1e-3, abs=1e-5)


def test_pressure_examples():
    for lam in (0.1, 0.5, 0.9):
        assert pressure_closed(lam, 0.0) == pytest.approx(math.log(4))
    for lam in (0.1, 0.3, 0.5):
        assert abs(pressure_closed(lam, 1.0)) < 1e-15
    for lam in (0.2, 0.6):
        tc = t0(lam)
        left = math.log(psi(lam, tc))
        right = math.log(4 * (lam * (1 - lam)) ** tc)
        assert left == pytest.approx(right, abs=1e-15)
        assert left == pytest.approx(math.log(2 * (1 - lam) ** tc), abs=1e-15)


def test_t0_examples():
    assert t0(0.5) == pytest.approx(1.0)
    assert t0(0.25) == pytest.approx(0.5)
    assert t0(0.3) == pytest.approx(0.5757166, abs=1e-7)


@pytest.mark.parametrize("lam", [0.2, 0.3, 0.6, 0.8])
def test_phase_transition(lam):
    r = phase_transition_report(lam)
    assert r.consistent(1e-6, 1e-4)


def test_pressure_curve():
    # strict inequalities only where double precision can resolve them:
    # past K ~ 40 the truncation error is below one ulp of e^P
    rows = pressure_curve(0.3, np.linspace(0, 3, 13), K_schedule=(8, 32, 128, 512))
    for row in rows:
        assert row["envelope_ok"]
        limit = math.exp(row["P_closed"])
        ulp2 = 4 * math.ulp(limit)  # rounding of x_K and of the closed form
        xs = list(row["x_K"].values())
        assert all(b >= a - ulp2 for a, b in zip(xs, xs[1:]))
        if 0.3 ** row["t"] < 0.5:
            assert all(x < psi(0.3, row["t"]) + ulp2 for x in xs)
            assert xs[0] < psi(0.3, row["t"])
        gaps = [limit - x for x in xs]
        assert all(b <= a + ulp2 for a, b in zip(gaps, gaps[1:]))
