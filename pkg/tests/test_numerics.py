import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from irs_covert.numerics import (BracketError, ConvergenceError, NotHermitianError, RootBracket,
                                 bisect_root, exp_integral_e1, hermitian_real_embedding,
                                 max_eigpair, scaled_e1)

# reference values from 40-digit mpmath evaluation
E1_REF = {1.0: 0.219383934395520273677, 10.0: 4.15696892968532427740e-6}
SCALED_E1_AT_1 = 0.596347362323194074341


@pytest.mark.parametrize("x, ref", sorted(E1_REF.items()))
def test_e1_reference_values(x, ref):
    assert exp_integral_e1(x) == pytest.approx(ref, abs=1e-12, rel=1e-12)


def test_e1_large_argument_asymptote():
    assert abs(500 * scaled_e1(500.0) - 1) < 1e-2
    assert exp_integral_e1(500.0) >= 0.0


def test_e1_rejects_non_positive():
    for x in (0.0, -1.0):
        with pytest.raises(ValueError):
            exp_integral_e1(x)
        with pytest.raises(ValueError):
            scaled_e1(x)


def test_e1_matches_quadrature_on_series_and_fraction_branches():
    from scipy import integrate
    for x in (0.01, 0.3, 0.99, 1.0, 1.01, 3.0, 25.0):
        ref, _ = integrate.quad(lambda t: math.exp(-t) / t, x, math.inf, epsabs=1e-15,
                                epsrel=1e-13, limit=200)
        assert abs(exp_integral_e1(x) - ref) < 1e-12


def test_scaled_e1_values():
    assert scaled_e1(1.0) == pytest.approx(SCALED_E1_AT_1, rel=1e-12)
    s = scaled_e1(700.0)
    assert math.isfinite(s) and s == pytest.approx(1 / 700, rel=1e-2)


def test_scaled_e1_consistent_with_e1():
    for x in np.linspace(0.1, 30, 60):
        assert scaled_e1(x) == pytest.approx(math.exp(x) * exp_integral_e1(x), rel=1e-10)


def test_e1_strictly_decreasing_and_positive():
    xs = np.linspace(1e-3, 50, 1000)
    vals = np.array([exp_integral_e1(x) for x in xs])
    assert np.all(vals > 0) and np.all(np.diff(vals) < 0)


def test_g_decreasing_to_one():
    xs = np.linspace(1e-2, 400, 1000)
    g = np.array([(1 + x) * scaled_e1(x) for x in xs])
    assert np.all(np.diff(g) < 0)
    assert 0 < (1 + 500) * scaled_e1(500.0) - 1 < 1e-2


def test_bisect_examples():
    assert bisect_root(lambda x: x - 2, RootBracket(0, 5, 1e-12, 200)) == pytest.approx(2, abs=1e-12)
    assert bisect_root(lambda x: x * x - 2, RootBracket(0, 2, 1e-12, 200)) == pytest.approx(
        math.sqrt(2), abs=1e-12)


def test_bisect_endpoint_root_and_errors():
    assert bisect_root(lambda x: x, RootBracket(0, 1, 1e-9, 10)) == 0
    assert bisect_root(lambda x: x - 1, RootBracket(0, 1, 1e-9, 10)) == 1
    with pytest.raises(BracketError):
        bisect_root(lambda x: x + 1, RootBracket(0, 1, 1e-9, 10))
    with pytest.raises(ConvergenceError):
        bisect_root(lambda x: x - 0.3, RootBracket(0, 1, 1e-300, 5))
    with pytest.raises(ValueError):
        RootBracket(1, 0, 1e-9, 10)
    with pytest.raises(ValueError):
        RootBracket(0, 1, 0.0, 10)


@settings(max_examples=60, deadline=None)
@given(root=st.floats(-50, 50), scale=st.floats(0.1, 10), odd=st.sampled_from([1, 3, 5]))
def test_bisect_monotone_polynomials(root, scale, odd):
    f = lambda x: scale * (x - root) ** odd
    x = bisect_root(f, RootBracket(-100, 100, 1e-10, 500))
    # stop rule: |f| below tol or bracket narrower than tol
    assert abs(x - root) <= (1e-10 / scale) ** (1 / odd) * (1 + 1e-9) + 1e-10


def test_max_eigpair_examples():
    lam, e = max_eigpair(np.eye(3))
    assert lam == pytest.approx(1) and np.linalg.norm(e) == pytest.approx(1)
    lam, e = max_eigpair(np.diag([1.0, 3.0]))
    assert lam == pytest.approx(3) and abs(abs(e[1]) - 1) < 1e-9
    a_bar = np.array([1 + 2j, -0.5j, 0.3])
    lam, e = max_eigpair(np.outer(a_bar, a_bar.conj()))
    assert lam == pytest.approx(np.vdot(a_bar, a_bar).real, rel=1e-12)
    assert abs(abs(np.vdot(e, a_bar)) - np.linalg.norm(a_bar)) < 1e-9


def test_max_eigpair_rejects_non_hermitian():
    with pytest.raises(NotHermitianError):
        max_eigpair(np.array([[1, 2], [0, 1]], dtype=complex))


@settings(max_examples=50, deadline=None)
@given(n=st.integers(1, 8), seed=st.integers(0, 2**32 - 1))
def test_max_eigpair_matches_dense_solver(n, seed):
    r = np.random.default_rng(seed)
    H = r.standard_normal((n, n)) + 1j * r.standard_normal((n, n))
    H = H + H.conj().T
    lam, e = max_eigpair(H)
    assert lam == pytest.approx(np.linalg.eigvalsh(H)[-1], abs=1e-8 * (1 + abs(lam)))
    assert np.linalg.norm(H @ e - lam * e) <= 1e-9 * (1 + abs(lam)) * 10


def test_real_embedding_examples():
    np.testing.assert_array_equal(hermitian_real_embedding(np.array([[2.0]])), np.eye(2) * 2)
    E = hermitian_real_embedding(np.array([[0, 1j], [-1j, 0]]))
    np.testing.assert_allclose(np.linalg.eigvalsh(E), [-1, -1, 1, 1], atol=1e-12)


def test_real_embedding_doubles_spectrum(rng):
    H = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    H = H + H.conj().T
    E = hermitian_real_embedding(H)
    ev = np.linalg.eigvalsh(H)
    np.testing.assert_allclose(np.linalg.eigvalsh(E), np.sort(np.repeat(ev, 2)), atol=1e-9)
    assert np.trace(E) == pytest.approx(2 * np.trace(H).real)
