import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pinncert import certify as C
from pinncert.fields import GridMismatchError

CONTRACTION = C.SemigroupBound(1.0, 0.0, "contraction")


def series_from(fn, t_final=1.0, n=2, zeta0=0.0, rb=None):
    t = np.linspace(0.0, t_final, n + 1)
    return C.ResidualSeries(t, fn(t), zeta0, rb)


# types --------------------------------------------------------------------


def test_bound_rejects_M_below_one():
    with pytest.raises(ValueError):
        C.SemigroupBound(0.5, 0.0)


def test_linear_gain_is_class_k():
    gain = C.linear_gain(1 / 3)
    assert gain.gamma(0.0) == 0.0
    assert gain.check_class_k()


def test_series_validation():
    with pytest.raises(ValueError):
        C.ResidualSeries([0.1, 0.2], [0, 0], 0.0)
    with pytest.raises(ValueError):
        C.ResidualSeries([0.0, 0.1, 0.3], [0, 0, 0], 0.0)
    with pytest.raises(ValueError):
        C.ResidualSeries([0.0, 1.0], [0.0, -1.0], 0.0)
    with pytest.raises(ValueError):
        C.ResidualSeries([0.0, 1.0], [0.0, 1.0], -1.0)


# kernels --------------------------------------------------------------------


def test_trapezoid_constant():
    s = series_from(np.ones_like, n=4)
    assert C.weighted_trapezoid(CONTRACTION, s, 1.0) == pytest.approx(1.0, abs=1e-15)


def test_trapezoid_linear():
    s = series_from(lambda t: t, n=2)
    assert C.weighted_trapezoid(CONTRACTION, s, 1.0) == pytest.approx(0.5, abs=1e-15)


def test_trapezoid_quadratic_hand_value():
    s = series_from(lambda t: t * t, n=2)
    assert C.weighted_trapezoid(CONTRACTION, s, 1.0) == pytest.approx(0.375, abs=1e-15)


def test_trapezoid_at_zero_and_off_grid():
    s = series_from(lambda t: t, n=2)
    assert C.weighted_trapezoid(CONTRACTION, s, 0.0) == 0.0
    with pytest.raises(GridMismatchError):
        C.weighted_trapezoid(CONTRACTION, s, 0.3)


def test_integration_error_bound_values():
    assert C.integration_error_bound(CONTRACTION, 0.0, 1.0, 1) == 0.0
    assert C.integration_error_bound(CONTRACTION, 2.0, 1.0, 2) == pytest.approx(1 / 24, rel=1e-15)
    with pytest.raises(ValueError):
        C.integration_error_bound(CONTRACTION, 2.0, 1.0, 0)


def test_curvature_bound_values():
    lin = series_from(lambda t: t, n=4)
    assert C.estimate_curvature_bound(lin, CONTRACTION, 1.0) == pytest.approx(0.0, abs=1e-12)
    quad = series_from(lambda t: t * t, n=2)
    assert C.estimate_curvature_bound(quad, CONTRACTION, 1.0) == pytest.approx(2.0, rel=1e-14)
    assert C.estimate_curvature_bound(quad, CONTRACTION, 1.5) == pytest.approx(3.0, rel=1e-14)
    with pytest.raises(C.InsufficientDataError):
        C.estimate_curvature_bound(series_from(lambda t: t, n=1), CONTRACTION)


def test_expected_equation_error_values():
    assert C.expected_equation_error(CONTRACTION, 0.0, 0.0, 3.0, 1.0) == 0.0
    assert C.expected_equation_error(CONTRACTION, 0.1, 0.2, 1.0, 2.0) == pytest.approx(0.5, rel=1e-15)
    decay = C.SemigroupBound(1.0, -1.0)
    assert C.expected_equation_error(decay, 0.0, 1.0, 1.0, 1.0) == pytest.approx(1 - math.exp(-1), rel=1e-14)


def test_expected_equation_error_continuous_in_omega():
    near = C.SemigroupBound(1.0, 1e-9)
    assert C.expected_equation_error(near, 0.1, 0.2, 1.0, 2.0) == pytest.approx(0.5, rel=1e-8)


def test_required_subintervals_values():
    assert C.required_subintervals(CONTRACTION, 0.0, 0.33, 1.0, 1.0) == 1
    assert C.required_subintervals(CONTRACTION, 12.0, 1.0, 1.0, 1.0) == 1
    assert C.required_subintervals(CONTRACTION, 12.0, C.DEFAULT_ALPHA, 1.0, 1.0) == 2
    with pytest.raises(ValueError):
        C.required_subintervals(CONTRACTION, 12.0, 0.33, 1.0, 0.0)


def test_required_subintervals_includes_M():
    big = C.SemigroupBound(100.0, 0.0)
    n = C.required_subintervals(big, 12.0, 1.0, 1.0, 1.0)
    assert n == 10
    assert C.integration_error_bound(big, 12.0, 1.0, n) <= 1.0


# certificates ---------------------------------------------------------------


def test_exact_surrogate_certificate_is_zero():
    s = series_from(np.zeros_like, n=8)
    cert = C.certify_hard(CONTRACTION, s, 0.0, s.t)
    assert np.all(cert.eps_tot == 0.0)


def test_soft_running_sup_example():
    s = C.ResidualSeries([0.0, 0.25, 0.5], [0.0, 0.0, 0.0], 0.0, rb=[0.0, 0.3, 0.1])
    cert = C.certify_soft(CONTRACTION, s, 0.0, C.linear_gain(1 / 3), s.t)
    np.testing.assert_allclose(cert.eps_bc, [0.0, 0.1, 0.1], rtol=1e-15)


def test_soft_identity_gain_on_nondecreasing_rb():
    rb = np.array([0.0, 0.1, 0.1, 0.4, 0.9])
    s = C.ResidualSeries(np.linspace(0, 1, 5), np.zeros(5), 0.0, rb=rb)
    cert = C.certify_soft(CONTRACTION, s, 0.0, C.linear_gain(1.0), s.t)
    np.testing.assert_array_equal(cert.eps_bc, rb)


def test_soft_zero_rb_matches_hard():
    s = C.ResidualSeries(np.linspace(0, 1, 5), np.linspace(0.1, 0.5, 5), 0.2, rb=np.zeros(5))
    soft = C.certify_soft(CONTRACTION, s, 1.0, C.linear_gain(1.0), s.t)
    hard = C.certify_hard(CONTRACTION, s, 1.0, s.t)
    np.testing.assert_array_equal(soft.eps_tot, hard.eps_tot)
    assert np.all(soft.eps_bc == 0.0)


def test_soft_requires_boundary_data():
    s = series_from(np.zeros_like, n=4)
    with pytest.raises(C.MissingBoundaryDataError):
        C.certify_soft(CONTRACTION, s, 0.0, C.linear_gain(1.0), s.t)


def test_heat_eigenmode_closed_form():
    """Analytic residual envelope of the heat eigenmode perturbation."""
    delta = 0.01
    a = math.pi**2 / 5 - 1
    zeta = lambda t: delta * a * np.exp(-t) / math.sqrt(2)
    zeta0 = delta / math.sqrt(2)
    s = series_from(zeta, t_final=0.5, n=256, zeta0=zeta0)
    con = C.certify_hard(CONTRACTION, s, 0.0, [0.5])
    exact_con = zeta0 + delta * a * (1 - math.exp(-0.5)) / math.sqrt(2)
    assert exact_con == pytest.approx(9.781e-3, abs=5e-7)
    assert con.eps_tot[0] == pytest.approx(exact_con, rel=1e-5)
    w = -(math.pi**2) / 5
    decay = C.SemigroupBound(1.0, w, "exp-decay")
    exp = C.certify_hard(decay, s, 0.0, [0.5])
    # the eigenmode bound coincides with the true error delta e^{-t} / sqrt 2
    exact_exp = delta * math.exp(-0.5) / math.sqrt(2)
    assert exact_exp == pytest.approx(4.289e-3, abs=5e-7)
    assert exp.eps_tot[0] == pytest.approx(exact_exp, rel=1e-5)


# properties -------------------------------------------------------------------

finite = st.floats(0.0, 10.0, allow_nan=False)


@st.composite
def random_series(draw, with_rb=False):
    n = draw(st.integers(3, 30))
    t_final = draw(st.floats(0.1, 5.0))
    zeta = draw(st.lists(finite, min_size=n, max_size=n))
    rb = draw(st.lists(finite, min_size=n, max_size=n)) if with_rb else None
    return C.ResidualSeries(np.linspace(0.0, t_final, n), zeta, draw(finite), rb)


@settings(max_examples=100, deadline=None)
@given(random_series(with_rb=True), st.floats(1.0, 200.0), st.floats(-3.0, 3.0), st.floats(0.0, 50.0))
def test_decomposition_exact(series, M, omega, K):
    bound = C.SemigroupBound(M, omega)
    cert = C.certify_soft(bound, series, K, C.linear_gain(0.5), series.t)
    np.testing.assert_array_equal(cert.eps_tot - (cert.eps_init + cert.eps_eq + cert.eps_int + cert.eps_bc), 0.0)
    for part in (cert.eps_init, cert.eps_eq, cert.eps_int, cert.eps_bc):
        assert np.all(part >= 0)


@settings(max_examples=100, deadline=None)
@given(st.floats(-3.0, 3.0), st.floats(0.0, 5.0), st.floats(-1.0, 1.0), st.integers(1, 40), st.floats(0.1, 3.0))
def test_trapezoid_exact_on_affine_weighted(omega, a, b, n, t_final):
    """``e^{-ws} zeta(s)`` affine: trapezoid equals the closed form."""
    b = b * a / t_final  # keep zeta >= 0 on [0, t_final]
    t = np.linspace(0.0, t_final, n + 1)
    zeta = np.exp(omega * t) * (a + b * t + abs(b) * t_final)
    bound = C.SemigroupBound(1.0, omega)
    got = C.weighted_trapezoid(bound, C.ResidualSeries(t, zeta, 0.0), t_final)
    c = a + abs(b) * t_final
    exact = math.exp(omega * t_final) * (c * t_final + 0.5 * b * t_final**2)
    assert got == pytest.approx(exact, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("n", [1, 2, 4, 8, 16])
def test_quadratic_sharpness(n):
    t = np.linspace(0.0, 1.0, n + 1)
    s = C.ResidualSeries(t, t * t, 0.0)
    approx = C.weighted_trapezoid(CONTRACTION, s, 1.0)
    err = C.integration_error_bound(CONTRACTION, 2.0, 1.0, n)
    assert abs(approx - 1 / 3) == pytest.approx(err, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(random_series(with_rb=True))
def test_eps_bc_nondecreasing(series):
    cert = C.certify_soft(CONTRACTION, series, 0.0, C.linear_gain(1 / 3), series.t)
    assert np.all(np.diff(cert.eps_bc) >= 0)


@settings(max_examples=100, deadline=None)
@given(random_series(with_rb=True), st.floats(1.0, 10.0), st.floats(0.0, 10.0), st.floats(-2.0, 2.0), st.floats(0.0, 2.0), st.floats(0.0, 20.0))
def test_bound_dominance(series, M1, dM, w1, dw, K):
    b1 = C.SemigroupBound(M1, w1)
    b2 = C.SemigroupBound(M1 + dM, w1 + dw)
    gain = C.linear_gain(1 / 3)
    c1 = C.certify_soft(b1, series, K, gain, series.t)
    c2 = C.certify_soft(b2, series, K, gain, series.t)
    for name in ("eps_init", "eps_eq", "eps_int", "eps_bc", "eps_tot"):
        a, b = getattr(c1, name), getattr(c2, name)
        assert np.all(a <= b * (1 + 1e-12) + 1e-300), name


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0, 500.0), st.floats(-5.0, 5.0), st.floats(0.0, 1e4), st.floats(0.01, 1.0), st.floats(0.01, 10.0), st.floats(1e-8, 10.0))
def test_subinterval_sufficiency(M, omega, K, alpha, t, e):
    bound = C.SemigroupBound(M, omega)
    n = C.required_subintervals(bound, K, alpha, t, e)
    assert C.integration_error_bound(bound, K, t, n) <= alpha * e * (1 + 1e-9)
    if n > 1:
        assert C.integration_error_bound(bound, K, t, n - 1) > alpha * e
