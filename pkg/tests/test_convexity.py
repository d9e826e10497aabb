import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclab import convexity as cx
from fraclab.manifold import ManifoldSpec, build_spectrum
from fraclab.torus import TorusGrid


def cos_field(N=64):
    g = TorusGrid(1, N)
    return g, g.sample(np.cos)


# ------------------------------------------------------------ convex library


def test_library_contents():
    lib = cx.library()
    for name in ("x2", "x4", "x6", "x16", "exp", "smooth_abs", "smooth_hinge"):
        assert name in lib


def test_certificate_rejects_concave():
    with pytest.raises(ValueError):
        cx.ConvexFunction("neg", lambda x: -x**2, lambda x: -2 * x)


def test_certificate_rejects_wrong_derivative():
    with pytest.raises(ValueError):
        cx.ConvexFunction("bad", lambda x: x**2, lambda x: x)


def test_certificate_range_enforced():
    g = TorusGrid(1, 32)
    f = g.sample(lambda x: 10 * np.cos(x))
    with pytest.raises(ValueError):
        cx.verify_pointwise_inequality(cx.TorusOperator(g, 1.0), f, cx.power(2))


def test_odd_power_rejected():
    with pytest.raises(ValueError):
        cx.power(3)


# --------------------------------------------------------------- verifier


@pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0])
def test_linear_phi_is_equality(alpha):
    g = TorusGrid(1, 64)
    f = cx.random_band_limited(g, 10, np.random.default_rng(0))
    slack = cx.slack_field(cx.TorusOperator(g, alpha), f, cx.linear(2.0, -1.0))
    assert np.abs(slack).max() < 1e-10


def test_cos_square_slack_is_one():
    g, f = cos_field()
    rep = cx.verify_pointwise_inequality(cx.TorusOperator(g, 1.0), f, cx.power(2))
    slack = cx.slack_field(cx.TorusOperator(g, 1.0), f.values, cx.power(2))
    assert np.abs(slack - 1).max() < 1e-12
    assert rep.passed and rep.max_violation == pytest.approx(-1.0)


def test_path_graph_exp():
    rng = np.random.default_rng(11)
    op = cx.MatrixOperator(cx.path_laplacian(64), 0.7)
    assert op.is_m_matrix
    for _ in range(5):
        f = rng.standard_normal(64)
        f /= np.abs(f).max()
        rep = cx.verify_pointwise_inequality(op, f, cx.exponential())
        assert rep.passed and rep.tolerance == 1e-10


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.05, 2.0), st.sampled_from(["x2", "x4", "exp",
                                                                         "smooth_abs", "smooth_hinge"]))
def test_matrix_path_exact_for_any_generator(seed, alpha, name):
    # random symmetric M-matrix generator: weighted graph Laplacian
    rng = np.random.default_rng(seed)
    n = 24
    W = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.3)
    W = np.triu(W, 1)
    W = W + W.T
    L = np.diag(W.sum(1)) - W
    op = cx.MatrixOperator(L, alpha)
    f = rng.uniform(-1, 1, n)
    assert cx.verify_pointwise_inequality(op, f, cx.library()[name]).passed


def test_adding_linear_term_leaves_slack_unchanged():
    g = TorusGrid(1, 128)
    f = cx.random_band_limited(g, 12, np.random.default_rng(2))
    op = cx.TorusOperator(g, 1.3)
    base = cx.exponential()
    shifted = cx.ConvexFunction("exp+lin", lambda x: np.exp(x) + 3 * x - 2,
                                lambda x: np.exp(x) + 3)
    a = cx.slack_field(op, f, base)
    b = cx.slack_field(op, f, shifted)
    assert np.abs(a - b).max() < 1e-10


def test_alpha_two_slack_nonnegative():
    g = TorusGrid(1, 256)
    f = cx.random_band_limited(g, 20, np.random.default_rng(5))
    for name in ("x2", "x4", "exp"):
        assert cx.verify_pointwise_inequality(cx.TorusOperator(g, 2.0), f, cx.library()[name]).passed


def test_padding_restores_exactness_when_band_too_wide():
    g = TorusGrid(1, 64)
    f = cx.random_band_limited(g, 20, np.random.default_rng(8))
    op = cx.TorusOperator(g, 1.0)
    rep = cx.verify_pointwise_inequality(op, f, cx.power(8, (-2, 2)))
    assert rep.metadata["padding"] > 1 and not rep.metadata["degraded"] and rep.passed
    raw = cx.verify_pointwise_inequality(op, f, cx.power(8, (-2, 2)), dealias=False)
    assert raw.metadata["degraded"] and raw.tolerance > cx.SPECTRAL_TOL


def test_non_polynomial_gets_measured_tolerance():
    g = TorusGrid(1, 128)
    f = cx.random_band_limited(g, 10, np.random.default_rng(9))
    rep = cx.verify_pointwise_inequality(cx.TorusOperator(g, 1.0), f, cx.smooth_abs())
    assert rep.metadata["degraded"] and rep.passed


def test_manifold_operator_on_sphere():
    dec = build_spectrum(ManifoldSpec.sphere(12), 169)
    rng = np.random.default_rng(3)
    f = dec.synthesize(np.r_[0.0, rng.standard_normal(15), np.zeros(153)])
    f /= np.abs(f).max()
    for alpha in (0.6, 1.4):
        rep = cx.verify_pointwise_inequality(cx.ManifoldOperator(dec, alpha), f, cx.power(2))
        assert rep.passed


def test_two_dimensional_torus():
    g = TorusGrid(2, 64)
    f = cx.random_band_limited(g, 6, np.random.default_rng(4))
    for alpha in (0.5, 1.5):
        assert cx.verify_pointwise_inequality(cx.TorusOperator(g, alpha), f, cx.power(4)).passed


def test_negated_operator_fails():
    g, f = cos_field()
    rep = cx.verify_pointwise_inequality(cx.TorusOperator(g, 1.0, sign=-1.0), f, cx.power(2))
    assert not rep.passed


# ------------------------------------------------------------- Jensen gap


@pytest.fixture(scope="module")
def circle():
    return build_spectrum(ManifoldSpec.circle(64), 64)


def test_gap_zero_at_time_zero(circle):
    f = np.cos(2 * np.pi * np.arange(64) / 64)
    assert np.abs(cx.jensen_gap(circle, 1.0, f, cx.power(4), 0.0)).max() < 1e-12


def test_gap_zero_for_linear(circle):
    f = np.sin(3 * 2 * np.pi * np.arange(64) / 64)
    gap = cx.jensen_gap(circle, 1.0, f, cx.linear(2.0, 1.0), 0.4)
    assert np.abs(gap).max() < 1e-12


def test_gap_cos_square(circle):
    x = 2 * np.pi * np.arange(64) / 64
    gap = cx.jensen_gap(circle, 1.0, np.cos(x), cx.power(2), 0.3)
    assert gap.min() >= -1e-8
    # closed form: (1 - e^{-2t}) / 2
    assert np.abs(gap - (1 - np.exp(-0.6)) / 2).max() < 1e-12


def test_gap_nondecreasing_in_time_for_eigen_projected_data(circle):
    x = 2 * np.pi * np.arange(64) / 64
    for k in (1, 2, 5):
        f = np.cos(k * x)
        gaps = [cx.jensen_gap(circle, 1.0, f, cx.power(2), t) for t in np.linspace(0.05, 2, 12)]
        assert np.all(np.diff(np.array(gaps), axis=0) >= -1e-12)


def test_gap_floor_respected(circle):
    f = cx.random_band_limited(64, 8, np.random.default_rng(6))
    for t in (0.05, 0.5):
        gap = cx.jensen_gap(circle, 1.5, f, cx.exponential(), t)
        assert gap.min() >= cx.jensen_gap_floor(circle, 1.5, f, cx.exponential(), t)


def test_gap_refuses_uncertified_kernel(circle):
    f = np.ones(64)
    cert = cx.kernel_certificate(circle, 1.0, 0.5)
    bad = type(cert)(1.0, cert.location, cert.tolerance, cert.metadata)
    with pytest.raises(ValueError):
        cx.jensen_gap(circle, 1.0, f, cx.power(2), 0.5, certificate=bad)
    with pytest.raises(ValueError):
        cx.jensen_gap(circle, 1.0, f, cx.power(2), 0.7, certificate=cert)


# -------------------------------------------------------- derivative at 0


def test_derivative_linear_limit_zero(circle):
    f = np.sin(2 * np.pi * np.arange(64) / 64)
    d = cx.derivative_at_zero_check(circle, 1.0, f, cx.linear(1.0, 0.0))
    assert np.abs(d.limit).max() < 1e-12 and d.converged


def test_derivative_cos_square_limit_one(circle):
    f = np.cos(2 * np.pi * np.arange(64) / 64)
    d = cx.derivative_at_zero_check(circle, 1.0, f, cx.power(2))
    assert np.abs(d.limit - 1).max() < 1e-12
    assert d.converged and d.report.passed
    assert 1.8 <= d.ratio <= 2.2


def test_derivative_random_exp(circle):
    f = cx.random_band_limited(64, 10, np.random.default_rng(7))
    d = cx.derivative_at_zero_check(circle, 1.5, f, cx.exponential(), h=1e-4)
    assert d.limit.min() >= -1e-6
    assert d.converged and d.report.passed


def test_derivative_step_range(circle):
    with pytest.raises(ValueError):
        cx.derivative_at_zero_check(circle, 1.0, np.ones(64), cx.power(2), h=0.1)


def test_derivative_reports_nonconvergence(circle):
    # h far outside the first-order regime for the top modes
    f = cx.random_band_limited(64, 30, np.random.default_rng(1))
    d = cx.derivative_at_zero_check(circle, 2.0, f, cx.power(2), h=1e-2)
    assert not d.converged


def test_random_band_limited_properties():
    g = TorusGrid(1, 64)
    f = cx.random_band_limited(g, 5, np.random.default_rng(0), amplitude=0.7)
    assert np.abs(f).max() == pytest.approx(0.7)
    assert abs(f.mean()) < 1e-14
    assert np.abs(np.fft.rfft(f)[6:]).max() < 1e-12
    with pytest.raises(ValueError):
        cx.random_band_limited(g, 32, np.random.default_rng(0))
