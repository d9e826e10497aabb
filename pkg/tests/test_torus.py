import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclab.torus import (CALIBRATION_RTOL, ScalarField, SingularKernel, TorusGrid,
                           apply_fractional_laplacian, calibrate_constant, closed_form_constant,
                           normalization_constant, periodized_kernel, riesz_transform,
                           singular_integral_laplacian)


def field1(N, func):
    return TorusGrid(1, N).sample(func)


# ---------------------------------------------------------------- multiplier


def test_constant_maps_to_zero():
    out = apply_fractional_laplacian(field1(32, lambda x: 5 + 0 * x), 1.3)
    assert np.abs(out.values).max() < 1e-13


def test_cosine_eigenfunction():
    out = apply_fractional_laplacian(field1(64, lambda x: np.cos(3 * x)), 1.5)
    x = TorusGrid(1, 64).axis
    assert np.abs(out.values - 3**1.5 * np.cos(3 * x)).max() < 1e-12


def test_linearity_over_modes():
    out = apply_fractional_laplacian(field1(64, lambda x: np.sin(x) + np.sin(2 * x)), 1.0)
    x = TorusGrid(1, 64).axis
    assert np.abs(out.values - (np.sin(x) + 2 * np.sin(2 * x))).max() < 1e-12


def test_nyquist_mode_kept_with_real_symbol():
    N = 16
    x = TorusGrid(1, N).axis
    out = apply_fractional_laplacian(field1(N, lambda x: np.cos(N / 2 * x)), 0.7)
    assert np.abs(out.values - (N / 2) ** 0.7 * np.cos(N / 2 * x)).max() < 1e-11


def test_two_dimensional_mode():
    g = TorusGrid(2, 32)
    f = g.sample(lambda x, y: np.cos(3 * x + 4 * y))
    out = apply_fractional_laplacian(f, 1.0)
    assert np.abs(out.values - 5 * f.values).max() < 1e-11


@pytest.mark.parametrize("alpha", [0.0, -1.0, 2.5, np.nan])
def test_order_out_of_range(alpha):
    with pytest.raises(ValueError):
        apply_fractional_laplacian(field1(16, np.cos), alpha)


def test_non_finite_field_rejected():
    with pytest.raises(ValueError):
        TorusGrid(1, 16).field(np.full(16, np.nan))


def test_grid_validation():
    with pytest.raises(ValueError):
        TorusGrid(3, 16)
    with pytest.raises(ValueError):
        TorusGrid(1, 7)
    with pytest.raises(ValueError):
        TorusGrid(1, 6)


def test_fields_are_immutable():
    f = field1(16, np.cos)
    with pytest.raises(ValueError):
        f.values[0] = 1.0


_band_coeffs = st.lists(st.floats(-1, 1), min_size=10, max_size=10)


def _from_coeffs(grid, coeffs):
    x = grid.axis
    return grid.field(sum(c * np.cos((k + 1) * x + k) for k, c in enumerate(coeffs)))


@settings(max_examples=40, deadline=None)
@given(_band_coeffs, _band_coeffs, st.floats(0.05, 2.0))
def test_self_adjoint_and_positive(a, b, alpha):
    g = TorusGrid(1, 64)
    f, h = _from_coeffs(g, a), _from_coeffs(g, b)
    Lf = apply_fractional_laplacian(f, alpha).values
    Lh = apply_fractional_laplacian(h, alpha).values
    lhs, rhs = g.integrate(Lf * h.values), g.integrate(f.values * Lh)
    scale = max(1.0, np.abs(Lf).max() * np.abs(h.values).max())
    assert abs(lhs - rhs) <= 1e-10 * scale * 2 * np.pi
    assert g.integrate(f.values * Lf) >= -1e-12 * scale
    assert abs(Lf.mean()) < 1e-12 * scale


@settings(max_examples=30, deadline=None)
@given(_band_coeffs, st.floats(0.05, 1.0), st.floats(0.05, 1.0))
def test_composition(a, al, be):
    g = TorusGrid(1, 64)
    f = _from_coeffs(g, a)
    two = apply_fractional_laplacian(apply_fractional_laplacian(f, al), be).values
    one = apply_fractional_laplacian(f, al + be).values
    assert np.abs(two - one).max() <= 1e-10 * max(1.0, np.abs(one).max())


def test_output_real_for_real_input_2d():
    g = TorusGrid(2, 16)
    rng = np.random.default_rng(0)
    f = g.field(rng.standard_normal(g.shape))
    out = apply_fractional_laplacian(f, 0.9)
    assert out.values.dtype == np.float64


# ---------------------------------------------------------------------- Riesz


def test_riesz_on_cos_x1():
    g = TorusGrid(2, 32)
    th = g.sample(lambda x, y: np.cos(x))
    x = g.coords()[0]
    assert np.abs(riesz_transform(th, 1).values - np.sin(x)).max() < 1e-13
    assert np.abs(riesz_transform(th, 2).values).max() < 1e-13


def test_riesz_mean_zero_and_axis_errors():
    g = TorusGrid(2, 16)
    th = g.field(np.random.default_rng(1).standard_normal(g.shape) + 3)
    for j in (1, 2):
        assert abs(riesz_transform(th, j).mean()) < 1e-14
    with pytest.raises(ValueError):
        riesz_transform(field1(16, np.cos), 2)
    with pytest.raises(ValueError):
        riesz_transform(th, 3)


def test_riesz_squares_sum_to_minus_identity_on_mean_zero():
    g = TorusGrid(2, 32)
    th = g.sample(lambda x, y: np.sin(2 * x - y) + np.cos(x + 3 * y))
    s = sum(riesz_transform(riesz_transform(th, j), j).values for j in (1, 2))
    assert np.abs(s + th.values).max() < 1e-12


# -------------------------------------------------------- singular integral


def test_closed_form_constant_values():
    assert closed_form_constant(1, 1.0) == pytest.approx(1 / np.pi, rel=1e-14)
    # c_{2,1} = 1/(2 pi)
    assert closed_form_constant(2, 1.0) == pytest.approx(1 / (2 * np.pi), rel=1e-14)


def test_calibration_one_dimensional_alpha_one():
    assert calibrate_constant(1, 1.0) == pytest.approx(1 / np.pi, rel=1e-4)


def test_calibration_two_dimensional_within_one_percent():
    c = normalization_constant(2, 1.0)
    cal = calibrate_constant(2, 1.0, radius=20)
    assert abs(cal - c) / c < 1e-2


def test_calibration_small_alpha_decreases_to_zero():
    vals = [calibrate_constant(1, a) for a in (0.1, 0.05, 0.02)]
    assert vals[0] > vals[1] > vals[2] > 0
    assert vals[2] < 0.02


@pytest.mark.parametrize("n", [1, 2])
@pytest.mark.parametrize("alpha", [0.3, 1.0, 1.7])
def test_normalization_constant_validates(n, alpha):
    c = normalization_constant(n, alpha)
    assert abs(calibrate_constant(n, alpha) - c) <= CALIBRATION_RTOL * c


def test_normalization_constant_errors():
    with pytest.raises(ValueError):
        normalization_constant(1, 2.0)
    with pytest.raises(ValueError):
        normalization_constant(3, 1.0)


def test_uncorrected_calibration_is_cruder():
    c = closed_form_constant(1, 1.5)
    raw = calibrate_constant(1, 1.5, N=512, corrected=False)
    good = calibrate_constant(1, 1.5, N=512)
    assert abs(good - c) < abs(raw - c)


def test_singular_integral_constant_field():
    g = TorusGrid(1, 64)
    k = SingularKernel(1.0, 1, closed_form_constant(1, 1.0))
    out = singular_integral_laplacian(g.field(np.full(64, 2.0)), k)
    assert np.abs(out.values).max() < 1e-10


def test_singular_integral_positive_at_strict_maximum():
    g = TorusGrid(1, 128)
    f = g.sample(lambda x: np.exp(np.cos(x - 1.0)))
    k = SingularKernel(0.8, 1, closed_form_constant(1, 0.8))
    out = singular_integral_laplacian(f, k)
    assert out.values[np.argmax(f.values)] > 0


def test_singular_integral_matches_multiplier_1d():
    g = TorusGrid(1, 512)
    f = g.sample(np.cos)
    k = SingularKernel(1.0, 1, normalization_constant(1, 1.0), radius=50)
    out = singular_integral_laplacian(f, k)
    ref = apply_fractional_laplacian(f, 1.0)
    assert np.abs(out.values - ref.values).max() / np.abs(ref.values).max() < 1e-2


@pytest.mark.parametrize("n,Ns", [(1, (64, 128, 256)), (2, (16, 32, 64))])
def test_singular_integral_refinement_monotone(n, Ns):
    errs = []
    for N in Ns:
        g = TorusGrid(n, N)
        f = g.sample(lambda *x: np.cos(x[0]))
        k = SingularKernel(1.0, n, closed_form_constant(n, 1.0))
        errs.append(np.abs(singular_integral_laplacian(f, k).values - f.values).max())
    assert errs[0] > errs[1] > errs[2]


def test_singular_kernel_validation():
    with pytest.raises(ValueError):
        SingularKernel(1.0, 1, 0.3, radius=0)
    with pytest.raises(ValueError):
        SingularKernel(2.0, 1, 0.3)
    with pytest.raises(ValueError):
        SingularKernel(1.0, 1, -1.0)


def test_periodized_kernel_symmetric():
    K = periodized_kernel(TorusGrid(1, 32), 1.2, 5)
    assert np.allclose(K[1:], K[1:][::-1], rtol=1e-13)
    assert K[0] > 0  # central cell dropped, images remain
