import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fraclab import dn
from fraclab.dn import PlanarDomain


def datum(x, y):
    return np.exp(x) * np.cos(2 * y) + 0.3 * y


# ---------------------------------------------------------------- geometry


def test_domain_validation():
    with pytest.raises(ValueError):
        PlanarDomain.disk(7)
    with pytest.raises(ValueError):
        PlanarDomain.halfplane(6)
    with pytest.raises(ValueError):
        PlanarDomain.rectangle(4)
    with pytest.raises(ValueError):
        PlanarDomain.rectangle(600)


def test_rectangle_boundary_ordering_and_corners():
    dom = PlanarDomain.rectangle(9)
    idx = dom.boundary_indices()
    assert len(idx) == dom.n_boundary == 32
    assert len({tuple(p) for p in idx}) == 32
    assert [tuple(idx[c]) for c in dom.corner_positions()] == [(0, 0), (8, 0), (8, 8), (0, 8)]
    assert (~dom.verdict_mask()).sum() == 12
    assert np.isnan(dom.normals()[dom.corner_positions()]).all()
    assert dom.refined().Nx == 17 and dom.refined().h == pytest.approx(dom.h / 2)


def test_boundary_field_checks():
    dom = PlanarDomain.disk(16)
    with pytest.raises(ValueError):
        dom.boundary_field(np.ones(15))
    with pytest.raises(ValueError):
        dom.boundary_field(np.r_[np.ones(15), np.inf])
    with pytest.raises(ValueError):
        dn.dn_apply(PlanarDomain.disk(32), dom.boundary_field(np.ones(16)))


# ----------------------------------------------------------------- DN map


@pytest.mark.parametrize("kind", ["disk", "halfplane"])
def test_dn_on_fourier_modes(kind):
    dom = getattr(PlanarDomain, kind)(64)
    th = dom.angles()
    for k in (0, 1, 3, 10):
        out = dn.dn_apply(dom, np.cos(k * th) + np.sin(k * th))
        assert np.abs(out.values - k * (np.cos(k * th) + np.sin(k * th))).max() < 1e-11


def test_disk_dn_of_harmonic_polynomial():
    dom = PlanarDomain.disk(128)
    # u = x^2 - y^2 = r^2 cos 2 theta: d_r u = 2 cos 2 theta
    out = dn.dn_apply(dom, dom.sample(lambda x, y: x**2 - y**2))
    assert np.abs(out.values - 2 * np.cos(2 * dom.angles())).max() < 1e-12


def test_rectangle_dn_exact_on_quadratic_harmonic():
    dom = PlanarDomain.rectangle(33)
    out = dn.dn_apply(dom, dom.sample(lambda x, y: x**2 - y**2))
    pts, nrm = dom.boundary_points(), dom.normals()
    exact = nrm[:, 0] * 2 * pts[:, 0] - nrm[:, 1] * 2 * pts[:, 1]
    ok = ~np.isnan(out)
    assert np.isnan(out[dom.corner_positions()]).all()
    assert np.abs(out[ok] - exact[ok]).max() < 1e-10


def test_rectangle_extension_is_discrete_harmonic():
    dom = PlanarDomain.rectangle(33)
    ext = dn.harmonic_extend(dom, dom.sample(datum))
    assert ext.values.shape == (33, 33)
    assert np.abs(dn.five_point_laplacian(ext.values, dom.h)).max() < 1e-8
    assert ext.residual < 1e-8


@pytest.mark.parametrize("kind", ["disk", "halfplane"])
def test_spectral_extension_residual_and_trace(kind):
    dom = getattr(PlanarDomain, kind)(64)
    f = np.cos(2 * dom.angles()) + 0.5 * np.sin(5 * dom.angles())
    ext = dn.harmonic_extend(dom, f)
    assert ext.residual < 1e-8
    trace = ext.values[-1] if kind == "disk" else ext.values[0]
    assert np.abs(trace - f).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(-1, 1), min_size=8, max_size=8))
def test_dn_self_adjoint_and_nonnegative(coef):
    dom = PlanarDomain.disk(64)
    th = dom.angles()
    f = sum(c * np.cos((j + 1) * th + j) for j, c in enumerate(coef))
    g = sum(c * np.sin((j + 2) * th) for j, c in enumerate(coef[::-1]))
    Df, Dg = dn.dn_apply(dom, f).values, dn.dn_apply(dom, g).values
    assert abs(np.dot(Df, g) - np.dot(f, Dg)) < 1e-10 * max(1, np.abs(Df).max())
    assert np.dot(f, Df) >= -1e-12


# --------------------------------------------------------- power inequality


@pytest.mark.parametrize("m", [1, 2, 3])
def test_disk_power_inequality_band_limited(m):
    dom = PlanarDomain.disk(512)
    rng = np.random.default_rng(m)
    th = dom.angles()
    f = sum(rng.standard_normal() * np.cos(k * th + rng.uniform(0, 6)) for k in range(1, 33))
    f /= np.abs(f).max()
    rep = dn.verify_power_inequality(dom, f, m)
    assert rep.passed and not rep.metadata["degraded"]


def test_halfplane_power_inequality():
    dom = PlanarDomain.halfplane(256)
    th = dom.angles()
    f = np.cos(th) + 0.4 * np.sin(3 * th)
    assert dn.verify_power_inequality(dom, f, 2).passed


def test_m_one_slack_for_single_mode_is_constant():
    # f = cos k theta: k cos^2 - (2k cos 2k theta) / 4 = k / 2
    dom = PlanarDomain.disk(64)
    th = dom.angles()
    s = dn.power_slack(dom, np.cos(3 * th), 1)
    assert np.abs(s - 1.5).max() < 1e-11


def test_aliasing_flagged_and_tolerance_degraded():
    dom = PlanarDomain.disk(64)
    th = dom.angles()
    f = np.cos(12 * th)
    rep = dn.verify_power_inequality(dom, f, 2)
    assert rep.metadata["degraded"] and rep.tolerance > dn.SPECTRAL_TOL


def test_power_inequality_rejects_bad_m():
    dom = PlanarDomain.disk(16)
    with pytest.raises(ValueError):
        dn.verify_power_inequality(dom, np.ones(16), 0)


def test_rectangle_power_inequality_and_exclusion():
    dom = PlanarDomain.rectangle(65)
    rep = dn.verify_power_inequality(dom, dom.sample(datum), 1)
    assert rep.passed
    assert rep.tolerance == pytest.approx(10 * dom.h)
    assert len(rep.metadata["excluded"]) == 12


def test_rectangle_refinement_first_order():
    out = dn.rectangle_refinement_study(datum, 1, N=65)
    assert out["fine_h"] == pytest.approx(out["coarse_h"] / 2)
    assert 1.6 <= out["ratio"] <= 2.4


# ------------------------------------------------------------------- Hopf


@pytest.mark.parametrize("kind", ["disk", "halfplane"])
def test_hopf_spectral(kind):
    dom = getattr(PlanarDomain, kind)(256)
    th = dom.angles()
    f = np.cos(th) + 0.3 * np.sin(4 * th)
    rep = dn.hopf_mechanism_diagnostic(dom, f, 2)
    assert rep.passed
    assert rep.as_report().passed


def test_hopf_rectangle():
    dom = PlanarDomain.rectangle(65)
    rep = dn.hopf_mechanism_diagnostic(dom, dom.sample(datum), 1)
    assert rep.passed and len(rep.excluded) == 12
    assert rep.max_w <= 10 * dom.h**2


def test_hopf_report_failure_names_ingredient():
    rep = dn.HopfReport(max_w=0.5, min_normal_derivative=0.0, min_laplacian=0.0,
                        tolerances=(1e-8, 1e-8, 1e-8))
    assert not rep.passed and rep.as_report().location == "max_w"
