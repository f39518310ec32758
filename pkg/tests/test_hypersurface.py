import json
import math

import numpy as np
import pytest

from sphereflow import (
    ConeViolation,
    RadialProfile,
    SphereGrid2D,
    geometry,
    geometry_full_s2,
    hessian_contraction_residuals,
    integrate,
    load_checkpoint,
    minkowski_residual,
    save_checkpoint,
    volume,
)
from sphereflow.hypersurface import (
    differentiate,
    frame_hessian,
    grad_inner,
    simpson_weights,
    sin_power_integral,
    unit_sphere_area,
)

import oracles


def test_profile_validation():
    theta = np.linspace(0.0, math.pi, 33)
    with pytest.raises(ValueError):
        RadialProfile(n=1, theta=theta, rho=np.full(33, 0.5))
    with pytest.raises(ValueError):
        RadialProfile(n=2, theta=theta[:-1], rho=np.full(32, 0.5))
    with pytest.raises(ValueError):
        RadialProfile(n=2, theta=theta, rho=np.full(33, 1.6))  # beyond pi/2
    with pytest.raises(ValueError):
        RadialProfile(n=2, theta=theta**1.01, rho=np.full(33, 0.5))
    with pytest.raises(ValueError):
        RadialProfile.perturbed(2, 0.8, 0.05, 1.5, 33)
    prof = RadialProfile.perturbed(2, 0.8, 0.05, 2, 33)
    assert prof.N == 33
    assert prof.h == pytest.approx(math.pi / 32)


def test_differentiate_matches_even_mirror_oracle():
    prof = RadialProfile.perturbed(2, 0.8, 0.05, 2, 65)
    grad, hess = differentiate(prof)
    g2, h2 = oracles.fd_even_derivatives(prof.rho, prof.h)
    assert np.allclose(grad, g2, atol=1e-14)
    # the even-mirror second derivative at the pole is the one-sided stencil
    assert np.allclose(hess[1:-1], h2[1:-1], atol=1e-12)
    assert hess[0] == pytest.approx(h2[0] / 2 + (prof.rho[1] - prof.rho[0]) / prof.h**2, abs=1e-9)
    assert grad[0] == 0.0 and grad[-1] == 0.0


def test_geodesic_sphere_is_umbilic():
    for n, r in ((2, 0.8), (3, 0.5), (4, 1.2)):
        st = geometry(RadialProfile.geodesic_sphere(n, r, 129), 1)
        cot = math.cos(r) / math.sin(r)
        assert np.max(np.abs(st.lam1 - cot)) <= 1e-13
        assert np.max(np.abs(st.lam_ang - cot)) <= 1e-13
        assert np.max(np.abs(st.u - math.sin(r))) <= 1e-14
        assert np.max(np.abs(st.w - math.sin(r))) <= 1e-14
        c = (n - 1) / 2.0
        assert np.max(np.abs(st.F - c * cot)) <= 1e-12


def test_geometry_support_function_formula():
    prof = RadialProfile.perturbed(2, 0.8, 0.05, 3, 257)
    st = geometry(prof, 1)
    grad, _ = differentiate(prof)
    w = np.sqrt(np.sin(prof.rho) ** 2 + grad**2)
    assert np.allclose(st.u, np.sin(prof.rho) ** 2 / w, atol=1e-14)
    assert np.allclose(st.area_weight, np.sin(prof.rho) ** (prof.n - 1) * w, atol=1e-14)
    assert np.allclose(st.omega_speed, w / np.sin(prof.rho), atol=1e-14)


def test_geometry_rejects_cone_exit():
    # deep oscillation turns sigma_2 negative somewhere
    prof = RadialProfile.perturbed(2, 0.8, 0.28, 6, 257)
    with pytest.raises(ConeViolation):
        geometry(prof, 1)
    # k = 0 only needs star-shapedness, so the same profile passes
    st = geometry(prof, 0)
    assert st.lam_min < 0.0


def test_cross_backend_agreement():
    for r0, eps, mode in ((0.8, 0.05, 2), (0.7, 0.03, 3), (0.9, 0.04, 4)):
        prof = RadialProfile.perturbed(2, r0, eps, mode, 513)
        st = geometry(prof, 1)
        full = geometry_full_s2(SphereGrid2D.from_profile(prof, 8))
        sl = slice(1, -1)
        assert np.max(np.abs(full.u[:, 0] - st.u[sl])) <= 1e-6
        assert np.max(np.abs(full.lam_lo[:, 0] - np.minimum(st.lam1, st.lam_ang)[sl])) <= 1e-6
        assert np.max(np.abs(full.lam_hi[:, 0] - np.maximum(st.lam1, st.lam_ang)[sl])) <= 1e-6
        assert np.max(np.abs(full.area_weight[:, 0] - st.area_weight[sl])) <= 1e-6
        assert full.weingarten_asymmetry <= 1e-10


def test_full_backend_nonaxisymmetric_self_adjoint():
    grid = SphereGrid2D.from_function(
        lambda t, p: 0.8 + 0.03 * np.sin(t) ** 2 * np.cos(2 * p), 129, 64)
    full = geometry_full_s2(grid)
    assert full.weingarten_asymmetry <= 1e-10
    assert np.all(full.lam_lo > 0.0)


def test_sphere_grid_validation():
    prof = RadialProfile.perturbed(2, 0.8, 0.05, 2, 33)
    with pytest.raises(ValueError):
        SphereGrid2D.from_profile(prof, 7)  # odd phi count
    grid = SphereGrid2D.from_profile(prof, 8)
    rho = grid.rho.copy()
    rho[0, 1] += 1e-3
    with pytest.raises(ValueError):
        SphereGrid2D(theta=grid.theta, phi_nodes=grid.phi_nodes, rho=rho)


def test_quadrature_and_area_constants():
    assert unit_sphere_area(1) == pytest.approx(2 * math.pi, rel=1e-14)
    assert unit_sphere_area(2) == pytest.approx(4 * math.pi, rel=1e-14)
    assert unit_sphere_area(3) == pytest.approx(2 * math.pi**2, rel=1e-14)
    # composite quadrature nails smooth integrands to ~h^4
    N = 129
    w = simpson_weights(N, math.pi / (N - 1))
    tt = np.linspace(0.0, math.pi, N)
    assert w @ np.sin(tt) == pytest.approx(2.0, abs=1e-8)
    assert w @ np.sin(tt) ** 3 == pytest.approx(4.0 / 3.0, abs=1e-7)


def test_sin_power_integral_closed_forms():
    xs = np.linspace(0.1, 1.4, 7)
    assert np.allclose(sin_power_integral(1, xs), 1.0 - np.cos(xs), atol=1e-14)
    assert np.allclose(sin_power_integral(2, xs), xs / 2 - np.sin(2 * xs) / 4, atol=1e-14)
    assert np.allclose(sin_power_integral(3, xs),
                       2.0 / 3.0 - np.cos(xs) + np.cos(xs) ** 3 / 3.0, atol=1e-14)


def test_volume_and_area_against_dense_quadrature():
    for n, r in ((2, 0.9), (3, 0.6)):
        prof = RadialProfile.geodesic_sphere(n, r, 257)
        want = unit_sphere_area(n) * float(sin_power_integral(n, r))
        # radial part is exact; the angular quadrature carries ~h^4
        assert volume(prof) == pytest.approx(want, rel=5e-9)
    prof = RadialProfile.perturbed(2, 0.8, 0.06, 3, 257)
    st = geometry(prof, 0)
    area = integrate(st, np.ones(prof.N))
    # dense midpoint quadrature of the analytic profile
    tt = np.linspace(0.0, math.pi, 20001)
    mid = 0.5 * (tt[1:] + tt[:-1])
    rho = 0.8 + 0.06 * np.cos(3 * mid)
    drho = -0.18 * np.sin(3 * mid)
    w = np.sqrt(np.sin(rho) ** 2 + drho**2)
    want = 2 * math.pi * float(np.sum(np.sin(rho) * w * np.sin(mid)) * (tt[1] - tt[0]))
    # the discrete area element carries the O(h^2) gradient error inside W
    assert area == pytest.approx(want, rel=2e-5)


def test_minkowski_residual_small_and_refining():
    for n in (2, 3):
        prof = RadialProfile.perturbed(n, 0.8, 0.1, 2, 513)
        st = geometry(prof, 0)
        for m in range(n):
            assert abs(minkowski_residual(st, m)) <= 1e-4
        coarse = geometry(RadialProfile.perturbed(n, 0.8, 0.1, 2, 129), 0)
        for m in range(n):
            ratio = abs(minkowski_residual(coarse, m)) / abs(minkowski_residual(st, m))
            assert ratio > 8.0  # two halvings at order ~2 gives ~16


def test_frame_hessian_on_sphere():
    r = 0.7
    prof = RadialProfile.geodesic_sphere(2, r, 257)
    st = geometry(prof, 1)
    q = np.cos(prof.theta)
    qg, qh = oracles.fd_even_derivatives(q, prof.h)
    merid, ang = frame_hessian(st, qg, qh)
    want = -np.cos(prof.theta) / math.sin(r) ** 2
    assert np.max(np.abs(merid[1:-1] - want[1:-1])) <= 1e-3
    assert np.max(np.abs(ang[1:-1] - want[1:-1])) <= 1e-3
    # pole limit collapses both components to q'' / phi^2
    assert merid[0] == pytest.approx(ang[0], abs=1e-12)


def test_grad_inner_metric_factor():
    prof = RadialProfile.perturbed(2, 0.8, 0.05, 2, 129)
    st = geometry(prof, 1)
    a = np.sin(prof.theta)
    b = np.cos(2 * prof.theta)
    ag, _ = oracles.fd_even_derivatives(a, prof.h)
    bg, _ = oracles.fd_even_derivatives(b, prof.h)
    assert np.allclose(grad_inner(st, ag, bg), ag * bg / st.w**2, atol=1e-14)


def test_support_factor_disambiguation():
    prof = RadialProfile.perturbed(2, 0.8, 0.05, 2, 257)
    res = hessian_contraction_residuals(prof, 1)
    passing = [name for name, val in res.items() if val <= 1e-10]
    assert len(passing) == 1
    failing = [val for val in res.values() if val > 1e-10]
    assert all(val > 1e-3 for val in failing)


def test_checkpoint_roundtrip(tmp_path):
    prof = RadialProfile.perturbed(3, 0.8, 0.05, 2, 65)
    path = tmp_path / "state.json"
    save_checkpoint(prof, 2, 1.25, path)
    payload = json.loads(path.read_text())
    assert set(payload) == {"n", "k", "t", "theta", "rho"}
    loaded, k, t = load_checkpoint(path)
    assert k == 2
    assert t == 1.25
    assert loaded.n == 3
    assert np.array_equal(loaded.rho, prof.rho)
    assert np.array_equal(loaded.theta, prof.theta)
