"""Radial-graph hypersurfaces in the round (n+1)-sphere.

A closed convex hypersurface contained in an open hemisphere is stored as a
radial graph rho(theta) over the polar angle of the unit n-sphere, assuming
rotational symmetry about the polar axis.  With phi(r) = sin r the ambient
metric is dr^2 + phi(r)^2 dz^2, and all extrinsic quantities reduce to
one-dimensional expressions in rho, rho_theta, rho_thetatheta.

A separate full two-sphere backend (no symmetry assumed) provides an
independent tensor-valued oracle for n = 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .exceptions import ConeViolation
from .symfunc import quotient_two_value, sigma_two_value

__all__ = [
    "RadialProfile",
    "GeometryState",
    "SphereGrid2D",
    "differentiate",
    "geometry",
    "geometry_full_s2",
    "simpson_weights",
    "unit_sphere_area",
    "integrate",
    "volume",
    "sin_power_integral",
    "minkowski_residual",
    "frame_hessian",
    "grad_inner",
    "hessian_contraction_residuals",
    "save_checkpoint",
    "load_checkpoint",
]

# radii must stay strictly inside the open hemisphere
RHO_FLOOR = 1e-12


@dataclass
class RadialProfile:
    """Axisymmetric radial graph: nodes theta in [0, pi], radii in (0, pi/2)."""

    n: int
    theta: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        self.n = int(self.n)
        if self.n < 2:
            raise ValueError("ambient dimension needs n >= 2")
        self.theta = np.asarray(self.theta, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.theta.ndim != 1 or self.theta.shape != self.rho.shape:
            raise ValueError("theta and rho must be matching 1-d arrays")
        if self.theta.size < 5:
            raise ValueError("grid too coarse: need at least 5 nodes")
        if abs(self.theta[0]) > 1e-13 or abs(self.theta[-1] - math.pi) > 1e-13:
            raise ValueError("theta must span [0, pi] inclusive")
        h = self.theta[1] - self.theta[0]
        if h <= 0 or np.max(np.abs(np.diff(self.theta) - h)) > 1e-12:
            raise ValueError("theta nodes must be uniformly spaced")
        if not np.all(np.isfinite(self.rho)):
            raise ValueError("rho must be finite")
        if np.min(self.rho) <= RHO_FLOOR or np.max(self.rho) >= math.pi / 2 - RHO_FLOOR:
            raise ValueError("rho must lie strictly inside (0, pi/2)")

    @property
    def N(self) -> int:
        return self.theta.size

    @property
    def h(self) -> float:
        return float(self.theta[1] - self.theta[0])

    @classmethod
    def geodesic_sphere(cls, n: int, r: float, N: int) -> "RadialProfile":
        theta = np.linspace(0.0, math.pi, N)
        return cls(n=n, theta=theta, rho=np.full(N, float(r)))

    @classmethod
    def perturbed(cls, n: int, r0: float, eps: float, mode: int, N: int) -> "RadialProfile":
        """rho = r0 + eps*cos(mode*theta); integer modes keep the poles smooth."""
        if int(mode) != mode or mode < 1:
            raise ValueError("perturbation mode must be a positive integer")
        theta = np.linspace(0.0, math.pi, N)
        return cls(n=n, theta=theta, rho=r0 + eps * np.cos(mode * theta))


def differentiate(profile: RadialProfile):
    """Centered second-order d/dtheta and d2/dtheta2 of the radius.

    Axisymmetric regularity makes rho even about both poles, so the ghost
    values are the mirrored interior ones; the first derivative vanishes at
    the poles exactly and the second uses the one-sided even stencil.
    """
    rho, h = profile.rho, profile.h
    grad = np.empty_like(rho)
    hess = np.empty_like(rho)
    grad[1:-1] = (rho[2:] - rho[:-2]) / (2.0 * h)
    grad[0] = 0.0
    grad[-1] = 0.0
    hess[1:-1] = (rho[2:] - 2.0 * rho[1:-1] + rho[:-2]) / h**2
    hess[0] = 2.0 * (rho[1] - rho[0]) / h**2
    hess[-1] = 2.0 * (rho[-2] - rho[-1]) / h**2
    return grad, hess


@dataclass
class GeometryState:
    """Pointwise extrinsic geometry of an axisymmetric radial graph.

    lam1 is the meridian principal curvature, lam_ang the angular one with
    multiplicity n-1.  f_* are the diagonal gradient entries of the
    curvature quotient F = sigma_{k+1}/sigma_k in the principal frame.
    """

    n: int
    k: int
    theta: np.ndarray
    rho: np.ndarray
    grad: np.ndarray
    hess: np.ndarray
    phi: np.ndarray
    phip: np.ndarray
    w: np.ndarray
    u: np.ndarray
    omega_speed: np.ndarray
    area_weight: np.ndarray
    lam1: np.ndarray
    lam_ang: np.ndarray
    F: np.ndarray
    f_merid: np.ndarray
    f_ang: np.ndarray
    trace_grad: np.ndarray
    weighted_trace: np.ndarray

    @property
    def h(self) -> float:
        return float(self.theta[1] - self.theta[0])

    def sigma_nodal(self, m: int) -> np.ndarray:
        return sigma_two_value(self.lam1, self.lam_ang, self.n, m)

    def lam_matrix(self) -> np.ndarray:
        cols = [self.lam1] + [self.lam_ang] * (self.n - 1)
        return np.stack(cols, axis=-1)

    @property
    def lam_min(self) -> float:
        return float(min(self.lam1.min(), self.lam_ang.min()))

    @property
    def lam_max(self) -> float:
        return float(max(self.lam1.max(), self.lam_ang.max()))


def geometry(profile: RadialProfile, k: int) -> GeometryState:
    """Support function, curvatures and quotient data on the profile grid."""
    n = profile.n
    if not 0 <= k <= n - 1:
        raise ValueError(f"quotient order k={k} out of range for n={n}")
    theta, rho = profile.theta, profile.rho
    grad, hess = differentiate(profile)
    phi = np.sin(rho)
    phip = np.cos(rho)
    w = np.hypot(phi, grad)
    u = phi**2 / w
    omega_speed = w / phi
    area_weight = phi ** (n - 1) * w

    lam1 = (-phi * hess + 2.0 * phip * grad**2 + phi**2 * phip) / w**3
    lam_ang = np.empty_like(lam1)
    # cot(theta)*rho_theta has a finite pole limit equal to rho_thetatheta,
    # which makes both curvatures coincide there
    lam_ang[1:-1] = (phi[1:-1] * phip[1:-1] - grad[1:-1] / np.tan(theta[1:-1])) / (
        phi[1:-1] * w[1:-1]
    )
    lam_ang[0] = lam1[0]
    lam_ang[-1] = lam1[-1]

    F, f1, fa, trace, weighted = quotient_two_value(lam1, lam_ang, n, k)
    return GeometryState(
        n=n,
        k=k,
        theta=theta,
        rho=rho.copy(),
        grad=grad,
        hess=hess,
        phi=phi,
        phip=phip,
        w=w,
        u=u,
        omega_speed=omega_speed,
        area_weight=area_weight,
        lam1=lam1,
        lam_ang=lam_ang,
        F=F,
        f_merid=f1,
        f_ang=fa,
        trace_grad=trace,
        weighted_trace=weighted,
    )


@lru_cache(maxsize=64)
def _simpson_weights_unit(N: int) -> tuple:
    """Composite Simpson weights for N uniform nodes of unit spacing.

    An odd interval count gets a 3/8 block at the far end.  Fourth-order
    accuracy here keeps quadrature bias far below the discretization error
    of the curvature fields.
    """
    m = N - 1
    w = np.zeros(N)
    if m % 2 == 0:
        w[0] = w[-1] = 1.0 / 3.0
        w[1:-1:2] = 4.0 / 3.0
        w[2:-1:2] = 2.0 / 3.0
    else:
        if m < 3:
            raise ValueError("grid too coarse for composite quadrature")
        head = m - 3
        if head:
            w[: head + 1] = _simpson_weights_unit(head + 1)
        w[-4] += 3.0 / 8.0
        w[-3] += 9.0 / 8.0
        w[-2] += 9.0 / 8.0
        w[-1] += 3.0 / 8.0
    return tuple(w)


def simpson_weights(N: int, h: float) -> np.ndarray:
    return h * np.asarray(_simpson_weights_unit(N))


@lru_cache(maxsize=None)
def unit_sphere_area(m: int) -> float:
    """Surface measure of the unit m-sphere."""
    if m < 0:
        raise ValueError("sphere dimension must be nonnegative")
    if m == 0:
        return 2.0
    if m == 1:
        return 2.0 * math.pi
    return 2.0 * math.pi / (m - 1) * unit_sphere_area(m - 2)


def integrate(state: GeometryState, nodal) -> float:
    """Integral of a nodal scalar against the induced area measure."""
    N = state.theta.size
    w = simpson_weights(N, state.h)
    vals = np.broadcast_to(np.asarray(nodal, dtype=float), state.theta.shape)
    density = state.area_weight * np.sin(state.theta) ** (state.n - 1)
    return unit_sphere_area(state.n - 1) * float(np.sum(w * vals * density))


def sin_power_integral(m: int, x) -> np.ndarray:
    """Antiderivative of sin^m vanishing at 0, by the power reduction formula."""
    x = np.asarray(x, dtype=float)
    if m < 0:
        raise ValueError("power must be nonnegative")
    prev = x.copy()            # m = 0
    if m == 0:
        return prev
    cur = 1.0 - np.cos(x)      # m = 1
    for j in range(2, m + 1):
        prev, cur = cur, ((j - 1) * prev - np.sin(x) ** (j - 1) * np.cos(x)) / j
    return cur


def volume(profile: RadialProfile) -> float:
    """Region volume: the radial integral is exact, the angular one quadrature."""
    N = profile.N
    w = simpson_weights(N, profile.h)
    radial = sin_power_integral(profile.n, profile.rho)
    return unit_sphere_area(profile.n - 1) * float(
        np.sum(w * np.sin(profile.theta) ** (profile.n - 1) * radial)
    )


def minkowski_residual(state: GeometryState, m: int) -> float:
    """Relative defect of the integral balance between adjacent curvature sums.

    (m+1) * integral(u * sigma_{m+1}) equals (n-m) * integral(phi' * sigma_m)
    on any closed hypersurface; the discrete defect decays at second order.
    """
    if not 0 <= m <= state.n - 1:
        raise ValueError(f"order m={m} out of range for n={state.n}")
    lhs = (m + 1) * integrate(state, state.u * state.sigma_nodal(m + 1))
    rhs = (state.n - m) * integrate(state, state.phip * state.sigma_nodal(m))
    return abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300)


def frame_hessian(state: GeometryState, q_grad: np.ndarray, q_hess: np.ndarray):
    """Orthonormal-frame intrinsic Hessian components of an axisymmetric scalar.

    Returns (meridian, angular) arrays given the theta-derivatives of the
    scalar.  The angular entry uses the pole limit cot(theta)*q_theta ->
    q_thetatheta, valid because admissible scalars are even at the poles.
    """
    g = state.w**2
    gamma = (state.phi * state.phip * state.grad + state.grad * state.hess) / g
    hm = (q_hess - gamma * q_grad) / g
    ha = np.empty_like(hm)
    t = state.theta[1:-1]
    ha[1:-1] = (
        (state.phip[1:-1] * state.grad[1:-1] / state.phi[1:-1] + 1.0 / np.tan(t))
        * q_grad[1:-1]
        / g[1:-1]
    )
    ha[0] = q_hess[0] / g[0]
    ha[-1] = q_hess[-1] / g[-1]
    return hm, ha


def grad_inner(state: GeometryState, a_grad: np.ndarray, b_grad: np.ndarray) -> np.ndarray:
    """Induced-metric inner product of two axisymmetric gradients."""
    return a_grad * b_grad / state.w**2


def hessian_contraction_residuals(profile: RadialProfile, k: int) -> dict:
    """Residuals of the radius Hessian contraction for both speed-factor candidates.

    The identity u F^{ij} (D^2 rho)_ij = -u * omega * F
    + (phi'/phi) u F^{ij} g_ij - (phi'/phi) u F^{ij} rho_i rho_j holds with
    omega = u/phi and fails with omega = W/phi, so exactly one candidate
    leaves a roundoff-level residual.  The kinematic factor multiplying the
    normal speed in d(rho)/dt is the reciprocal one, W/phi.
    """
    state = geometry(profile, k)
    hm, ha = frame_hessian(state, state.grad, state.hess)
    lhs = state.u * (state.f_merid * hm + (state.n - 1) * state.f_ang * ha)
    common = (state.phip / state.phi) * state.u * state.trace_grad - (
        state.phip / state.phi
    ) * state.u * state.f_merid * state.grad**2 / state.w**2

    out = {}
    for name, omega in (
        ("u_over_phi", state.u / state.phi),
        ("w_over_phi", state.w / state.phi),
    ):
        rhs = -state.u * omega * state.F + common
        out[name] = float(np.max(np.abs(lhs - rhs)) / max(1.0, np.max(np.abs(lhs))))
    return out


# -- full two-sphere backend -------------------------------------------------


@dataclass
class SphereGrid2D:
    """Latitude-longitude grid on the 2-sphere, poles stored as constant rows.

    phi-direction is periodic; a stencil reaching across a pole would use the
    ghost rule rho(-theta, phi) = rho(theta, phi + pi), but interior-row
    evaluation with the pole rows present never needs it.
    """

    theta: np.ndarray
    phi_nodes: np.ndarray
    rho: np.ndarray

    def __post_init__(self):
        self.theta = np.asarray(self.theta, dtype=float)
        self.phi_nodes = np.asarray(self.phi_nodes, dtype=float)
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.shape != (self.theta.size, self.phi_nodes.size):
            raise ValueError("rho must be shaped (n_theta, n_phi)")
        if self.theta.size < 5 or self.phi_nodes.size < 4:
            raise ValueError("grid too coarse")
        if self.phi_nodes.size % 2:
            raise ValueError("need an even number of phi nodes for the pole rule")
        if np.ptp(self.rho[0]) != 0.0 or np.ptp(self.rho[-1]) != 0.0:
            raise ValueError("pole rows must be constant")

    @classmethod
    def from_profile(cls, profile: RadialProfile, n_phi: int) -> "SphereGrid2D":
        phi_nodes = 2.0 * math.pi * np.arange(n_phi) / n_phi
        rho = np.repeat(profile.rho[:, None], n_phi, axis=1)
        return cls(theta=profile.theta, phi_nodes=phi_nodes, rho=rho)

    @classmethod
    def from_function(cls, fn, n_theta: int, n_phi: int) -> "SphereGrid2D":
        theta = np.linspace(0.0, math.pi, n_theta)
        phi_nodes = 2.0 * math.pi * np.arange(n_phi) / n_phi
        rho = np.asarray(fn(theta[:, None], phi_nodes[None, :]), dtype=float)
        rho = np.broadcast_to(rho, (n_theta, n_phi)).copy()
        rho[0, :] = rho[0, 0]
        rho[-1, :] = rho[-1, 0]
        return cls(theta=theta, phi_nodes=phi_nodes, rho=rho)


@dataclass
class FullSphereGeometry:
    """Pointwise geometry on interior rows of a SphereGrid2D."""

    theta: np.ndarray
    phi_nodes: np.ndarray
    u: np.ndarray
    lam_lo: np.ndarray
    lam_hi: np.ndarray
    area_weight: np.ndarray
    weingarten_asymmetry: float


def geometry_full_s2(grid: SphereGrid2D) -> FullSphereGeometry:
    """Tensor-valued geometry of a radial graph over S^2, no symmetry assumed.

    Covariant derivatives use the round-metric connection in lat-lon
    coordinates; the shape operator is assembled as g^{-1} h per node and
    diagonalized as a 2x2 matrix.  Returned fields cover interior theta rows
    only, where every stencil has honest neighbors.
    """
    th = grid.theta
    hphi = grid.phi_nodes[1] - grid.phi_nodes[0]
    hth = th[1] - th[0]
    rho = grid.rho

    d_t = (rho[2:, :] - rho[:-2, :]) / (2.0 * hth)
    d_tt = (rho[2:, :] - 2.0 * rho[1:-1, :] + rho[:-2, :]) / hth**2
    d_p = (np.roll(rho, -1, axis=1) - np.roll(rho, 1, axis=1)) / (2.0 * hphi)
    d_pp = (np.roll(rho, -1, axis=1) - 2.0 * rho + np.roll(rho, 1, axis=1)) / hphi**2
    d_tp = (np.roll(rho, -1, axis=1)[2:, :] - np.roll(rho, 1, axis=1)[2:, :]
            - np.roll(rho, -1, axis=1)[:-2, :] + np.roll(rho, 1, axis=1)[:-2, :]) / (
        4.0 * hth * hphi
    )
    d_p = d_p[1:-1, :]
    d_pp = d_pp[1:-1, :]

    t = th[1:-1][:, None]
    sin_t, cos_t = np.sin(t), np.cos(t)
    r = rho[1:-1, :]
    phi = np.sin(r)
    phip = np.cos(r)

    # covariant Hessian on the round 2-sphere in lat-lon coordinates
    hess_tt = d_tt
    hess_tp = d_tp - (cos_t / sin_t) * d_p
    hess_pp = d_pp + sin_t * cos_t * d_t

    grad2 = d_t**2 + d_p**2 / sin_t**2
    w = np.sqrt(phi**2 + grad2)
    u = phi**2 / w
    area_weight = phi * w

    e_tt = np.ones_like(r)
    e_pp = sin_t**2 * np.ones_like(r)

    g_tt = phi**2 * e_tt + d_t**2
    g_tp = d_t * d_p
    g_pp = phi**2 * e_pp + d_p**2

    h_tt = (phi**2 * phip * e_tt + 2.0 * phip * d_t**2 - phi * hess_tt) / w
    h_tp = (2.0 * phip * d_t * d_p - phi * hess_tp) / w
    h_pp = (phi**2 * phip * e_pp + 2.0 * phip * d_p**2 - phi * hess_pp) / w

    det_g = g_tt * g_pp - g_tp**2
    a11 = (g_pp * h_tt - g_tp * h_tp) / det_g
    a12 = (g_pp * h_tp - g_tp * h_pp) / det_g
    a21 = (g_tt * h_tp - g_tp * h_tt) / det_g
    a22 = (g_tt * h_pp - g_tp * h_tp) / det_g

    tr = a11 + a22
    det = a11 * a22 - a12 * a21
    disc = np.sqrt(np.maximum(tr**2 - 4.0 * det, 0.0))
    lam_lo = 0.5 * (tr - disc)
    lam_hi = 0.5 * (tr + disc)

    # lowering the shape operator must reproduce the symmetric second form
    s11 = g_tt * a11 + g_tp * a21
    s12 = g_tt * a12 + g_tp * a22
    s21 = g_tp * a11 + g_pp * a21
    s22 = g_tp * a12 + g_pp * a22
    scale = max(1.0, float(np.max(np.abs(h_tt))), float(np.max(np.abs(h_pp))))
    asym = float(np.max(np.abs(s12 - s21))) / scale
    sym_check = max(
        asym,
        float(np.max(np.abs(s11 - h_tt))) / scale,
        float(np.max(np.abs(s22 - h_pp))) / scale,
    )

    return FullSphereGeometry(
        theta=th[1:-1],
        phi_nodes=grid.phi_nodes,
        u=u,
        lam_lo=lam_lo,
        lam_hi=lam_hi,
        area_weight=area_weight,
        weingarten_asymmetry=sym_check,
    )


# -- checkpoint serialization -------------------------------------------------


def save_checkpoint(profile: RadialProfile, k: int, t: float, path) -> None:
    """Write the wire-format snapshot {n, k, t, theta, rho}."""
    payload = {
        "n": profile.n,
        "k": int(k),
        "t": float(t),
        "theta": profile.theta.tolist(),
        "rho": profile.rho.tolist(),
    }
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")


def load_checkpoint(path):
    """Read a snapshot back into (profile, k, t)."""
    with open(path) as fh:
        payload = json.load(fh)
    profile = RadialProfile(
        n=int(payload["n"]),
        theta=np.asarray(payload["theta"], dtype=float),
        rho=np.asarray(payload["rho"], dtype=float),
    )
    return profile, int(payload["k"]), float(payload["t"])
