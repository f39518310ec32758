"""Support-function side of the flow: log-radius chart and dual solver.

The log radius gamma = log tan(rho/2) turns the spherical radial graph into
a Euclidean one, rho_tilde = e^gamma, whose shape operator h_tilde relates to
the spherical one by

    h = (e^gamma / phi) h_tilde + ((phi' - 1) / (phi omega)) id,

an algebraic identity at shared discrete derivatives of gamma.  Closing the
system through the Euclidean support function u_tilde gives an inverse-type
parabolic equation

    d(u_tilde)/dt = G = c (phi'/phi) u_tilde omega
                        - (rho_tilde u_tilde / phi) F(1/W + s id),

W = Hess(u_tilde) + u_tilde id, s = (phi' - 1)/(rho_tilde omega), whose
long-time behaviour is an open question; the solver here is experimental and
records the breakdown time when strict convexity of the dual body fails.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .exceptions import ConeViolation, ConvexityLoss, StepRejected
from .flow import FlowConfig, _nodal_derivatives
from .hypersurface import RadialProfile, differentiate, geometry
from .quermass import quermass_vector
from .symfunc import identity_quotient, quotient_two_value

__all__ = [
    "DualState",
    "DualTrace",
    "DualResult",
    "gamma_transform",
    "decomposition_residual",
    "support_closure",
    "g_operator",
    "dual_from_profile",
    "profile_from_dual",
    "speed_transport_residual",
    "dual_run",
]


def gamma_transform(profile: RadialProfile):
    """Log radius gamma = log tan(rho/2) and Euclidean radius e^gamma."""
    rho = profile.rho
    gamma = np.log(np.tan(0.5 * rho))
    return gamma, np.exp(gamma)


def _gamma_curvatures(n, theta, gamma, g_grad, g_hess):
    """Both shape operators from one set of discrete gamma derivatives.

    Returns (lam1, lam_ang, ht1, ht_ang, omega, phi, phip, rho_tilde):
    spherical principal curvatures in the gamma chart and Euclidean ones of
    the graph rho_tilde = e^gamma, evaluated from the same g_grad/g_hess so
    their linear relation holds to roundoff.
    """
    rho_tilde = np.exp(gamma)
    omega2 = 1.0 + g_grad**2
    omega = np.sqrt(omega2)
    phi = 2.0 * rho_tilde / (1.0 + rho_tilde**2)
    phip = (1.0 - rho_tilde**2) / (1.0 + rho_tilde**2)

    cot_term = np.empty_like(gamma)
    cot_term[1:-1] = g_grad[1:-1] / np.tan(theta[1:-1])
    # gamma is even at the poles, so cot(theta)*gamma_theta -> gamma_thetatheta
    cot_term[0] = g_hess[0]
    cot_term[-1] = g_hess[-1]

    lam1 = (phip * omega2 - g_hess) / (phi * omega * omega2)
    lam_ang = (phip - cot_term) / (phi * omega)
    ht1 = (omega2 - g_hess) / (rho_tilde * omega * omega2)
    ht_ang = (1.0 - cot_term) / (rho_tilde * omega)
    return lam1, lam_ang, ht1, ht_ang, omega, phi, phip, rho_tilde


def decomposition_residual(profile: RadialProfile) -> float:
    """Max-norm defect of h = (e^gamma/phi) h_tilde + ((phi'-1)/(phi omega)) id.

    Both shape operators are evaluated in the log-radius chart from one set
    of discrete derivatives, so the defect floor is roundoff, not a
    discretization order.
    """
    gamma, _ = gamma_transform(profile)
    g_grad, g_hess = _nodal_derivatives(gamma, profile.h)
    lam1, lam_ang, ht1, ht_ang, omega, phi, phip, rho_tilde = _gamma_curvatures(
        profile.n, profile.theta, gamma, g_grad, g_hess
    )
    shift = (phip - 1.0) / (phi * omega)
    r1 = lam1 - (rho_tilde / phi) * ht1 - shift
    ra = lam_ang - (rho_tilde / phi) * ht_ang - shift
    return float(max(np.max(np.abs(r1)), np.max(np.abs(ra))))


@dataclass
class DualState:
    """Closure bundle of the Euclidean support function on S^n nodes.

    w_merid / w_ang are the eigenvalues of W = Hess(u) + u id in the
    axisymmetric frame; h_merid / h_ang the corresponding eigenvalues of the
    dual shape operator W^{-1}.
    """

    n: int
    theta: np.ndarray
    u: np.ndarray
    u_grad: np.ndarray
    u_hess: np.ndarray
    rho_tilde: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    rho: np.ndarray
    phi: np.ndarray
    phip: np.ndarray
    w_merid: np.ndarray
    w_ang: np.ndarray

    @property
    def h_merid(self) -> np.ndarray:
        return 1.0 / self.w_merid

    @property
    def h_ang(self) -> np.ndarray:
        return 1.0 / self.w_ang

    @property
    def min_eig_w(self) -> float:
        return float(min(self.w_merid.min(), self.w_ang.min()))

    @property
    def max_eig_w(self) -> float:
        return float(max(self.w_merid.max(), self.w_ang.max()))


def support_closure(n, theta, u_tilde, u_grad=None, u_hess=None) -> DualState:
    """Close the support-function system into a full DualState.

    With u_grad/u_hess omitted they are taken by centered differences on a
    uniform theta grid spanning [0, pi] (even parity at the poles).  Passing
    exact derivatives skips that and permits non-uniform nodes.
    """
    theta = np.asarray(theta, dtype=float)
    u = np.asarray(u_tilde, dtype=float)
    if theta.ndim != 1 or theta.shape != u.shape:
        raise ValueError("theta and u_tilde must be matching 1-d arrays")
    if not np.all(np.isfinite(u)) or np.min(u) <= 0.0:
        raise ValueError("u_tilde must be finite and positive")
    if (u_grad is None) != (u_hess is None):
        raise ValueError("supply both derivative arrays or neither")
    if u_grad is None:
        h = theta[1] - theta[0]
        if h <= 0 or np.max(np.abs(np.diff(theta) - h)) > 1e-12:
            raise ValueError("finite differences need a uniform theta grid")
        if abs(theta[0]) > 1e-13 or abs(theta[-1] - math.pi) > 1e-13:
            raise ValueError("theta must span [0, pi] inclusive")
        u_grad, u_hess = _nodal_derivatives(u, float(h))
    else:
        u_grad = np.asarray(u_grad, dtype=float)
        u_hess = np.asarray(u_hess, dtype=float)

    rho_tilde = np.hypot(u, u_grad)
    omega = rho_tilde / u
    rho = 2.0 * np.arctan(rho_tilde)
    phi = 2.0 * rho_tilde / (1.0 + rho_tilde**2)
    phip = (1.0 - rho_tilde**2) / (1.0 + rho_tilde**2)

    w_merid = u_hess + u
    w_ang = np.empty_like(u)
    interior = slice(1, -1)
    w_ang[interior] = u_grad[interior] / np.tan(theta[interior]) + u[interior]
    # even parity: cot(theta)*u_theta limits to u_thetatheta at the poles
    w_ang[0] = u_hess[0] + u[0]
    w_ang[-1] = u_hess[-1] + u[-1]

    bad = np.where((w_merid <= 0.0) | (w_ang <= 0.0))[0]
    if bad.size:
        raise ConvexityLoss(
            f"W = Hess(u) + u id not positive definite at node {bad[0]}",
            node=int(bad[0]),
        )
    return DualState(
        n=int(n), theta=theta, u=u, u_grad=u_grad, u_hess=u_hess,
        rho_tilde=rho_tilde, gamma=np.log(rho_tilde), omega=omega, rho=rho,
        phi=phi, phip=phip, w_merid=w_merid, w_ang=w_ang,
    )


def _g_terms(state: DualState, k: int):
    shift = (state.phip - 1.0) / (state.rho_tilde * state.omega)
    mu1 = state.h_merid + shift
    mu_ang = state.h_ang + shift
    fval, f1, fa, _, _ = quotient_two_value(mu1, mu_ang, state.n, k)
    c = identity_quotient(state.n, k)
    coeff = state.rho_tilde * state.u / state.phi
    g = c * (state.phip / state.phi) * state.u * state.omega - coeff * fval
    # trace of the linearization in W, the stiffness scale for explicit steps
    stiff = coeff * (f1 / state.w_merid**2 + (state.n - 1) * fa / state.w_ang**2)
    return g, stiff


def g_operator(state: DualState, k: int) -> np.ndarray:
    """Right-hand side G of the support-function evolution.

    The curvature quotient acts on the eigenvalues of W^{-1} + s id with
    s = (phi'-1)/(rho_tilde omega); a cone error propagates whenever those
    shifted eigenvalues leave the admissible cone (sigma_k <= 0), e.g. for
    the unit-support equator state where the shift cancels W^{-1} = id
    exactly.
    """
    g, _ = _g_terms(state, k)
    return g


def dual_from_profile(profile: RadialProfile) -> DualState:
    """Transport a radial profile to its dual support function.

    The normal direction of the graph sits at theta_nu = theta -
    arctan(gamma_theta); u_tilde and its first two derivatives with respect
    to theta_nu follow from the chain rule, so the closure reproduces
    rho_tilde, omega and W = h_tilde^{-1} at roundoff (the returned nodes are
    non-uniform).
    """
    gamma, rho_tilde = gamma_transform(profile)
    g_grad, g_hess = _nodal_derivatives(gamma, profile.h)
    omega2 = 1.0 + g_grad**2
    omega = np.sqrt(omega2)
    theta_nu = profile.theta - np.arctan(g_grad)
    u = rho_tilde / omega
    u_t = rho_tilde * g_grad / omega
    u_tt = (
        (rho_tilde * g_grad**2 / omega + rho_tilde * g_hess / omega**3)
        * omega2
        / (omega2 - g_hess)
    )
    return support_closure(profile.n, theta_nu, u, u_grad=u_t, u_hess=u_tt)


def profile_from_dual(state: DualState, N: int | None = None) -> RadialProfile:
    """Pull the dual state back to a radial profile on a uniform grid.

    Graph points sit at theta = theta_nu + arctan(u_theta/u) with radius
    rho = 2 arctan rho_tilde; a cubic spline resamples to the uniform grid.
    """
    theta_z = state.theta + np.arctan(state.u_grad / state.u)
    if np.any(np.diff(theta_z) <= 0.0):
        raise ConvexityLoss("pullback point map is not monotone")
    N = state.theta.size if N is None else int(N)
    grid = np.linspace(0.0, math.pi, N)
    rho = CubicSpline(theta_z, state.rho)(grid)
    return RadialProfile(n=state.n, theta=grid, rho=rho)


def speed_transport_residual(profile: RadialProfile, k: int) -> float:
    """Mismatch between G and the transported primal normal speed.

    The primal rate of rho_tilde at a graph point transports to
    (u/rho_tilde) d(rho_tilde)/dt = (u omega / phi) f; both sides use their
    own chart's discrete derivatives, so agreement is second order in h.
    """
    state = geometry(profile, k)
    c = identity_quotient(profile.n, k)
    f = c * state.phip - state.u * state.F
    dual = dual_from_profile(profile)
    g = g_operator(dual, k)
    transported = dual.u * dual.omega / dual.phi * f
    scale = max(1.0, float(np.max(np.abs(g))))
    return float(np.max(np.abs(g - transported))) / scale


@dataclass
class DualTrace:
    """Run history of the dual solver; primal columns plus W eigen range."""

    n: int
    k: int
    t: list = field(default_factory=list)
    quermass: list = field(default_factory=list)
    min_u: list = field(default_factory=list)
    min_rho: list = field(default_factory=list)
    max_rho: list = field(default_factory=list)
    min_f: list = field(default_factory=list)
    max_f: list = field(default_factory=list)
    min_lambda: list = field(default_factory=list)
    max_lambda: list = field(default_factory=list)
    max_speed: list = field(default_factory=list)
    min_eig_w: list = field(default_factory=list)
    max_eig_w: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    breakdown_time: float | None = None

    def append(self, t, quermass_row, state: DualState, g, codes):
        if self.t and not t > self.t[-1]:
            raise ValueError("trace timestamps must be strictly increasing")
        shift = (state.phip - 1.0) / (state.rho_tilde * state.omega)
        lam1 = state.rho_tilde / state.phi * (state.h_merid + shift)
        lam_ang = state.rho_tilde / state.phi * (state.h_ang + shift)
        try:
            fval, _, _, _, _ = quotient_two_value(lam1, lam_ang, state.n, self.k)
            fmin, fmax = float(np.min(fval)), float(np.max(fval))
        except ConeViolation:
            fmin = fmax = float("nan")
        self.t.append(float(t))
        self.quermass.append(list(quermass_row))
        self.min_u.append(float(np.min(state.u)))
        self.min_rho.append(float(np.min(state.rho)))
        self.max_rho.append(float(np.max(state.rho)))
        self.min_f.append(fmin)
        self.max_f.append(fmax)
        self.min_lambda.append(float(min(lam1.min(), lam_ang.min())))
        self.max_lambda.append(float(max(lam1.max(), lam_ang.max())))
        self.max_speed.append(float(np.max(np.abs(g))))
        self.min_eig_w.append(state.min_eig_w)
        self.max_eig_w.append(state.max_eig_w)
        self.violations.append(";".join(codes))

    def header(self) -> list:
        cols = ["t"] + [f"A_{m}" for m in range(-1, self.n + 1)]
        cols += ["minU", "minRho", "maxRho", "minF", "maxF",
                 "minLambda", "maxLambda", "maxSpeed",
                 "minEigW", "maxEigW", "breakdownTime", "violationFlags"]
        return cols

    def to_csv(self, path, seed: int | None = None) -> None:
        bd = "" if self.breakdown_time is None else repr(float(self.breakdown_time))
        with open(path, "w") as fh:
            if seed is not None:
                fh.write(f"# seed={seed}\n")
            fh.write(",".join(self.header()) + "\n")
            for i in range(len(self.t)):
                row = [self.t[i]] + list(self.quermass[i]) + [
                    self.min_u[i], self.min_rho[i], self.max_rho[i],
                    self.min_f[i], self.max_f[i], self.min_lambda[i],
                    self.max_lambda[i], self.max_speed[i],
                    self.min_eig_w[i], self.max_eig_w[i],
                ]
                cells = [repr(float(v)) for v in row]
                cells.append(bd)
                cells.append(self.violations[i])
                fh.write(",".join(cells) + "\n")

    def column(self, name: str) -> np.ndarray:
        cols = self.header()
        if name not in cols or name in ("breakdownTime", "violationFlags"):
            raise KeyError(name)
        idx = cols.index(name)
        rows = []
        for i in range(len(self.t)):
            rows.append([self.t[i]] + list(self.quermass[i]) + [
                self.min_u[i], self.min_rho[i], self.max_rho[i],
                self.min_f[i], self.max_f[i], self.min_lambda[i],
                self.max_lambda[i], self.max_speed[i],
                self.min_eig_w[i], self.max_eig_w[i],
            ])
        return np.array([r[idx] for r in rows])


@dataclass
class DualResult:
    config: FlowConfig
    trace: DualTrace
    state: DualState
    termination: str
    t_final: float
    steps: int
    rejections: int
    breakdown_time: float | None


_MULT_FLOOR = 1e-12
_GROW_EVERY = 20
_GROW_FACTOR = 1.2


def _dual_rate(n, theta, u, k):
    state = support_closure(n, theta, u)
    g, stiff = _g_terms(state, k)
    return state, g, stiff


def _quermass_row(state: DualState, n: int, codes: list):
    try:
        prof = profile_from_dual(state)
        q = quermass_vector(geometry(prof, 0), prof)
        return [q.a(m) for m in range(-1, n + 1)]
    except (ValueError, ConeViolation, ConvexityLoss):
        codes.append("PULLBACK")
        return [float("nan")] * (n + 2)


def dual_run(config: FlowConfig) -> DualResult:
    """Explicit time stepping of the support-function evolution.

    Same step-control policy as the primal solver: parabolic dt against the
    trace of the linearization, rejection halving, slow regrowth.  Loss of
    positive definiteness of W at the smallest step aborts the run and the
    time is recorded; the outcome of this evolution is not covered by the
    convergence theory and runs here are experimental probes.
    """
    profile = config.initial_shape.build(config.n, config.N)
    dual0 = dual_from_profile(profile)
    grid = np.linspace(0.0, math.pi, config.N)
    u = CubicSpline(dual0.theta, dual0.u)(grid)
    n, k = config.n, config.k
    h = float(grid[1] - grid[0])

    state, g, stiff = _dual_rate(n, grid, u, k)
    trace = DualTrace(n=n, k=k)
    codes: list = []
    trace.append(0.0, _quermass_row(state, n, codes), state, g, codes)

    t = 0.0
    steps = 0
    rejections = 0
    mult = 1.0
    streak = 0
    termination = "tmax"
    breakdown = None
    last_sampled = 0.0
    pending: list = []

    while True:
        max_g = float(np.max(np.abs(g)))
        if max_g < config.convergence_tol:
            termination = "converged"
            break
        if t >= config.t_max * (1.0 - 1e-15):
            termination = "tmax"
            break
        if max(np.max(state.h_merid), np.max(state.h_ang)) > config.blowup_threshold:
            termination = "curvature_blowup"
            break

        dt_base = config.dt_policy.cfl_factor * h**2 / max(float(np.max(stiff)), 1e-300)
        dt = min(dt_base, config.dt_policy.dt_max) * mult
        dt = min(dt, config.t_max - t)
        try:
            _, g2, _ = _dual_rate(n, grid, u + 0.5 * dt * g, k)
            _, g3, _ = _dual_rate(n, grid, u + 0.5 * dt * g2, k)
            _, g4, _ = _dual_rate(n, grid, u + dt * g3, k)
            u_new = u + dt / 6.0 * (g + 2.0 * g2 + 2.0 * g3 + g4)
            state_new, g_new, stiff_new = _dual_rate(n, grid, u_new, k)
        except (ConvexityLoss, ConeViolation, ValueError) as exc:
            rejections += 1
            streak = 0
            mult *= 0.5
            if mult < _MULT_FLOOR:
                termination = "convexity_breakdown"
                breakdown = t
                break
            continue

        t += dt
        steps += 1
        streak += 1
        if streak >= _GROW_EVERY:
            mult = min(1.0, mult * _GROW_FACTOR)
            streak = 0
        u, state, g, stiff = u_new, state_new, g_new, stiff_new

        if steps % config.sample_every == 0:
            row = _quermass_row(state, n, pending)
            trace.append(t, row, state, g, pending)
            pending = []
            last_sampled = t

    if t > last_sampled:
        row = _quermass_row(state, n, pending)
        trace.append(t, row, state, g, pending)
    trace.breakdown_time = breakdown

    return DualResult(
        config=config,
        trace=trace,
        state=state,
        termination=termination,
        t_final=t,
        steps=steps,
        rejections=rejections,
        breakdown_time=breakdown,
    )
