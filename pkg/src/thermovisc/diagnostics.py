"""
Post-hoc monitors over stored trajectories.

Time integrals treat every stored field as piecewise linear between
snapshots. Integrals against smooth time profiles (test-function cutoffs and
their derivatives) are evaluated exactly for that interpolant up to
Gauss-Legendre accuracy on each interval, so constants in time are
integrated without quadrature error.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import (BadTestFunction, EmptyTrajectory, ExponentOutOfRange,
                     HNotMultipleOfDt, InsufficientHistory)
from .model import f_values, gamma_values
from .operators import (OperatorSet, SpatialDictionary, default_neumann_dictionary,
                        dual_norm_w22, dual_pairing_w1lambda)
from .solver import theta_source

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(8)


@dataclass
class MonitorSeries:
    name: str
    times: np.ndarray
    values: np.ndarray
    params: dict = field(default_factory=dict)

    @property
    def final(self) -> float:
        return float(self.values[-1])


# time quadrature helpers

def hat_weights(times, fn: Callable) -> np.ndarray:
    """``c_k = int fn(t) l_k(t) dt`` over ``[t_0, t_end]`` for the hat basis ``l_k``."""
    t = np.asarray(times, dtype=float)
    a, b = t[:-1], t[1:]
    half = 0.5 * (b - a)
    s = a[:, None] + half[:, None] * (_GAUSS_X[None, :] + 1.0)
    vals = fn(s) * _GAUSS_W[None, :] * half[:, None]
    lam = (s - a[:, None]) / (b - a)[:, None]
    right = np.sum(vals * lam, axis=1)
    left = np.sum(vals * (1.0 - lam), axis=1)
    c = np.zeros(len(t))
    c[:-1] += left
    c[1:] += right
    return c


def window_weights(times, lo, hi) -> np.ndarray:
    """Weights ``w_k`` with ``int_lo^hi q(t) dt = sum_k w_k q_k`` for the linear interpolant."""
    t = np.asarray(times, dtype=float)
    w = np.zeros(len(t))
    for k in range(len(t) - 1):
        a, b = max(t[k], lo), min(t[k + 1], hi)
        if b <= a:
            continue
        d = t[k + 1] - t[k]
        # integrals of the two hat pieces over [a, b]
        ra = (a - t[k]) / d
        rb = (b - t[k]) / d
        w[k + 1] += d * 0.5 * (rb ** 2 - ra ** 2)
        w[k] += (b - a) - d * 0.5 * (rb ** 2 - ra ** 2)
    return w


def _cumulative(times, per_time):
    return cumulative_trapezoid(per_time, times, initial=0.0)


# interpolation inequality

def interpolation_check(theta, ops: OperatorSet, p: float, q: float, tol_pos: float = 1e-8):
    r"""Both sides of the interpolation inequality for :math:`1 + \Theta`.

    Returns ``(lhs, dissipation, ratio)`` with ``lhs = int (1+theta)^q``,
    ``dissipation = int (1+theta)^(p-2) |grad theta|^2`` (edge values of
    ``theta`` are endpoint averages) and
    ``ratio = lhs / (dissipation**(N(q-1)/(2+N(p-1))) + 1)``.
    """
    N = ops.grid.dim
    if not (max(1.0 - 2.0 / N, 0.0) < p <= 2.0):
        raise ExponentOutOfRange(f"p = {p} outside ({max(1 - 2 / N, 0)}, 2]")
    theta = np.asarray(theta, dtype=float)
    scale = max(1.0, float(np.max(np.abs(theta))))
    if np.min(theta) < -tol_pos * scale:
        raise ValueError(f"theta below -tol_pos: min = {np.min(theta):.3e}")
    one = 1.0 + np.maximum(theta, -0.5)
    lhs = ops.integral(one ** q)
    g = ops.G @ theta
    w = ops.edge_average(one) ** (p - 2.0)
    diss = ops.edge_inner(w * g, g)
    expo = N * (q - 1.0) / (2.0 + N * (p - 1.0))
    if diss == 0.0:
        powered = 0.0 if expo > 0 else (1.0 if expo == 0 else np.inf)
    else:
        powered = diss ** expo
    return lhs, diss, lhs / (powered + 1.0)


# estimate monitors

def _check_exponents(N, r, q, lam):
    rmax = (N + 2) / (N + 1)
    qmax = (N + 2) / N
    if not 1 <= r < rmax:
        raise ExponentOutOfRange(f"r = {r} outside [1, {rmax:.6g}) for N = {N}")
    if not 1 <= q < qmax:
        raise ExponentOutOfRange(f"q = {q} outside [1, {qmax:.6g}) for N = {N}")
    if not lam > N + 2:
        raise ExponentOutOfRange(f"lambda = {lam} must exceed N + 2 = {N + 2}")


def estimate_monitors(traj, ops: OperatorSet | None = None, r: float = 1.2, q: float = 1.5,
                      lam: float | None = None, dictionary: SpatialDictionary | None = None):
    """Cumulative space-time quantities controlled uniformly in epsilon.

    Series (all start at 0 and are nondecreasing):

    ``grad_theta_r``     int_0^t int |grad theta|^r
    ``one_plus_theta_q`` int_0^t int (1 + theta)^q
    ``grad_v_sq``        int_0^t int |grad v|^2
    ``vt_dual_w22_sq``   int_0^t ||v_t||^2 in the dual of W^{2,2}_0 (backward differences)
    ``theta_t_pairing``  int_0^t of the dictionary lower bound for ||theta_t|| in (W^{1,lam})*
    """
    ops = ops or traj.ops
    N = ops.grid.dim
    lam = N + 3.0 if lam is None else lam
    _check_exponents(N, r, q, lam)
    if len(traj) == 0:
        raise EmptyTrajectory("trajectory has no snapshots")
    t = traj.times
    theta, v = traj.theta, traj.v
    params = {"r": r, "q": q, "lambda": lam}

    g_theta = (ops.G @ theta.T).T
    g_v = (ops.G @ v.T).T
    out = [
        MonitorSeries("grad_theta_r", t, _cumulative(t, np.abs(g_theta) ** r @ ops.edge_weights), params),
        MonitorSeries("one_plus_theta_q", t, _cumulative(t, (1.0 + theta) ** q @ ops.quad_weights), params),
        MonitorSeries("grad_v_sq", t, _cumulative(t, (g_v ** 2) @ ops.edge_weights), params),
    ]

    dictionary = dictionary or default_neumann_dictionary(ops)
    vt = np.zeros(len(t))
    th = np.zeros(len(t))
    for k in range(len(t) - 1):
        dt = t[k + 1] - t[k]
        vt[k + 1] = dt * dual_norm_w22((v[k + 1] - v[k]) / dt, ops) ** 2
        th[k + 1] = dt * dual_pairing_w1lambda((theta[k + 1] - theta[k]) / dt, dictionary, lam)
    out.append(MonitorSeries("vt_dual_w22_sq", t, np.cumsum(vt), params))
    out.append(MonitorSeries("theta_t_pairing", t, np.cumsum(th), params))
    return out


# Steklov averages

def _check_window(traj, h, t):
    if h <= 0:
        raise ValueError("h must be positive")
    if t > traj.times[-1] * (1 + 1e-12) + 1e-14:
        raise InsufficientHistory(f"history ends at {traj.times[-1]:.6g}, requested t = {t:.6g}")


def steklov_average(traj, h: float, t: float, field: str = "v", gradient: bool = False):
    r"""``(1/h) int_{t-h}^t`` of the hat-extended field.

    For ``s < 0`` the velocity is extended by its initial value and the
    displacement by ``u(0) + s v(0)``; theta is extended by ``theta(0)``.
    Positive times use the trapezoid rule over the stored snapshots.
    With ``gradient=True`` the edge gradient is averaged instead.
    """
    _check_window(traj, h, t)
    data = {"v": traj.v, "u": traj.u, "theta": traj.theta}[field]
    w = window_weights(traj.times, max(t - h, 0.0), t)
    if gradient:
        data = (traj.ops.G @ data.T).T
    avg = w @ data
    neg_lo, neg_hi = t - h, min(t, 0.0)
    if neg_hi > neg_lo:
        base = data[0]
        if field == "u":
            v0 = traj.v[0] if not gradient else traj.ops.G @ traj.v[0]
            avg = avg + (neg_hi - neg_lo) * base + 0.5 * (neg_hi ** 2 - neg_lo ** 2) * v0
        else:
            avg = avg + (neg_hi - neg_lo) * base
    return avg / h


def _stride(traj, h):
    dts = traj.snapshot_dt
    k = h / dts
    if abs(k - round(k)) > 1e-9 * max(1.0, k) or round(k) < 1:
        raise HNotMultipleOfDt(f"h = {h:.6g} is not a positive multiple of the snapshot step {dts:.6g}")
    return int(round(k))


def reconstruct_displacement(traj):
    """Hat-extended displacement at the snapshot times, accumulated from ``v`` by the trapezoid rule.

    Accumulation runs in extended precision so that difference quotients over
    short windows stay at rounding level.
    """
    t = traj.times
    v = traj.v.astype(np.longdouble)
    dt = np.diff(t).astype(np.longdouble)
    incr = (0.5 * (v[1:] + v[:-1])) * dt[:, None]
    u_hat = np.empty_like(v)
    u_hat[0] = traj.u[0]
    u_hat[1:] = u_hat[0] + np.cumsum(incr, axis=0)
    return u_hat


def steklov_identity_check(traj, h: float, ops: OperatorSet | None = None) -> float:
    r"""Max over snapshot times of ``|S_h grad v_hat - (grad u_hat(t) - grad u_hat(t-h)) / h|``.

    ``u_hat`` is :func:`reconstruct_displacement` for ``t >= 0`` and the
    linear extension ``u(0) + t v(0)`` before. The left side averages the
    gradient snapshots directly, the right side differentiates the
    displacement, so the two share only the time quadrature.
    """
    ops = ops or traj.ops
    k = _stride(traj, h)
    t = traj.times
    u_hat = reconstruct_displacement(traj)
    u0 = u_hat[0]
    v0 = traj.v[0].astype(np.longdouble)
    worst = 0.0
    for n in range(len(t)):
        lhs = steklov_average(traj, h, t[n], "v", gradient=True)
        back = u_hat[n - k] if n - k >= 0 else u0 + np.longdouble(t[n] - h) * v0
        quot = ((u_hat[n] - back) / np.longdouble(h)).astype(float)
        worst = max(worst, float(np.max(np.abs(lhs - ops.G @ quot))))
    return worst


def steklov_distance(traj, h: float, ops: OperatorSet | None = None) -> float:
    """Discrete ``L^2(Q_T)`` distance between ``S_h v_hat`` and ``v``."""
    ops = ops or traj.ops
    t = traj.times
    vals = np.array([ops.inner(d, d) for d in
                     (steklov_average(traj, h, tn, "v") - traj.v[n] for n, tn in enumerate(t))])
    return float(np.sqrt(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t))))


# test functions and weak residuals

def _smooth_step(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def _smooth_step_d(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos]) / s[pos] ** 2
    return out


@dataclass(frozen=True)
class TimeProfile:
    """C-infinity cutoff equal to 1 on ``[0, t_on]`` and 0 from ``t_off`` on."""

    t_on: float
    t_off: float

    def __post_init__(self):
        if not 0 <= self.t_on < self.t_off:
            raise ValueError("need 0 <= t_on < t_off")

    def _parts(self, t):
        s = (np.asarray(t, dtype=float) - self.t_on) / (self.t_off - self.t_on)
        a, b = _smooth_step(1.0 - s), _smooth_step(s)
        return s, a, b

    def __call__(self, t):
        _, a, b = self._parts(t)
        return a / (a + b)

    def derivative(self, t):
        s, a, b = self._parts(t)
        da, db = -_smooth_step_d(1.0 - s), _smooth_step_d(s)
        return (da * b - a * db) / (a + b) ** 2 / (self.t_off - self.t_on)


class TestFunction:
    """Finite sum of separable terms ``space(x) * profile(t)``.

    ``space`` is a callable of the coordinate arrays so the same function can
    be sampled on any grid; ``dirichlet`` marks momentum test functions that
    must vanish on the boundary.
    """

    __test__ = False

    def __init__(self, terms, name="phi", dirichlet=True):
        self.terms = [(float(c), s, p) for c, s, p in terms]
        self.name = name
        self.dirichlet = dirichlet

    @classmethod
    def separable(cls, space, profile, name="phi", dirichlet=True):
        return cls([(1.0, space, profile)], name, dirichlet)

    def __add__(self, other):
        return TestFunction(self.terms + other.terms, f"{self.name}+{other.name}",
                            self.dirichlet and other.dirichlet)

    def __rmul__(self, c):
        return TestFunction([(c * a, s, p) for a, s, p in self.terms], f"{c}*{self.name}", self.dirichlet)

    def sample(self, grid):
        coords = grid.coordinates()
        return [(c, np.asarray(s(*coords), dtype=float) * np.ones(grid.size), p) for c, s, p in self.terms]


def quartic_bump(center, radius):
    """Compactly supported tensor product of ``(1 - ((x - c)/r)^2)^2``."""
    center = np.atleast_1d(center)
    radius = np.atleast_1d(radius)

    def fn(*coords):
        out = np.ones_like(coords[0])
        for x, c, r in zip(coords, center, radius):
            z = (x - c) / r
            out = out * np.where(np.abs(z) < 1, (1 - z ** 2) ** 2, 0.0)
        return out
    return fn


def cosine_mode(modes, extents):
    def fn(*coords):
        out = np.ones_like(coords[0])
        for x, k, L in zip(coords, modes, extents):
            out = out * np.cos(k * np.pi * x / L)
        return out
    return fn


def momentum_dictionary(grid, t_end, size=8):
    """Bumps supported inside the domain times two cutoffs ending by ``0.9 t_end``."""
    L = np.asarray(grid.extents)
    dim = grid.dim
    spots = [(0.5, 0.4), (0.3, 0.25), (0.7, 0.25), (0.45, 0.3)]
    profiles = [TimeProfile(0.3 * t_end, 0.6 * t_end), TimeProfile(0.5 * t_end, 0.9 * t_end)]
    out = []
    for j, prof in enumerate(profiles):
        for c, r in spots:
            cc = np.full(dim, c) * L
            rr = np.full(dim, r) * L
            out.append(TestFunction.separable(quartic_bump(cc, rr), prof, f"bump{c}_{r}_p{j}", True))
    return out[:size]


def temperature_dictionary(grid, t_end, size=8):
    """Neumann-compatible cosine modes times two cutoffs ending by ``0.9 t_end``."""
    dim = grid.dim
    profiles = [TimeProfile(0.3 * t_end, 0.6 * t_end), TimeProfile(0.5 * t_end, 0.9 * t_end)]
    if dim == 1:
        modes = [(0,), (1,), (2,), (3,)]
    else:
        modes = [(0, 0), (1, 0), (0, 1), (1, 1)]
    out = []
    for j, prof in enumerate(profiles):
        for m in modes:
            out.append(TestFunction.separable(cosine_mode(m, grid.extents), prof,
                                              "cos" + "".join(map(str, m)) + f"_p{j}", False))
    return out[:size]


def _snapshot_terms(traj):
    """Per-snapshot edge fluxes and node sources shared by both residuals."""
    cache = traj._cache
    if "weak_terms" not in cache:
        ops = traj.ops
        coeff = traj.problem.coeff
        gv = (ops.G @ traj.v.T).T
        gu = (ops.G @ traj.u.T).T
        gth = (ops.G @ traj.theta.T).T
        gam = gamma_values(coeff, traj.theta)
        fv = f_values(coeff, traj.theta)
        gam_e = (ops.E @ gam.T).T * 0.5
        f_e = (ops.E @ fv.T).T * 0.5
        src = np.array([theta_source(ops, traj.v[k], gam[k], fv[k]) for k in range(len(traj))])
        cache["weak_terms"] = dict(gv=gv, gu=gu, gth=gth, visc_flux=gam_e * gv, f_e=f_e,
                                   visc_src=src[:, 1], coup_src=src[:, 2])
    return cache["weak_terms"]


def _check_phi(phi, traj, sampled, need_dirichlet):
    ops = traj.ops
    t_cut = traj.times[-1] - traj.cfg.dt
    for c, s, prof in sampled:
        if need_dirichlet:
            scale = max(1.0, float(np.max(np.abs(s))))
            if np.max(np.abs(s[ops.boundary])) > 1e-12 * scale:
                raise BadTestFunction(f"{phi.name}: momentum test function must vanish on the boundary")
        if prof.t_off > t_cut + 1e-12:
            raise BadTestFunction(f"{phi.name}: profile must vanish for t >= t_end - dt = {t_cut:.6g}")


def weak_residual_momentum(traj, phi: TestFunction, ops: OperatorSet | None = None, signed: bool = False):
    r"""Defect of the momentum weak identity for one test function.

    .. math::

        -\iint v \varphi_t - \int v_0 \varphi(\cdot, 0) + \iint \gamma(\Theta) \nabla v \cdot \nabla\varphi
        + a \iint \nabla u \cdot \nabla\varphi - \iint f(\Theta) \cdot \nabla\varphi

    with the unregularized coefficients and initial velocity.
    """
    ops = ops or traj.ops
    sampled = phi.sample(ops.grid)
    _check_phi(phi, traj, sampled, need_dirichlet=True)
    T = _snapshot_terms(traj)
    a = traj.problem.coeff.a
    v0 = traj.problem.data.v0
    W = ops.edge_weights
    total = 0.0
    for c, s, prof in sampled:
        if c == 0.0 or not np.any(s):
            continue
        gs = ops.G @ s
        cw = hat_weights(traj.times, prof)
        cd = hat_weights(traj.times, prof.derivative)
        vs = traj.v @ (ops.quad_weights * s)
        flux = (T["visc_flux"] + a * T["gu"] - T["f_e"]) @ (W * gs)
        r = -np.dot(cd, vs) - float(prof(0.0)) * ops.inner(v0, s) + np.dot(cw, flux)
        total += c * r
    return total if signed else abs(total)


def weak_residual_temperature(traj, phi: TestFunction, ops: OperatorSet | None = None, signed: bool = False):
    r"""Defect of the temperature weak identity for one test function.

    .. math::

        -\iint \Theta \varphi_t - \int \Theta_0 \varphi(\cdot, 0) + \iint \nabla\Theta \cdot \nabla\varphi
        - \iint \gamma(\Theta) |\nabla v|^2 \varphi + \iint f(\Theta) \cdot \nabla v \, \varphi

    The nonlinear sources use the same edge-to-node split as the solver.
    """
    ops = ops or traj.ops
    sampled = phi.sample(ops.grid)
    _check_phi(phi, traj, sampled, need_dirichlet=False)
    T = _snapshot_terms(traj)
    th0 = traj.problem.data.theta0
    M, W = ops.quad_weights, ops.edge_weights
    total = 0.0
    for c, s, prof in sampled:
        if c == 0.0 or not np.any(s):
            continue
        gs = ops.G @ s
        cw = hat_weights(traj.times, prof)
        cd = hat_weights(traj.times, prof.derivative)
        ths = traj.theta @ (M * s)
        per_t = T["gth"] @ (W * gs) - (T["visc_src"] - T["coup_src"]) @ (M * s)
        r = -np.dot(cd, ths) - float(prof(0.0)) * ops.inner(th0, s) + np.dot(cw, per_t)
        total += c * r
    return total if signed else abs(total)


def max_dictionary_residual(traj, kind: str, dictionary: Sequence[TestFunction] | None = None) -> float:
    t_end = traj.times[-1]
    if kind == "momentum":
        dictionary = dictionary or momentum_dictionary(traj.grid, t_end)
        return max(weak_residual_momentum(traj, phi) for phi in dictionary)
    dictionary = dictionary or temperature_dictionary(traj.grid, t_end)
    return max(weak_residual_temperature(traj, phi) for phi in dictionary)
