r"""
Linearly implicit Euler integration of the regularized system with an exact
energy ledger.

One step from :math:`(v^n, u^n, \Theta^n)` freezes :math:`\gamma^n = \gamma(\Theta^n)`
and :math:`f^n = f(\Theta^n)`, solves the coupled linear system

.. math::

    \frac{v^+ - v^n}{\Delta t} &= -\varepsilon \Delta^2 v^+ + \nabla\cdot(\gamma^n \nabla v^+)
        + a \Delta u^+ - \nabla\cdot f^n, \\
    \frac{u^+ - u^n}{\Delta t} &= \varepsilon \Delta u^+ + v^+,

and then the linear heat step

.. math::

    \frac{\Theta^+ - \Theta^n}{\Delta t} = \Delta \Theta^+ + S^+, \qquad
    S^+ \approx \gamma^n |\nabla v^+|^2 - f^n \cdot \nabla v^+.

Edge values of the coefficients are endpoint averages. The source is built
edge by edge so that :math:`\langle S^+, 1\rangle` equals exactly the work
term :math:`\langle \gamma^n \nabla v^+, \nabla v^+\rangle - \langle f^n, \nabla v^+\rangle`
that appears when the momentum equation is tested with :math:`v^+`.
The viscous part of each edge is split evenly between its endpoints; the
coupling part is split in proportion to the nodal values of :math:`f^n`, so a
node with :math:`\Theta = 0` (hence :math:`f = 0`) receives no coupling sink.

Testing the momentum equation with :math:`v^+` and substituting the
displacement equation for :math:`v^+` in the elastic term gives

.. math::

    E^+ - E^n + \Delta t\,\varepsilon \|\Delta v^+\|^2 + \Delta t\,\varepsilon a \|\Delta u^+\|^2
        + \tfrac12 \|v^+ - v^n\|^2 + \tfrac a2 \|\nabla(u^+ - u^n)\|^2 = 0,

.. math::

    E = \tfrac12 \langle v, v\rangle + \tfrac a2 \langle \nabla u, \nabla u\rangle + \langle \Theta, 1\rangle,

using :math:`2\langle p - q, p\rangle = |p|^2 - |q|^2 + |p - q|^2`, the
summation-by-parts identities of :mod:`thermovisc.operators`, and exact
conservation of the Neumann heat step. Each :class:`LedgerRow` stores all
terms; its residual measures only linear-solve and rounding error.

Positivity: the heat matrix ``M/dt + G^T W G`` is an M-matrix and, with
Young's inequality on each edge, the right-hand side at node ``i`` is at least
``theta_i / dt - N f_i**2 / (4 k_gamma)``. For couplings with
``f(xi)**2 <= C xi`` near zero this is nonnegative once ``dt <= 4 k_gamma / (N C)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import BlowupDetected, NonFiniteState, SolveFailure
from .model import CoefficientSpec, RegularizedProblem, f_values, gamma_values
from .operators import Grid, OperatorSet, backward_error, build_operators, matrix_inf_norm

REFACTOR_DRIFT = 1e-3
MAX_REFINEMENT = 30


@dataclass(frozen=True)
class State:
    t: float
    v: np.ndarray
    u: np.ndarray
    theta: np.ndarray


@dataclass(frozen=True)
class LedgerRow:
    step: int
    t: float
    energy: float
    energy_prev: float
    diss_bilap: float
    diss_lap_u: float
    num_diss_v: float
    num_diss_u: float
    residual: float
    theta_mass_change: float = 0.0
    theta_source: float = 0.0
    clipped_mass: float = 0.0
    theta_mass_prev: float = 0.0

    @property
    def mass_defect(self) -> float:
        """Defect of the heat-step mass budget relative to the mass scale."""
        scale = max(abs(self.theta_mass_prev), abs(self.theta_source), 1e-300)
        return abs(self.theta_mass_change - self.theta_source) / scale


@dataclass(frozen=True)
class RunConfig:
    epsilon: float
    dt: float
    t_end: float
    blowup_threshold: float = 1e6
    clip_theta: bool = False
    solver_tol: float = 1e-12
    snapshot_stride: int = 1

    def __post_init__(self):
        if not 0 < self.epsilon < 1:
            raise ValueError(f"epsilon must lie in (0, 1), got {self.epsilon}")
        if not 0 < self.dt <= self.t_end:
            raise ValueError(f"need 0 < dt <= t_end, got dt = {self.dt}, t_end = {self.t_end}")
        if self.snapshot_stride < 1:
            raise ValueError("snapshot_stride must be >= 1")

    @property
    def n_steps(self) -> int:
        return int(round(self.t_end / self.dt))


def energy(state: State, ops: OperatorSet, a: float) -> float:
    gu = ops.G @ state.u
    return 0.5 * ops.inner(state.v, state.v) + 0.5 * a * ops.edge_inner(gu, gu) + ops.integral(state.theta)


def theta_source(ops: OperatorSet, v, gamma_nodes, f_nodes):
    """Node heat source and its two parts for the edge-consistent split."""
    g = ops.G @ v
    gamma_e = ops.edge_average(gamma_nodes)
    viscous = ops.distribute(gamma_e * g * g)
    coupling = f_nodes * ops.distribute(g)
    return viscous - coupling, viscous, coupling


class Stepper:
    """Holds factorizations reused across the steps of one run."""

    def __init__(self, ops: OperatorSet, coeff: CoefficientSpec, cfg: RunConfig):
        self.ops = ops
        self.coeff = coeff
        self.cfg = cfg
        self.n_factorizations = 0
        dt, eps, a = cfg.dt, cfg.epsilon, coeff.a
        M = sp.diags(ops.M_int)
        S = ops.stiffness_int
        SMS = S @ sp.diags(1.0 / ops.M_int) @ S
        self._vv_const = (M / dt + eps * SMS).tocsr()
        self._vu = (a * S).tocsr()
        self._uv = (-a * M).tocsr()
        self._uu = (a * M / dt + eps * a * S).tocsr()
        self._heat = (sp.diags(ops.quad_weights) / dt + ops.stiffness).tocsc()
        self._heat_lu = spla.splu(self._heat)
        self._heat_norm = matrix_inf_norm(self._heat)
        self._lu = None
        self._lu_gamma = None

    def _matrix(self, gamma_e):
        ops = self.ops
        visc = ops.G_int.T @ sp.diags(ops.edge_weights * gamma_e) @ ops.G_int
        return sp.bmat([[self._vv_const + visc, self._vu], [self._uv, self._uu]], format="csc")

    def _solve_vu(self, gamma_e, b):
        A = self._matrix(gamma_e)
        tol = self.cfg.solver_tol
        if not np.any(b):
            return np.zeros_like(b)
        A_norm = matrix_inf_norm(A)
        stale = self._lu is None or np.max(np.abs(gamma_e - self._lu_gamma)) > REFACTOR_DRIFT
        for attempt in range(2):
            if stale:
                self._lu = spla.splu(A)
                self._lu_gamma = gamma_e.copy()
                self.n_factorizations += 1
            x = self._lu.solve(b)
            r = b - A @ x
            for _ in range(MAX_REFINEMENT):
                if backward_error(A_norm, x, b, r) <= tol:
                    return x
                x = x + self._lu.solve(r)
                r = b - A @ x
            if backward_error(A_norm, x, b, r) <= tol:
                return x
            stale = True
        raise SolveFailure(f"(v, u) solve backward error {backward_error(A_norm, x, b, r):.3e} exceeds {tol:.1e}")

    def step(self, state: State, index: int = 0):
        ops, coeff, cfg = self.ops, self.coeff, self.cfg
        dt, eps, a = cfg.dt, cfg.epsilon, coeff.a
        I = ops.interior
        n_i = I.size

        gamma_n = gamma_values(coeff, state.theta)
        f_n = f_values(coeff, state.theta)
        gamma_e = ops.edge_average(gamma_n)
        flux_e = ops.edge_average(f_n)

        rhs_v = ops.M_int * state.v[I] / dt + ops.G_int.T @ (ops.edge_weights * flux_e)
        rhs_u = a * ops.M_int * state.u[I] / dt
        x = self._solve_vu(gamma_e, np.concatenate([rhs_v, rhs_u]))

        v_new = np.zeros(ops.grid.size)
        u_new = np.zeros(ops.grid.size)
        v_new[I] = x[:n_i]
        u_new[I] = x[n_i:]

        source, _, _ = theta_source(ops, v_new, gamma_n, f_n)
        rhs_t = ops.quad_weights * (state.theta / dt + source)
        theta_new = self._heat_lu.solve(rhs_t)
        r = rhs_t - self._heat @ theta_new
        if backward_error(self._heat_norm, theta_new, rhs_t, r) > cfg.solver_tol:
            theta_new = theta_new + self._heat_lu.solve(r)
            r = rhs_t - self._heat @ theta_new
            err = backward_error(self._heat_norm, theta_new, rhs_t, r)
            if err > cfg.solver_tol:
                raise SolveFailure(f"heat solve backward error {err:.3e} exceeds {cfg.solver_tol:.1e}")

        clipped = 0.0
        if cfg.clip_theta and np.any(theta_new < 0):
            neg = np.minimum(theta_new, 0.0)
            clipped = -ops.integral(neg)
            theta_new = theta_new - neg

        for name, arr in (("v", v_new), ("u", u_new), ("theta", theta_new)):
            if not np.all(np.isfinite(arr)):
                raise NonFiniteState(f"{name} became non-finite at step {index + 1}")

        new = State((index + 1) * dt, v_new, u_new, theta_new)

        lv = ops.L_int @ v_new[I]
        lu_ = ops.L_int @ u_new[I]
        dv = v_new - state.v
        gdu = ops.G @ (u_new - state.u)
        diss_bilap = dt * eps * float(np.dot(ops.M_int * lv, lv))
        diss_lap_u = dt * eps * a * float(np.dot(ops.M_int * lu_, lu_))
        num_v = 0.5 * ops.inner(dv, dv)
        num_u = 0.5 * a * ops.edge_inner(gdu, gdu)
        e_prev = energy(state, ops, a)
        e_new = energy(new, ops, a)
        residual = e_new - e_prev + diss_bilap + diss_lap_u + num_v + num_u
        row = LedgerRow(
            step=index + 1, t=new.t, energy=e_new, energy_prev=e_prev,
            diss_bilap=diss_bilap, diss_lap_u=diss_lap_u, num_diss_v=num_v, num_diss_u=num_u,
            residual=residual,
            theta_mass_change=ops.integral(theta_new) - ops.integral(state.theta),
            theta_source=dt * ops.integral(source),
            clipped_mass=clipped,
            theta_mass_prev=ops.integral(state.theta),
        )
        return new, row


def step(state: State, cfg: RunConfig, ops: OperatorSet, coeff: CoefficientSpec):
    """Advance one step; returns ``(State, LedgerRow)``."""
    return Stepper(ops, coeff, cfg).step(state, index=int(round(state.t / cfg.dt)))


@dataclass
class GuardVerdict:
    fired: bool
    norms: dict
    name: str | None = None
    value: float | None = None


def blowup_guard(state: State, ops: OperatorSet, threshold: float) -> GuardVerdict:
    """Grid surrogates for the strong norms of the blow-up alternative.

    Max norms of ``u``, ``theta``, ``v`` and their edge gradients, plus
    ``max|lap v|``, stand in for the fractional Hoelder-type norms; they are
    a pragmatic proxy, not an equivalent norm.
    """
    lap_v = ops.lap_dirichlet @ state.v
    norms = {
        "max|u|": np.max(np.abs(state.u)),
        "max|grad u|": np.max(np.abs(ops.G @ state.u)),
        "max|theta|": np.max(np.abs(state.theta)),
        "max|grad theta|": np.max(np.abs(ops.G @ state.theta)),
        "max|v|": np.max(np.abs(state.v)),
        "max|grad v|": np.max(np.abs(ops.G @ state.v)),
        "max|lap v|": np.max(np.abs(lap_v)),
    }
    norms = {k: float(val) for k, val in norms.items()}
    for k, val in norms.items():
        if not val < threshold:
            return GuardVerdict(True, norms, k, val)
    return GuardVerdict(False, norms)


class Trajectory:
    """Snapshots of one run plus its ledger.

    ``v``, ``u``, ``theta`` are arrays of shape ``(n_snapshots, grid.size)``.
    """

    def __init__(self, problem: RegularizedProblem, cfg: RunConfig, ops: OperatorSet):
        self.problem = problem
        self.cfg = cfg
        self.ops = ops
        self.ledger: list[LedgerRow] = []
        self._times: list = []
        self._fields: dict = {"v": [], "u": [], "theta": []}
        self._cache: dict = {}
        self.completed = False
        self.n_factorizations = 0

    @property
    def grid(self) -> Grid:
        return self.ops.grid

    @property
    def dt(self) -> float:
        return self.cfg.dt

    @property
    def epsilon(self) -> float:
        return self.cfg.epsilon

    @property
    def coeff(self) -> CoefficientSpec:
        return self.problem.coeff_eps

    @property
    def snapshot_dt(self) -> float:
        return self.cfg.dt * self.cfg.snapshot_stride

    def record(self, state: State):
        self._times.append(state.t)
        for k in self._fields:
            self._fields[k].append(getattr(state, k))
        self._cache.clear()

    def _stack(self, key):
        if key not in self._cache:
            self._cache[key] = np.array(self._fields[key]) if key != "times" else np.array(self._times)
        return self._cache[key]

    @property
    def times(self):
        return self._stack("times")

    @property
    def v(self):
        return self._stack("v")

    @property
    def u(self):
        return self._stack("u")

    @property
    def theta(self):
        return self._stack("theta")

    def state(self, k) -> State:
        return State(self._times[k], self._fields["v"][k], self._fields["u"][k], self._fields["theta"][k])

    def __len__(self):
        return len(self._times)

    @property
    def initial_energy(self) -> float:
        return energy(self.state(0), self.ops, self.coeff.a)

    @classmethod
    def from_arrays(cls, times, v, u, theta, ops, problem=None, cfg=None):
        """Synthetic trajectory for checks that only need the stored fields."""
        times = np.asarray(times, dtype=float)
        if cfg is None:
            dt = float(times[1] - times[0]) if len(times) > 1 else 1.0
            cfg = RunConfig(epsilon=0.5, dt=dt, t_end=max(float(times[-1]), dt))
        if problem is None:
            from .model import InitialData, CoefficientSpec as _CS
            d = InitialData(np.asarray(u[0]), np.asarray(v[0]), np.asarray(theta[0]))
            problem = RegularizedProblem(cfg.epsilon, d, d, _CS(), _CS(), 0)
        traj = cls(problem, cfg, ops)
        for k, t in enumerate(times):
            traj.record(State(float(t), np.asarray(v[k], float), np.asarray(u[k], float), np.asarray(theta[k], float)))
        traj.completed = True
        return traj


def run(problem: RegularizedProblem, cfg: RunConfig, grid: Grid | None = None,
        ops: OperatorSet | None = None) -> Trajectory:
    """Integrate from ``t = 0`` to ``cfg.t_end``.

    Every ledger row is kept; states are stored every ``cfg.snapshot_stride``
    steps (plus the initial and final state). Raises BlowupDetected, with the
    partial trajectory attached as ``exc.trajectory``, if the guard fires.
    """
    if ops is None:
        ops = build_operators(grid)
    coeff = problem.coeff_eps
    d = problem.data_eps
    state = State(0.0, d.v0.astype(float).copy(), d.u0.astype(float).copy(), d.theta0.astype(float).copy())
    traj = Trajectory(problem, cfg, ops)
    traj.record(state)
    stepper = Stepper(ops, coeff, cfg)
    n = cfg.n_steps
    for k in range(n):
        state, row = stepper.step(state, k)
        traj.ledger.append(row)
        verdict = blowup_guard(state, ops, cfg.blowup_threshold)
        if verdict.fired:
            traj.record(state)
            traj.n_factorizations = stepper.n_factorizations
            exc = BlowupDetected(verdict.name, verdict.value, state.t)
            exc.trajectory = traj
            raise exc
        if (k + 1) % cfg.snapshot_stride == 0 or k + 1 == n:
            traj.record(state)
    traj.completed = True
    traj.n_factorizations = stepper.n_factorizations
    return traj
