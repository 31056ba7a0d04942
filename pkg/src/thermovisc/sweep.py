"""
Epsilon sweeps and joint (h, dt, epsilon) refinement studies.

Runs inside a sweep are independent and execute on a thread pool capped by
``THERMOVISC_THREADS``; results are gathered in plan order, so reports do not
depend on scheduling.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .diagnostics import estimate_monitors, max_dictionary_residual
from .errors import MismatchedGrids, NonNestedGrids
from .model import (DEFAULT_MOLLIFY_STEPS, CoefficientSpec, gamma_values,
                    make_initial_data, regularize)
from .operators import Grid, build_operators
from .solver import RunConfig, run

MONITOR_NAMES = ("grad_theta_r", "one_plus_theta_q", "grad_v_sq", "vt_dual_w22_sq", "theta_t_pairing")
UNIFORM_MONITORS = ("grad_theta_r", "one_plus_theta_q", "grad_v_sq", "vt_dual_w22_sq")


@dataclass
class SweepPlan:
    eps_list: list
    grid_list: list
    dt_list: list
    t_end: float
    kind: str = "eps"
    coeff: CoefficientSpec = field(default_factory=CoefficientSpec)
    preset: str = "sine-bump"
    preset_params: dict = field(default_factory=dict)
    r: float = 1.2
    q: float = 1.5
    lam: float | None = None
    common_time_grid: np.ndarray | None = None
    mollify_m0: int = DEFAULT_MOLLIFY_STEPS
    blowup_threshold: float = 1e6
    threads: int | None = None

    def __post_init__(self):
        self.eps_list = [float(e) for e in self.eps_list]
        if any(b >= a for a, b in zip(self.eps_list, self.eps_list[1:])):
            raise ValueError("eps_list must be strictly decreasing")
        if any(not 0 < e < 1 for e in self.eps_list):
            raise ValueError("every epsilon must lie in (0, 1)")


@dataclass
class SweepReport:
    kind: str
    per_run: list = field(default_factory=list)
    cauchy_table: list = field(default_factory=list)
    orders: dict = field(default_factory=dict)
    uniform_ratios: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)


def _threads(plan) -> int:
    if plan.threads:
        return max(1, int(plan.threads))
    env = os.environ.get("THERMOVISC_THREADS")
    return max(1, int(env)) if env else 1


def _map(fn, items, threads):
    if threads == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def _single_run(plan, grid, ops, dt, eps):
    data = make_initial_data(grid, plan.preset, **plan.preset_params)
    problem = regularize(data, plan.coeff, eps, ops, m0=plan.mollify_m0)
    cfg = RunConfig(epsilon=eps, dt=dt, t_end=plan.t_end, blowup_threshold=plan.blowup_threshold)
    return run(problem, cfg, ops=ops)


def interpolate_in_time(traj, times):
    """Fields at ``times`` by linear interpolation between snapshots: ``(v, u, theta)``."""
    t = traj.times
    idx = np.clip(np.searchsorted(t, times, side="right") - 1, 0, len(t) - 2)
    lam = ((np.asarray(times) - t[idx]) / (t[idx + 1] - t[idx]))[:, None]
    out = []
    for arr in (traj.v, traj.u, traj.theta):
        out.append((1 - lam) * arr[idx] + lam * arr[idx + 1])
    return out


def _trap(vals, t):
    return float(np.sum(0.5 * (vals[1:] + vals[:-1]) * np.diff(t))) if len(t) > 1 else 0.0


def cauchy_distances(ta, tb, times, q=1.5):
    """Distances between two runs on a shared snapshot grid."""
    ops = ta.ops
    va, ua, tha = interpolate_in_time(ta, times)
    vb, ub, thb = interpolate_in_time(tb, times)
    dv = math.sqrt(_trap(np.array([ops.inner(x, x) for x in va - vb]), times))
    du = max(ops.norm(x) for x in ua - ub)
    dth = _trap(np.array([ops.integral(np.abs(x) ** q) for x in tha - thb]), times) ** (1.0 / q)
    flux = []
    for k in range(len(times)):
        fa = np.sqrt(ops.edge_average(gamma_values(ta.coeff, tha[k]))) * (ops.G @ va[k])
        fb = np.sqrt(ops.edge_average(gamma_values(tb.coeff, thb[k]))) * (ops.G @ vb[k])
        d = fa - fb
        flux.append(ops.edge_inner(d, d))
    dflux = math.sqrt(_trap(np.array(flux), times))
    return {"d_v": dv, "d_u": du, "d_theta": dth, "d_flux": dflux}


def run_eps_sweep(plan: SweepPlan) -> SweepReport:
    if len(plan.grid_list) != 1 or len(plan.dt_list) != 1:
        raise MismatchedGrids("an epsilon sweep needs exactly one grid and one dt shared by all runs")
    grid, dt = plan.grid_list[0], float(plan.dt_list[0])
    ops = build_operators(grid)
    trajs = _map(lambda e: _single_run(plan, grid, ops, dt, e), plan.eps_list, _threads(plan))

    rep = SweepReport("eps")
    finals = {}
    for eps, tr in zip(plan.eps_list, trajs):
        mons = estimate_monitors(tr, ops, r=plan.r, q=plan.q, lam=plan.lam)
        row = {"eps": eps, "h": grid.h, "dt": dt}
        for m in mons:
            row[m.name] = m.final
            finals.setdefault(m.name, []).append(m.final)
        last = tr.state(len(tr) - 1)
        row["energy_T"] = tr.ledger[-1].energy
        row["max_ledger_residual"] = max(abs(r.residual) for r in tr.ledger)
        row["min_theta"] = float(np.min(tr.theta))
        row["max_theta"] = float(np.max(last.theta))
        rep.per_run.append(row)
    rep.uniform_ratios = {k: (max(v) / min(v) if min(v) > 0 else (1.0 if max(v) == 0 else math.inf))
                          for k, v in finals.items()}

    times = plan.common_time_grid if plan.common_time_grid is not None else trajs[0].times
    times = np.asarray(times, dtype=float)
    for k in range(len(trajs) - 1):
        d = cauchy_distances(trajs[k], trajs[k + 1], times, plan.q)
        rep.cauchy_table.append({"eps_hi": plan.eps_list[k], "eps_lo": plan.eps_list[k + 1], **d})
    return rep


def fit_order(hs, values):
    """Least-squares slope of ``log(values)`` against ``log(hs)``; ``(nan, reason)`` if degenerate."""
    hs = np.asarray(hs, dtype=float)
    values = np.asarray(values, dtype=float)
    if len(hs) < 2:
        return math.nan, "need at least two levels"
    if np.any(values <= 0) or np.any(hs <= 0):
        return math.nan, "nonpositive data cannot be fitted on a log scale"
    x = np.log(hs)
    if np.ptp(x) < 1e-12:
        return math.nan, "all levels share the same h; slope undefined"
    slope = np.polyfit(x, np.log(values), 1)[0]
    return float(slope), ""


def check_nested(grids):
    for g in grids:
        for n in g.nodes:
            m = n - 1
            if m < 1 or m & (m - 1):
                raise NonNestedGrids(f"node counts must be 2^k + 1, got {g.nodes}")
    for a, b in zip(grids, grids[1:]):
        if a.extents != b.extents or any(nb != 2 * (na - 1) + 1 for na, nb in zip(a.nodes, b.nodes)):
            raise NonNestedGrids(f"grid {b.nodes} is not the uniform refinement of {a.nodes}")


def run_refinement_sweep(plan: SweepPlan) -> SweepReport:
    """Weak-residual decay under joint refinement of ``(h, dt, epsilon)``."""
    grids, dts, epss = plan.grid_list, plan.dt_list, plan.eps_list
    if not (len(grids) == len(dts) == len(epss)):
        raise MismatchedGrids("refinement plan needs one grid, dt and epsilon per level")
    check_nested(grids)

    def level(args):
        g, dt, eps = args
        tr = _single_run(plan, g, build_operators(g), float(dt), eps)
        return tr, max_dictionary_residual(tr, "momentum"), max_dictionary_residual(tr, "temperature")

    results = _map(level, list(zip(grids, dts, epss)), _threads(plan))
    rep = SweepReport("refinement")
    hs, rm, rt = [], [], []
    for (g, dt, eps), (tr, a, b) in zip(zip(grids, dts, epss), results):
        rep.per_run.append({"eps": eps, "h": g.h, "dt": float(dt), "nodes": "x".join(map(str, g.nodes)),
                            "max_res_momentum": a, "max_res_temperature": b,
                            "max_ledger_residual": max(abs(r.residual) for r in tr.ledger)})
        hs.append(g.h)
        rm.append(a)
        rt.append(b)
    for name, vals in (("momentum", rm), ("temperature", rt)):
        order, note = fit_order(hs, vals)
        rep.orders[name] = order
        if note:
            rep.notes.append(f"{name}: {note}")
    return rep


def run_sweep(plan: SweepPlan) -> SweepReport:
    if plan.kind == "eps":
        return run_eps_sweep(plan)
    if plan.kind == "refinement":
        return run_refinement_sweep(plan)
    raise ValueError(f"unknown sweep kind {plan.kind!r}")


def acceptance_eps_plan(**overrides) -> SweepPlan:
    """Two-dimensional five-point epsilon sweep on ``[0, 2]^2``."""
    kw = dict(eps_list=[1e-1, 3e-2, 1e-2, 3e-3, 1e-3], grid_list=[Grid((2.0, 2.0), (33, 33))],
              dt_list=[1e-3], t_end=0.5, kind="eps",
              preset_params=dict(u_amp=0.5, v_amp=1.0, theta_base=0.0, theta_amp=1.0))
    kw.update(overrides)
    return SweepPlan(**kw)


def acceptance_refinement_plan(**overrides) -> SweepPlan:
    """Three nested 1D levels, 33 to 129 nodes, with dt and epsilon halved alongside h."""
    g0 = Grid((1.0,), (33,))
    kw = dict(eps_list=[2e-2, 1e-2, 5e-3], grid_list=[g0, g0.refine(), g0.refine().refine()],
              dt_list=[4e-3, 2e-3, 1e-3], t_end=0.5, kind="refinement",
              preset_params=dict(u_amp=0.5, v_amp=1.0, theta_base=0.0, theta_amp=1.0))
    kw.update(overrides)
    return SweepPlan(**kw)
