"""The twelve acceptance criteria, one test each, printing one PASS/FAIL line apiece."""

import math

import numpy as np

from conftest import CONFIGS, report, timed_run
from oracles import dense_step_1d, w22_dual_by_eigensolve
from thermovisc import (CoefficientSpec, Grid, RunConfig, State, blowup_guard, build_operators, dual_norm_w22,
                        step, steklov_distance, steklov_identity_check)
from thermovisc.config import load_config
from thermovisc.persistence import read_csv
from thermovisc.sweep import MONITOR_NAMES, UNIFORM_MONITORS, acceptance_eps_plan


def test_criterion_01_exact_ledger(reference_run):
    traj, elapsed = reference_run
    e0 = traj.initial_energy
    worst = max(abs(r.residual) for r in traj.ledger)
    bound = 1e-10 * max(e0, 1.0)
    ok = worst <= bound and elapsed < 5.0 and len(traj.ledger) == 1000
    report(1, ok, f"max |residual| = {worst:.3e} (bound {bound:.1e}), runtime {elapsed:.2f} s (< 5 s)")
    assert ok


def test_criterion_02_monotone_energy_and_mass(reference_run):
    traj, _ = reference_run
    energies = [traj.initial_energy] + [r.energy for r in traj.ledger]
    increases = max(b - a for a, b in zip(energies, energies[1:]))
    defect = max(r.mass_defect for r in traj.ledger)
    ok = increases <= 0.0 and defect <= 1e-12
    report(2, ok, f"largest step change of E = {increases:.3e} (<= 0), max relative mass defect = {defect:.3e}")
    assert ok


def _violation(traj):
    th0 = traj.theta[0]
    return max(0.0, -float(np.min(traj.theta))), 1e-8 * max(1.0, float(np.max(th0)))


def test_criterion_03_positivity(reference_run):
    parts = []
    ok = True
    traj1, _ = reference_run
    traj2, _ = timed_run(Grid((1.0, 1.0), (33, 33)), 1e-2, 1e-3, 0.5)
    for label, traj, grid, T in (("1D", traj1, Grid((1.0,), (65,)), 1.0),
                                 ("2D", traj2, Grid((1.0, 1.0), (33, 33)), 0.5)):
        viol, tol = _violation(traj)
        ok &= viol <= tol
        text = f"{label} min theta = {np.min(traj.theta):.3e}"
        if viol > 0:
            half, _ = timed_run(grid, 1e-2, 0.5 * traj.dt, T)
            v_half, _ = _violation(half)
            ok &= v_half <= 0.5 * viol
            text += f", violation {viol:.2e} -> {v_half:.2e} under dt halving"
        parts.append(text)
    report(3, ok, "; ".join(parts))
    assert ok


def test_criterion_04_long_run_no_blowup():
    traj, elapsed = timed_run(Grid((1.0,), (65,)), 1e-2, 1e-3, 10.0, blowup_threshold=1e6)
    peak = max(max(blowup_guard(traj.state(k), traj.ops, 1e6).norms.values()) for k in range(0, len(traj), 50))
    ok = traj.completed and len(traj.ledger) == 10000 and elapsed < 60.0
    report(4, ok, f"T = 10 completed in {elapsed:.1f} s (< 60 s), largest guarded norm {peak:.3g} < 1e6")
    assert ok


def _sweep_tables(dirs):
    code, d = dirs[0]
    assert code == 0
    ratios = {r["monitor"]: float(r["max_over_min"]) for r in read_csv(d / "uniform_ratios.csv")}
    cauchy = read_csv(d / "cauchy_table.csv")
    return ratios, cauchy


def test_acceptance_config_matches_plan():
    plan = load_config(CONFIGS / "acceptance_sweep.cfg").sweep
    ref = acceptance_eps_plan()
    assert plan.eps_list == ref.eps_list and plan.t_end == ref.t_end and plan.dt_list == ref.dt_list
    assert plan.grid_list == ref.grid_list and plan.preset_params == ref.preset_params
    assert (plan.r, plan.q) == (1.2, 1.5) and plan.kind == "eps"


def test_criterion_05_eps_uniform_monitors(acceptance_sweep_dirs):
    ratios, _ = _sweep_tables(acceptance_sweep_dirs)
    worst = max(ratios[m] for m in UNIFORM_MONITORS)
    ok = worst <= 2.0 and set(MONITOR_NAMES) <= set(ratios)
    detail = ", ".join(f"{m} {ratios[m]:.3f}" for m in UNIFORM_MONITORS)
    report(5, ok, f"max/min across eps: {detail} (all <= 2)")
    assert ok


def test_criterion_06_dual_norm_monitor(acceptance_sweep_dirs):
    ratios, _ = _sweep_tables(acceptance_sweep_dirs)
    ratio = ratios["vt_dual_w22_sq"]

    ops = build_operators(Grid((1.0,), (5,)))
    g = np.zeros(5)
    g[2] = 1.0
    zero = dual_norm_w22(np.zeros(5), ops)
    val = dual_norm_w22(g, ops)
    homog = abs(dual_norm_w22(2 * g, ops) - 2 * val)
    oracle = abs(val - w22_dual_by_eigensolve(g, 5))
    ok = ratio <= 2.0 and zero == 0.0 and homog <= 1e-10 and oracle <= 1e-10
    report(6, ok, f"vt dual-norm max/min {ratio:.3f}; unit checks: zero {zero}, "
                  f"homogeneity {homog:.1e}, dense oracle {oracle:.1e}")
    assert ok


def test_criterion_07_steklov(reference_run):
    traj, _ = reference_run
    hs = [2 * traj.dt, 4 * traj.dt, 8 * traj.dt]
    res = [steklov_identity_check(traj, h) for h in hs]
    dist = [steklov_distance(traj, h) for h in hs]
    ok = max(res) <= 1e-12 and dist[0] < dist[1] < dist[2]
    report(7, ok, f"identity residuals {', '.join(f'{r:.1e}' for r in res)}; "
                  f"S_h distances {', '.join(f'{d:.3e}' for d in dist)} increasing in h")
    assert ok


def test_criterion_08_strong_convergence(acceptance_sweep_dirs):
    _, cauchy = _sweep_tables(acceptance_sweep_dirs)
    ok = len(cauchy) == 4
    parts = []
    for col in ("d_flux", "d_v", "d_theta"):
        vals = [float(r[col]) for r in cauchy]
        ok &= all(b < a for a, b in zip(vals, vals[1:]))
        parts.append(f"{col} " + " > ".join(f"{x:.2e}" for x in vals))
    report(8, ok, "; ".join(parts))
    assert ok


def test_criterion_09_weak_residual_orders(refinement_report):
    rep, elapsed = refinement_report
    rm = [r["max_res_momentum"] for r in rep.per_run]
    rt = [r["max_res_temperature"] for r in rep.per_run]
    dec = all(b < a for a, b in zip(rm, rm[1:])) and all(b < a for a, b in zip(rt, rt[1:]))
    om, ot = rep.orders["momentum"], rep.orders["temperature"]
    ok = dec and om >= 0.8 and ot >= 0.8 and elapsed < 300
    report(9, ok, f"fitted orders momentum {om:.3f}, temperature {ot:.3f} (>= 0.8), runtime {elapsed:.1f} s")
    assert ok


def _random_fields(rng, n, k):
    return [rng.standard_normal(n) for _ in range(k)]


def test_criterion_10_operator_layer():
    rng = np.random.default_rng(20261014)
    worst = {"sbp": 0.0, "cons": 0.0, "sym": 0.0}
    min_quad = math.inf
    for grid in (Grid((1.0,), (33,)), Grid((1.0, 1.5), (17, 21))):
        ops = build_operators(grid)
        bnd = ops.boundary
        for _ in range(100):
            phi, psi = _random_fields(rng, grid.size, 2)
            phi[bnd] = psi[bnd] = 0.0
            g1, g2 = ops.grad(phi), ops.grad(psi)
            lhs = ops.inner(ops.lap_d(phi), psi)
            rhs = -ops.edge_inner(g1, g2)
            scale = math.sqrt(ops.edge_inner(g1, g1) * ops.edge_inner(g2, g2))
            worst["sbp"] = max(worst["sbp"], abs(lhs - rhs) / scale)
            chi = rng.standard_normal(grid.size)
            ln = ops.lap_n(chi)
            worst["cons"] = max(worst["cons"], abs(ops.integral(ln)) / ops.integral(np.abs(ln)))
            Bphi, Bpsi = ops.bilap(phi), ops.bilap(psi)
            scale = max(ops.norm(Bphi) * ops.norm(psi), ops.norm(phi) * ops.norm(Bpsi))
            worst["sym"] = max(worst["sym"], abs(ops.inner(Bphi, psi) - ops.inner(phi, Bpsi)) / scale)
            quad = ops.inner(Bphi, phi)
            ld = ops.lap_d(phi)
            worst["sym"] = max(worst["sym"], abs(quad - ops.inner(ld, ld)) / ops.inner(ld, ld))
            min_quad = min(min_quad, quad)

    errs, hs = [], []
    for n in (17, 33, 65, 129):
        grid = Grid((1.0,), (n,))
        ops = build_operators(grid)
        x = grid.coordinates()[0]
        exact = np.sin(np.pi * x) * np.exp(x)
        lap = np.exp(x) * (2 * np.pi * np.cos(np.pi * x) + (1 - np.pi ** 2) * np.sin(np.pi * x))
        err = ops.lap_d(exact) - lap
        err[ops.boundary] = 0.0
        errs.append(np.max(np.abs(err)))
        hs.append(grid.h)
    order = np.polyfit(np.log(hs), np.log(errs), 1)[0]
    ok = max(worst.values()) <= 1e-13 and min_quad >= 0 and abs(order - 2.0) <= 0.1
    report(10, ok, f"SBP {worst['sbp']:.1e}, conservation {worst['cons']:.1e}, bilaplacian symmetry "
                   f"{worst['sym']:.1e} (200 pairs), manufactured order {order:.3f}")
    assert ok


def test_criterion_11_step_oracle():
    rng = np.random.default_rng(7)
    grid = Grid((1.0,), (9,))
    ops = build_operators(grid)
    coeff = CoefficientSpec()
    v = rng.uniform(-1, 1, 9)
    u = rng.uniform(-1, 1, 9)
    v[[0, -1]] = u[[0, -1]] = 0.0
    th = rng.uniform(0, 2, 9)
    cfg = RunConfig(epsilon=0.05, dt=1e-3, t_end=1e-3)
    new, _ = step(State(0.0, v, u, th), cfg, ops, coeff)
    ov, ou, oth = dense_step_1d(v, u, th, grid.h, cfg.dt, cfg.epsilon, coeff.a,
                                lambda x: 1.0 + 1.0 / (1.0 + x), lambda x: np.sqrt(1.0 + x) - 1.0)
    diff = max(np.max(np.abs(new.v - ov)), np.max(np.abs(new.u - ou)), np.max(np.abs(new.theta - oth)))
    ok = diff <= 1e-10
    report(11, ok, f"max field difference vs dense oracle {diff:.2e} (<= 1e-10)")
    assert ok


def test_criterion_12_determinism(acceptance_sweep_dirs):
    (c1, d1), (c2, d2) = acceptance_sweep_dirs
    names = sorted(p.name for p in d1.glob("*.csv"))
    same = names == sorted(p.name for p in d2.glob("*.csv")) and all(
        (d1 / n).read_bytes() == (d2 / n).read_bytes() for n in names)
    ok = c1 == c2 == 0 and same and "cauchy_table.csv" in names and "sweep_report.csv" in names
    report(12, ok, f"{len(names)} CSV files bit-identical across two sweeps: {', '.join(names)}")
    assert ok
