import time
from pathlib import Path

import pytest

from thermovisc import (CoefficientSpec, Grid, RunConfig, build_operators, make_initial_data, regularize, run)
from thermovisc.sweep import acceptance_refinement_plan, run_sweep

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"

BUMP = dict(u_amp=0.5, v_amp=1.0, theta_base=0.0, theta_amp=1.0)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def report(number, ok, detail):
    """Print and remember one pass/fail line for an acceptance criterion."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'} {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def timed_run(grid, eps, dt, t_end, coeff=None, preset="sine-bump", params=BUMP, **cfg_kw):
    coeff = coeff or CoefficientSpec()
    t0 = time.perf_counter()
    ops = build_operators(grid)
    data = make_initial_data(grid, preset, **params)
    problem = regularize(data, coeff, eps, ops)
    traj = run(problem, RunConfig(epsilon=eps, dt=dt, t_end=t_end, **cfg_kw), ops=ops)
    return traj, time.perf_counter() - t0


@pytest.fixture(scope="session")
def reference_run():
    """1D, 65 nodes, dt = 1e-3, T = 1, eps = 1e-2 with the default coefficients."""
    return timed_run(Grid((1.0,), (65,)), 1e-2, 1e-3, 1.0)


@pytest.fixture(scope="session")
def refinement_report():
    t0 = time.perf_counter()
    rep = run_sweep(acceptance_refinement_plan())
    return rep, time.perf_counter() - t0


@pytest.fixture(scope="session")
def acceptance_sweep_dirs(tmp_path_factory):
    """Two independent CLI sweeps of the shipped acceptance config."""
    from thermovisc.cli import cmd_sweep

    out = []
    for k in range(2):
        d = tmp_path_factory.mktemp(f"eps_sweep_{k}")
        code = cmd_sweep(str(CONFIGS / "acceptance_sweep.cfg"), out_dir=str(d), quiet=True)
        out.append((code, d))
    return out
