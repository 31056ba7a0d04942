"""
Command-line entry points: ``thermovisc run|sweep|check <config>``.

Exit codes: 0 success, 1 configuration or input error, 2 blow-up guard fired
(``run``), 3 a sub-run of a sweep failed (``sweep``).
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import Config, load_config
from .diagnostics import estimate_monitors
from .errors import (BlowupDetected, ConfigError, InvalidSpec, MismatchedGrids, NonNestedGrids,
                     ThermoviscError)
from .model import make_initial_data, regularize, validate_spec
from .operators import build_operators
from .persistence import write_csv, write_ledger, write_monitor, write_snapshot
from .solver import run
from .sweep import MONITOR_NAMES, run_sweep

CAUCHY_HEADER = ("eps_hi", "eps_lo", "d_v", "d_u", "d_theta", "d_flux")


class _Out:
    def __init__(self, quiet):
        self.quiet = quiet

    def info(self, msg):
        if not self.quiet:
            print(msg)

    @staticmethod
    def err(msg):
        print(f"thermovisc: {msg}", file=sys.stderr)


def _load(path, out, seed=None):
    try:
        cfg = load_config(path)
    except ConfigError as exc:
        for ln, msg in exc.errors:
            out.err(f"{path}:{ln}: {msg}" if ln else msg)
        return None
    if seed is not None:
        cfg.preset_params = {**cfg.preset_params, "seed": seed}
        if cfg.sweep is not None:
            cfg.sweep.preset_params = cfg.preset_params
    return cfg


def _out_dir(cfg: Config, override):
    d = Path(override) if override else Path(cfg.out_dir)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _validate(cfg: Config, out) -> bool:
    try:
        validate_spec(cfg.coeff, cfg.grid.dim)
    except InvalidSpec as exc:
        out.err(f"{type(exc).__name__}: {exc}")
        return False
    return True


def _write_snapshots(traj, cfg: Config, out_dir: Path):
    snap = out_dir / "snapshots"
    snap.mkdir(exist_ok=True)
    nodes = traj.grid.nodes
    last = len(traj) - 1
    for k in range(len(traj)):
        step = int(round(traj.times[k] / traj.dt))
        keep = k in (0, last) or (cfg.snapshot_every > 0 and step % cfg.snapshot_every == 0)
        if not keep:
            continue
        s = traj.state(k)
        for name in ("v", "u", "theta"):
            write_snapshot(snap / f"{name}_{step:07d}.f64", nodes, s.t, getattr(s, name))


def cmd_run(path, out_dir=None, seed=None, quiet=False) -> int:
    out = _Out(quiet)
    cfg = _load(path, out, seed)
    if cfg is None or not _validate(cfg, out):
        return 1
    try:
        ops = build_operators(cfg.grid)
        data = make_initial_data(cfg.grid, cfg.preset, **cfg.preset_params)
        problem = regularize(data, cfg.coeff, cfg.run.epsilon, ops, m0=cfg.mollify_m0)
    except (ThermoviscError, ValueError, TypeError) as exc:
        out.err(f"{type(exc).__name__}: {exc}")
        return 1
    d = _out_dir(cfg, out_dir)
    code = 0
    try:
        traj = run(problem, cfg.run, ops=ops)
    except BlowupDetected as exc:
        out.err(f"BlowupDetected: {exc}")
        traj = exc.trajectory
        code = 2
    except ThermoviscError as exc:
        out.err(f"{type(exc).__name__}: {exc}")
        return 3
    write_ledger(d / "ledger.csv", traj)
    _write_snapshots(traj, cfg, d)
    if code == 0:
        mon = d / "monitors"
        mon.mkdir(exist_ok=True)
        m = cfg.monitors
        for series in estimate_monitors(traj, ops, r=m["r"], q=m["q"], lam=m["lam"]):
            write_monitor(mon / f"{series.name}.csv", series)
        worst = max((abs(r.residual) for r in traj.ledger), default=0.0)
        out.info(f"run complete: {len(traj.ledger)} steps, E(T) = {traj.ledger[-1].energy:.6g}, "
                 f"max |ledger residual| = {worst:.3e}; output in {d}")
    return code


def cmd_sweep(path, out_dir=None, seed=None, quiet=False) -> int:
    out = _Out(quiet)
    cfg = _load(path, out, seed)
    if cfg is None:
        return 1
    if cfg.sweep is None:
        out.err(f"{path}: no [sweep] section")
        return 1
    if not _validate(cfg, out):
        return 1
    try:
        rep = run_sweep(cfg.sweep)
    except (MismatchedGrids, NonNestedGrids) as exc:
        out.err(f"{type(exc).__name__}: {exc}")
        return 1
    except ThermoviscError as exc:
        out.err(f"sub-run failed: {type(exc).__name__}: {exc}")
        return 3
    d = _out_dir(cfg, out_dir)
    if rep.kind == "eps":
        header = ["eps", "h", "dt", *MONITOR_NAMES, "energy_T", "max_ledger_residual", "min_theta", "max_theta"]
    else:
        header = ["eps", "h", "dt", "nodes", "max_res_momentum", "max_res_temperature", "max_ledger_residual"]
    write_csv(d / "sweep_report.csv", header, rep.per_run)
    write_csv(d / "cauchy_table.csv", CAUCHY_HEADER, rep.cauchy_table)
    if rep.kind == "eps":
        write_csv(d / "uniform_ratios.csv", ("monitor", "max_over_min"), sorted(rep.uniform_ratios.items()))
    else:
        write_csv(d / "orders.csv", ("residual", "order"), sorted(rep.orders.items()))
        for note in rep.notes:
            out.err(note)
    out.info(f"{rep.kind} sweep complete: {len(rep.per_run)} runs; output in {d}")
    return 0


def cmd_check(path, quiet=False) -> int:
    out = _Out(quiet)
    cfg = _load(path, out)
    if cfg is None:
        return 1
    rep = validate_spec(cfg.coeff, cfg.grid.dim, raise_on_fail=False)
    for line in rep.lines():
        out.info(line)
    if not rep.ok:
        try:
            validate_spec(cfg.coeff, cfg.grid.dim)
        except InvalidSpec as exc:
            out.err(f"{type(exc).__name__}: {exc}")
        return 1
    return 0


def main(argv=None) -> int:
    p = argparse.ArgumentParser(prog="thermovisc",
                                description="Regularized thermoviscoelastic solver and diagnostics")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("command", choices=("run", "sweep", "check"))
    p.add_argument("config")
    p.add_argument("--out", help="output directory (overrides [output] dir)")
    p.add_argument("--seed", type=int, help="seed for the random-seeded preset")
    p.add_argument("--quiet", action="store_true")
    args = p.parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        p.error("--seed must be an unsigned 64-bit integer")
    if args.command == "run":
        return cmd_run(args.config, args.out, args.seed, args.quiet)
    if args.command == "sweep":
        return cmd_sweep(args.config, args.out, args.seed, args.quiet)
    return cmd_check(args.config, args.quiet)


if __name__ == "__main__":
    sys.exit(main())
