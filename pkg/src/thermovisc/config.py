"""
Line-oriented configuration files.

Format: ``[section]`` headers followed by ``key = value`` lines; ``#`` starts
a comment. Keys are case-sensitive (``k_gamma`` and ``K_gamma`` differ).
Lists are comma separated; grid node counts per axis use ``x``
(``33x33``). Every problem is reported with its line number.

Sections and keys (all optional, defaults in brackets)::

    [coefficients]  gamma_kind [bounded-analytic], gamma_params [1, 1, 1],
                    f_kind [bounded-analytic], f_params [1, 0.5], a [1],
                    k_gamma [1], K_gamma [2], K_f [1], alpha [0.5]
    [grid]          extents [1], nodes [65]
    [initial]       preset [sine-bump], u_amp [0], v_amp [1], theta_base [0.5],
                    theta_amp [0.5], seed [0]
    [run]           epsilon [0.01], dt [0.001], t_end [1], blowup_threshold [1e6],
                    clip_theta [false], solver_tol [1e-12], snapshot_stride [1],
                    mollify_m0 [16]
    [monitors]      r [1.2], q [1.5], lambda [N + 3]
    [sweep]         kind [eps], eps_list, nodes_list, dt_list, t_end [run t_end]
    [output]        dir [thermovisc_out], snapshot_every [0 = initial and final only]
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InvalidSpec
from .model import PRESETS, CoefficientSpec
from .operators import Grid
from .solver import RunConfig
from .sweep import SweepPlan

SCHEMA = {
    "coefficients": {"gamma_kind": str, "gamma_params": "floats", "f_kind": str, "f_params": "floats",
                     "a": float, "k_gamma": float, "K_gamma": float, "K_f": float, "alpha": float},
    "grid": {"extents": "floats", "nodes": "nodes"},
    "initial": {"preset": str, "u_amp": float, "v_amp": float, "theta_base": float,
                "theta_amp": float, "seed": int},
    "run": {"epsilon": float, "dt": float, "t_end": float, "blowup_threshold": float,
            "clip_theta": bool, "solver_tol": float, "snapshot_stride": int, "mollify_m0": int},
    "monitors": {"r": float, "q": float, "lambda": float},
    "sweep": {"kind": str, "eps_list": "floats", "nodes_list": "nodes_list", "dt_list": "floats",
              "t_end": float},
    "output": {"dir": str, "snapshot_every": int},
}


def _convert(kind, text):
    if kind is str:
        return text
    if kind is bool:
        low = text.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError(f"expected a boolean, got {text!r}")
    if kind is int:
        return int(text)
    if kind is float:
        return float(text)
    if kind == "floats":
        return [float(x) for x in text.split(",") if x.strip()]
    if kind == "nodes":
        return [int(x) for x in text.lower().split("x")]
    if kind == "nodes_list":
        return [[int(x) for x in item.lower().split("x")] for item in text.split(",") if item.strip()]
    raise AssertionError(kind)


def parse_text(text: str):
    """Parse into ``{section: {key: (value, line)}}``; raises ConfigError listing every problem."""
    sections: dict = {}
    errors = []
    current = None
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                errors.append((ln, f"malformed section header {raw.strip()!r}"))
                continue
            current = line[1:-1].strip()
            if current not in SCHEMA:
                errors.append((ln, f"unknown section [{current}]"))
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            errors.append((ln, f"expected 'key = value', got {raw.strip()!r}"))
            continue
        if current is None:
            errors.append((ln, "key outside of any section"))
            continue
        key, value = (s.strip() for s in line.split("=", 1))
        schema = SCHEMA.get(current)
        if schema is None:
            continue
        if key not in schema:
            errors.append((ln, f"unknown key {key!r} in [{current}]"))
            continue
        if key in sections[current]:
            errors.append((ln, f"duplicate key {key!r} in [{current}]"))
            continue
        try:
            sections[current][key] = (_convert(schema[key], value), ln)
        except ValueError as exc:
            errors.append((ln, f"{key}: {exc}"))
    if errors:
        raise ConfigError(errors)
    return sections


@dataclass
class Config:
    coeff: CoefficientSpec
    grid: Grid
    preset: str = "sine-bump"
    preset_params: dict = field(default_factory=dict)
    run: RunConfig | None = None
    mollify_m0: int = 16
    monitors: dict = field(default_factory=dict)
    sweep: SweepPlan | None = None
    sweep_error: tuple | None = None
    out_dir: str = "thermovisc_out"
    snapshot_every: int = 0
    path: str = ""

    @property
    def seed(self):
        return self.preset_params.get("seed", 0)


def _get(sec, key, default):
    return sec[key][0] if key in sec else default


def _line(sec, key):
    return sec[key][1] if key in sec else 0


def build_config(sections, path="") -> Config:
    errors = []
    c = sections.get("coefficients", {})
    try:
        coeff = CoefficientSpec(
            gamma_kind=_get(c, "gamma_kind", "bounded-analytic"),
            gamma_params=tuple(_get(c, "gamma_params", [1.0, 1.0, 1.0])),
            f_kind=_get(c, "f_kind", "bounded-analytic"),
            f_params=tuple(_get(c, "f_params", [1.0, 0.5])),
            a=_get(c, "a", 1.0), k_gamma=_get(c, "k_gamma", 1.0), K_gamma=_get(c, "K_gamma", 2.0),
            K_f=_get(c, "K_f", 1.0), alpha=_get(c, "alpha", 0.5))
    except InvalidSpec as exc:
        errors.append((min((v[1] for v in c.values()), default=0), str(exc)))
        coeff = None

    g = sections.get("grid", {})
    nodes = _get(g, "nodes", [65])
    extents = _get(g, "extents", [1.0] * len(nodes))
    if len(extents) == 1 and len(nodes) > 1:
        extents = extents * len(nodes)
    try:
        grid = Grid(tuple(extents), tuple(nodes))
    except ValueError as exc:
        errors.append((_line(g, "nodes") or _line(g, "extents"), str(exc)))
        grid = None

    i = sections.get("initial", {})
    preset = _get(i, "preset", "sine-bump")
    if preset not in PRESETS:
        errors.append((_line(i, "preset"), f"unknown preset {preset!r}; expected one of {PRESETS}"))
    params = {k: v[0] for k, v in i.items() if k != "preset"}

    r = sections.get("run", {})
    run_cfg = None
    try:
        run_cfg = RunConfig(epsilon=_get(r, "epsilon", 1e-2), dt=_get(r, "dt", 1e-3), t_end=_get(r, "t_end", 1.0),
                            blowup_threshold=_get(r, "blowup_threshold", 1e6),
                            clip_theta=_get(r, "clip_theta", False), solver_tol=_get(r, "solver_tol", 1e-12),
                            snapshot_stride=_get(r, "snapshot_stride", 1))
    except ValueError as exc:
        errors.append((min((v[1] for v in r.values()), default=0), str(exc)))

    m = sections.get("monitors", {})
    monitors = {"r": _get(m, "r", 1.2), "q": _get(m, "q", 1.5), "lam": _get(m, "lambda", None)}

    o = sections.get("output", {})
    cfg = Config(coeff=coeff, grid=grid, preset=preset, preset_params=params, run=run_cfg,
                 mollify_m0=_get(r, "mollify_m0", 16), monitors=monitors,
                 out_dir=_get(o, "dir", "thermovisc_out"), snapshot_every=_get(o, "snapshot_every", 0),
                 path=str(path))

    s = sections.get("sweep")
    if s is not None and not errors:
        try:
            nodes_list = _get(s, "nodes_list", [list(grid.nodes)])
            grids = []
            for n in nodes_list:
                ext = extents if len(extents) == len(n) else [extents[0]] * len(n)
                grids.append(Grid(tuple(ext), tuple(n)))
            cfg.sweep = SweepPlan(
                eps_list=_get(s, "eps_list", [run_cfg.epsilon]), grid_list=grids,
                dt_list=_get(s, "dt_list", [run_cfg.dt]),
                t_end=_get(s, "t_end", run_cfg.t_end), kind=_get(s, "kind", "eps"), coeff=coeff,
                preset=preset, preset_params=params, r=monitors["r"], q=monitors["q"], lam=monitors["lam"],
                mollify_m0=cfg.mollify_m0, blowup_threshold=run_cfg.blowup_threshold)
            if cfg.sweep.kind not in ("eps", "refinement"):
                errors.append((_line(s, "kind"), f"unknown sweep kind {cfg.sweep.kind!r}"))
        except ValueError as exc:
            errors.append((min((v[1] for v in s.values()), default=0), str(exc)))
    if errors:
        raise ConfigError(errors)
    return cfg


def load_config(path) -> Config:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError([(0, f"cannot read config file {str(p)!r}: {exc.strerror or exc}")]) from exc
    return build_config(parse_text(text), path=p)
