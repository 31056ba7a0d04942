"""
Problem data: coefficient functions, initial data, and their regularization.

Coefficients come in three kinds:

``constant``
    ``params = [c]``.
``bounded-analytic``
    viscosity ``gamma(xi) = c0 + c1 / (1 + c2 xi)`` with ``params = [c0, c1, c2]``;
    coupling ``f(xi) = c ((s + xi)**beta - s**beta)`` with ``params = [c, beta]``
    or ``[c, beta, s]`` (``s`` defaults to 1).
``sampled-table``
    ``params = [x0, y0, x1, y1, ...]`` with increasing abscissae, evaluated by
    piecewise-linear interpolation and held constant past the last node.

The coupling ``f`` is scalar. In two dimensions it acts as the flux
``f(theta) * (1, ..., 1)``, so ``div f`` is the sum of its partial
derivatives and ``f . grad v`` is ``f`` times the sum of the partials of ``v``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import AlphaOutOfRange, BoundViolated, InvalidSpec, NegativeArgument

KINDS = ("constant", "bounded-analytic", "sampled-table")
DEFAULT_MOLLIFY_STEPS = 16
SAMPLE_MAX = 1e6
SAMPLE_COUNT = 256


@dataclass(frozen=True)
class CoefficientSpec:
    gamma_kind: str = "bounded-analytic"
    gamma_params: tuple = (1.0, 1.0, 1.0)
    f_kind: str = "bounded-analytic"
    f_params: tuple = (1.0, 0.5)
    a: float = 1.0
    k_gamma: float = 1.0
    K_gamma: float = 2.0
    K_f: float = 1.0
    alpha: float = 0.5

    def __post_init__(self):
        for kind in (self.gamma_kind, self.f_kind):
            if kind not in KINDS:
                raise InvalidSpec(f"unknown coefficient kind {kind!r}; expected one of {KINDS}")
        object.__setattr__(self, "gamma_params", tuple(float(p) for p in self.gamma_params))
        object.__setattr__(self, "f_params", tuple(float(p) for p in self.f_params))
        if self.a <= 0:
            raise InvalidSpec(f"elastic modulus a must be positive, got {self.a}")


def _table(params):
    if len(params) < 4 or len(params) % 2:
        raise InvalidSpec("sampled-table params must be pairs x0, y0, x1, y1, ... (at least two)")
    xs = np.asarray(params[0::2])
    ys = np.asarray(params[1::2])
    if np.any(np.diff(xs) <= 0):
        raise InvalidSpec("sampled-table abscissae must be strictly increasing")
    return xs, ys


def _raw(kind, params, xi, which):
    xi = np.asarray(xi, dtype=float)
    if kind == "constant":
        return np.full_like(xi, params[0])
    if kind == "sampled-table":
        xs, ys = _table(params)
        return np.interp(xi, xs, ys)
    if which == "gamma":
        c0, c1, c2 = (tuple(params) + (1.0, 1.0, 1.0)[len(params):])[:3]
        return c0 + c1 / (1.0 + c2 * xi)
    c, beta = params[0], params[1]
    s = params[2] if len(params) > 2 else 1.0
    return c * ((s + xi) ** beta - s ** beta)


def gamma_raw(spec: CoefficientSpec, xi):
    """Viscosity exactly as specified, without clamping."""
    return _raw(spec.gamma_kind, spec.gamma_params, xi, "gamma")


def f_raw(spec: CoefficientSpec, xi):
    return _raw(spec.f_kind, spec.f_params, xi, "f")


def f_bound(spec: CoefficientSpec, xi):
    return spec.K_f * (1.0 + np.asarray(xi, dtype=float)) ** spec.alpha


def gamma_values(spec: CoefficientSpec, theta):
    """Vectorized viscosity on a field, clamped to ``[k_gamma, K_gamma]``.

    Arguments are clamped at zero: the scheme keeps theta nonnegative and this
    only ever absorbs rounding-level negatives.
    """
    xi = np.maximum(np.asarray(theta, dtype=float), 0.0)
    return np.clip(gamma_raw(spec, xi), spec.k_gamma, spec.K_gamma)


def f_values(spec: CoefficientSpec, theta):
    xi = np.maximum(np.asarray(theta, dtype=float), 0.0)
    bound = f_bound(spec, xi)
    return np.clip(f_raw(spec, xi), -bound, bound)


def eval_gamma(spec: CoefficientSpec, xi: float) -> float:
    if xi < 0:
        raise NegativeArgument(f"gamma evaluated at negative argument {xi}")
    return float(gamma_values(spec, xi))


def eval_f(spec: CoefficientSpec, xi: float) -> float:
    if xi < 0:
        raise NegativeArgument(f"f evaluated at negative argument {xi}")
    return float(f_values(spec, xi))


def alpha_limit(dim: int) -> float:
    return (dim + 2) / (2 * dim)


def sample_points(n=SAMPLE_COUNT, xi_max=SAMPLE_MAX):
    """Zero followed by ``n - 1`` log-spaced points up to ``xi_max``."""
    return np.concatenate([[0.0], np.logspace(-6, np.log10(xi_max), n - 1)])


@dataclass
class ValidationReport:
    dim: int
    items: list = field(default_factory=list)

    def add(self, name, passed, detail=""):
        self.items.append((name, bool(passed), detail))

    @property
    def ok(self) -> bool:
        return all(p for _, p, _ in self.items)

    def lines(self):
        return [f"[{'pass' if p else 'FAIL'}] {name}" + (f": {d}" if d else "") for name, p, d in self.items]

    def __str__(self):
        return "\n".join(self.lines())


def validate_spec(spec: CoefficientSpec, dim: int, raise_on_fail: bool = True) -> ValidationReport:
    """Check the structural assumptions on the coefficients.

    Bounds on ``gamma`` and ``f`` are checked on :func:`sample_points`, a
    finite surrogate for "all xi >= 0". The report lists every assumption;
    with ``raise_on_fail`` the first failure is raised with the report
    attached (AlphaOutOfRange for the exponent, BoundViolated otherwise).
    """
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    rep = ValidationReport(dim)
    first = None

    lim = alpha_limit(dim)
    ok = 0 < spec.alpha < lim
    rep.add("0 < alpha < (N+2)/(2N)", ok, f"alpha = {spec.alpha}, limit = {lim:.6g}")
    if not ok:
        first = first or AlphaOutOfRange(f"alpha = {spec.alpha} outside (0, {lim:.6g}) for N = {dim}")

    ok = 0 < spec.k_gamma <= spec.K_gamma and spec.K_f > 0
    rep.add("0 < k_gamma <= K_gamma, K_f > 0", ok,
            f"k_gamma = {spec.k_gamma}, K_gamma = {spec.K_gamma}, K_f = {spec.K_f}")
    if not ok:
        first = first or BoundViolated("constants must satisfy 0 < k_gamma <= K_gamma and K_f > 0")

    f0 = float(f_raw(spec, 0.0))
    ok = f0 == 0.0
    rep.add("f(0) = 0", ok, f"f(0) = {f0:.6g}")
    if not ok:
        first = first or BoundViolated(f"f(0) = {f0:.6g} != 0", xi=0.0)

    xi = sample_points()
    g = gamma_raw(spec, xi)
    bad = np.flatnonzero(~((g >= spec.k_gamma) & (g <= spec.K_gamma)) | ~np.isfinite(g))
    ok = bad.size == 0
    detail = f"{len(xi)} samples in [0, {SAMPLE_MAX:g}]"
    if not ok:
        x = float(xi[bad[0]])
        detail = f"gamma({x:.6g}) = {g[bad[0]]:.6g}"
        first = first or BoundViolated(f"gamma bound violated at xi = {x:.6g}", xi=x)
    rep.add("k_gamma <= gamma(xi) <= K_gamma", ok, detail)

    fv = f_raw(spec, xi)
    bound = f_bound(spec, xi)
    bad = np.flatnonzero(~(np.abs(fv) <= bound * (1 + 1e-12)) | ~np.isfinite(fv))
    ok = bad.size == 0
    detail = f"{len(xi)} samples in [0, {SAMPLE_MAX:g}]"
    if not ok:
        x = float(xi[bad[0]])
        detail = f"|f({x:.6g})| = {abs(fv[bad[0]]):.6g} > {bound[bad[0]]:.6g}"
        first = first or BoundViolated(f"growth bound on f violated at xi = {x:.6g}", xi=x)
    rep.add("|f(xi)| <= K_f (1+xi)^alpha", ok, detail)

    if first is not None and raise_on_fail:
        first.report = rep
        raise first
    return rep


def smooth_coefficients(spec: CoefficientSpec) -> CoefficientSpec:
    """Regularized coefficients: tables get one (1, 2, 1)/4 pass, smooth kinds are returned as is."""
    out = spec
    for attr, kind in (("gamma_params", spec.gamma_kind), ("f_params", spec.f_kind)):
        if kind != "sampled-table":
            continue
        xs, ys = _table(getattr(spec, attr))
        ys2 = ys.copy()
        ys2[1:-1] = 0.25 * ys[:-2] + 0.5 * ys[1:-1] + 0.25 * ys[2:]
        params = np.column_stack([xs, ys2]).ravel()
        out = replace(out, **{attr: tuple(params)})
    return out


@dataclass(frozen=True)
class InitialData:
    """Node fields ``u0``, ``v0`` (initial velocity) and ``theta0``."""

    u0: np.ndarray
    v0: np.ndarray
    theta0: np.ndarray

    def check(self, boundary_mask, atol=0.0):
        if np.any(np.abs(self.u0[boundary_mask]) > atol) or np.any(np.abs(self.v0[boundary_mask]) > atol):
            raise ValueError("u0 and v0 must vanish on the Dirichlet boundary")
        if np.min(self.theta0) < 0:
            raise ValueError(f"theta0 must be nonnegative, min = {np.min(self.theta0):.3g}")
        return self


def mollify_steps(epsilon: float, m0: int = DEFAULT_MOLLIFY_STEPS) -> int:
    return int(math.ceil(epsilon * m0))


def mollify(data: InitialData, epsilon: float, ops, m0: int = DEFAULT_MOLLIFY_STEPS) -> InitialData:
    """Smooth the initial data by ``ceil(epsilon * m0)`` explicit heat-flow steps.

    Pseudo-time step is ``h_min**2 / 8``. ``u0`` and ``v0`` follow the
    Dirichlet flow, ``theta0`` the Neumann flow, which keeps it nonnegative
    and conserves its discrete integral.
    """
    if not 0 < epsilon < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {epsilon}")
    m = mollify_steps(epsilon, m0)
    if m == 0:
        return data
    tau = min(ops.grid.spacing) ** 2 / 8.0
    u, v, th = data.u0.copy(), data.v0.copy(), data.theta0.copy()
    for _ in range(m):
        u = u + tau * (ops.lap_dirichlet @ u)
        v = v + tau * (ops.lap_dirichlet @ v)
        th = th + tau * (ops.lap_neumann @ th)
    return InitialData(u, v, th)


@dataclass(frozen=True)
class RegularizedProblem:
    epsilon: float
    data: InitialData
    data_eps: InitialData
    coeff: CoefficientSpec
    coeff_eps: CoefficientSpec
    mollify_steps: int


def regularize(data: InitialData, coeff: CoefficientSpec, epsilon: float, ops,
               m0: int = DEFAULT_MOLLIFY_STEPS, validate: bool = True) -> RegularizedProblem:
    """Validated regularized problem for one value of epsilon."""
    if validate:
        validate_spec(coeff, ops.grid.dim)
    data.check(ops.boundary)
    data_eps = mollify(data, epsilon, ops, m0)
    return RegularizedProblem(epsilon, data, data_eps, coeff, smooth_coefficients(coeff),
                              mollify_steps(epsilon, m0))


# Initial-data presets

PRESETS = ("sine-bump", "indicator", "random-seeded", "equilibrium")


def _sine(grid, mode=1):
    out = np.ones(grid.size)
    for c, L in zip(grid.coordinates(), grid.extents):
        out *= np.sin(mode * np.pi * c / L)
    return out


def make_initial_data(grid, preset="sine-bump", *, u_amp=0.0, v_amp=1.0, theta_base=0.5,
                      theta_amp=0.5, seed=0) -> InitialData:
    """Named initial-data families.

    ``sine-bump``: ``v0 = v_amp * S``, ``u0 = u_amp * S`` with ``S`` the first
    Dirichlet sine mode and ``theta0 = theta_base + theta_amp * C`` where ``C``
    is a nonnegative cosine bump peaking at the domain centre.
    ``indicator``: as ``sine-bump`` but ``theta0 = theta_base + theta_amp``
    on the half ``x < L/2`` and ``theta_base`` elsewhere.
    ``random-seeded``: uniform random interior values scaled by the amplitudes.
    ``equilibrium``: ``u0 = v0 = 0``, ``theta0 = theta_base``.
    """
    bnd = grid.boundary_mask()
    S = _sine(grid)
    S[bnd] = 0.0
    coords = grid.coordinates()
    if preset == "sine-bump":
        C = np.ones(grid.size)
        for c, L in zip(coords, grid.extents):
            C *= 0.5 * (1.0 - np.cos(2 * np.pi * c / L))
        return InitialData(u_amp * S, v_amp * S, theta_base + theta_amp * C)
    if preset == "indicator":
        ind = (coords[0] < 0.5 * grid.extents[0]).astype(float)
        return InitialData(u_amp * S, v_amp * S, theta_base + theta_amp * ind)
    if preset == "random-seeded":
        rng = np.random.default_rng(seed)
        u = u_amp * rng.uniform(-1, 1, grid.size)
        v = v_amp * rng.uniform(-1, 1, grid.size)
        u[bnd] = 0.0
        v[bnd] = 0.0
        th = theta_base + theta_amp * rng.uniform(0, 1, grid.size)
        return InitialData(u, v, th)
    if preset == "equilibrium":
        z = np.zeros(grid.size)
        return InitialData(z.copy(), z.copy(), np.full(grid.size, float(theta_base)))
    raise ValueError(f"unknown preset {preset!r}; expected one of {PRESETS}")
