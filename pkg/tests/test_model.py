import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from thermovisc import (CoefficientSpec, Grid, InitialData, build_operators, eval_f, eval_gamma,
                        make_initial_data, mollify, regularize, validate_spec)
from thermovisc.errors import AlphaOutOfRange, BoundViolated, InvalidSpec, NegativeArgument
from thermovisc.model import PRESETS, gamma_values, mollify_steps, smooth_coefficients


# validation

def test_alpha_below_limit_in_2d_passes():
    rep = validate_spec(CoefficientSpec(alpha=0.9), dim=2)
    assert rep.ok


def test_alpha_at_limit_in_2d_rejected():
    with pytest.raises(AlphaOutOfRange) as info:
        validate_spec(CoefficientSpec(alpha=1.0), dim=2)
    assert info.value.report is not None and not info.value.report.ok


def test_superlinear_coupling_allowed_in_1d():
    spec = CoefficientSpec(gamma_kind="constant", gamma_params=(1.0,), f_kind="bounded-analytic",
                           f_params=(1.0, 1.4, 0.0), alpha=1.4, K_f=1.0)
    assert validate_spec(spec, dim=1).ok


def test_table_f_with_nonzero_origin_rejected():
    spec = CoefficientSpec(f_kind="sampled-table", f_params=(0.0, 0.1, 1.0, 0.5))
    with pytest.raises(BoundViolated):
        validate_spec(spec, dim=1)


def test_report_lists_every_assumption_without_raising():
    spec = CoefficientSpec(alpha=1.0, f_kind="sampled-table", f_params=(0.0, 0.1, 1.0, 0.5))
    rep = validate_spec(spec, dim=2, raise_on_fail=False)
    failed = [name for name, ok, _ in rep.items if not ok]
    assert len(rep.items) == 5 and len(failed) == 2
    assert any("FAIL" in line for line in rep.lines())


def test_gamma_out_of_bounds_rejected():
    spec = CoefficientSpec(gamma_kind="constant", gamma_params=(3.0,))
    with pytest.raises(BoundViolated):
        validate_spec(spec, dim=1)


def test_unknown_kind_rejected():
    with pytest.raises(InvalidSpec):
        CoefficientSpec(gamma_kind="spline")


def test_bad_table_rejected():
    with pytest.raises(InvalidSpec):
        validate_spec(CoefficientSpec(gamma_kind="sampled-table", gamma_params=(1.0, 1.5, 0.0, 1.0)), dim=1)


# evaluation

def test_eval_gamma_examples():
    assert eval_gamma(CoefficientSpec(gamma_kind="constant", gamma_params=(2.0,)), 7.3) == 2.0
    assert eval_gamma(CoefficientSpec(), 0.0) == 2.0
    table = CoefficientSpec(gamma_kind="sampled-table", gamma_params=(0.0, 1.5, 1.0, 1.0))
    assert eval_gamma(table, 0.5) == pytest.approx(1.25, abs=1e-15)


def test_eval_f_examples():
    spec = CoefficientSpec(f_params=(1.0, 0.5))
    assert eval_f(spec, 0.0) == 0.0
    assert eval_f(spec, 3.0) == pytest.approx(1.0, abs=1e-15)


def test_negative_argument_raises():
    with pytest.raises(NegativeArgument):
        eval_gamma(CoefficientSpec(), -1e-3)
    with pytest.raises(NegativeArgument):
        eval_f(CoefficientSpec(), -1.0)


@given(st.floats(min_value=0.0, max_value=1e8, allow_nan=False))
def test_default_coefficients_within_bounds(xi):
    spec = CoefficientSpec()
    g = eval_gamma(spec, xi)
    assert spec.k_gamma <= g <= spec.K_gamma
    assert abs(eval_f(spec, xi)) <= spec.K_f * (1 + xi) ** spec.alpha * (1 + 1e-12)


def test_vectorized_matches_scalar():
    spec = CoefficientSpec()
    xi = np.linspace(0, 5, 11)
    assert np.array_equal(gamma_values(spec, xi), [eval_gamma(spec, x) for x in xi])


def test_smooth_coefficients_only_touches_tables():
    spec = CoefficientSpec()
    assert smooth_coefficients(spec) == spec
    tab = CoefficientSpec(gamma_kind="sampled-table", gamma_params=(0, 2, 1, 1, 2, 2))
    sm = smooth_coefficients(tab)
    assert sm.gamma_params == (0.0, 2.0, 1.0, 1.5, 2.0, 2.0)


# mollification

@pytest.fixture(scope="module")
def ops1():
    return build_operators(Grid((1.0,), (33,)))


def test_mollify_zero_steps_is_identity(ops1):
    data = make_initial_data(ops1.grid, "indicator")
    assert mollify_steps(0.3, m0=0) == 0
    assert mollify(data, 0.3, ops1, m0=0) is data


def test_constant_theta_fixed_point(ops1):
    z = np.zeros(ops1.grid.size)
    data = InitialData(z, z, np.full(ops1.grid.size, 0.7))
    out = mollify(data, 0.5, ops1)
    assert np.allclose(out.theta0, 0.7, atol=1e-15, rtol=0)


def test_indicator_mass_and_sign_preserved():
    ops = build_operators(Grid((1.0, 1.0), (17, 17)))
    data = make_initial_data(ops.grid, "indicator", theta_base=0.0, theta_amp=1.0)
    out = mollify(data, 0.25, ops, m0=16)
    assert mollify_steps(0.25, 16) == 4
    m_in, m_out = ops.integral(data.theta0), ops.integral(out.theta0)
    assert abs(m_out - m_in) <= 1e-13 * m_in
    assert out.theta0.min() >= 0.0
    assert np.all(out.u0[ops.boundary] == 0) and np.all(out.v0[ops.boundary] == 0)


def test_mollify_distance_shrinks_with_eps(ops1):
    data = make_initial_data(ops1.grid, "indicator", u_amp=0.3)
    d = []
    for eps in (0.5, 0.25, 0.125):
        out = mollify(data, eps, ops1)
        d.append(math.sqrt(sum(ops1.inner(a - b, a - b) for a, b in
                               ((out.u0, data.u0), (out.v0, data.v0), (out.theta0, data.theta0)))))
    assert d[0] > d[1] > d[2] > 0


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=0, max_value=2 ** 32 - 1), st.floats(min_value=0.01, max_value=0.99))
def test_mollify_random_data_properties(seed, eps):
    ops = build_operators(Grid((1.0,), (17,)))
    data = make_initial_data(ops.grid, "random-seeded", u_amp=1.0, v_amp=1.0, seed=seed)
    out = mollify(data, eps, ops)
    assert out.theta0.min() >= 0.0
    assert abs(ops.integral(out.theta0) - ops.integral(data.theta0)) <= 1e-13 * ops.integral(data.theta0)


def test_presets_are_admissible():
    grid = Grid((1.0, 1.0), (9, 9))
    for name in PRESETS:
        make_initial_data(grid, name, u_amp=0.5, seed=3).check(grid.boundary_mask())


def test_random_preset_is_seeded():
    grid = Grid((1.0,), (9,))
    a = make_initial_data(grid, "random-seeded", seed=5)
    b = make_initial_data(grid, "random-seeded", seed=5)
    c = make_initial_data(grid, "random-seeded", seed=6)
    assert np.array_equal(a.v0, b.v0) and not np.array_equal(a.v0, c.v0)


def test_regularize_rejects_invalid_spec(ops1):
    data = make_initial_data(ops1.grid)
    with pytest.raises(InvalidSpec):
        regularize(data, CoefficientSpec(alpha=2.0), 0.1, ops1)


def test_regularize_rejects_negative_theta(ops1):
    data = make_initial_data(ops1.grid)
    bad = InitialData(data.u0, data.v0, data.theta0 - 10.0)
    with pytest.raises(ValueError):
        regularize(bad, CoefficientSpec(), 0.1, ops1)
