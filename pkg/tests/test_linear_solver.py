import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from cfode.cf_operator import CFOrder
from cfode.errors import DegenerateLeadingCoefficient, NonzeroForcingAtStart, OrderOutOfRange
from cfode.linear_solver import (
    CaseTag,
    LinearProblem,
    discriminant_case,
    reduce,
    reduce_general,
    reduction_self_test,
    solve,
)
from cfode.quadrature import Grid, GridFunction, derivative, second_derivative

HALF = CFOrder(0.5)
G02 = Grid(0.0, 2.0, 4001)
F_SRC = "t*exp(-t)"


def problem(lam, f=F_SRC, grid=G02, order=HALF, u_a=0.0, up_a=0.0):
    return LinearProblem.from_expression(order, lam, f, grid, u_a, up_a)


# ---------------------------------------------------------------- discriminant


@pytest.mark.parametrize(
    "lam,value,tag",
    [(0.0, 0.0, CaseTag.DEGENERATE), (1.0, 2.25, CaseTag.POSITIVE), (-1.0, -1.75, CaseTag.NEGATIVE), (-8.0, 0.0, CaseTag.DEGENERATE)],
)
def test_discriminant_examples(lam, value, tag):
    disc, got = discriminant_case(HALF, lam)
    assert disc == pytest.approx(value, abs=1e-12)
    assert got is tag


def test_discriminant_threshold_tolerance_is_relative():
    alpha = 0.3
    threshold = -4 * alpha / (1 - alpha) ** 2
    assert discriminant_case(CFOrder(alpha), threshold * (1 + 1e-15))[1] is CaseTag.DEGENERATE
    assert discriminant_case(CFOrder(alpha), threshold * (1 + 1e-6))[1] is CaseTag.POSITIVE
    assert discriminant_case(CFOrder(alpha), threshold * (1 - 1e-6))[1] is CaseTag.NEGATIVE


@settings(max_examples=100, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(-50, 50))
def test_negative_case_exactly_between_the_roots(alpha, lam):
    threshold = -4 * alpha / (1 - alpha) ** 2
    disc, tag = discriminant_case(CFOrder(alpha), lam)
    if tag is CaseTag.NEGATIVE:
        assert threshold < lam < 0
    if tag is CaseTag.POSITIVE:
        assert lam > 0 or lam < threshold


def test_discriminant_rejects_alpha_one():
    with pytest.raises(OrderOutOfRange):
        discriminant_case(CFOrder(1.0), 1.0)


# ---------------------------------------------------------------- reduce


def test_reduce_coefficients():
    red = reduce(problem(1.0))
    assert red.mu1 == pytest.approx(2.5)
    assert red.mu2 == pytest.approx(1.0)
    assert red.discriminant == pytest.approx(2.25)
    assert red.case_tag is CaseTag.POSITIVE


def test_reduce_zero_forcing_gives_zero_g():
    assert reduce(problem(1.0, f="0")).g.max_norm() == 0.0


def test_reduce_g_for_linear_forcing():
    grid = Grid(0.0, 1.0, 11)
    t = grid.nodes
    red = reduce(problem(0.0, f="t", grid=grid))
    np.testing.assert_allclose(red.g.values, (0.5 + 0.5 * t) * np.exp(t), rtol=1e-14)


# ---------------------------------------------------------------- solve


def test_constant_solution():
    sol = solve(problem(0.0, f="0", u_a=1.0))
    np.testing.assert_allclose(sol.u.values, 1.0, atol=1e-13)
    assert sol.case_tag is CaseTag.DEGENERATE


def test_linear_solution():
    sol = solve(problem(0.0, f="0", up_a=1.0))
    np.testing.assert_allclose(sol.u.values, G02.nodes, atol=1e-13)


def test_case_i_identity():
    # for lam = 0 the solution satisfies u'' = (1 - alpha) f' + alpha f
    p = problem(0.0)
    sol = solve(p)
    t = G02.nodes
    rhs = 0.5 * (1 - t) * np.exp(-t) + 0.5 * t * np.exp(-t)
    err = np.abs(second_derivative(sol.u).values - rhs)
    assert err.max() <= 1e-4


@pytest.mark.parametrize(
    "lam,formula", [(0.0, "repeated_root"), (-8.0, "repeated_root"), (1.0, "real_roots"), (-1.0, "complex_roots"), (2.5, "real_roots"), (-3.0, "complex_roots")]
)
def test_residual_small_in_every_case(lam, formula):
    sol = solve(problem(lam))
    assert sol.formula == formula
    assert sol.residual_norm <= 1e-4


@pytest.mark.parametrize("lam", [0.0, -8.0, 1.0, -1.0])
def test_residual_is_second_order(lam):
    coarse = solve(problem(lam, grid=Grid(0.0, 2.0, 1001))).residual_norm
    fine = solve(problem(lam, grid=Grid(0.0, 2.0, 2001))).residual_norm
    assert coarse / fine >= 3.0


def _ode_oracle(alpha, lam, f, fp, t1, u0, du0, t_eval):
    # differentiated form: u'' - lam (1-alpha) u' - lam alpha u = (1-alpha) f' + alpha f
    def rhs(t, y):
        return [y[1], lam * (1 - alpha) * y[1] + lam * alpha * y[0] + (1 - alpha) * fp(t) + alpha * f(t)]

    out = solve_ivp(rhs, (t_eval[0], t1), [u0, du0], t_eval=t_eval, rtol=1e-12, atol=1e-13, method="DOP853")
    return out.y[0]


@pytest.mark.parametrize("alpha", [0.2, 0.5, 0.8])
@pytest.mark.parametrize("lam", [0.0, -1.0, 0.7, -4 * 0.5 / 0.25])
def test_matches_independent_ode_integration(alpha, lam):
    grid = Grid(0.0, 2.0, 4001)
    sol = solve(problem(lam, order=CFOrder(alpha), grid=grid, up_a=0.3))
    ref = _ode_oracle(alpha, lam, lambda t: t * np.exp(-t), lambda t: (1 - t) * np.exp(-t), 2.0, 0.0, 0.3, grid.nodes)
    assert np.max(np.abs(sol.u.values - ref)) <= 1e-6 * max(1.0, np.max(np.abs(ref)))


def test_shifted_interval():
    grid = Grid(1.0, 3.0, 4001)
    sol = solve(problem(-1.0, f="(t - 1)*exp(-t)", grid=grid))
    assert sol.residual_norm <= 1e-4


def test_sampled_forcing_uses_finite_differences():
    f = G02.sample(lambda t: t * np.exp(-t))
    sol_samples = solve(LinearProblem.from_samples(HALF, 1.0, f))
    sol_expr = solve(problem(1.0))
    assert np.max(np.abs(sol_samples.u.values - sol_expr.u.values)) <= 1e-5


def test_superposition():
    f1 = G02.sample(lambda t: t * np.exp(-t))
    f2 = G02.sample(lambda t: np.sin(3 * t))
    for lam in (0.0, 1.0, -1.0):
        a = solve(LinearProblem.from_samples(HALF, lam, f1)).u
        b = solve(LinearProblem.from_samples(HALF, lam, f2)).u
        ab = solve(LinearProblem.from_samples(HALF, lam, f1 + f2)).u
        assert np.max(np.abs(ab.values - (a + b).values)) <= 1e-10 * max(1.0, ab.max_norm())


def test_affine_in_initial_data():
    base = solve(problem(-1.0)).u
    shifted = solve(problem(-1.0, u_a=0.0, up_a=2.0)).u
    homog = solve(problem(-1.0, f="0", up_a=2.0)).u
    np.testing.assert_allclose(shifted.values, (base + homog).values, atol=1e-11)


@pytest.mark.parametrize("sign", [1.0, -1.0])
def test_continuity_across_lambda_zero(sign):
    ref = solve(problem(0.0)).u
    near = solve(problem(sign * 1e-6))
    assert near.case_tag is (CaseTag.POSITIVE if sign > 0 else CaseTag.NEGATIVE)
    assert np.max(np.abs(near.u.values - ref.values)) <= 1e-4


def test_continuity_near_double_root():
    ref = solve(problem(-8.0)).u
    for lam in (-8.0 * (1 + 1e-9), -8.0 * (1 - 1e-9), -8.0 * (1 + 1e-4), -8.0 * (1 - 1e-4)):
        assert np.max(np.abs(solve(problem(lam)).u.values - ref.values)) <= 1e-3


def test_oscillation_in_negative_case():
    grid = Grid(0.0, 20.0, 8001)
    u = solve(problem(-1.0, f="0", grid=grid, u_a=1.0)).u.values
    signs = np.sign(u[np.abs(u) > 1e-300])
    assert np.count_nonzero(np.diff(signs)) >= 2


def test_no_oscillation_in_positive_case():
    grid = Grid(0.0, 20.0, 8001)
    u = solve(problem(1.0, f="0", grid=grid, u_a=1.0)).u.values
    assert np.all(u > 0)


def test_nonzero_forcing_at_start_rejected():
    with pytest.raises(NonzeroForcingAtStart) as err:
        solve(problem(1.0, f="1 + t"))
    assert err.value.magnitude == pytest.approx(1.0)


def test_incompatible_initial_value_shows_in_residual():
    # lam u(a) + f(a) = 0.5 != 0; the residual reports it honestly
    sol = solve(problem(0.5, f="0", u_a=1.0))
    assert sol.residual_norm >= 0.49


def test_solution_is_frozen():
    sol = solve(problem(0.0))
    with pytest.raises(AttributeError):
        sol.residual_norm = 0.0
    with pytest.raises(ValueError):
        sol.u.values[0] = 1.0


# ---------------------------------------------------------------- general equation


def _hs(grid, fn, dfn, scale=1.0):
    return GridFunction(grid, scale * fn(grid.nodes)), GridFunction(grid, scale * dfn(grid.nodes))


@pytest.mark.parametrize("a_coef", [1.0, 2.5, -0.7])
@pytest.mark.parametrize("lam", [0.0, 1.0, -1.0])
def test_general_collapses_to_linear(a_coef, lam):
    p = problem(lam)
    red = reduce(p)
    h, hp = _hs(G02, lambda t: t * np.exp(-t), lambda t: (1 - t) * np.exp(-t), a_coef)
    gen = reduce_general(a_coef, 0.0, -lam * a_coef, HALF, h, hp, check=False)
    assert gen.coefficients[0] == 1.0
    assert gen.p1 == pytest.approx(-red.mu1, rel=1e-14, abs=1e-14)
    assert gen.p0 == pytest.approx(red.mu2, rel=1e-14, abs=1e-14)
    np.testing.assert_allclose(gen.rhs.values, red.g.values, rtol=1e-13, atol=1e-15)
    assert gen.case_tag is red.case_tag
    np.testing.assert_allclose(gen.solve(0.0, 0.0).values, solve(p).u.values, atol=1e-12)


def test_general_zero_forcing_gives_zero():
    h = G02.zeros()
    u = reduce_general(1.0, 1.0, 1.0, HALF, h, h).solve(0.0, 0.0)
    assert u.max_norm() == 0.0


@pytest.mark.parametrize("abc", [(1.0, 1.0, 1.0), (2.0, -1.0, 0.5), (1.0, 3.0, 0.0), (0.3, 0.0, 4.0)])
@pytest.mark.parametrize("alpha", [0.3, 0.5, 0.7])
def test_reduction_self_test_passes(abc, alpha):
    assert reduction_self_test(*abc, CFOrder(alpha)) <= 1e-4


def test_general_residual_against_cf_operator():
    from cfode.cf_operator import cf_d_beta, cf_d_gamma

    h, hp = _hs(G02, lambda t: np.sin(t) ** 2, lambda t: np.sin(2 * t))
    u = reduce_general(1.0, 1.0, 1.0, HALF, h, hp).solve(0.0, 0.0)
    res = cf_d_beta(u, HALF) + cf_d_gamma(u, 0.5) + u - h
    assert res.max_norm() <= 1e-4


def test_general_rejects_zero_leading_coefficient():
    h = G02.zeros()
    with pytest.raises(DegenerateLeadingCoefficient):
        reduce_general(0.0, 1.0, 1.0, HALF, h, h)


def test_finite_difference_f_prime_consistent():
    f = G02.sample(lambda t: t * np.exp(-t))
    assert np.max(np.abs(derivative(f).values - (1 - G02.nodes) * np.exp(-G02.nodes))) <= 1e-5
