import numpy as np
import pytest

from cfode.cf_operator import CFOrder
from cfode.errors import MaxIterationsExceeded, NotContractive, OrderOutOfRange
from cfode.linear_solver import LinearProblem, solve
from cfode.nonlinear_solver import NonlinearProblem, apply_N, contraction_check, picard_solve
from cfode.quadrature import Grid, GridFunction

HALF = CFOrder(0.5)


def linear_phi(lam):
    return lambda t, u: lam * u


@pytest.mark.parametrize("T,L1,L2,q", [(0.4, 0.0, 0.0, 0.0), (0.4, 1.0, 1.0, 0.8), (1.0, 1.0, 1.0, 2.0)])
def test_contraction_examples(T, L1, L2, q):
    p = NonlinearProblem(HALF, T, linear_phi(0.0), L1, L2)
    assert contraction_check(p) == pytest.approx(q)
    assert p.q == pytest.approx(q)


def test_contraction_weights_by_alpha():
    p = NonlinearProblem(CFOrder(0.25), 1.0, linear_phi(0.0), 0.4, 0.1)
    assert contraction_check(p) == pytest.approx(2 * (0.75 * 0.1 + 0.25 * 0.4))


def test_problem_validation():
    with pytest.raises(ValueError):
        NonlinearProblem(HALF, 0.0, linear_phi(0.0), 0.0, 0.0)
    with pytest.raises(ValueError):
        NonlinearProblem(HALF, 1.0, linear_phi(0.0), -1.0, 0.0)
    with pytest.raises(OrderOutOfRange):
        NonlinearProblem(CFOrder(1.0), 1.0, linear_phi(0.0), 0.0, 0.0)


def test_zero_phi_maps_everything_to_initial_line():
    p = NonlinearProblem(HALF, 0.4, lambda t, u: 0.0 * t, 0.0, 0.0, U0=1.5, U1=-2.0)
    rng = np.random.default_rng(3)
    u = GridFunction(p.grid, rng.normal(size=p.grid.n))
    np.testing.assert_allclose(apply_N(p, u).values, 1.5 - 2.0 * p.grid.nodes, atol=1e-14)
    sol, state = picard_solve(p)
    assert state.iteration_count == 1
    np.testing.assert_allclose(sol.values, 1.5 - 2.0 * p.grid.nodes, atol=1e-14)


def test_forcing_only_matches_linear_solver_degenerate_case():
    p = NonlinearProblem.from_expression(HALF, 0.4, "t*exp(-t)", 0.0, 0.0, U0=0.0, U1=0.5)
    rng = np.random.default_rng(4)
    a = apply_N(p, GridFunction(p.grid, rng.normal(size=p.grid.n)))
    b = apply_N(p, p.grid.zeros())
    np.testing.assert_allclose(a.values, b.values, atol=1e-15)
    ref = solve(LinearProblem.from_expression(HALF, 0.0, "t*exp(-t)", p.grid, 0.0, 0.5)).u
    assert np.max(np.abs(a.values - ref.values)) <= 1e-10


def test_forcing_only_with_finite_difference_total_derivative():
    grid = Grid(0.0, 0.4, 2001)
    p = NonlinearProblem(HALF, 0.4, lambda t, u: t * np.exp(-t), 0.0, 0.0)
    ref = solve(LinearProblem.from_expression(HALF, 0.0, "t*exp(-t)", grid)).u
    assert np.max(np.abs(apply_N(p, grid.zeros()).values - ref.values)) <= 1e-8


@pytest.mark.parametrize("symbolic", [True, False])
def test_linear_phi_matches_linear_solver(symbolic):
    # alpha = 0.5, lam = 0.5 is the real-roots branch of the linear solver
    if symbolic:
        p = NonlinearProblem.from_expression(HALF, 0.4, "0.5*u", 0.5, 0.5, U0=1.0)
    else:
        p = NonlinearProblem(HALF, 0.4, linear_phi(0.5), 0.5, 0.5, U0=1.0)
    u, state = picard_solve(p)
    lin = solve(LinearProblem.from_expression(HALF, 0.5, "0", p.grid, 1.0, 0.0))
    assert lin.formula == "real_roots"
    assert np.max(np.abs(u.values - lin.u.values)) <= 1e-5
    assert state.q == pytest.approx(0.4)


def test_linear_plus_forcing_matches_linear_solver():
    p = NonlinearProblem.from_expression(CFOrder(0.3), 0.3, "-u + sin(t)", 1.0, 1.0, U0=0.0, U1=1.0)
    u, _ = picard_solve(p, tol=1e-12)
    lin = solve(LinearProblem.from_expression(CFOrder(0.3), -1.0, "sin(t)", p.grid, 0.0, 1.0))
    assert np.max(np.abs(u.values - lin.u.values)) <= 1e-5


def test_successive_differences_decay_geometrically():
    # phi = 0.5 u declared with L1 = L2 = 1: q = 0.8
    p = NonlinearProblem.from_expression(HALF, 0.4, "0.5*u", 1.0, 1.0, U0=1.0)
    _, state = picard_solve(p, tol=1e-13)
    d = state.successive_diffs
    assert len(d) >= 3
    for k in range(1, len(d) - 1):
        if d[k] > 1e-14:
            assert d[k + 1] / d[k] <= state.q + 0.05


def test_nonlinear_phi_decay_and_bound():
    # phi = sin(u) + t: |phi_u| <= 1, and the total derivative is bounded by L1 = 1 too
    p = NonlinearProblem.from_expression(CFOrder(0.4), 0.3, "sin(u) + t", 1.0, 1.0, U0=0.2, U1=0.1)
    u, state = picard_solve(p, tol=1e-12)
    d = state.successive_diffs
    assert all(d[k + 1] <= (state.q + 0.05) * d[k] for k in range(1, len(d) - 1) if d[k] > 1e-14)
    # the Banach a-posteriori bound holds against a tighter solve
    tight, _ = picard_solve(p, tol=1e-14, max_iter=200)
    assert np.max(np.abs(u.values - tight.values)) <= state.error_bound + 1e-14


def test_fixed_point_residual():
    p = NonlinearProblem.from_expression(CFOrder(0.4), 0.3, "sin(u) + t", 1.0, 1.0, U0=0.2)
    tol = 1e-10
    u, _ = picard_solve(p, tol=tol)
    assert np.max(np.abs(apply_N(p, u).values - u.values)) <= tol


def test_uniqueness_from_different_starts():
    p = NonlinearProblem.from_expression(HALF, 0.4, "0.5*u + cos(t)*u^2/4", 1.0, 1.0, U0=1.0, U1=-0.5)
    tol = 1e-10
    a, _ = picard_solve(p, tol=tol)
    b, _ = picard_solve(p, tol=tol, u_init=p.grid.zeros())
    assert np.max(np.abs(a.values - b.values)) <= 2 * tol


def test_refuses_non_contractive():
    p = NonlinearProblem(HALF, 1.0, linear_phi(1.0), 1.0, 1.0)
    with pytest.raises(NotContractive) as err:
        picard_solve(p)
    assert err.value.q == pytest.approx(2.0)
    assert "not contractive" in str(err.value)


def test_max_iterations():
    p = NonlinearProblem(HALF, 0.4, linear_phi(0.5), 1.0, 1.0, U0=1.0)
    with pytest.raises(MaxIterationsExceeded) as err:
        picard_solve(p, tol=1e-14, max_iter=2)
    assert err.value.iterations == 2
    assert err.value.last_diff > 1e-14


def test_tolerance_must_be_positive():
    p = NonlinearProblem(HALF, 0.4, linear_phi(0.5), 1.0, 1.0)
    with pytest.raises(ValueError):
        picard_solve(p, tol=0.0)


def test_iterate_must_live_on_problem_grid():
    p = NonlinearProblem(HALF, 0.4, linear_phi(0.5), 1.0, 1.0)
    with pytest.raises(ValueError):
        apply_N(p, Grid(0.0, 1.0, 2001).zeros())
