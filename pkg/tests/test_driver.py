import math

import numpy as np
import pytest

from conftest import one_d
from phidca.backward import backward_step
from phidca.core import GFunction, InvalidArgumentError, eval_F
from phidca.couplings import make_coupling
from phidca.driver import (
    SolverOptions,
    compute_gaps,
    dual_objective,
    phi_bregman_div,
    reference_inf_F,
    run_phi_dca,
    run_phi_dca_averaged,
    value_function,
)
from phidca.fixtures import fixture_names, get_fixture
from phidca.forward import forward_step


def test_quadratic_iterates_halve():
    tr = run_phi_dca(get_fixture("quad-1d"), [1.0], SolverOptions(max_iter=10, min_iter=10))
    xs = tr.iterates()[:, 0]
    assert np.array_equal(xs, 0.5 ** np.arange(11))
    assert tr.terminated_by == "MaxIter"
    assert [r.k for r in tr.records] == list(range(10))


def test_pl_one_step():
    tr = run_phi_dca(get_fixture("pl-quad", mu=1.0, L=1.0), [1.0])
    assert tr.records[0].x_next.tolist() == [0.0]
    assert tr.terminated_by == "GapTol" and len(tr.records) == 2


def test_fig2_illustrated_step_decreases():
    p = get_fixture("fig2-phi15")
    tr = run_phi_dca(p, [2.0], SolverOptions(max_iter=1))
    r = tr.records[0]
    assert r.F_value == 2.75
    assert r.F_next < r.F_value
    assert r.gap_primal > 0 and r.gap_dual > 0
    assert r.F_value - r.F_next == pytest.approx(r.gap_primal + r.gap_dual, abs=1e-14)


def test_fig2_second_step_breaks_monotonicity():
    # f is not Φ-convex around x = -1, so the dual gap turns negative at k = 1
    tr = run_phi_dca(get_fixture("fig2-phi15"), [2.0], SolverOptions(max_iter=2, min_iter=2))
    r = tr.records[1]
    assert r.gap_dual == pytest.approx(-1.8753, abs=1e-4)
    assert r.F_next > r.F_value
    assert abs(r.decrease_residual) <= 1e-14


def test_gap_examples():
    assert compute_gaps(get_fixture("quad-1d"), [1.0], [1.0], [0.5]) == (0.25, 0.125)
    assert compute_gaps(get_fixture("dca-quad"), [1.0], [2.0], [0.5]) == (0.5, 0.25)
    assert compute_gaps(get_fixture("quad-1d"), [0.0], [0.0], [0.0]) == (0.0, 0.0)


def test_infeasible_start_gap_is_infinite():
    p = get_fixture("fig2-phi15")
    tr = run_phi_dca(p, [5.0], SolverOptions(max_iter=2, min_iter=2))
    assert tr.records[0].gap_primal == math.inf
    assert tr.records[0].decrease_residual == math.inf
    assert math.isfinite(tr.records[1].gap_primal)
    assert p.g(tr.records[0].x_next) < math.inf


def test_phi_bregman_examples():
    assert phi_bregman_div(get_fixture("quad-1d"), [1.0], [0.0]) == 0.5
    zero_f = one_d(lambda x: 0 * x, lambda x: 0.0, coupling=make_coupling("Hoelder", H=1.0, nu=1.0))
    assert phi_bregman_div(zero_f, [3.0], [1.0]) == 2.0
    for name in fixture_names():
        p = get_fixture(name)
        x = p.meta["x0"]
        assert phi_bregman_div(p, x, x) == 0.0


def test_phi_bregman_quadratic_form():
    p = get_fixture("logistic-2d")
    L = p.coupling.L
    rng = np.random.default_rng(1)
    for _ in range(10):
        x, xb = rng.uniform(-1, 1, 2), rng.uniform(-1, 1, 2)
        d = p.f(x) - p.f(xb) - p.f.grad(xb) @ (x - xb) + L / 2 * np.sum((x - xb) ** 2)
        assert phi_bregman_div(p, x, xb) == pytest.approx(d, abs=1e-13)


def test_dual_objective_examples():
    assert dual_objective(get_fixture("dca-quad"), [2.0], along=[1.0]) == 0.5
    quad = get_fixture("quad-1d")
    assert dual_objective(quad, [1.0]) == pytest.approx(0.25, abs=1e-12)
    assert dual_objective(quad, [1.0], along=[1.0]) == 0.25
    lasso = get_fixture("lasso-2d")
    xs = lasso.known_minimizer
    G = dual_objective(lasso, forward_step(lasso, xs), along=xs)
    assert G == pytest.approx(lasso.known_inf_F, abs=1e-12)


def test_dual_objective_grid_needs_low_dimension():
    from phidca.core import Oracle, Problem

    p = Problem(f=Oracle(lambda x: np.zeros(np.shape(x)[:-1]), lambda x: np.zeros(3)), g=GFunction(3),
                coupling=make_coupling("Quadratic", L=1.0), dim=3)
    with pytest.raises(InvalidArgumentError):
        dual_objective(p, np.zeros(3))


def test_value_function():
    p = get_fixture("quad-1d")
    assert value_function(p, [1.0], [1.0]) == 0.25
    assert value_function(p, [0.0], [0.0]) == eval_F(p, [0.0])
    for x in np.linspace(-2, 2, 9):
        assert value_function(p, [x], [x]) <= eval_F(p, [x])


def test_averaged_with_unit_schedule_matches_plain():
    p = get_fixture("lasso-2d")
    plain = run_phi_dca(p, p.meta["x0"], SolverOptions(max_iter=30, min_iter=30))
    avg = run_phi_dca_averaged(p, p.meta["x0"], SolverOptions(max_iter=30, min_iter=30, schedule=[1.0] * 30))
    assert np.array_equal(plain.iterates(), avg.iterates())
    assert [r.gap_primal for r in plain.records] == [r.gap_primal for r in avg.records]


def test_averaged_first_step_uses_x0():
    p = get_fixture("logcosh-tensor", coupling="hoelder")
    tr = run_phi_dca_averaged(p, [1.0], SolverOptions(max_iter=3, min_iter=3))
    assert tr.records[0].w.tolist() == [1.0]
    x1 = tr.records[1].x
    assert tr.records[1].w == pytest.approx(0.25 * x1 + 0.75 * 1.0)


def test_averaged_decrease_identity_refers_to_anchor():
    p = get_fixture("cosh-aniso")
    tr = run_phi_dca_averaged(p, p.meta["x0"], SolverOptions(max_iter=50, min_iter=50))
    for r in tr.records:
        assert abs(r.F_next - r.F_w + r.gap_primal + r.gap_dual) <= 1e-12


def test_short_schedule_rejected():
    p = get_fixture("quad-1d")
    with pytest.raises(InvalidArgumentError):
        run_phi_dca_averaged(p, [1.0], SolverOptions(max_iter=5, min_iter=5, schedule=[0.5, 0.5]))


@pytest.mark.parametrize("h_name", ["cosh", "softplus"])
def test_a_ppm_instance(h_name):
    L = 2.0
    c = make_coupling("Anisotropic", h=h_name, L=L)
    g = GFunction(1, l1_weight=0.3, l1_center=0.2)
    p = one_d(lambda x: 0 * x, lambda x: 0.0, g=g, coupling=c)
    h = c.h
    xk = np.array([1.5])
    y = forward_step(p, xk)
    assert y.tolist() == xk.tolist()
    xp = backward_step(p, y).x_plus

    def env(x):
        return float(h.value(L * (x - xk))) / L

    grid = np.linspace(-1, 3, 40001)
    vals = [g.value(np.array([t])) + env(np.array([t])) for t in grid]
    assert abs(grid[int(np.argmin(vals))] - xp[0]) <= 1e-4
    # exact for h(0) = 0; the softplus reference carries the constant h(0) = 2 ln 2
    offset = float(h.value(np.zeros(1))) / L
    for x in (-0.5, 0.7, 2.5):
        assert phi_bregman_div(p, [x], xk) == pytest.approx(env(np.array([x])) - offset, abs=1e-14)
    if h_name == "cosh":
        assert offset == 0.0


def test_monotone_on_phi_convex_fixtures():
    for name in fixture_names():
        if name == "fig2-phi15":
            continue
        p = get_fixture(name)
        tr = run_phi_dca(p, p.meta["x0"], SolverOptions(max_iter=200))
        F = tr.F_values()
        assert np.all(np.diff(F) <= 1e-9), name
        assert tr.terminated_by != "DomainError", (name, tr.message)


def test_domain_error_ends_run_with_partial_trace():
    p = get_fixture("entropy-box")
    tr = run_phi_dca(p, [-1.0, 2.0])
    assert tr.terminated_by == "DomainError"
    assert tr.records == ()
    assert "DomainError" in tr.message


def test_gap_tol_stops_run():
    p = get_fixture("lasso-2d")
    tr = run_phi_dca(p, p.meta["x0"], SolverOptions(max_iter=5000, gap_tol=1e-10))
    assert tr.terminated_by == "GapTol"
    last = tr.records[-1]
    assert last.gap_primal + last.gap_dual <= 1e-10
    assert np.allclose(tr.final_x, p.known_minimizer, atol=1e-6)


def test_reference_inf_F():
    p = get_fixture("quad-1d")
    assert reference_inf_F(p, [1.0], SolverOptions(max_iter=10)) == (0.0, False)
    q = get_fixture("rosenbrock-2d")
    q = type(q)(**{**q.__dict__, "known_inf_F": None})
    value, estimated = reference_inf_F(q, q.meta["x0"], SolverOptions(max_iter=20))
    assert estimated and value < eval_F(q, q.meta["x0"])


def test_options_validation():
    with pytest.raises(InvalidArgumentError):
        SolverOptions(max_iter=0)
    with pytest.raises(InvalidArgumentError):
        SolverOptions(gap_tol=0.0)
    with pytest.raises(InvalidArgumentError):
        SolverOptions(averaging_p=-1.0)
