import math

import numpy as np
import pytest

from nclg.harness import (ConvergenceTable, InstantL2, TrajectoryErrors, convergence_sweep, error_l2_final,
                          error_mass_final, observed_order, relative_errors_trajectory, pulse_problem,
                          simulate, smooth_neumann_problem)
from nclg.mesh import build_uniform_square_mesh
from nclg.space import ScalarField, build_space, interpolate


@pytest.fixture(scope="module")
def pulse():
    return pulse_problem(0.01)


def test_pulse_values(pulse):
    origin = np.zeros((1, 2))
    np.testing.assert_allclose(pulse.velocity.u(origin, 0.0), [[1.0, 1.0]])
    assert pulse.exact(origin, 0.0)[0] == 1.0
    assert pulse.velocity.div(origin, 0.0)[0] == -2.0
    assert pulse.box == (-1.0, 1.0, -1.0, 1.0) and pulse.T == 0.5 and pulse.a0 == 0.0 and pulse.source is None
    with pytest.raises(ValueError):
        pulse_problem(0.0)


def test_pulse_divergence_matches_finite_differences(pulse):
    x = np.array([[0.3, -0.2]])
    h = 1e-6
    fd = sum((pulse.velocity.u(x + h * e, 0.4)[0, d] - pulse.velocity.u(x - h * e, 0.4)[0, d]) / (2 * h)
             for d, e in enumerate(np.eye(2)))
    assert pulse.velocity.div(x, 0.4)[0] == pytest.approx(fd, abs=1e-8)


def test_pulse_solves_the_equation(pulse):
    # residual of c_t + div(u c) - mu lap c by central differences
    x = np.array([[0.1, 0.25]])
    t, h = 0.2, 1e-4
    c = lambda y, s: pulse.exact(y, s)[0]
    ct = (c(x, t + h) - c(x, t - h)) / (2 * h)
    flux = 0.0
    lap = 0.0
    for d, e in enumerate(np.eye(2)):
        uc = lambda y: pulse.velocity.u(y, t)[0, d] * c(y, t)
        flux += (uc(x + h * e) - uc(x - h * e)) / (2 * h)
        lap += (c(x + h * e, t) - 2 * c(x, t) + c(x - h * e, t)) / h ** 2
    assert abs(ct + flux - pulse.mu * lap) < 1e-5 * max(1.0, abs(ct))


def test_smooth_problem_source_closes_equation():
    prob = smooth_neumann_problem(mu=0.7, a0=0.3)
    x = np.array([[0.41, -0.63]])
    t, h = 0.3, 1e-4
    c = lambda y, s: prob.exact(y, s)[0]
    ct = (c(x, t + h) - c(x, t - h)) / (2 * h)
    flux = lap = 0.0
    for d, e in enumerate(np.eye(2)):
        uc = lambda y: prob.velocity.u(y, t)[0, d] * c(y, t)
        flux += (uc(x + h * e) - uc(x - h * e)) / (2 * h)
        lap += (c(x + h * e, t) - 2 * c(x, t) + c(x - h * e, t)) / h ** 2
    resid = ct + flux - prob.mu * lap + prob.a0 * c(x, t) - prob.source(x, t)[0]
    assert abs(resid) < 1e-5
    assert prob.velocity.boundary_normal_flux(prob.box) < 1e-12


def test_error_metrics_basic(pulse):
    space = build_space(build_uniform_square_mesh(N=16), 5)
    ch = interpolate(space, pulse.exact, 0.5)
    assert error_l2_final(ch, pulse) < 1e-2
    doubled = ScalarField(space, 2 * ch.coeffs)
    two_c = lambda x, t: 2 * pulse.exact(x, t)
    assert error_l2_final(doubled, pulse) == pytest.approx(
        error_l2_final(ScalarField(space, interpolate(space, two_c, 0.5).coeffs), pulse), rel=1e-12)
    assert error_mass_final(ScalarField(space, 1.01 * ch.coeffs), pulse) == pytest.approx(0.01, abs=2e-4)


def test_error_of_representable_solution_is_zero():
    prob = smooth_neumann_problem()
    poly = lambda x, t: 1.0 + x[..., 0] ** 2 - 0.5 * x[..., 1]
    from dataclasses import replace
    prob = replace(prob, exact=poly)
    space = build_space(build_uniform_square_mesh(N=4), 2)
    ch = interpolate(space, poly, 0.0)
    assert error_l2_final(ch, prob, 0.0) < 1e-13
    assert error_mass_final(ch, prob, 0.0) < 1e-13
    # mean-free perturbation leaves the mass error at zero
    delta = interpolate(space, lambda x, t: x[..., 0] * x[..., 1], 0.0).coeffs
    assert error_mass_final(ScalarField(space, ch.coeffs + 0.3 * delta), prob, 0.0) < 1e-12


def test_error_metrics_are_fine_for_high_order():
    prob = smooth_neumann_problem()
    space = build_space(build_uniform_square_mesh(N=16), 5)
    assert error_l2_final(interpolate(space, prob.exact, 0.5), prob) < 1e-6


def test_zero_denominator(pulse):
    from dataclasses import replace
    prob = replace(pulse, exact=lambda x, t: np.zeros(np.shape(x)[:-1]))
    space = build_space(build_uniform_square_mesh(N=2), 1)
    with pytest.raises(ValueError):
        error_l2_final(interpolate(space, lambda x, t: 1.0), prob)
    with pytest.raises(ValueError):
        error_mass_final(interpolate(space, lambda x, t: 1.0), prob)


def test_trajectory_metrics_use_interpolant(pulse):
    space = build_space(build_uniform_square_mesh(N=8), 2)
    traj = [(t, interpolate(space, pulse.exact, t)) for t in (0.0, 0.1, 0.2)]
    assert relative_errors_trajectory(traj, pulse) == (0.0, 0.0)
    assert relative_errors_trajectory(traj[:1], pulse) == (0.0, 0.0)
    with pytest.raises(ValueError):
        relative_errors_trajectory([], pulse)
    with pytest.raises(ValueError):
        TrajectoryErrors(pulse, space).result()


def test_trajectory_metrics_single_level_value(pulse):
    space = build_space(build_uniform_square_mesh(N=8), 2)
    ref = interpolate(space, pulse.exact, 0.0)
    eh_l2, eh_m = relative_errors_trajectory([(0.0, ScalarField(space, 1.5 * ref.coeffs))], pulse)
    assert eh_l2 == pytest.approx(0.5) and eh_m == pytest.approx(0.5)


def test_metrics_invariant_under_dof_permutation(pulse):
    a = build_space(build_uniform_square_mesh(N=8), 2)
    f = lambda x, t: np.cos(x[..., 0]) + x[..., 1]
    perm = np.random.default_rng(0).permutation(a.ndof)
    from nclg.space import LagrangeSpace
    inv = np.argsort(perm)
    a2 = LagrangeSpace(a.mesh, 2, a.dof_coords[perm], inv[a.cell_dofs])
    c = interpolate(a, f).coeffs
    assert error_l2_final(ScalarField(a2, c[perm]), pulse, 0.0) == pytest.approx(
        error_l2_final(ScalarField(a, c), pulse, 0.0), rel=1e-13)
    assert error_mass_final(ScalarField(a2, c[perm]), pulse, 0.0) == pytest.approx(
        error_mass_final(ScalarField(a, c), pulse, 0.0), rel=1e-12)


def test_instant_observer_and_report(pulse):
    rep, res = simulate(pulse, 8, 1, 1, 0.1)
    assert len(rep.times) == len(rep.mass) == len(rep.e_l2_inst) == 6
    assert rep.e_l2_inst[0] == pytest.approx(error_l2_final(interpolate(res.field.space, pulse.exact, 0.0), pulse, 0.0))
    assert rep.e_l2 == pytest.approx(rep.e_l2_inst[-1])
    inst = InstantL2(pulse)
    inst(0, 0.5, res.field)
    assert inst.values == [rep.e_l2]


def test_observed_order():
    assert observed_order(1.0, 0.25) == pytest.approx(2.0)
    assert observed_order(1.0, 0.125, ratio=2.0) == pytest.approx(3.0)
    assert math.isnan(observed_order(0.0, 1.0))


def test_sweep_temporal_order_q1():
    prob = smooth_neumann_problem()
    grid = [dict(N=8, k=3, q=1, dt=0.02), dict(N=8, k=3, q=1, dt=0.01)]
    table = convergence_sweep(prob, grid, T=0.2)
    assert 0.7 <= table.orders()[0] <= 1.3
    assert 0.7 <= table.rows[1]["order_L2"] <= 1.3


def test_sweep_spatial_order_k1():
    prob = smooth_neumann_problem()
    grid = [dict(N=8, k=1, q=2, dt=0.005), dict(N=16, k=1, q=2, dt=0.005)]
    table = convergence_sweep(prob, grid, T=0.1)
    assert 1.6 <= table.orders()[0] <= 2.4


def test_sweep_csv_and_failures():
    prob = pulse_problem(0.05)
    grid = [dict(N=4, k=1, q=1, dt=0.1), dict(N=8, k=1, q=1, dt=0.1), dict(N=4, k=9, q=1, dt=0.1)]
    table = convergence_sweep(prob, grid, ["conservative", "nonconservative"], T=0.2)
    assert len(table.rows) == 6
    bad = [r for r in table.rows if "error" in r]
    assert len(bad) == 2 and all(math.isnan(r["e_L2"]) for r in bad)
    text = table.to_csv()
    lines = text.splitlines()
    assert lines[0].startswith("# mu=0.05")
    assert "# T=0.2" in lines
    header = next(l for l in lines if not l.startswith("#"))
    assert header == "N,k,q,dt,variant,e_L2,e_m,eh_L2,eh_m,order_L2,runtime_s"
    assert len(lines) == lines.index(header) + 1 + 6


def test_sweep_rejects_empty_inputs(pulse):
    with pytest.raises(ValueError):
        convergence_sweep(pulse, [dict(N=4, k=1, q=1, dt=0.1)], [])
    with pytest.raises(ValueError):
        convergence_sweep(pulse, [])
    with pytest.raises(ValueError):
        ConvergenceTable(rows=[{"N": 4, "dt": 0.1, "e_L2": 1.0, "variant": "conservative"}]).orders()
