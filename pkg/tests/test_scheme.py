from fractions import Fraction

import numpy as np
import pytest

from nclg.characteristics import VelocityField, ZERO_VELOCITY, build_step_feet
from nclg.harness import ManufacturedProblem, error_l2_final, pulse_problem, smooth_neumann_problem
from nclg.mesh import build_uniform_square_mesh
from nclg.scheme import (History, Operators, SchemeConfig, bdf_coefficients, bdf_coefficients_exact,
                         n_time_steps, run, startup, step, transport_rhs)
from nclg.solver import SolverConfig
from nclg.space import ScalarField, build_space, interpolate, mass_weights

from oracles import backward_euler_heat, bdf_exactness_coefficients

PULSE = lambda x, t=0.0: np.exp(-4 * (x[..., 0] ** 2 + (x[..., 1] - 0.2) ** 2))
EXPANSION = VelocityField(lambda x, t: np.array(x, dtype=float),
                          lambda x, t: np.full(np.shape(x)[:-1], 2.0), 2.0)
CELLULAR = VelocityField(
    lambda x, t: np.stack([np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1]),
                           -np.cos(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1])], axis=-1),
    lambda x, t: np.zeros(np.shape(x)[:-1]), 0.0)


def still_problem(initial=PULSE, mu=0.1, a0=0.0, source=None, T=0.2):
    return ManufacturedProblem(box=(-1, 1, -1, 1), velocity=ZERO_VELOCITY, exact=None,
                               initial=initial, source=source, mu=mu, a0=a0, T=T)


# -- BDF coefficients --------------------------------------------------------

def test_bdf_anchor_values():
    assert bdf_coefficients_exact(1) == [1, -1]
    assert bdf_coefficients_exact(2) == [Fraction(3, 2), -2, Fraction(1, 2)]


@pytest.mark.parametrize("q", [1, 2, 3, 4, 5])
def test_bdf_exactness(q):
    a = bdf_coefficients(q)
    assert abs(a.sum()) < 1e-14
    np.testing.assert_allclose(a, bdf_exactness_coefficients(q), atol=1e-12)
    for t_n, dt in ((0.0, 1.0), (0.7, 0.03), (-2.0, 0.5)):
        for m in range(q + 1):
            lhs = sum(a[i] * (t_n - i * dt) ** m for i in range(q + 1))
            rhs = dt * m * t_n ** (m - 1) if m else 0.0
            assert lhs == pytest.approx(rhs, rel=1e-11, abs=1e-11 * dt * max(1, abs(t_n)) ** q)


@pytest.mark.parametrize("q", [0, 6, 2.5])
def test_bdf_order_out_of_range(q):
    with pytest.raises(ValueError):
        bdf_coefficients(q)


# -- configuration and history ---------------------------------------------

@pytest.mark.parametrize("kw", [dict(dt=0.0), dict(mu=0.0), dict(a0=-1.0), dict(variant="upwind"),
                                dict(startup="euler"), dict(q=6)])
def test_config_validation(kw):
    base = dict(q=2, dt=0.1, mu=0.1)
    base.update(kw)
    with pytest.raises(ValueError):
        SchemeConfig(**base)


def test_history_enforces_spacing():
    h = History(2, 0.1)
    h.push(0.0, "a")
    h.push(0.1, "b")
    h.push(0.2, "c")
    assert len(h) == 2 and h[1] == (0.2, "c") and h[2] == (0.1, "b")
    with pytest.raises(ValueError):
        h.push(0.35, "d")


def test_n_time_steps_floor():
    assert n_time_steps(0.5, 0.01) == 50
    assert n_time_steps(0.5, 0.3) == 1
    assert n_time_steps(1.0, 0.1) == 10


# -- transport right-hand side ---------------------------------------------

def _setup(k=2, N=6, q=2, dt=0.1, variant="conservative"):
    space = build_space(build_uniform_square_mesh(N=N), k)
    cfg = SchemeConfig(q=q, dt=dt, mu=0.1, variant=variant)
    return space, cfg, Operators(space, cfg)


def _history(space, q, dt, t_n, fields):
    h = History(q, dt)
    for i in range(q, 0, -1):
        h.push(t_n - i * dt, ScalarField(space, fields[i]))
    return h


def test_transport_rhs_zero_velocity_is_mass_product():
    space, cfg, ops = _setup(q=3)
    rng = np.random.default_rng(0)
    fields = {i: rng.standard_normal(space.ndof) for i in (1, 2, 3)}
    t_n = 0.3
    _, feet = build_step_feet(space, t_n, cfg.dt, 3, ZERO_VELOCITY, ops.quad)
    a = bdf_coefficients(3)
    got = transport_rhs(_history(space, 3, cfg.dt, t_n, fields), feet, a, "conservative", space, ops.quad)
    ref = -sum(a[i] * (ops.M @ fields[i]) for i in (1, 2, 3))
    np.testing.assert_allclose(got, ref, atol=1e-12)


def test_transport_rhs_constant_field_divergence_free():
    space, cfg, ops = _setup(q=3, dt=0.05)
    ones = {i: np.ones(space.ndof) for i in (1, 2, 3)}
    t_n = 0.4
    _, feet = build_step_feet(space, t_n, cfg.dt, 3, CELLULAR, ops.quad)
    a = bdf_coefficients(3)
    got = transport_rhs(_history(space, 3, cfg.dt, t_n, ones), feet, a, "conservative", space, ops.quad)
    np.testing.assert_allclose(got, a[0] * mass_weights(space, ops.quad), atol=1e-12)


@pytest.mark.parametrize("level", [1, 2])
def test_transport_rhs_jacobian_ratio(level):
    dt, t_n = 0.1, 0.0
    # P3: every basis function has positive integral, so entrywise ratios are well posed
    space, cfg, ops = _setup(k=3, q=2, dt=dt)
    fields = {i: np.zeros(space.ndof) for i in (1, 2)}
    fields[level] = np.ones(space.ndof)
    hist = _history(space, 2, dt, t_n, fields)
    _, feet = build_step_feet(space, t_n, dt, 2, EXPANSION, ops.quad)
    a = bdf_coefficients(2)
    cons = transport_rhs(hist, feet, a, "conservative", space, ops.quad)
    non = transport_rhs(hist, feet, a, "nonconservative", space, ops.quad)
    np.testing.assert_allclose(cons / non, np.exp(-0.2 * level), rtol=1e-10)


def test_transport_rhs_rejects_misaligned_levels():
    space, cfg, ops = _setup(q=1)
    hist = _history(space, 1, 0.1, 0.5, {1: np.ones(space.ndof)})
    _, feet = build_step_feet(space, 0.6, 0.1, 1, ZERO_VELOCITY, ops.quad)
    with pytest.raises(ValueError):
        transport_rhs(hist, feet, bdf_coefficients(1), "conservative", space, ops.quad)


# -- single steps ------------------------------------------------------------

def test_constant_is_steady_without_flow():
    space, cfg, ops = _setup(q=2)
    hist = _history(space, 2, cfg.dt, 0.2, {1: np.ones(space.ndof), 2: np.ones(space.ndof)})
    fld, info = step(hist, cfg, ops, ZERO_VELOCITY, None, 0.2)
    np.testing.assert_allclose(fld.coeffs, 1.0, atol=1e-12)
    assert info.clamped == 0


def test_reaction_balanced_by_source():
    space = build_space(build_uniform_square_mesh(N=4), 2)
    cfg = SchemeConfig(q=1, dt=0.1, mu=0.1, a0=1.0)
    ops = Operators(space, cfg)
    hist = _history(space, 1, 0.1, 0.1, {1: np.ones(space.ndof)})
    fld, _ = step(hist, cfg, ops, ZERO_VELOCITY, lambda x, t: 1.0, 0.1)
    np.testing.assert_allclose(fld.coeffs, 1.0, atol=1e-12)


def test_step_requires_aligned_history():
    space, cfg, ops = _setup(q=2)
    hist = _history(space, 2, cfg.dt, 0.2, {1: np.ones(space.ndof), 2: np.ones(space.ndof)})
    with pytest.raises(ValueError):
        step(hist, cfg, ops, ZERO_VELOCITY, None, 0.35)


def test_backward_euler_reduction():
    mesh = build_uniform_square_mesh(N=16)
    space = build_space(mesh, 1)
    prob = still_problem(T=0.1)
    cfg = SchemeConfig(q=1, dt=0.01, mu=prob.mu, startup="rk", solver=SolverConfig(tol=1e-15))
    levels = []
    run(prob, space, cfg, observers=[lambda n, t, f: levels.append(f.coeffs.copy())])
    ref = backward_euler_heat(mesh.vertices, mesh.elements, interpolate(space, prob.initial).coeffs,
                              prob.mu, 0.01, 10)
    assert len(levels) == len(ref) == 11
    for got, want in zip(levels, ref):
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-12)


def test_variants_coincide_without_flow():
    space = build_space(build_uniform_square_mesh(N=6), 2)
    prob = still_problem(T=0.1)
    out = {}
    for v in ("conservative", "nonconservative"):
        out[v] = run(prob, space, SchemeConfig(q=3, dt=0.02, mu=prob.mu, variant=v, startup="rk")).field.coeffs
    np.testing.assert_allclose(out["conservative"], out["nonconservative"], atol=1e-12)


# -- startup -----------------------------------------------------------------

def test_startup_q1_is_initial_interpolant():
    space = build_space(build_uniform_square_mesh(N=4), 2)
    prob = still_problem()
    lv = startup(prob, space, SchemeConfig(q=1, dt=0.1, mu=0.1, startup="rk"))
    assert len(lv) == 1
    np.testing.assert_array_equal(lv[0][1].coeffs, interpolate(space, prob.initial).coeffs)


def test_rk_startup_keeps_stationary_state():
    space = build_space(build_uniform_square_mesh(N=4), 2)
    prob = still_problem(initial=lambda x, t=0.0: 2.0 + 0 * x[..., 0])
    lv = startup(prob, space, SchemeConfig(q=4, dt=0.1, mu=0.1, startup="rk"))
    assert [t for t, _ in lv] == pytest.approx([0.0, 0.1, 0.2, 0.3])
    for _, f in lv:
        np.testing.assert_allclose(f.coeffs, 2.0, atol=1e-12)


def test_exact_startup_is_interpolation():
    prob = pulse_problem()
    space = build_space(build_uniform_square_mesh(N=8), 2)
    lv = startup(prob, space, SchemeConfig(q=3, dt=0.01, mu=0.01))
    for i, (t, f) in enumerate(lv):
        assert t == i * 0.01
        np.testing.assert_array_equal(f.coeffs, interpolate(space, prob.exact, t).coeffs)


def test_exact_startup_needs_solution():
    space = build_space(build_uniform_square_mesh(N=4), 1)
    with pytest.raises(ValueError):
        startup(still_problem(), space, SchemeConfig(q=2, dt=0.1, mu=0.1))


def test_rk_startup_tracks_exact_solution():
    # explicit startup is only stable in the advection-dominated regime
    prob = pulse_problem(0.01)
    space = build_space(build_uniform_square_mesh(N=16), 2)
    lv = startup(prob, space, SchemeConfig(q=3, dt=0.01, mu=prob.mu, startup="rk"))
    for t, f in lv:
        floor = error_l2_final(interpolate(space, prob.exact, t), prob, t)
        assert error_l2_final(f, prob, t) < 1.1 * floor


# -- full runs ---------------------------------------------------------------

def test_run_single_step_when_T_equals_q_dt():
    space = build_space(build_uniform_square_mesh(N=4), 1)
    res = run(still_problem(), space, SchemeConfig(q=3, dt=0.1, mu=0.1, startup="rk"), T=0.3)
    assert res.times == pytest.approx([0.0, 0.1, 0.2, 0.3])
    assert res.iterations[:3] == [0, 0, 0] and res.iterations[3] > 0


def test_run_rejects_short_horizon():
    space = build_space(build_uniform_square_mesh(N=4), 1)
    with pytest.raises(ValueError):
        run(still_problem(), space, SchemeConfig(q=3, dt=0.1, mu=0.1, startup="rk"), T=0.2)


def test_rotating_pulse_run_has_51_samples():
    prob = pulse_problem(0.01)
    space = build_space(build_uniform_square_mesh(N=8), 2)
    res = run(prob, space, SchemeConfig(q=2, dt=0.01, mu=0.01))
    assert len(res.mass) == 51
    assert res.times[-1] == pytest.approx(0.5)
    assert np.all(np.isfinite(res.field.coeffs))


def test_mass_constant_without_flow():
    space = build_space(build_uniform_square_mesh(N=6), 3)
    cfg = SchemeConfig(q=2, dt=0.02, mu=0.1, startup="rk", solver=SolverConfig(tol=1e-15))
    res = run(still_problem(T=0.3), space, cfg)
    np.testing.assert_allclose(res.mass, res.mass[0], rtol=0, atol=1e-12)


def test_conservative_mass_follows_expanding_flow_source_free():
    # Neumann diffusion + tangential divergence-free flow: mass constant
    space = build_space(build_uniform_square_mesh(N=8), 2)
    prob = ManufacturedProblem(box=(-1, 1, -1, 1), velocity=CELLULAR, exact=None, initial=PULSE,
                               mu=0.01, T=0.2)
    res = run(prob, space, SchemeConfig(q=2, dt=0.02, mu=0.01, startup="rk"))
    assert abs(res.mass[-1] - res.mass[0]) < 1e-3 * res.mass[0]


def test_runs_are_deterministic():
    prob = pulse_problem(0.05)
    space = build_space(build_uniform_square_mesh(N=6), 2)
    cfg = SchemeConfig(q=3, dt=0.02, mu=0.05)
    a = run(prob, space, cfg, T=0.1).field.coeffs
    b = run(prob, space, cfg, T=0.1).field.coeffs
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("q", [1, 2, 3])
def test_temporal_order_on_smooth_problem(q):
    prob = smooth_neumann_problem()
    space = build_space(build_uniform_square_mesh(N=8), 5)
    errs = []
    for dt in (0.1, 0.05, 0.025):
        res = run(prob, space, SchemeConfig(q=q, dt=dt, mu=prob.mu))
        errs.append(error_l2_final(res.field, prob, res.times[-1]))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(np.abs(orders - q) < 0.4), orders
