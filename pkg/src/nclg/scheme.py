"""Lagrange-Galerkin BDF-q time stepping for the conservative advection-diffusion equation.

    dc/dt + div(u c) - mu lap c + a0 c = f,   (mu grad c) . n = 0 on the boundary.

Conservative variant: transported terms carry the flow-map Jacobian, so
mass moves with the flow. Non-conservative variant: the classical LG
discretisation of Dc/Dt + (div u) c, with the transported terms unweighted
and the divergence term treated implicitly.
"""
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
import logging
import math
import time as _time

import numpy as np

from .characteristics import DEFAULT_TIME_GAUSS, RKConfig, build_step_feet, explicit_rk_tableau
from . import kernels
from .basis import lagrange_basis
from .quadrature import composite_quadrature, simplex_quadrature
from .solver import SolverConfig, SolverError, cg_solve
from .space import (ScalarField, assemble_convection, assemble_mass, assemble_reaction_diffusion,
                    assemble_weighted_mass, interpolate, load_vector, mass_weights)

log = logging.getLogger(__name__)

MAX_ORDER = 5
VARIANTS = ("conservative", "nonconservative")


def bdf_coefficients_exact(q):
    """BDF-q coefficients as fractions: alpha_0 = sum 1/j, alpha_i = (-1)^i C(q,i)/i."""
    if int(q) != q or not 1 <= q <= MAX_ORDER:
        raise ValueError(f"BDF order must be in 1..{MAX_ORDER}, got {q!r}")
    q = int(q)
    a = [sum(Fraction(1, j) for j in range(1, q + 1))]
    a += [Fraction((-1) ** i * math.comb(q, i), i) for i in range(1, q + 1)]
    return a


def bdf_coefficients(q):
    return np.array([float(v) for v in bdf_coefficients_exact(q)])


@dataclass(frozen=True)
class SchemeConfig:
    q: int
    dt: float
    mu: float
    a0: float = 0.0
    variant: str = "conservative"
    quad_degree: int | None = None  # default 2k + 2
    quad_refine: int = 1  # composite rule on quad_refine^2 sub-triangles
    startup: str = "exact"
    rk: RKConfig = field(default_factory=RKConfig)
    time_gauss: int = DEFAULT_TIME_GAUSS
    solver: SolverConfig = field(default_factory=SolverConfig)

    def __post_init__(self):
        bdf_coefficients_exact(self.q)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.mu > 0:
            raise ValueError("mu must be positive")
        if self.a0 < 0:
            raise ValueError("a0 must be non-negative")
        if self.variant not in VARIANTS:
            raise ValueError(f"variant must be one of {VARIANTS}, got {self.variant!r}")
        if int(self.quad_refine) != self.quad_refine or self.quad_refine < 1:
            raise ValueError("quad_refine must be a positive integer")
        if self.startup not in ("exact", "rk"):
            raise ValueError(f"startup must be 'exact' or 'rk', got {self.startup!r}")


class History:
    """The last q solution levels, oldest first."""

    def __init__(self, q, dt):
        self.q = q
        self.dt = dt
        self._buf = deque(maxlen=q)

    def push(self, t, fld):
        if self._buf:
            t_last = self._buf[-1][0]
            if not t > t_last or abs((t - t_last) - self.dt) > 1e-9 * max(1.0, self.dt):
                raise ValueError(f"history times must advance by dt={self.dt}: {t_last} -> {t}")
        self._buf.append((float(t), fld))

    def __len__(self):
        return len(self._buf)

    def __getitem__(self, i):
        """``history[i]`` is the level n - i, i = 1..q, relative to the next step n."""
        return self._buf[-i]

    @property
    def last_time(self):
        return self._buf[-1][0]

    @property
    def times(self):
        return [t for t, _ in self._buf]


class Operators:
    """Time-independent matrices shared by all steps of a run."""

    def __init__(self, space, config):
        self.space = space
        base = simplex_quadrature(config.quad_degree or 2 * space.k + 2)
        self.quad = composite_quadrature(base, config.quad_refine)
        self.M = assemble_mass(space, self.quad)
        self.A = assemble_reaction_diffusion(space, config.mu, config.a0, self.quad)
        self.phi = lagrange_basis(space.k, self.quad.points)
        self.mass_weights = mass_weights(space, self.quad)
        alpha = bdf_coefficients(config.q)
        self.step_matrix = (alpha[0] * self.M + config.dt * self.A).tocsr()


def transport_rhs(history, feet, alpha, variant, space, quad, phi=None):
    """-sum_{i>=1} alpha_i (J~ c^{n-i}(X~), chi_j); J~ is dropped for the non-conservative variant."""
    if len(feet) != len(alpha) - 1 or len(history) < len(feet):
        raise ValueError("need one feet set and one history level per BDF coefficient")
    if phi is None:
        phi = lagrange_basis(space.k, quad.points)
    wdet = space.mesh.detB[:, None] * quad.weights[None, :]
    acc = np.zeros(space.mesh.n_elements * space.nloc)
    for i, fd in enumerate(feet, start=1):
        t_i, fld = history[i]
        if abs(t_i - fd.level) > 1e-9 * max(1.0, abs(t_i)):
            raise ValueError(f"feet level {fd.level} does not match history time {t_i}")
        vals = kernels.evaluate(space.k, space.cell_dofs, fld.coeffs,
                                fd.host.ravel(), fd.xhat.reshape(-1, 2)).reshape(fd.host.shape)
        w = vals * wdet
        if variant == "conservative":
            w = w * fd.jacobian
        acc -= alpha[i] * (w @ phi).ravel()
    return np.bincount(space.cell_dofs.ravel(), weights=acc, minlength=space.ndof)


@dataclass
class StepInfo:
    iterations: int
    residual: float
    clamped: int


def step(history, config, ops, velocity, source, t_n, x0=None):
    """Advance one BDF step to ``t_n``; returns (field, StepInfo). Does not push."""
    space, quad = ops.space, ops.quad
    q = config.q
    if len(history) < q or abs(history.last_time + config.dt - t_n) > 1e-9 * max(1.0, config.dt):
        raise ValueError("history must hold q levels ending at t_n - dt")
    alpha = bdf_coefficients(q)
    conservative = config.variant == "conservative"
    _, feet = build_step_feet(space, t_n, config.dt, q, velocity, quad, config.rk,
                              config.time_gauss, with_jacobian=conservative)
    b = transport_rhs(history, feet, alpha, config.variant, space, quad, ops.phi)
    if source is not None:
        b += config.dt * load_vector(space, source, t_n, quad)
    K = ops.step_matrix
    if not conservative:
        K = (K + config.dt * assemble_weighted_mass(space, velocity.div, t_n, quad)).tocsr()
    if x0 is None:
        x0 = history[1][1].coeffs
    try:
        c, its, res = cg_solve(K, b, x0, config.solver)
    except SolverError as err:
        raise SolverError(f"step at t={t_n}: {err}", err.residual, err.iterations) from err
    return ScalarField(space, c), StepInfo(its, res, sum(fd.n_clamped for fd in feet))


def startup(problem, space, config, ops=None):
    """Starting levels c^0..c^{q-1} as (t, field) pairs."""
    dt, q = config.dt, config.q
    if config.startup == "exact":
        if getattr(problem, "exact", None) is None:
            raise ValueError("exact startup needs a problem with a known solution")
        return [(i * dt, interpolate(space, problem.exact, i * dt)) for i in range(q)]
    c0 = interpolate(space, problem.initial, 0.0)
    levels = [(0.0, c0)]
    if q == 1:
        return levels
    ops = ops or Operators(space, config)
    order = min(q - 1, 4)
    mcfg = SolverConfig(tol=1e-14)
    source = getattr(problem, "source", None)

    def rhs(c, t):
        r = -(assemble_convection(space, problem.velocity, t, ops.quad) @ c) - ops.A @ c
        if source is not None:
            r += load_vector(space, source, t, ops.quad)
        return cg_solve(ops.M, r, c, mcfg)[0]

    c = c0.coeffs.copy()
    h = dt / 2
    A_rk, b_rk, c_rk = explicit_rk_tableau(order)
    for lev in range(1, q):
        for sub in range(2):
            t = (lev - 1) * dt + sub * h
            ks = []
            for s in range(len(b_rk)):
                y = c + h * sum(A_rk[s, r] * ks[r] for r in range(s) if A_rk[s, r] != 0.0)
                ks.append(rhs(y, t + c_rk[s] * h))
            c = c + h * sum(b_rk[s] * ks[s] for s in range(len(b_rk)))
        levels.append((lev * dt, ScalarField(space, c)))
    return levels


def n_time_steps(T, dt):
    """Number of time levels after t=0: floor(T/dt), tolerant to rounding."""
    return int(math.floor(T / dt + 1e-9))


@dataclass
class RunResult:
    field: ScalarField
    times: list
    mass: list
    iterations: list
    clamped: list
    runtime: float


def run(problem, space, config, T=None, observers=()):
    """Startup plus BDF steps n = q..N with N = floor(T/dt).

    ``observers`` are called as ``obs(n, t, field)`` for every level,
    startup levels included.
    """
    T = problem.T if T is None else T
    N = n_time_steps(T, config.dt)
    if N < config.q:
        raise ValueError(f"T/dt = {N} steps is fewer than the BDF order {config.q}")
    t0 = _time.perf_counter()
    ops = Operators(space, config)
    source = getattr(problem, "source", None)
    res = RunResult(None, [], [], [], [], 0.0)
    hist = History(config.q, config.dt)

    def record(n, t, fld, info):
        res.times.append(t)
        res.mass.append(float(np.sum(ops.mass_weights * fld.coeffs)))
        res.iterations.append(info.iterations if info else 0)
        res.clamped.append(info.clamped if info else 0)
        for obs in observers:
            obs(n, t, fld)

    for n, (t, fld) in enumerate(startup(problem, space, config, ops)):
        hist.push(t, fld)
        record(n, t, fld, None)
    for n in range(config.q, N + 1):
        t_n = n * config.dt
        fld, info = step(hist, config, ops, problem.velocity, source, t_n)
        hist.push(t_n, fld)
        record(n, t_n, fld, info)
        log.debug("step %d t=%.6g its=%d clamped=%d", n, t_n, info.iterations, info.clamped)
    res.field = hist[1][1]
    res.runtime = _time.perf_counter() - t0
    return res
