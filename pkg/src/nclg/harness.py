"""Manufactured problems, error metrics and convergence sweeps."""
from dataclasses import dataclass, field
import csv
import io
import math
import time

import numpy as np

from .characteristics import RKConfig, VelocityField
from .mesh import build_uniform_square_mesh
from .scheme import SchemeConfig, run
from .space import build_space, interpolate, values_at_quadrature, assemble_mass
from .quadrature import simplex_quadrature


@dataclass(frozen=True)
class ManufacturedProblem:
    box: tuple
    velocity: VelocityField
    exact: object          # c(x, t) or None
    initial: object        # c0(x, t=0)
    source: object = None  # f(x, t) or None for f = 0
    mu: float = 0.01
    a0: float = 0.0
    T: float = 0.5


def pulse_problem(mu=0.01):
    """Gaussian pulse carried by u = (1 + sin(t - x1), 1 + sin(t - x2)) on (-1, 1)^2.

    c(x, t) = exp(-(2 - cos(t - x1) - cos(t - x2)) / mu) solves the
    conservative equation with f = 0 and a0 = 0 for every mu > 0.
    """
    if not mu > 0:
        raise ValueError("mu must be positive")

    def u(x, t):
        x = np.asarray(x, dtype=float)
        return 1.0 + np.sin(t - x)

    def div(x, t):
        x = np.asarray(x, dtype=float)
        return -np.cos(t - x[..., 0]) - np.cos(t - x[..., 1])

    def exact(x, t):
        x = np.asarray(x, dtype=float)
        return np.exp(-(2.0 - np.cos(t - x[..., 0]) - np.cos(t - x[..., 1])) / mu)

    return ManufacturedProblem(
        box=(-1.0, 1.0, -1.0, 1.0),
        velocity=VelocityField(u, div, c_div=2.0),
        exact=exact,
        initial=lambda x, t=0.0: exact(x, 0.0),
        source=None,
        mu=mu,
        a0=0.0,
        T=0.5,
    )


def smooth_neumann_problem(mu=1.0, a0=0.0, T=0.5):
    """Smooth manufactured solution compatible with the boundary conditions.

    u = b(t) (sin pi x1, sin pi x2) with b(t) = 0.5 + 0.25 sin t, so u . n = 0
    on the square and div u != 0; c = 1 + g(t) cos(pi x1) cos(pi x2) with
    g(t) = exp(-t)/2 has zero normal derivative. f is whatever closes the equation.
    """
    pi = np.pi

    def beta(t):
        return 0.5 + 0.25 * np.sin(t)

    def gamma(t):
        return 0.5 * np.exp(-t)

    def u(x, t):
        return beta(t) * np.sin(pi * np.asarray(x, dtype=float))

    def div(x, t):
        x = np.asarray(x, dtype=float)
        return beta(t) * pi * (np.cos(pi * x[..., 0]) + np.cos(pi * x[..., 1]))

    def exact(x, t):
        x = np.asarray(x, dtype=float)
        return 1.0 + gamma(t) * np.cos(pi * x[..., 0]) * np.cos(pi * x[..., 1])

    def source(x, t):
        x = np.asarray(x, dtype=float)
        c1, c2 = np.cos(pi * x[..., 0]), np.cos(pi * x[..., 1])
        s1, s2 = np.sin(pi * x[..., 0]), np.sin(pi * x[..., 1])
        g = gamma(t)
        cval = 1.0 + g * c1 * c2
        flux = beta(t) * pi * (cval * (c1 + c2) - g * (s1 * s1 * c2 + s2 * s2 * c1))
        return -g * c1 * c2 + flux + 2.0 * mu * pi * pi * g * c1 * c2 + a0 * cval

    return ManufacturedProblem(
        box=(-1.0, 1.0, -1.0, 1.0),
        velocity=VelocityField(u, div, c_div=1.5 * pi),
        exact=exact,
        initial=lambda x, t=0.0: exact(x, 0.0),
        source=source,
        mu=mu,
        a0=a0,
        T=T,
    )


# --------------------------------------------------------------------------
# error metrics
# --------------------------------------------------------------------------

def _quad_for(space, quad):
    return simplex_quadrature(2 * space.k + 2) if quad is None else quad


def _exact_and_discrete(fld, exact, t, quad):
    space = fld.space
    quad = _quad_for(space, quad)
    x = space.mesh.physical_points(quad.points)
    w = space.mesh.detB[:, None] * quad.weights[None, :]
    return values_at_quadrature(space, fld, quad), np.asarray(exact(x, t), dtype=float), w


def error_l2_final(fld, problem, T=None, quad=None):
    """Relative L2 error ||c_h - c|| / ||c|| with c evaluated at quadrature points."""
    T = problem.T if T is None else T
    ch, c, w = _exact_and_discrete(fld, problem.exact, T, quad)
    den = np.sum(w * c * c)
    if den == 0:
        raise ValueError("exact solution has zero L2 norm")
    return float(np.sqrt(np.sum(w * (ch - c) ** 2) / den))


def error_mass_final(fld, problem, T=None, quad=None):
    """|int (c_h - c)| / int c."""
    T = problem.T if T is None else T
    ch, c, w = _exact_and_discrete(fld, problem.exact, T, quad)
    den = np.sum(w * c)
    if den == 0:
        raise ValueError("exact solution has zero mass")
    return float(abs(np.sum(w * (ch - c))) / den)


class TrajectoryErrors:
    """Streaming accumulator of the interpolant-relative errors.

    e_L2 = max_n ||c_h^n - L_h c^n|| / max_n ||L_h c^n||,
    e_m  = |int (c_h^N - L_h c^N)| / |int L_h c^N| at the last level seen.
    Use as a run observer.
    """

    def __init__(self, problem, space, quad=None):
        self.problem = problem
        self.space = space
        self.M = assemble_mass(space, _quad_for(space, quad))
        self.ones_M = self.M @ np.ones(space.ndof)
        self.max_err = 0.0
        self.max_ref = 0.0
        self.last = None

    def __call__(self, n, t, fld):
        ref = interpolate(self.space, self.problem.exact, t).coeffs
        e = fld.coeffs - ref
        self.max_err = max(self.max_err, math.sqrt(max(float(e @ (self.M @ e)), 0.0)))
        self.max_ref = max(self.max_ref, math.sqrt(float(ref @ (self.M @ ref))))
        self.last = (float(np.sum(self.ones_M * e)), float(np.sum(self.ones_M * ref)))

    def result(self):
        if self.last is None:
            raise ValueError("no levels observed")
        return self.max_err / self.max_ref, abs(self.last[0]) / abs(self.last[1])


def relative_errors_trajectory(trajectory, problem, quad=None):
    """(e^_L2, e^_m) for a list of ``(t, field)`` levels."""
    trajectory = list(trajectory)
    if not trajectory:
        raise ValueError("empty trajectory")
    acc = TrajectoryErrors(problem, trajectory[0][1].space, quad)
    for n, (t, fld) in enumerate(trajectory):
        acc(n, t, fld)
    return acc.result()


class InstantL2:
    """Observer recording the relative L2 error against the exact solution at every level."""

    def __init__(self, problem, quad=None):
        self.problem = problem
        self.quad = quad
        self.values = []

    def __call__(self, n, t, fld):
        self.values.append(error_l2_final(fld, self.problem, t, self.quad))


# --------------------------------------------------------------------------
# single runs and sweeps
# --------------------------------------------------------------------------

@dataclass
class ErrorReport:
    e_l2: float
    e_m: float
    eh_l2: float
    eh_m: float
    times: list
    mass: list
    e_l2_inst: list
    runtime: float
    iterations: list
    clamped: list


def simulate(problem, N, k, q, dt, variant="conservative", startup="exact", quad_degree=None,
             rk_substeps=4, split="diagonal", T=None, a0=None, mu=None, instant_errors=True,
             quad_refine=1):
    """Build mesh/space, run the scheme and collect every metric."""
    T = problem.T if T is None else T
    mesh = build_uniform_square_mesh(problem.box, N, split)
    space = build_space(mesh, k)
    cfg = SchemeConfig(q=q, dt=dt, mu=problem.mu if mu is None else mu,
                       a0=problem.a0 if a0 is None else a0, variant=variant,
                       quad_degree=quad_degree, quad_refine=quad_refine, startup=startup,
                       rk=RKConfig(substeps=rk_substeps))
    traj = TrajectoryErrors(problem, space)
    inst = InstantL2(problem)
    observers = [traj, inst] if instant_errors else [traj]
    t0 = time.perf_counter()
    res = run(problem, space, cfg, T, observers)
    runtime = time.perf_counter() - t0
    t_final = res.times[-1]
    eh_l2, eh_m = traj.result()
    return ErrorReport(
        e_l2=error_l2_final(res.field, problem, t_final),
        e_m=error_mass_final(res.field, problem, t_final),
        eh_l2=eh_l2, eh_m=eh_m,
        times=res.times, mass=res.mass,
        e_l2_inst=inst.values if instant_errors else [],
        runtime=runtime, iterations=res.iterations, clamped=res.clamped,
    ), res


def observed_order(e_coarse, e_fine, ratio=2.0):
    if e_coarse <= 0 or e_fine <= 0:
        return float("nan")
    return math.log(e_coarse / e_fine) / math.log(ratio)


SWEEP_COLUMNS = ["N", "k", "q", "dt", "variant", "e_L2", "e_m", "eh_L2", "eh_m", "order_L2", "runtime_s"]


@dataclass
class ConvergenceTable:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def orders(self, variant=None, key="e_L2"):
        rows = [r for r in self.rows if variant is None or r["variant"] == variant]
        if len(rows) < 2:
            raise ValueError("need at least two rows to report an order")
        out = []
        for a, b in zip(rows, rows[1:]):
            out.append(observed_order(a[key], b[key], _refinement_ratio(a, b)))
        return out

    def to_csv(self, fh=None):
        buf = fh if fh is not None else io.StringIO()
        for key, val in self.config.items():
            buf.write(f"# {key}={val}\n")
        w = csv.DictWriter(buf, fieldnames=SWEEP_COLUMNS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in self.rows:
            w.writerow({c: _fmt(r.get(c, "")) for c in SWEEP_COLUMNS})
        return buf.getvalue() if fh is None else None


def _fmt(v):
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return v


def _refinement_ratio(a, b):
    if a["N"] != b["N"]:
        return b["N"] / a["N"]
    return a["dt"] / b["dt"]


def convergence_sweep(problem, grid, variants=("conservative",), startup="exact", **kw):
    """Run every grid row for every variant. Failed runs are kept as rows
    with NaN errors and an ``error`` message; the sweep continues."""
    variants = list(variants)
    if not variants:
        raise ValueError("variant list is empty")
    if not grid:
        raise ValueError("grid is empty")
    table = ConvergenceTable(config={"mu": problem.mu, "a0": problem.a0, "T": kw.get("T") or problem.T,
                                     "startup": startup, "variants": ",".join(variants)})
    for variant in variants:
        prev = None
        for g in grid:
            row = {"N": int(g["N"]), "k": int(g["k"]), "q": int(g["q"]), "dt": float(g["dt"]),
                   "variant": variant}
            try:
                rep, _ = simulate(problem, row["N"], row["k"], row["q"], row["dt"], variant,
                                  g.get("startup", startup), instant_errors=False, **kw)
                row.update(e_L2=rep.e_l2, e_m=rep.e_m, eh_L2=rep.eh_l2, eh_m=rep.eh_m,
                           runtime_s=rep.runtime)
            except Exception as err:  # recorded per row
                row.update(e_L2=float("nan"), e_m=float("nan"), eh_L2=float("nan"),
                           eh_m=float("nan"), runtime_s=float("nan"), error=str(err))
            if prev is not None:
                row["order_L2"] = observed_order(prev["e_L2"], row["e_L2"], _refinement_ratio(prev, row))
            else:
                row["order_L2"] = float("nan")
            table.rows.append(row)
            prev = row
    return table
