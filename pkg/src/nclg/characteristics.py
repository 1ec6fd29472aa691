"""Backward characteristics: node tracing, isoparametric feet, transport Jacobians."""
from dataclasses import dataclass
import csv
import math

import numpy as np

from .basis import lagrange_basis
from .quadrature import gauss_legendre_unit

DEFAULT_TIME_GAUSS = 3


@dataclass(frozen=True)
class VelocityField:
    """Analytic velocity ``u(x, t)`` and its divergence ``div(x, t)``.

    Callbacks take points shaped (..., 2) and a scalar time; ``u`` returns
    (..., 2), ``div`` returns (...).
    """
    u: object
    div: object
    c_div: float | None = None

    def boundary_normal_flux(self, box, t=0.0, n=64):
        """max |u . nu| over n sample points per side of ``box``."""
        x0, x1, y0, y1 = box
        s = np.linspace(0.0, 1.0, n)
        worst = 0.0
        for fixed, normal in ((x0, (-1, 0)), (x1, (1, 0))):
            pts = np.column_stack([np.full(n, fixed), y0 + s * (y1 - y0)])
            worst = max(worst, np.abs(self.u(pts, t) @ np.array(normal, float)).max())
        for fixed, normal in ((y0, (0, -1)), (y1, (0, 1))):
            pts = np.column_stack([x0 + s * (x1 - x0), np.full(n, fixed)])
            worst = max(worst, np.abs(self.u(pts, t) @ np.array(normal, float)).max())
        return float(worst)


def _const_velocity(v):
    v = np.asarray(v, dtype=float)
    return VelocityField(
        u=lambda x, t: np.broadcast_to(v, np.shape(x)).copy(),
        div=lambda x, t: np.zeros(np.shape(x)[:-1]),
        c_div=0.0,
    )


ZERO_VELOCITY = _const_velocity((0.0, 0.0))

# explicit Runge-Kutta tableaus (A, b, c) by order
_RK = {
    1: (np.zeros((1, 1)), np.array([1.0]), np.array([0.0])),
    2: (np.array([[0, 0], [1.0, 0]]), np.array([0.5, 0.5]), np.array([0.0, 1.0])),
    3: (np.array([[0, 0, 0], [0.5, 0, 0], [-1.0, 2.0, 0]]),
        np.array([1 / 6, 2 / 3, 1 / 6]), np.array([0.0, 0.5, 1.0])),
    4: (np.array([[0, 0, 0, 0], [0.5, 0, 0, 0], [0, 0.5, 0, 0], [0, 0, 1.0, 0]]),
        np.array([1 / 6, 1 / 3, 1 / 3, 1 / 6]), np.array([0.0, 0.5, 0.5, 1.0])),
}


def explicit_rk_tableau(order):
    if order not in _RK:
        raise ValueError(f"explicit RK order must be 1..4, got {order!r}")
    return _RK[order]


def rk_step(rhs, y, t, h, order=4):
    A, b, c = explicit_rk_tableau(order)
    stages = []
    for s in range(len(b)):
        ys = y
        for r in range(s):
            if A[s, r] != 0.0:
                ys = ys + (h * A[s, r]) * stages[r]
        stages.append(rhs(ys, t + c[s] * h))
    out = y
    for s in range(len(b)):
        out = out + (h * b[s]) * stages[s]
    return out


@dataclass(frozen=True)
class RKConfig:
    substeps: int = 4  # per time step dt
    order: int = 4

    def __post_init__(self):
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        explicit_rk_tableau(self.order)


def step_levels(t_n, dt, q, n_gauss=DEFAULT_TIME_GAUSS):
    """Times needed for one step: the q past levels plus Gauss nodes of each
    interval [t_{n-m}, t_{n-m+1}], sorted from t_n backwards."""
    xi, _ = gauss_legendre_unit(n_gauss)
    times = [t_n - i * dt for i in range(1, q + 1)]
    for m in range(1, q + 1):
        times.extend(t_n - m * dt + dt * xi)
    return sorted(set(times), reverse=True)


def trace_points(points, t_n, levels, velocity, dt, rk=RKConfig(), box=None):
    """Integrate dX/dt = u(X, t) backward from X(t_n) = points.

    Returns ``(positions, projected)`` with positions shaped (nlev, npts, 2)
    in the order of ``levels`` and ``projected[l]`` the number of points that
    had to be pulled back into ``box`` on the way to level l.
    """
    pts = np.array(points, dtype=float)
    if np.isnan(pts).any():
        raise ValueError("NaN in trace start points")
    levels = np.asarray(levels, dtype=float)
    if np.any(levels > t_n + 1e-12 * max(1.0, abs(t_n))):
        raise ValueError("trace levels must not exceed the base time")
    order = np.argsort(-levels, kind="stable")

    def rhs(y, t):
        v = np.asarray(velocity.u(y, t), dtype=float)
        if np.isnan(v).any():
            raise ValueError(f"velocity returned NaN at t={t}")
        return v

    out = np.empty((len(levels),) + pts.shape)
    projected = np.zeros(len(levels), dtype=np.int64)
    y, t = pts, float(t_n)
    hit = np.zeros(len(pts), dtype=bool)
    for li in order:
        target = float(levels[li])
        length = t - target
        if length > 0:
            nsub = max(1, math.ceil(rk.substeps * length / dt - 1e-9))
            h = -length / nsub
            for s in range(nsub):
                y = rk_step(rhs, y, t + s * h, h, rk.order)
                if box is not None:
                    clipped = np.column_stack([np.clip(y[:, 0], box[0], box[1]),
                                               np.clip(y[:, 1], box[2], box[3])])
                    hit |= np.any(clipped != y, axis=1)
                    y = clipped
            t = target
        out[li] = y
        projected[li] = int(hit.sum())
    return out, projected


@dataclass(frozen=True, eq=False)
class NodeTrajectories:
    t_n: float
    dt: float
    levels: np.ndarray      # (nlev,) descending
    positions: np.ndarray   # (nlev, ndof, 2)
    projected: np.ndarray   # (nlev,)
    n_gauss: int = DEFAULT_TIME_GAUSS

    def index(self, time):
        hits = np.flatnonzero(np.abs(self.levels - time) <= 1e-12 * max(1.0, abs(time)))
        if len(hits) == 0:
            raise KeyError(f"time {time} was not traced")
        return int(hits[0])

    def at(self, time):
        return self.positions[self.index(time)]


def _domain_box(space):
    m = space.mesh
    return m.structured.box if m.structured is not None else m.bbox


def trace_nodes(space, t_n, levels, velocity, dt, rk=RKConfig(), n_gauss=DEFAULT_TIME_GAUSS):
    """Trace every global dof node backward to each requested level."""
    levels = np.array(sorted(set(float(v) for v in levels) | {float(t_n)}, reverse=True))
    pos, proj = trace_points(space.dof_coords, t_n, levels, velocity, dt, rk, _domain_box(space))
    pos[0] = space.dof_coords  # exact at the base time
    return NodeTrajectories(float(t_n), float(dt), levels, pos, proj, n_gauss)


def interpolated_feet(space, node_positions, xhat):
    """Isoparametric foot map at reference points ``xhat`` (nq, 2) in every element: (ne, nq, 2)."""
    phi = lagrange_basis(space.k, np.atleast_2d(xhat))
    return np.matmul(phi, node_positions[space.cell_dofs])


def interpolated_foot(space, traj, element, xhat, level):
    """Foot of reference point ``xhat`` of one element at ``level``."""
    phi = lagrange_basis(space.k, np.asarray(xhat, dtype=float))
    nodes = traj.at(level)[space.cell_dofs[element]]
    return phi @ nodes


def _steps_below(traj, level):
    i = int(round((traj.t_n - level) / traj.dt))
    if i < 0 or abs(traj.t_n - i * traj.dt - level) > 1e-9 * max(1.0, traj.dt):
        raise ValueError(f"level {level} is not a step level below t_n={traj.t_n}")
    return i


def _interval_divergence(space, traj, velocity, xhat, m):
    """Gauss-Legendre value of int div u(X~(s), s) ds over [t_n - m dt, t_n - (m-1) dt]."""
    xi, w = gauss_legendre_unit(traj.n_gauss)
    a = traj.t_n - m * traj.dt
    acc = 0.0
    for xg, wg in zip(xi, w):
        s = a + traj.dt * xg
        feet = interpolated_feet(space, traj.at(s), xhat)
        acc = acc + (traj.dt * wg) * np.asarray(velocity.div(feet, s), dtype=float)
    return acc


def jacobian_tilde(space, traj, velocity, level, xhat):
    """exp(-int_{level}^{t_n} div u(X~(s), s) ds) at reference points ``xhat``
    of every element, shape (ne, nq). Each step interval contributes an
    n-point Gauss-Legendre sum using the traced node positions."""
    xhat = np.atleast_2d(xhat)
    integral = np.zeros((space.mesh.n_elements, len(xhat)))
    for m in range(1, _steps_below(traj, level) + 1):
        integral = integral + _interval_divergence(space, traj, velocity, xhat, m)
    return np.exp(-integral)


@dataclass(frozen=True, eq=False)
class FeetData:
    level: float
    foot: np.ndarray     # (ne, nq, 2)
    host: np.ndarray     # (ne, nq) element of the fixed mesh containing the foot
    xhat: np.ndarray     # (ne, nq, 2) reference coordinates in the host
    jacobian: np.ndarray  # (ne, nq)
    clamped: np.ndarray  # (ne, nq) bool

    @property
    def n_clamped(self):
        return int(self.clamped.sum())


def build_feet_data(space, traj, velocity, level, quad, with_jacobian=True, jacobian=None):
    feet = interpolated_feet(space, traj.at(level), quad.points)
    ne, nq = feet.shape[:2]
    host, xh, cl = space.mesh.locate_points(feet.reshape(-1, 2))
    if jacobian is None:
        if with_jacobian:
            jacobian = jacobian_tilde(space, traj, velocity, level, quad.points)
        else:
            jacobian = np.ones((ne, nq))
    return FeetData(float(level), feet, host.reshape(ne, nq), xh.reshape(ne, nq, 2),
                    jacobian, cl.reshape(ne, nq))


def build_step_feet(space, t_n, dt, q, velocity, quad, rk=RKConfig(),
                    n_gauss=DEFAULT_TIME_GAUSS, with_jacobian=True):
    """Trace once and build feet for levels t_n - i dt, i = 1..q."""
    if with_jacobian:
        levels = step_levels(t_n, dt, q, n_gauss)
    else:
        levels = [t_n - i * dt for i in range(1, q + 1)]
    traj = trace_nodes(space, t_n, levels, velocity, dt, rk, n_gauss)
    ne, nq = space.mesh.n_elements, len(quad.points)
    integral = np.zeros((ne, nq))
    feet = []
    for i in range(1, q + 1):
        if with_jacobian:
            # J~ for level i reuses the integral of level i-1
            integral = integral + _interval_divergence(space, traj, velocity, quad.points, i)
            jac = np.exp(-integral)
        else:
            jac = np.ones((ne, nq))
        feet.append(build_feet_data(space, traj, velocity, t_n - i * dt, quad, jacobian=jac))
    return traj, feet


def write_feet_csv(path, feet_list):
    """Diagnostic dump: one row per (level, element, quadrature point)."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["level", "element", "g", "x", "y", "host", "J"])
        for fd in feet_list:
            ne, nq = fd.host.shape
            for e in range(ne):
                for g in range(nq):
                    w.writerow([repr(fd.level), e, g, repr(fd.foot[e, g, 0]), repr(fd.foot[e, g, 1]),
                                int(fd.host[e, g]), repr(fd.jacobian[e, g])])
