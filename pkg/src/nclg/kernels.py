"""Hot kernels with a numba path and a pure-numpy path.

Both paths return identical element choices and agree on floating point
results to rounding. Dispatch follows ``_backend.get_backend()``.
"""
import numpy as np

from . import _backend
from ._backend import njit
from .basis import multi_indices

_CHUNK = 1 << 16

# neighbourhood scan order: ascending element index within a 3x3 cell block
_OFFSETS = np.array([(dj, di, t) for dj in (-1, 0, 1) for di in (-1, 0, 1) for t in (0, 1)],
                    dtype=np.int64)


# --------------------------------------------------------------------------
# point location
# --------------------------------------------------------------------------

@njit
def _ref_coords(p0, p1, e, verts, elems, Binv):
    a = elems[e, 0]
    d0 = p0 - verts[a, 0]
    d1 = p1 - verts[a, 1]
    return Binv[e, 0, 0] * d0 + Binv[e, 0, 1] * d1, Binv[e, 1, 0] * d0 + Binv[e, 1, 1] * d1


@njit
def _locate_structured_nb(pts, x0, x1, y0, y1, N, verts, elems, Binv, tol,
                          out_el, out_xh, out_cl):
    hx = (x1 - x0) / N
    hy = (y1 - y0) / N
    for p in range(pts.shape[0]):
        px = pts[p, 0]
        py = pts[p, 1]
        cl = False
        if px < x0:
            px = x0
            cl = True
        elif px > x1:
            px = x1
            cl = True
        if py < y0:
            py = y0
            cl = True
        elif py > y1:
            py = y1
            cl = True
        ci = int(np.floor((px - x0) / hx))
        cj = int(np.floor((py - y0) / hy))
        ci = min(max(ci, 0), N - 1)
        cj = min(max(cj, 0), N - 1)
        found = -1
        best = -1
        best_m = -np.inf
        bx0 = 0.0
        bx1 = 0.0
        for dj in range(-1, 2):
            jj = cj + dj
            if jj < 0 or jj >= N:
                continue
            for di in range(-1, 2):
                ii = ci + di
                if ii < 0 or ii >= N:
                    continue
                for t in range(2):
                    e = 2 * (jj * N + ii) + t
                    r0, r1 = _ref_coords(px, py, e, verts, elems, Binv)
                    m = min(1.0 - r0 - r1, min(r0, r1))
                    if m >= -tol:
                        found = e
                        bx0 = r0
                        bx1 = r1
                        break
                    if m > best_m:
                        best_m = m
                        best = e
                        bx0 = r0
                        bx1 = r1
                if found >= 0:
                    break
            if found >= 0:
                break
        if found < 0:
            found = best
            r0, r1 = _ref_coords(px, py, best, verts, elems, Binv)
            bx0 = r0
            bx1 = r1
        out_el[p] = found
        out_xh[p, 0] = bx0
        out_xh[p, 1] = bx1
        out_cl[p] = cl


@njit
def _locate_brute_nb(pts, verts, elems, Binv, tol, out_el, out_xh):
    ne = elems.shape[0]
    for p in range(pts.shape[0]):
        found = -1
        best = 0
        best_m = -np.inf
        for e in range(ne):
            r0, r1 = _ref_coords(pts[p, 0], pts[p, 1], e, verts, elems, Binv)
            m = min(1.0 - r0 - r1, min(r0, r1))
            if m >= -tol:
                found = e
                break
            if m > best_m:
                best_m = m
                best = e
        if found < 0:
            found = best
        r0, r1 = _ref_coords(pts[p, 0], pts[p, 1], found, verts, elems, Binv)
        out_el[p] = found
        out_xh[p, 0] = r0
        out_xh[p, 1] = r1


def _clamp(mesh, pts):
    if mesh.structured is not None:
        x0, x1, y0, y1 = mesh.structured.box
    else:
        x0, x1, y0, y1 = mesh.bbox
    q = np.empty_like(pts)
    q[:, 0] = np.clip(pts[:, 0], x0, x1)
    q[:, 1] = np.clip(pts[:, 1], y0, y1)
    return q, np.any(q != pts, axis=1)


def _ref_coords_np(mesh, pts, el):
    a = mesh.vertices[mesh.elements[el, 0]]
    return np.einsum("...ij,...j->...i", mesh.Binv[el], pts - a)


def _min_bary(xh):
    return np.minimum(1.0 - xh[..., 0] - xh[..., 1], np.minimum(xh[..., 0], xh[..., 1]))


def _locate_structured_np(mesh, pts, tol):
    N = mesh.structured.N
    x0, x1, y0, y1 = mesh.structured.box
    q, clamped = _clamp(mesh, pts)
    n = len(q)
    el = np.empty(n, dtype=np.int64)
    xh = np.empty((n, 2))
    for s in range(0, n, _CHUNK):
        qc = q[s:s + _CHUNK]
        ci = np.clip(np.floor((qc[:, 0] - x0) / ((x1 - x0) / N)).astype(np.int64), 0, N - 1)
        cj = np.clip(np.floor((qc[:, 1] - y0) / ((y1 - y0) / N)).astype(np.int64), 0, N - 1)
        jj = cj[:, None] + _OFFSETS[:, 0]
        ii = ci[:, None] + _OFFSETS[:, 1]
        valid = (jj >= 0) & (jj < N) & (ii >= 0) & (ii < N)
        cand = np.where(valid, 2 * (jj * N + ii) + _OFFSETS[:, 2], 0)
        r = _ref_coords_np(mesh, qc[:, None, :], cand)
        m = np.where(valid, _min_bary(r), -np.inf)
        inside = m >= -tol
        first = np.argmax(inside, axis=1)
        none = ~inside.any(axis=1)
        first[none] = np.argmax(m[none], axis=1)
        rows = np.arange(len(qc))
        el[s:s + _CHUNK] = cand[rows, first]
        xh[s:s + _CHUNK] = r[rows, first]
    return el, xh, clamped


def _locate_brute_np(mesh, pts, tol):
    ne = mesh.n_elements
    n = len(pts)
    el = np.empty(n, dtype=np.int64)
    step = max(1, (1 << 20) // ne)
    allel = np.arange(ne)
    for s in range(0, n, step):
        qc = pts[s:s + step]
        r = _ref_coords_np(mesh, qc[:, None, :], allel[None, :])
        m = _min_bary(r)
        inside = m >= -tol
        first = np.argmax(inside, axis=1)
        none = ~inside.any(axis=1)
        first[none] = np.argmax(m[none], axis=1)
        el[s:s + step] = first
    return el, _ref_coords_np(mesh, pts, el)


def locate_numba(mesh, pts, tol):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    n = len(pts)
    el = np.empty(n, dtype=np.int64)
    xh = np.empty((n, 2))
    if mesh.structured is not None:
        cl = np.empty(n, dtype=np.bool_)
        x0, x1, y0, y1 = mesh.structured.box
        _locate_structured_nb(pts, x0, x1, y0, y1, mesh.structured.N, mesh.vertices,
                              mesh.elements, mesh.Binv, tol, el, xh, cl)
        return el, xh, cl
    q, cl = _clamp(mesh, pts)
    _locate_brute_nb(q, mesh.vertices, mesh.elements, mesh.Binv, tol, el, xh)
    return el, xh, cl


def locate_numpy(mesh, pts, tol):
    pts = np.asarray(pts, dtype=np.float64)
    if mesh.structured is not None:
        return _locate_structured_np(mesh, pts, tol)
    q, cl = _clamp(mesh, pts)
    el, xh = _locate_brute_np(mesh, q, tol)
    return el, xh, cl


def locate_brute_force(mesh, pts, tol):
    """Exhaustive scan ignoring structured metadata; reference for tests."""
    q, cl = _clamp(mesh, np.asarray(pts, dtype=np.float64))
    el, xh = _locate_brute_np(mesh, q, tol)
    return el, xh, cl


def locate(mesh, pts, tol):
    if _backend.get_backend() == "numba":
        return locate_numba(mesh, pts, tol)
    return locate_numpy(mesh, pts, tol)


# --------------------------------------------------------------------------
# field evaluation at located points
# --------------------------------------------------------------------------

@njit
def _evaluate_nb(k, mi, cell_dofs, coeffs, hosts, xh, out):
    nloc = mi.shape[0]
    R = np.empty((3, k + 1))
    for p in range(hosts.shape[0]):
        lam0 = 1.0 - xh[p, 0] - xh[p, 1]
        for a in range(3):
            z = k * (lam0 if a == 0 else xh[p, a - 1])
            R[a, 0] = 1.0
            for i in range(1, k + 1):
                R[a, i] = R[a, i - 1] * (z - (i - 1)) / i
        e = hosts[p]
        s = 0.0
        for j in range(nloc):
            s += coeffs[cell_dofs[e, j]] * (R[0, mi[j, 0]] * R[1, mi[j, 1]] * R[2, mi[j, 2]])
        out[p] = s


def evaluate_numba(k, cell_dofs, coeffs, hosts, xh):
    hosts = np.ascontiguousarray(hosts, dtype=np.int64)
    xh = np.ascontiguousarray(xh, dtype=np.float64).reshape(-1, 2)
    out = np.empty(len(hosts))
    _evaluate_nb(k, multi_indices(k), cell_dofs, np.ascontiguousarray(coeffs, dtype=np.float64),
                 hosts, xh, out)
    return out


def evaluate_numpy(k, cell_dofs, coeffs, hosts, xh):
    from .basis import lagrange_basis
    hosts = np.asarray(hosts, dtype=np.int64)
    xh = np.asarray(xh, dtype=np.float64).reshape(-1, 2)
    out = np.empty(len(hosts))
    for s in range(0, len(hosts), _CHUNK):
        phi = lagrange_basis(k, xh[s:s + _CHUNK])
        out[s:s + _CHUNK] = np.einsum("pj,pj->p", phi, coeffs[cell_dofs[hosts[s:s + _CHUNK]]])
    return out


def evaluate(k, cell_dofs, coeffs, hosts, xh):
    """Value of the degree-k field ``coeffs`` at reference points ``xh`` of elements ``hosts``."""
    if _backend.get_backend() == "numba":
        return evaluate_numba(k, cell_dofs, coeffs, hosts, xh)
    return evaluate_numpy(k, cell_dofs, coeffs, hosts, xh)
