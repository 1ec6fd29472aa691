"""Nodal Lagrange basis of degree k on the reference triangle.

Nodes are equispaced. Local ordering: the three vertices, then the k-1 nodes
of each edge (edges 0->1, 1->2, 2->0, walked from their first vertex), then
interior nodes in lexicographic order of their barycentric indices. Basis
functions use Silvester's product form in barycentric coordinates, which is
exact at the nodes and needs no Vandermonde inverse.
"""
from functools import lru_cache

import numpy as np

MAX_DEGREE = 5


def _check_degree(k):
    if int(k) != k or not 1 <= k <= MAX_DEGREE:
        raise ValueError(f"polynomial degree must be in 1..{MAX_DEGREE}, got {k!r}")
    return int(k)


def n_local(k):
    return (k + 1) * (k + 2) // 2


@lru_cache(maxsize=None)
def multi_indices(k):
    """Barycentric multi-indices (a0, a1, a2), a0 + a1 + a2 = k, in local node order."""
    k = _check_degree(k)
    idx = [(k, 0, 0), (0, k, 0), (0, 0, k)]
    idx += [(k - m, m, 0) for m in range(1, k)]
    idx += [(0, k - m, m) for m in range(1, k)]
    idx += [(m, 0, k - m) for m in range(1, k)]
    idx += sorted((a, b, k - a - b) for a in range(1, k) for b in range(1, k - a))
    out = np.array(idx, dtype=np.int64)
    out.setflags(write=False)
    return out


def reference_nodes(k):
    """Reference coordinates (nloc, 2) of the local nodes."""
    return multi_indices(k)[:, 1:] / float(k)


def _factor_tables(k, lam):
    """R[..., a, i] = prod_{m<i} (k*lam_a - m)/(m+1) and its derivative in lam_a."""
    z = k * lam  # (..., 3)
    R = np.ones(lam.shape + (k + 1,))
    dR = np.zeros(lam.shape + (k + 1,))
    for i in range(1, k + 1):
        f = (z - (i - 1)) / i
        dR[..., i] = dR[..., i - 1] * f + R[..., i - 1] * (k / i)
        R[..., i] = R[..., i - 1] * f
    return R, dR


def _tables(k, xhat):
    k = _check_degree(k)
    xhat = np.asarray(xhat, dtype=float)
    lam = np.stack([1.0 - xhat[..., 0] - xhat[..., 1], xhat[..., 0], xhat[..., 1]], axis=-1)
    R, dR = _factor_tables(k, lam)
    mi = multi_indices(k)
    # pick R[a, mi[:, a]] for each barycentric slot a -> (..., nloc, 3)
    Rsel = np.stack([R[..., a, mi[:, a]] for a in range(3)], axis=-1)
    dRsel = np.stack([dR[..., a, mi[:, a]] for a in range(3)], axis=-1)
    return Rsel, dRsel


def lagrange_basis(k, xhat):
    """Basis values at reference point(s) ``xhat`` (..., 2) -> (..., nloc)."""
    Rsel, _ = _tables(k, xhat)
    return Rsel.prod(axis=-1)


def lagrange_basis_grad(k, xhat):
    """Reference gradients (..., nloc, 2) of the basis at ``xhat``."""
    Rsel, dRsel = _tables(k, xhat)
    r0, r1, r2 = Rsel[..., 0], Rsel[..., 1], Rsel[..., 2]
    d0 = dRsel[..., 0] * r1 * r2
    d1 = r0 * dRsel[..., 1] * r2
    d2 = r0 * r1 * dRsel[..., 2]
    # lam0 = 1 - x1 - x2, lam1 = x1, lam2 = x2
    return np.stack([d1 - d0, d2 - d0], axis=-1)
