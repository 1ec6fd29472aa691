"""Continuous Lagrange finite element space on a fixed triangulation."""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import kernels
from .basis import _check_degree, lagrange_basis, lagrange_basis_grad, multi_indices, n_local
from .mesh import Mesh
from .quadrature import simplex_quadrature


@dataclass(frozen=True, eq=False)
class LagrangeSpace:
    mesh: Mesh
    k: int
    dof_coords: np.ndarray  # (ndof, 2)
    cell_dofs: np.ndarray   # (ne, nloc)

    @property
    def ndof(self):
        return len(self.dof_coords)

    @property
    def nloc(self):
        return self.cell_dofs.shape[1]

    def default_quadrature(self):
        return simplex_quadrature(2 * self.k + 2)

    def field(self, coeffs):
        return ScalarField(self, coeffs)

    def evaluate(self, coeffs, points):
        """Point values of the field with coefficients ``coeffs`` at physical points."""
        el, xh, _ = self.mesh.locate_points(points)
        return kernels.evaluate(self.k, self.cell_dofs, np.asarray(coeffs, dtype=float), el, xh)


class ScalarField:
    """Coefficient vector attached to a space."""

    def __init__(self, space, coeffs):
        coeffs = np.array(coeffs, dtype=float)
        if coeffs.shape != (space.ndof,):
            raise ValueError(f"expected {space.ndof} coefficients, got shape {coeffs.shape}")
        self.space = space
        self.coeffs = coeffs

    def __call__(self, points):
        return self.space.evaluate(self.coeffs, np.atleast_2d(points))

    def dump(self, path):
        np.savetxt(path, self.coeffs, fmt="%.17g")

    @classmethod
    def load(cls, space, path):
        return cls(space, np.loadtxt(path, ndmin=1))


def build_space(mesh, k):
    """Global numbering: vertices, then k-1 nodes per edge, then element interiors.

    Edge nodes are numbered from the lower to the higher global vertex id so
    both neighbours of an edge agree on them.
    """
    k = _check_degree(k)
    nv, ne = mesh.n_vertices, mesh.n_elements
    ned = len(mesh.edges)
    ni = (k - 1) * (k - 2) // 2
    nloc = n_local(k)
    cell = np.empty((ne, nloc), dtype=np.int64)
    cell[:, :3] = mesh.elements
    col = 3
    for m in range(3):
        va = mesh.elements[:, m]
        vb = mesh.elements[:, (m + 1) % 3]
        base = nv + mesh.element_edges[:, m] * (k - 1)
        for s in range(1, k):
            off = np.where(va < vb, s - 1, k - 1 - s)
            cell[:, col] = base + off
            col += 1
    first_interior = nv + ned * (k - 1)
    if ni:
        cell[:, col:] = first_interior + np.arange(ne)[:, None] * ni + np.arange(ni)
    ndof = first_interior + ne * ni

    xref = multi_indices(k)[:, 1:] / float(k)
    phys = mesh.physical_points(xref)  # (ne, nloc, 2)
    coords = np.empty((ndof, 2))
    coords[cell.ravel()] = phys.reshape(-1, 2)
    cell.setflags(write=False)
    coords.setflags(write=False)
    return LagrangeSpace(mesh, k, coords, cell)


# --------------------------------------------------------------------------
# assembly
# --------------------------------------------------------------------------

def _to_csr(space, local):
    cd = space.cell_dofs
    nloc = space.nloc
    rows = np.repeat(cd, nloc, axis=1).ravel()
    cols = np.tile(cd, (1, nloc)).ravel()
    A = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(space.ndof, space.ndof)).tocsr()
    A.sum_duplicates()
    A.sort_indices()
    return A


def _quad(space, quad):
    return space.default_quadrature() if quad is None else quad


def local_mass(space, quad=None):
    quad = _quad(space, quad)
    phi = lagrange_basis(space.k, quad.points)
    ref = np.einsum("g,gi,gj->ij", quad.weights, phi, phi)
    return space.mesh.detB[:, None, None] * ref


def assemble_mass(space, quad=None):
    """Consistent mass matrix (chi_j, chi_i)."""
    return _to_csr(space, local_mass(space, quad))


def assemble_stiffness(space, quad=None):
    """Stiffness matrix (grad chi_j, grad chi_i)."""
    quad = _quad(space, quad)
    dphi = lagrange_basis_grad(space.k, quad.points)  # (g, i, 2)
    S = np.einsum("g,gia,gjb->abij", quad.weights, dphi, dphi)
    Bi = space.mesh.Binv
    G = np.einsum("eak,ebk->eab", Bi, Bi)  # B^-1 B^-T
    local = space.mesh.detB[:, None, None] * np.einsum("eab,abij->eij", G, S)
    return _to_csr(space, local)


def assemble_reaction_diffusion(space, mu, a0, quad=None):
    """Matrix of a(c, v) = mu (grad c, grad v) + a0 (c, v)."""
    if not mu > 0:
        raise ValueError(f"diffusion coefficient must be positive, got {mu!r}")
    if a0 < 0:
        raise ValueError(f"reaction coefficient must be non-negative, got {a0!r}")
    K = assemble_stiffness(space, quad)
    if a0 == 0:
        return (mu * K).tocsr()
    return (mu * K + a0 * assemble_mass(space, quad)).tocsr()


def assemble_weighted_mass(space, weight, t, quad=None):
    """Matrix of (w(x, t) chi_j, chi_i) for a scalar callback ``weight(x, t)``."""
    quad = _quad(space, quad)
    phi = lagrange_basis(space.k, quad.points)
    x = space.mesh.physical_points(quad.points)
    w = np.asarray(weight(x, t), dtype=float) * quad.weights
    local = space.mesh.detB[:, None, None] * np.einsum("eg,gi,gj->eij", w, phi, phi)
    return _to_csr(space, local)


def assemble_convection(space, velocity, t, quad=None):
    """C_ij = (u . grad chi_j + (div u) chi_j, chi_i): the non-integrated-by-parts div(u c)."""
    quad = _quad(space, quad)
    mesh = space.mesh
    phi = lagrange_basis(space.k, quad.points)
    dphi = lagrange_basis_grad(space.k, quad.points)
    x = mesh.physical_points(quad.points)
    u = np.asarray(velocity.u(x, t), dtype=float)
    div = np.asarray(velocity.div(x, t), dtype=float)
    # physical gradients: B^-T grad_ref
    gphys = np.einsum("eka,gjk->egja", mesh.Binv, dphi)
    adv = np.einsum("ega,egja->egj", u, gphys) + div[..., None] * phi[None]
    local = mesh.detB[:, None, None] * np.einsum("g,gi,egj->eij", quad.weights, phi, adv)
    return _to_csr(space, local)


def load_vector(space, f, t, quad=None):
    """(f(., t), chi_i) by quadrature."""
    quad = _quad(space, quad)
    phi = lagrange_basis(space.k, quad.points)
    x = space.mesh.physical_points(quad.points)
    fx = np.broadcast_to(np.asarray(f(x, t), dtype=float), x.shape[:2])
    local = space.mesh.detB[:, None] * np.einsum("eg,g,gi->ei", fx, quad.weights, phi)
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.ndof)


def mass_weights(space, quad=None):
    """Row sums of the mass matrix: integral of each basis function."""
    quad = _quad(space, quad)
    phi = lagrange_basis(space.k, quad.points)
    local = space.mesh.detB[:, None] * (quad.weights @ phi)[None, :]
    return np.bincount(space.cell_dofs.ravel(), weights=local.ravel(), minlength=space.ndof)


# --------------------------------------------------------------------------
# interpolation, projection, integration
# --------------------------------------------------------------------------

def _coeffs(field):
    return field.coeffs if isinstance(field, ScalarField) else np.asarray(field, dtype=float)


def interpolate(space, f, t=0.0):
    """Lagrange interpolant: coefficients are f at the dof coordinates."""
    vals = np.asarray(f(space.dof_coords, t), dtype=float)
    vals = np.broadcast_to(vals, (space.ndof,)).copy()
    if not np.all(np.isfinite(vals)):
        raise ValueError("interpolated function returned non-finite values")
    return ScalarField(space, vals)


def l2_project(space, f, t=0.0, quad=None, solver=None):
    from .solver import SolverConfig, cg_solve
    cfg = solver if solver is not None else SolverConfig(tol=1e-13)
    b = load_vector(space, f, t, quad)
    if not np.all(np.isfinite(b)):
        raise ValueError("projected function returned non-finite values")
    M = assemble_mass(space, quad)
    x, _, _ = cg_solve(M, b, None, cfg)
    return ScalarField(space, x)


def integrate_field(space, field, quad=None):
    """Integral of the field over the domain."""
    return float(np.sum(mass_weights(space, quad) * _coeffs(field)))


def values_at_quadrature(space, field, quad=None):
    """Field values at the mapped quadrature points of every element: (ne, nq)."""
    quad = _quad(space, quad)
    phi = lagrange_basis(space.k, quad.points)
    return np.einsum("gj,ej->eg", phi, _coeffs(field)[space.cell_dofs])
