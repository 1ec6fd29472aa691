"""Fixed simplicial partition of a rectangle: construction, affine maps, point location."""
from dataclasses import dataclass, field

import numpy as np

from . import kernels

LOCATE_TOL = 1e-10

# Reference triangle used throughout: vertices (0,0), (1,0), (0,1).
REFERENCE_VERTICES = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
REFERENCE_AREA = 0.5


def barycentric(xhat):
    """Barycentric coordinates (lambda_0, lambda_1, lambda_2) of reference points."""
    xhat = np.asarray(xhat, dtype=float)
    return np.stack([1.0 - xhat[..., 0] - xhat[..., 1], xhat[..., 0], xhat[..., 1]], axis=-1)


@dataclass(frozen=True)
class StructuredInfo:
    N: int
    box: tuple  # (x0, x1, y0, y1)
    split: str


@dataclass(frozen=True)
class PointLocation:
    element: int
    xhat: np.ndarray
    clamped: bool


@dataclass(frozen=True, eq=False)
class Mesh:
    vertices: np.ndarray   # (nv, 2)
    elements: np.ndarray   # (ne, 3), counterclockwise
    structured: StructuredInfo | None = None
    # derived; filled in __post_init__
    B: np.ndarray = field(init=False, repr=False)
    Binv: np.ndarray = field(init=False, repr=False)
    detB: np.ndarray = field(init=False, repr=False)
    edges: np.ndarray = field(init=False, repr=False)
    element_edges: np.ndarray = field(init=False, repr=False)
    boundary_edges: np.ndarray = field(init=False, repr=False)
    bbox: tuple = field(init=False, repr=False)

    def __post_init__(self):
        V = np.ascontiguousarray(self.vertices, dtype=np.float64)
        E = np.ascontiguousarray(self.elements, dtype=np.int64)
        if V.ndim != 2 or V.shape[1] != 2 or E.ndim != 2 or E.shape[1] != 3:
            raise ValueError("mesh needs (nv, 2) vertices and (ne, 3) elements")
        p0, p1, p2 = V[E[:, 0]], V[E[:, 1]], V[E[:, 2]]
        B = np.stack([p1 - p0, p2 - p0], axis=-1)  # columns are edge vectors
        det = B[:, 0, 0] * B[:, 1, 1] - B[:, 0, 1] * B[:, 1, 0]
        if np.any(det <= 0):
            raise ValueError("elements must be counterclockwise with positive area")
        Binv = np.empty_like(B)
        Binv[:, 0, 0] = B[:, 1, 1] / det
        Binv[:, 1, 1] = B[:, 0, 0] / det
        Binv[:, 0, 1] = -B[:, 0, 1] / det
        Binv[:, 1, 0] = -B[:, 1, 0] / det

        # local edge m joins local vertices (m, m+1 mod 3)
        loc = np.stack([E[:, [0, 1]], E[:, [1, 2]], E[:, [2, 0]]], axis=1)
        key = np.sort(loc, axis=2).reshape(-1, 2)
        edges, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        if np.any(counts > 2):
            raise ValueError("non-manifold mesh: an edge is shared by more than two elements")
        for name, val in (
            ("vertices", V), ("elements", E), ("B", B), ("Binv", Binv), ("detB", det),
            ("edges", edges), ("element_edges", inverse.reshape(-1, 3)),
            ("boundary_edges", counts == 1),
            ("bbox", (V[:, 0].min(), V[:, 0].max(), V[:, 1].min(), V[:, 1].max())),
        ):
            if isinstance(val, np.ndarray):
                val.setflags(write=False)
            object.__setattr__(self, name, val)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def areas(self):
        return 0.5 * self.detB

    def map_to_physical(self, element, xhat):
        """Affine element map x = B_l xhat + a_l (a_l is the first vertex)."""
        element = self._check_element(element)
        xhat = np.asarray(xhat, dtype=float)
        a = self.vertices[self.elements[element, 0]]
        return xhat @ self.B[element].T + a

    def map_to_reference(self, element, x):
        element = self._check_element(element)
        x = np.asarray(x, dtype=float)
        a = self.vertices[self.elements[element, 0]]
        return (x - a) @ self.Binv[element].T

    def physical_points(self, xhat):
        """Map reference points (npts, 2) into every element: result (ne, npts, 2)."""
        a = self.vertices[self.elements[:, 0]]
        return np.einsum("eij,gj->egi", self.B, np.asarray(xhat, dtype=float)) + a[:, None, :]

    def locate_points(self, points):
        """Batch point location.

        Returns ``(elements, xhat, clamped)``. Points outside the bounding box
        are first projected onto it. Points on shared edges go to the lowest
        element index.
        """
        pts = np.ascontiguousarray(np.asarray(points, dtype=np.float64).reshape(-1, 2))
        if np.isnan(pts).any():
            raise ValueError("cannot locate NaN coordinates")
        return kernels.locate(self, pts, LOCATE_TOL)

    def locate_point(self, y, hint=None):
        """Single-point location. ``hint`` is accepted for API symmetry; the
        structured lookup is already O(1)."""
        el, xh, cl = self.locate_points(np.asarray(y, dtype=float)[None, :])
        return PointLocation(int(el[0]), xh[0], bool(cl[0]))

    def _check_element(self, element):
        element = int(element)
        if not 0 <= element < self.n_elements:
            raise IndexError(f"element {element} out of range")
        return element

    # -- io -------------------------------------------------------------
    def dump(self, path):
        with open(path, "w") as fh:
            fh.write(f"2 {self.n_vertices} {self.n_elements}\n")
            for x, y in self.vertices:
                fh.write(f"{x:.17g} {y:.17g}\n")
            for a, b, c in self.elements:
                fh.write(f"{a} {b} {c}\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            d, nv, ne = (int(t) for t in fh.readline().split())
            if d != 2:
                raise ValueError(f"only d=2 meshes are supported, file has d={d}")
            V = np.loadtxt(fh, max_rows=nv, ndmin=2)
            E = np.loadtxt(fh, max_rows=ne, dtype=np.int64, ndmin=2)
        return cls(V, E)


def build_uniform_square_mesh(box=(-1.0, 1.0, -1.0, 1.0), N=16, split="diagonal"):
    """Uniform triangulation of ``box = (x0, x1, y0, y1)`` with N segments per edge.

    ``split="diagonal"`` cuts every cell from lower-left to upper-right;
    ``split="crisscross"`` alternates the diagonal in a checkerboard.
    Cell (i, j) holds elements ``2*(j*N + i)`` and ``2*(j*N + i) + 1``.
    """
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    if split not in ("diagonal", "crisscross"):
        raise ValueError(f"unknown split {split!r}")
    N = int(N)
    x0, x1, y0, y1 = (float(v) for v in box)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate box {box!r}")
    xs = np.linspace(x0, x1, N + 1)
    ys = np.linspace(y0, y1, N + 1)
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    V = np.column_stack([X.ravel(), Y.ravel()])  # vertex id = j*(N+1) + i

    j, i = np.meshgrid(np.arange(N), np.arange(N), indexing="ij")
    i, j = i.ravel(), j.ravel()
    p00 = j * (N + 1) + i
    p10 = p00 + 1
    p01 = p00 + N + 1
    p11 = p01 + 1
    t0 = np.column_stack([p00, p10, p11])
    t1 = np.column_stack([p00, p11, p01])
    if split == "crisscross":
        odd = (i + j) % 2 == 1
        t0[odd] = np.column_stack([p00, p10, p01])[odd]
        t1[odd] = np.column_stack([p10, p11, p01])[odd]
    E = np.stack([t0, t1], axis=1).reshape(-1, 3)
    return Mesh(V, E, StructuredInfo(N, (x0, x1, y0, y1), split))
