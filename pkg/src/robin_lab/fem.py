"""Lagrange P1/P2 spaces and assembly of the stiffness, mass and boundary mass.

Every element integral is a polynomial in barycentric coordinates, so the
reference matrices are computed once with rational arithmetic and scaled per
element.  Nothing is approximated by quadrature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from math import factorial

import numpy as np
import scipy.sparse as sp
from scipy.spatial import cKDTree

from .mesh import TriMesh

# ---------------------------------------------------------------------------
# barycentric polynomials: dict {(a, b, c): Fraction}
# ---------------------------------------------------------------------------


def _poly_mul(p, q):
    out = {}
    for ea, ca in p.items():
        for eb, cb in q.items():
            e = tuple(x + y for x, y in zip(ea, eb))
            out[e] = out.get(e, 0) + ca * cb
    return out


def _poly_diff(p, k):
    out = {}
    for e, c in p.items():
        if e[k]:
            f = list(e)
            f[k] -= 1
            out[tuple(f)] = out.get(tuple(f), 0) + c * e[k]
    return out


def _int_triangle(p):
    """Integral over a triangle divided by its area."""
    tot = Fraction(0)
    for (a, b, c), coef in p.items():
        tot += coef * Fraction(2 * factorial(a) * factorial(b) * factorial(c), factorial(a + b + c + 2))
    return tot


def _int_edge(p):
    """Integral over an edge divided by its length (two barycentric variables)."""
    tot = Fraction(0)
    for (a, b), coef in p.items():
        tot += coef * Fraction(factorial(a) * factorial(b), factorial(a + b + 1))
    return tot


def _mono(*e):
    return {tuple(e): Fraction(1)}


def _shape_functions(degree):
    one = Fraction(1)
    if degree == 1:
        return [_mono(1, 0, 0), _mono(0, 1, 0), _mono(0, 0, 1)]
    if degree == 2:
        out = []
        for k in range(3):
            e2 = [0, 0, 0]
            e2[k] = 2
            e1 = [0, 0, 0]
            e1[k] = 1
            out.append({tuple(e2): 2 * one, tuple(e1): -one})
        for i, j in ((0, 1), (1, 2), (2, 0)):
            e = [0, 0, 0]
            e[i] += 1
            e[j] += 1
            out.append({tuple(e): 4 * one})
        return out
    raise ValueError("degree must be 1 or 2")


def _edge_shape_functions(degree):
    """Shape functions on an edge in order (start, end[, midpoint])."""
    one = Fraction(1)
    if degree == 1:
        return [_mono(1, 0), _mono(0, 1)]
    return [{(2, 0): 2 * one, (1, 0): -one}, {(0, 2): 2 * one, (0, 1): -one}, {(1, 1): 4 * one}]


@lru_cache(maxsize=None)
def reference_matrices(degree):
    """Exact reference data for one element.

    Returns
    -------
    mass : ndarray (n, n)
        Element mass divided by the element area.
    stiff : ndarray (n, n, 3, 3)
        ``stiff[i, j, k, l]`` is the area-normalised integral of
        ``d phi_i/dL_k * d phi_j/dL_l``; contracting with the Gram matrix of
        barycentric gradients gives the element stiffness.
    edge_mass : ndarray (m, m)
        Boundary-edge mass divided by the edge length.
    edge_stiff : ndarray (m, m)
        Integral of ``d phi_i/dt * d phi_j/dt`` over the unit edge ``t in [0, 1]``.
    hess : ndarray (n, 3, 3)
        Constant second derivatives ``d^2 phi_i / dL_k dL_l``.
    """
    phi = _shape_functions(degree)
    n = len(phi)
    mass = np.array([[float(_int_triangle(_poly_mul(phi[i], phi[j]))) for j in range(n)] for i in range(n)])
    dphi = [[_poly_diff(p, k) for k in range(3)] for p in phi]
    stiff = np.zeros((n, n, 3, 3))
    for i in range(n):
        for j in range(n):
            for k in range(3):
                for m in range(3):
                    stiff[i, j, k, m] = float(_int_triangle(_poly_mul(dphi[i][k], dphi[j][m])))
    ephi = _edge_shape_functions(degree)
    ne = len(ephi)
    edge_mass = np.array([[float(_int_edge(_poly_mul(ephi[i], ephi[j]))) for j in range(ne)] for i in range(ne)])
    # t runs from start to end: L0 = 1 - t, L1 = t, so d/dt = d/dL1 - d/dL0
    dt = []
    for p in ephi:
        d1 = _poly_diff(p, 1)
        d0 = _poly_diff(p, 0)
        for e, c in d0.items():
            d1[e] = d1.get(e, 0) - c
        dt.append(d1)
    edge_stiff = np.array([[float(_int_edge(_poly_mul(dt[i], dt[j]))) for j in range(ne)] for i in range(ne)])
    hess = np.zeros((n, 3, 3))
    if degree == 2:
        for i in range(n):
            for k in range(3):
                for m in range(3):
                    h = _poly_diff(_poly_diff(phi[i], k), m)
                    hess[i, k, m] = float(sum(h.values())) if h else 0.0
    for arr in (mass, stiff, edge_mass, edge_stiff, hess):
        arr.setflags(write=False)
    return mass, stiff, edge_mass, edge_stiff, hess


# ---------------------------------------------------------------------------
# space
# ---------------------------------------------------------------------------


def barycentric_gradients(nodes, triangles):
    """Gradients of the barycentric coordinates, shape (T, 3, 2), and areas (T,)."""
    p = nodes[triangles]
    area = 0.5 * ((p[:, 1, 0] - p[:, 0, 0]) * (p[:, 2, 1] - p[:, 0, 1])
                  - (p[:, 1, 1] - p[:, 0, 1]) * (p[:, 2, 0] - p[:, 0, 0]))
    g = np.empty((len(p), 3, 2))
    for k in range(3):
        a, b = p[:, (k + 1) % 3], p[:, (k + 2) % 3]
        g[:, k, 0] = (a[:, 1] - b[:, 1]) / (2 * area)
        g[:, k, 1] = (b[:, 0] - a[:, 0]) / (2 * area)
    return g, area


class FemSpace:
    """Continuous Lagrange space of degree 1 or 2 on a triangle mesh.

    P2 degrees of freedom are numbered vertices first, then edge midpoints in
    the order of ``mesh.edges``.  Local order per cell is
    ``v0, v1, v2`` followed by ``e01, e12, e20`` for P2.
    """

    def __init__(self, mesh: TriMesh, degree: int = 2):
        if degree not in (1, 2):
            raise ValueError("degree must be 1 or 2")
        self.mesh = mesh
        self.degree = degree
        V = mesh.n_nodes
        if degree == 1:
            self.cell_dofs = np.array(mesh.triangles)
            self.coords = np.array(mesh.nodes)
            self.boundary_dofs = np.array(mesh.boundary_edges)
        else:
            e = mesh.edges
            self.cell_dofs = np.hstack([mesh.triangles, V + mesh.triangle_edges])
            self.coords = np.vstack([mesh.nodes, 0.5 * (mesh.nodes[e[:, 0]] + mesh.nodes[e[:, 1]])])
            self.boundary_dofs = np.column_stack([mesh.boundary_edges, V + mesh.boundary_edge_ids])
        self.n_dofs = len(self.coords)
        self.grad_bary, self.areas = barycentric_gradients(mesh.nodes, mesh.triangles)
        for arr in (self.cell_dofs, self.coords, self.boundary_dofs):
            arr.setflags(write=False)

    def __repr__(self):
        return f"FemSpace(P{self.degree}, n_dofs={self.n_dofs})"

    @property
    def boundary_dof_loop(self):
        """Boundary dofs in loop order (for P2: vertex, midpoint, vertex, ...)."""
        bd = self.boundary_dofs
        if self.degree == 1:
            return bd[:, 0].copy()
        return np.column_stack([bd[:, 0], bd[:, 2]]).ravel()

    # -- point location and evaluation -------------------------------------

    @property
    def _tree(self):
        if not hasattr(self, "_kdtree"):
            cent = self.mesh.nodes[self.mesh.triangles].mean(axis=1)
            self._kdtree = cKDTree(cent)
        return self._kdtree

    def barycentric(self, tri_ids, points):
        p = self.mesh.nodes[self.mesh.triangles[tri_ids]]
        g = self.grad_bary[tri_ids]
        d = points - p[:, 0]
        l1 = np.einsum("ij,ij->i", g[:, 1], d)
        l2 = np.einsum("ij,ij->i", g[:, 2], d)
        return np.column_stack([1.0 - l1 - l2, l1, l2])

    def locate(self, points, k=12):
        """Containing triangle and barycentric coordinates for each point.

        Points outside the mesh are assigned to the candidate triangle that
        they are least outside of, which extrapolates the local polynomial.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        k = min(k, self.mesh.n_triangles)
        _, cand = self._tree.query(points, k=k)
        cand = np.asarray(cand).reshape(len(points), k)
        best = np.full(len(points), -np.inf)
        tri = np.zeros(len(points), dtype=np.int64)
        for c in range(k):
            lam = self.barycentric(cand[:, c], points)
            score = lam.min(axis=1)
            better = score > best + 1e-14
            best = np.where(better, score, best)
            tri = np.where(better, cand[:, c], tri)
        bad = best < -1e-9
        if np.any(bad):
            # fall back to a brute-force search for the few stragglers
            for i in np.flatnonzero(bad):
                lam = self.barycentric(np.arange(self.mesh.n_triangles), np.repeat(points[i:i + 1], self.mesh.n_triangles, axis=0))
                j = int(np.argmax(lam.min(axis=1)))
                tri[i] = j
        return tri, self.barycentric(tri, points)

    def _basis_values(self, lam):
        if self.degree == 1:
            return lam
        l0, l1, l2 = lam.T
        return np.column_stack([
            l0 * (2 * l0 - 1), l1 * (2 * l1 - 1), l2 * (2 * l2 - 1),
            4 * l0 * l1, 4 * l1 * l2, 4 * l2 * l0,
        ])

    def _basis_bary_grad(self, lam):
        """d phi_i / dL_k, shape (P, n, 3)."""
        P = len(lam)
        if self.degree == 1:
            return np.broadcast_to(np.eye(3), (P, 3, 3)).copy()
        out = np.zeros((P, 6, 3))
        for k in range(3):
            out[:, k, k] = 4 * lam[:, k] - 1
        for loc, (i, j) in enumerate(((0, 1), (1, 2), (2, 0))):
            out[:, 3 + loc, i] = 4 * lam[:, j]
            out[:, 3 + loc, j] = 4 * lam[:, i]
        return out

    def evaluate(self, coef, points, located=None):
        """Values of one or more finite element functions at ``points``.

        ``coef`` may be (n_dofs,) or (n_dofs, m).
        """
        tri, lam = located if located is not None else self.locate(points)
        phi = self._basis_values(lam)
        c = np.asarray(coef)[self.cell_dofs[tri]]
        if c.ndim == 2:
            return np.einsum("pi,pi->p", phi, c)
        return np.einsum("pi,pim->pm", phi, c)

    def gradient_at(self, coef, tri, lam):
        """Gradient (P, 2) of a single function at located points."""
        dl = self._basis_bary_grad(lam)
        g = np.einsum("pik,pkx->pix", dl, self.grad_bary[tri])
        c = np.asarray(coef)[self.cell_dofs[tri]]
        return np.einsum("pix,pi->px", g, c)

    def cell_hessians(self, coef):
        """Element-wise Hessian (T, 2, 2); constant per cell for P2, zero for P1."""
        _, _, _, _, hess = reference_matrices(self.degree)
        g = self.grad_bary
        hphi = np.einsum("ikl,tkx,tly->tixy", hess, g, g)
        c = np.asarray(coef)[self.cell_dofs]
        return np.einsum("tixy,ti->txy", hphi, c)

    def interpolate(self, func):
        """Nodal interpolant of ``func(x, y)``."""
        return np.asarray(func(self.coords[:, 0], self.coords[:, 1]), dtype=float)


def build_space(mesh, degree=2):
    return FemSpace(mesh, degree)


# ---------------------------------------------------------------------------
# assembly
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class SymPencil:
    """Stiffness ``K``, mass ``M`` and boundary mass ``B`` in CSR format.

    ``cache`` memoises derived quantities such as trace constants; the
    matrices themselves are never modified.
    """

    K: sp.csr_matrix
    M: sp.csr_matrix
    B: sp.csr_matrix
    space: FemSpace
    cache: dict = field(default_factory=dict, repr=False)

    def robin_matrix(self, beta):
        return robin_matrix(self, beta)


def _scatter(rows_local, vals, n):
    """Sum element matrices into a global symmetric CSR matrix.

    Only contributions with global row <= column are accumulated; the strict
    upper part is then mirrored, so the result is symmetric bit for bit.
    """
    nl = rows_local.shape[1]
    r = np.repeat(rows_local, nl, axis=1).ravel()
    c = np.tile(rows_local, (1, nl)).ravel()
    v = vals.ravel()
    keep = r <= c
    U = sp.coo_matrix((v[keep], (r[keep], c[keep])), shape=(n, n)).tocsr()
    U.sum_duplicates()
    A = (U + sp.triu(U, k=1, format="csr").T).tocsr()
    A.sort_indices()
    return A


def element_stiffness(space):
    _, stiff, _, _, _ = reference_matrices(space.degree)
    g = space.grad_bary
    gram = np.einsum("tkx,tlx->tkl", g, g)
    return np.einsum("ijkl,tkl->tij", stiff, gram) * space.areas[:, None, None]


def element_mass(space):
    mass, _, _, _, _ = reference_matrices(space.degree)
    return mass[None, :, :] * space.areas[:, None, None]


def boundary_element_matrices(space):
    """Per boundary edge mass and tangential stiffness, in ``boundary_dofs`` order."""
    _, _, emass, estiff, _ = reference_matrices(space.degree)
    L = space.mesh.edge_lengths
    return emass[None] * L[:, None, None], estiff[None] / L[:, None, None]


def assemble(space):
    """Assemble the stiffness, mass and boundary mass matrices."""
    n = space.n_dofs
    K = _scatter(space.cell_dofs, element_stiffness(space), n)
    M = _scatter(space.cell_dofs, element_mass(space), n)
    Be, _ = boundary_element_matrices(space)
    B = _scatter(space.boundary_dofs, Be, n)
    return SymPencil(K=K, M=M, B=B, space=space)


def robin_matrix(pencil, beta):
    """``K + beta B`` as a symmetric CSR matrix."""
    A = (pencil.K + float(beta) * pencil.B).tocsr()
    A.sort_indices()
    return A


def write_matrix(path, A):
    """Coordinate dump with one ``i j value`` line per stored entry."""
    C = sp.coo_matrix(A)
    order = np.lexsort((C.col, C.row))
    with open(path, "w", encoding="ascii") as fh:
        for i, j, v in zip(C.row[order], C.col[order], C.data[order]):
            fh.write(f"{i} {j} {v:.17g}\n")


def read_matrix(path, n=None):
    data = np.loadtxt(path, ndmin=2)
    i = data[:, 0].astype(np.int64)
    j = data[:, 1].astype(np.int64)
    size = n if n is not None else int(max(i.max(), j.max())) + 1
    return sp.csr_matrix((data[:, 2], (i, j)), shape=(size, size))
