"""Conforming triangulations of convex domains.

Axis-aligned rectangles get a structured right-isosceles mesh.  Everything
else is meshed by sampling the boundary at the target spacing, filling the
interior with a hexagonal lattice, running a Delaunay triangulation and a
capped number of Laplacian smoothing passes.  For convex domains the boundary
sample polygon is the convex hull of the point set, so the boundary chain is
always present in the Delaunay triangulation.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.spatial import Delaunay

from .errors import MeshError
from .geometry import ConvexPolygon, SmoothConvexBody, inradius_incenter


def _signed_areas(nodes, tris):
    p0, p1, p2 = nodes[tris[:, 0]], nodes[tris[:, 1]], nodes[tris[:, 2]]
    e1, e2 = p1 - p0, p2 - p0
    return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])


class TriMesh:
    """Triangle mesh with an oriented boundary loop.

    Attributes
    ----------
    nodes : ndarray, shape (V, 2)
    triangles : ndarray, shape (T, 3)
        Counterclockwise node triples.
    boundary_edges : ndarray, shape (Eb, 2)
        Boundary edges in loop order; the interior lies to the left.
    normals : ndarray, shape (Eb, 2)
        Outward unit normal of each boundary edge.
    edge_lengths : ndarray, shape (Eb,)
    boundary_loop : ndarray, shape (Eb,)
        Start node of each boundary edge, i.e. the cyclic node order.
    arclength : ndarray, shape (Eb + 1,)
        Cumulative arclength at each loop node, closing at the perimeter.
    boundary_triangle : ndarray, shape (Eb,)
        The triangle adjacent to each boundary edge.
    """

    def __init__(self, nodes, triangles, domain=None, h_target=None):
        nodes = np.array(nodes, dtype=float)
        tris = np.array(triangles, dtype=np.int64)
        area = _signed_areas(nodes, tris)
        flip = area < 0
        tris[flip] = tris[flip][:, [0, 2, 1]]
        if np.any(np.abs(area) <= 0):
            raise MeshError("mesh contains a zero-area triangle")
        self.nodes = nodes
        self.triangles = tris
        self.domain = domain
        self.h_target = h_target
        self._build_boundary()
        for arr in (self.nodes, self.triangles, self.boundary_edges, self.normals,
                    self.edge_lengths, self.boundary_loop, self.arclength, self.boundary_triangle):
            arr.setflags(write=False)

    def _build_boundary(self):
        t = self.triangles
        directed = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
        owner = np.tile(np.arange(len(t)), 3)
        key = np.sort(directed, axis=1)
        _, inv, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inv = inv.ravel()
        if np.any(counts > 2):
            raise MeshError("non-manifold edge")
        bmask = counts[inv] == 1
        bdir = directed[bmask]
        bown = owner[bmask]
        nxt = {int(a): (int(b), int(o)) for (a, b), o in zip(bdir, bown)}
        if len(nxt) != len(bdir):
            raise MeshError("boundary is not a simple loop")
        start = min(nxt)
        loop, owners = [start], []
        cur = start
        while True:
            b, o = nxt[cur]
            owners.append(o)
            if b == start:
                break
            loop.append(b)
            cur = b
            if len(loop) > len(bdir):
                raise MeshError("boundary loop does not close")
        if len(loop) != len(bdir):
            raise MeshError("boundary edges form more than one loop")
        loop = np.array(loop, dtype=np.int64)
        edges = np.column_stack([loop, np.roll(loop, -1)])
        vec = self.nodes[edges[:, 1]] - self.nodes[edges[:, 0]]
        lengths = np.hypot(vec[:, 0], vec[:, 1])
        tang = vec / lengths[:, None]
        self.boundary_edges = edges
        self.edge_lengths = lengths
        self.normals = np.column_stack([tang[:, 1], -tang[:, 0]])
        self.boundary_loop = loop
        self.arclength = np.concatenate([[0.0], np.cumsum(lengths)])
        self.boundary_triangle = np.array(owners, dtype=np.int64)

    def __repr__(self):
        return f"TriMesh(V={self.n_nodes}, T={self.n_triangles}, Eb={len(self.boundary_edges)})"

    @property
    def n_nodes(self):
        return len(self.nodes)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @cached_property
    def areas(self):
        return _signed_areas(self.nodes, self.triangles)

    @property
    def total_area(self):
        return float(self.areas.sum())

    @property
    def boundary_length(self):
        return float(self.arclength[-1])

    @cached_property
    def _edge_data(self):
        t = self.triangles
        local = np.stack([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]], axis=1)
        key = np.sort(local.reshape(-1, 2), axis=1)
        edges, inv = np.unique(key, axis=0, return_inverse=True)
        return edges, inv.reshape(-1, 3)

    @property
    def edges(self):
        """Unique undirected edges, lexicographically sorted ``(i < j)`` pairs."""
        return self._edge_data[0]

    @property
    def triangle_edges(self):
        """Edge index of local edges ``(v0 v1, v1 v2, v2 v0)`` per triangle."""
        return self._edge_data[1]

    @cached_property
    def boundary_edge_ids(self):
        """Index into :attr:`edges` of each boundary edge (loop order)."""
        lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(self.edges)}
        return np.array([lookup[(min(a, b), max(a, b))] for a, b in self.boundary_edges])

    @property
    def max_edge(self):
        e = self.edges
        return float(np.linalg.norm(self.nodes[e[:, 1]] - self.nodes[e[:, 0]], axis=1).max())

    def scaled(self, s):
        dom = self.domain.scaled(s) if self.domain is not None else None
        h = None if self.h_target is None else self.h_target * s
        return TriMesh(self.nodes * s, self.triangles, domain=dom, h_target=h)


# ---------------------------------------------------------------------------
# generation
# ---------------------------------------------------------------------------

def _structured_rectangle(poly, h):
    lo = poly.vertices.min(axis=0)
    hi = poly.vertices.max(axis=0)
    a, b = hi - lo
    nx = max(1, int(np.ceil(a / h - 1e-9)))
    ny = max(1, int(np.ceil(b / h - 1e-9)))
    xs = lo[0] + a * np.arange(nx + 1) / nx
    ys = lo[1] + b * np.arange(ny + 1) / ny
    xs[-1], ys[-1] = hi[0], hi[1]
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])
    idx = np.arange((nx + 1) * (ny + 1)).reshape(ny + 1, nx + 1)
    p00 = idx[:-1, :-1].ravel()
    p10 = idx[:-1, 1:].ravel()
    p01 = idx[1:, :-1].ravel()
    p11 = idx[1:, 1:].ravel()
    lower = np.column_stack([p00, p10, p11])
    upper = np.column_stack([p00, p11, p01])
    tris = np.stack([lower, upper], axis=1).reshape(-1, 3)
    return nodes, tris


def _delaunay(points, h):
    tri = Delaunay(points, qhull_options="Qbb Qc Qz Q12 Qt").simplices.astype(np.int64)
    area = np.abs(_signed_areas(points, tri))
    return tri[area > 1e-10 * h * h]


def _neighbor_mean(points, tris):
    n = len(points)
    e = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    e = np.unique(np.sort(e, axis=1), axis=0)
    acc = np.zeros_like(points)
    deg = np.zeros(n)
    np.add.at(acc, e[:, 0], points[e[:, 1]])
    np.add.at(acc, e[:, 1], points[e[:, 0]])
    np.add.at(deg, e[:, 0], 1.0)
    np.add.at(deg, e[:, 1], 1.0)
    return acc / np.maximum(deg, 1.0)[:, None]


def triangulate(domain, h_target, smoothing_passes=20, structured=True):
    """Mesh a convex domain with target edge length ``h_target``.

    Raises :class:`MeshError` when ``h_target`` is not positive or exceeds the
    inradius.
    """
    if not h_target > 0:
        raise MeshError("h_target must be positive")
    rho, center = inradius_incenter(domain)
    if h_target > rho * (1.0 + 1e-12):
        raise MeshError(f"h_target={h_target:g} exceeds the inradius {rho:g}: too coarse")
    if structured and isinstance(domain, ConvexPolygon) and domain.is_axis_rectangle():
        nodes, tris = _structured_rectangle(domain, h_target)
        return TriMesh(nodes, tris, domain=domain, h_target=h_target)

    h = h_target
    bpts = domain.boundary_samples(h)
    nb = len(bpts)
    vmin = bpts.min(axis=0) - h
    vmax = bpts.max(axis=0) + h
    dy = h * np.sqrt(3.0) / 2.0
    jlo = int(np.floor((vmin[1] - center[1]) / dy))
    jhi = int(np.ceil((vmax[1] - center[1]) / dy))
    ilo = int(np.floor((vmin[0] - center[0]) / h)) - 1
    ihi = int(np.ceil((vmax[0] - center[0]) / h)) + 1
    J, I = np.meshgrid(np.arange(jlo, jhi + 1), np.arange(ilo, ihi + 1), indexing="ij")
    lattice = np.column_stack([
        (center[0] + (I + 0.5 * (J % 2)) * h).ravel(),
        (center[1] + J * dy).ravel(),
    ])
    keep = domain.inner_distance(lattice) > 0.55 * h
    interior = lattice[keep]
    pts = np.vstack([bpts, interior])
    tris = _delaunay(pts, h)
    for _ in range(smoothing_passes):
        avg = _neighbor_mean(pts, tris)
        move = avg[nb:] - pts[nb:]
        pts[nb:] = avg[nb:]
        tris = _delaunay(pts, h)
        if np.abs(move).max(initial=0.0) < 1e-3 * h:
            break
    mesh = TriMesh(pts, tris, domain=domain, h_target=h_target)
    if len(mesh.boundary_loop) != nb:
        raise MeshError("boundary samples were not all kept on the mesh boundary")
    return mesh


def refine(mesh):
    """Uniform red refinement; new boundary midpoints are put back on the boundary."""
    edges = mesh.edges
    te = mesh.triangle_edges
    V = mesh.n_nodes
    mids = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    if isinstance(mesh.domain, SmoothConvexBody):
        bid = mesh.boundary_edge_ids
        mids[bid] = mesh.domain.project(mids[bid])
    nodes = np.vstack([mesh.nodes, mids])
    t = mesh.triangles
    m01, m12, m20 = V + te[:, 0], V + te[:, 1], V + te[:, 2]
    tris = np.concatenate([
        np.column_stack([t[:, 0], m01, m20]),
        np.column_stack([m01, t[:, 1], m12]),
        np.column_stack([m20, m12, t[:, 2]]),
        np.column_stack([m01, m12, m20]),
    ])
    # keep children of one parent adjacent in memory
    tris = tris.reshape(4, -1, 3).transpose(1, 0, 2).reshape(-1, 3)
    h = None if mesh.h_target is None else mesh.h_target / 2.0
    return TriMesh(nodes, tris, domain=mesh.domain, h_target=h)


@dataclass(frozen=True)
class MeshQuality:
    min_angle: float
    max_angle: float
    edge_ratio: float
    max_edge: float
    min_edge: float
    chord_error: float

    def as_dict(self):
        return dict(self.__dict__)


def triangle_angles(mesh):
    """Interior angles in degrees, shape (T, 3)."""
    p = mesh.nodes[mesh.triangles]
    out = np.empty((len(p), 3))
    for k in range(3):
        a = p[:, (k + 1) % 3] - p[:, k]
        b = p[:, (k + 2) % 3] - p[:, k]
        cosang = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
        out[:, k] = np.degrees(np.arccos(np.clip(cosang, -1.0, 1.0)))
    return out


def mesh_quality(mesh):
    ang = triangle_angles(mesh)
    e = mesh.edges
    length = np.linalg.norm(mesh.nodes[e[:, 1]] - mesh.nodes[e[:, 0]], axis=1)
    chord = 0.0
    if mesh.domain is not None:
        mids = 0.5 * (mesh.nodes[mesh.boundary_edges[:, 0]] + mesh.nodes[mesh.boundary_edges[:, 1]])
        chord = float(np.linalg.norm(mesh.domain.project(mids) - mids, axis=1).max())
    return MeshQuality(
        min_angle=float(ang.min()),
        max_angle=float(ang.max()),
        edge_ratio=float(length.max() / length.min()),
        max_edge=float(length.max()),
        min_edge=float(length.min()),
        chord_error=chord,
    )


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def write_mesh(path, mesh):
    """``mesh V T E`` header, node lines, triangle lines, boundary-edge lines."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write(f"mesh {mesh.n_nodes} {mesh.n_triangles} {len(mesh.boundary_edges)}\n")
        for x, y in mesh.nodes:
            fh.write(f"{x:.17g} {y:.17g}\n")
        for i, j, k in mesh.triangles:
            fh.write(f"{i} {j} {k}\n")
        for (i, j), (nx, ny) in zip(mesh.boundary_edges, mesh.normals):
            fh.write(f"{i} {j} {nx:.17g} {ny:.17g}\n")


def read_mesh(path, domain=None):
    with open(path, encoding="ascii") as fh:
        lines = [ln.split() for ln in fh if ln.strip()]
    tag, V, T, E = lines[0]
    if tag != "mesh":
        raise MeshError("not a mesh file")
    V, T, E = int(V), int(T), int(E)
    nodes = np.array([[float(t) for t in ln] for ln in lines[1:1 + V]])
    tris = np.array([[int(t) for t in ln] for ln in lines[1 + V:1 + V + T]], dtype=np.int64)
    mesh = TriMesh(nodes, tris, domain=domain)
    bedges = np.array([[int(ln[0]), int(ln[1])] for ln in lines[1 + V + T:1 + V + T + E]])
    if len(bedges) != E or not np.array_equal(bedges, mesh.boundary_edges):
        raise MeshError("boundary edges in file do not match the triangulation")
    return mesh
