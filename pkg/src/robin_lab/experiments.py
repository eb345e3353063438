"""Stability sweeps over outer parallel bodies, the interior Hessian pipeline
and mesh-convergence studies, plus run-directory bookkeeping.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .analysis import broken_hessian_sq, hessian_rhs, trace_constant
from .eigensolve import lowest_eigenpairs
from .errors import MeshError
from .fem import assemble, build_space
from .geometry import (
    clip_convex,
    diameter,
    hausdorff_distance,
    inner_parallel_body,
    inradius_incenter,
    outer_parallel_body,
    polygon_area,
    summarize,
)
from .mesh import refine, triangulate


def worker_count(default=1):
    """Thread cap from ``ROBIN_LAB_THREADS`` (at least one)."""
    raw = os.environ.get("ROBIN_LAB_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = default
    return max(1, n)


def _map(fn, items, workers=None):
    workers = worker_count() if workers is None else max(1, int(workers))
    if workers == 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _solve(domain, h, beta, J, degree, eps=None):
    mesh = triangulate(domain, h)
    space = build_space(mesh, degree)
    pencil = assemble(space)
    return pencil, lowest_eigenpairs(pencil, beta, J, eps=eps)


def eigen_clusters(lam, rtol=1e-6):
    """Group consecutive indices whose eigenvalues agree to ``rtol (1 + |lam|)``."""
    groups = [[0]]
    for i in range(1, len(lam)):
        if abs(lam[i] - lam[i - 1]) <= rtol * (1.0 + abs(lam[i])):
            groups[-1].append(i)
        else:
            groups.append([i])
    return groups


def _g_orthonormal(G, V):
    S = V.T @ (G @ V)
    S = 0.5 * (S + S.T)
    w, Q = np.linalg.eigh(S)
    return V @ (Q / np.sqrt(w))


def compare_subspaces(U, W, G):
    """Distance between ``span(U)`` and ``span(W)`` in the inner product ``G``.

    Returns the sine of the largest principal angle and the largest
    ``G``-norm difference after rotating ``W`` onto ``U`` (orthogonal
    Procrustes), without renormalising ``W``.
    """
    Qu = _g_orthonormal(G, U)
    Qw = _g_orthonormal(G, W)
    # sines from the residual of the G-orthogonal projection, which stays
    # accurate for small angles where sqrt(1 - cos^2) does not
    R = Qw - Qu @ (Qu.T @ (G @ Qw))
    S = R.T @ (G @ R)
    gap = float(np.sqrt(max(0.0, np.linalg.eigvalsh(0.5 * (S + S.T)).max())))
    P, _, Qt = np.linalg.svd(W.T @ (G @ U))
    D = W @ (P @ Qt) - U
    diff = float(np.sqrt(np.max(np.einsum("ij,ij->j", D, G @ D))))
    return gap, diff


def _tail_decreasing(values, floor=1e-10):
    """Indices ``i`` where ``values[i+1] > values[i]`` above a noise floor."""
    v = np.asarray(values, float)
    return [i for i in range(len(v) - 1) if v[i + 1] > v[i] + floor]


# ---------------------------------------------------------------------------
# stability sweep
# ---------------------------------------------------------------------------


@dataclass
class StabilityRun:
    """Eigenvalues and eigenspaces along ``Omega_k = Omega + B(r_k)``.

    ``h1_distances[k]`` is the largest sine of a principal angle between
    matching eigenspaces in the ``H^1(Omega)`` inner product.
    ``aligned_differences[k]`` is the largest ``H^1(Omega)`` norm of
    ``u_j - (rotated restriction)``, which also sees the mass lost to the strip.
    """

    base: object
    beta: float
    J: int
    h: float
    radii: list
    base_eigenvalues: np.ndarray
    D0: float
    rho0: float
    hausdorff: list = field(default_factory=list)
    diameters: list = field(default_factory=list)
    inradii: list = field(default_factory=list)
    strip_areas: list = field(default_factory=list)
    eigenvalues: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    subspace_gaps: list = field(default_factory=list)
    h1_distances: list = field(default_factory=list)
    aligned_differences: list = field(default_factory=list)
    orthonormality_defects: list = field(default_factory=list)
    error: str | None = None

    @property
    def completed(self):
        return len(self.eigenvalues)

    def eigenvalue_differences(self):
        """``|lam_j(k) - lam_j| / max(|lam_j|, 1)``, shape (k, J)."""
        lam0 = self.base_eigenvalues[: self.J]
        return np.array([np.abs(np.asarray(l)[: self.J] - lam0) / np.maximum(np.abs(lam0), 1.0)
                         for l in self.eigenvalues])

    def distance_exceptions(self):
        return _tail_decreasing(self.h1_distances)

    def defect_exponent(self):
        """Log-log slope of the orthonormality defect against the strip area."""
        a = np.asarray(self.strip_areas[: self.completed])
        d = np.asarray(self.orthonormality_defects)
        ok = (a > 0) & (d > 0)
        if ok.sum() < 2:
            return float("nan")
        return float(np.polyfit(np.log(a[ok]), np.log(d[ok]), 1)[0])

    def write(self, directory):
        os.makedirs(directory, exist_ok=True)
        with open(os.path.join(directory, "sweep.csv"), "w", encoding="ascii") as fh:
            cols = ["k", "r", "dH", "D", "rho", "area_strip"] + [f"lambda_{j}" for j in range(1, self.J + 1)]
            fh.write(",".join(cols) + "\n")
            for i in range(self.completed):
                row = [str(i), f"{self.radii[i]:.17g}", f"{self.hausdorff[i]:.17g}", f"{self.diameters[i]:.17g}",
                       f"{self.inradii[i]:.17g}", f"{self.strip_areas[i]:.17g}"]
                row += [f"{v:.17g}" for v in self.eigenvalues[i][: self.J]]
                fh.write(",".join(row) + "\n")
        payload = {
            "beta": self.beta,
            "J": self.J,
            "h": self.h,
            "base_eigenvalues": [float(v) for v in self.base_eigenvalues[: self.J]],
            "subspace_gaps": [[float(x) for x in g] for g in self.subspace_gaps],
            "h1_distances": [float(x) for x in self.h1_distances],
            "aligned_differences": [float(x) for x in self.aligned_differences],
            "orthonormality_defects": [float(x) for x in self.orthonormality_defects],
            "distance_exceptions": self.distance_exceptions(),
            "defect_exponent": self.defect_exponent(),
            "error": self.error,
        }
        with open(os.path.join(directory, "sweep_distances.json"), "w", encoding="ascii") as fh:
            json.dump(payload, fh, indent=1, sort_keys=True)


def stability_sweep(base, beta, J, r_schedule, h=1.0 / 64, degree=2, workers=None):
    """Solve on ``base + B(r)`` for each ``r`` and compare with ``base``.

    Eigenfunctions of each outer body are restricted to the base domain by
    point evaluation at its dofs, and compared cluster by cluster in the
    ``H^1(base)`` inner product.  Mesh failures stop the sweep; results up to
    that point are kept and the error is recorded.
    """
    r = [float(x) for x in r_schedule]
    if any(b >= a for a, b in zip(r, r[1:])):
        raise ValueError("r_schedule must be strictly decreasing")
    rho0, _ = inradius_incenter(base)
    D0 = diameter(base)
    pencil0, res0 = _solve(base, h, beta, J + 2, degree)
    space0 = pencil0.space
    G = (pencil0.K + pencil0.M).tocsr()
    lam0 = res0.eigenvalues
    clusters = [c for c in eigen_clusters(lam0) if c[0] < J]
    Jc = max(c[-1] for c in clusters) + 1
    U0 = res0.eigenvectors[:, :Jc]
    run = StabilityRun(base=base, beta=float(beta), J=J, h=h, radii=r, base_eigenvalues=lam0,
                       D0=D0, rho0=rho0)

    def one(rk):
        if rk == 0.0:
            return dict(dH=0.0, D=D0, rho=rho0, strip=0.0, lam=lam0[:Jc], res=res0.residuals[:Jc], W=U0)
        body = outer_parallel_body(base, rk)
        pencil, res = _solve(body, h, beta, Jc + 2, degree)
        W = pencil.space.evaluate(res.eigenvectors[:, :Jc], space0.coords)
        return dict(
            dH=hausdorff_distance(base, body),
            D=diameter(body),
            rho=inradius_incenter(body)[0],
            strip=body.area - base.area,
            lam=res.eigenvalues[:Jc],
            res=res.residuals[:Jc],
            W=W,
        )

    def guarded(rk):
        try:
            return one(rk)
        except MeshError as exc:
            return exc

    for out in _map(guarded, r, workers):
        if isinstance(out, MeshError):
            run.error = str(out)
            break
        run.hausdorff.append(out["dH"])
        run.diameters.append(out["D"])
        run.inradii.append(out["rho"])
        run.strip_areas.append(out["strip"])
        run.eigenvalues.append(np.asarray(out["lam"]))
        run.residuals.append(np.asarray(out["res"]))
        W = out["W"]
        gaps, diffs = [], []
        for c in clusters:
            g, d = compare_subspaces(U0[:, c], W[:, c], G)
            gaps.append(g)
            diffs.append(d)
        run.subspace_gaps.append(gaps)
        run.h1_distances.append(max(gaps))
        run.aligned_differences.append(max(diffs))
        Mw = W.T @ (pencil0.M @ W)
        run.orthonormality_defects.append(float(np.abs(Mw - np.eye(Jc)).max()))
    return run


# ---------------------------------------------------------------------------
# interior Hessian pipeline
# ---------------------------------------------------------------------------


def clipped_areas(space, poly):
    """Area of each mesh triangle inside the convex polygon ``poly``."""
    nodes = space.mesh.nodes
    tris = space.mesh.triangles
    N, c = poly.normals, poly.offsets
    viol = nodes @ N.T - c[None, :]  # > 0 means outside that half-plane
    tv = viol[tris]  # (T, 3, m)
    inside = np.all(tv <= 0, axis=(1, 2))
    outside = np.any(np.all(tv >= 0, axis=1), axis=1)
    out = np.where(inside, space.areas, 0.0)
    for t in np.flatnonzero(~inside & ~outside):
        piece = clip_convex(nodes[tris[t]], N, c)
        out[t] = polygon_area(piece) if len(piece) >= 3 else 0.0
    return out


@dataclass
class H2Report:
    beta: float
    j: int
    eps: float | None
    radii: list
    offsets: list
    bound: float
    limit_eigenvalue: float
    values: np.ndarray  # (k, level)
    eigenvalues: list
    radicand_flags: list
    slack: float = 0.05

    @property
    def passed_bound(self):
        return bool(np.all(self.values[-1] <= self.bound * (1.0 + self.slack) + 1e-9))

    @property
    def monotone_in_level(self):
        return bool(np.all(np.diff(self.values, axis=1) >= -1e-12 * np.maximum(1.0, self.values[:, 1:])))

    def to_dict(self):
        return {
            "beta": self.beta,
            "j": self.j,
            "eps": self.eps,
            "radii": list(map(float, self.radii)),
            "offsets": list(map(float, self.offsets)),
            "bound": float(self.bound),
            "limit_eigenvalue": float(self.limit_eigenvalue),
            "values": self.values.tolist(),
            "eigenvalues": [float(v) for v in self.eigenvalues],
            "radicand_flags": self.radicand_flags,
            "passed_bound": self.passed_bound,
            "monotone_in_level": self.monotone_in_level,
        }


def h2_pipeline(base, beta, j, eps=None, r_schedule=(0.25, 0.125, 0.0625, 0.03125, 0.015625),
                h=1.0 / 64, levels=4, slack=0.05, workers=None):
    """Interior Hessian norms of eigenfunction ``j`` on outer bodies against the limit bound.

    For each ``r`` in the schedule, ``int_{w_l} |D^2 u_j|^2`` is evaluated on
    inner parallel bodies ``w_l`` of the base at offsets ``rho / 2^l``.
    The bound uses the base diameter, inradius, eigenvalue and trace constant.
    """
    beta = float(beta)
    if beta < 0:
        if eps is None:
            eps = -1.0 / (2.0 * beta)
        if not 0 < eps < -1.0 / beta:
            raise ValueError(f"eps={eps} outside (0, {-1.0 / beta})")
    geo = summarize(base)
    pencil0, res0 = _solve(base, h, beta, j, 2, eps)
    lam = float(res0.eigenvalues[j - 1])
    C = trace_constant(pencil0, eps) if beta < 0 else None
    bound, bc = hessian_rhs(geo, beta, lam, eps, C)
    offsets = [geo.rho / 2.0 ** l for l in range(1, levels + 1)]
    inner = [inner_parallel_body(base, d) for d in offsets]

    def one(rk):
        body = outer_parallel_body(base, rk)
        pencil, res = _solve(body, h, beta, j, 2, eps)
        space = pencil.space
        u = res.eigenvectors[:, j - 1]
        vals = [broken_hessian_sq(space, u, weights=clipped_areas(space, w) / space.areas) for w in inner]
        return float(res.eigenvalues[j - 1]), vals

    outs = _map(one, list(r_schedule), workers)
    flags = [f"negative_radicand:{bc.radicand:.17g}"] if bc is not None and bc.flagged else []
    return H2Report(
        beta=beta, j=j, eps=eps, radii=list(r_schedule), offsets=offsets, bound=bound,
        limit_eigenvalue=lam, values=np.array([v for _, v in outs]),
        eigenvalues=[l for l, _ in outs], radicand_flags=flags, slack=slack,
    )


# ---------------------------------------------------------------------------
# convergence study
# ---------------------------------------------------------------------------


@dataclass
class ConvergenceStudy:
    h: list
    eigenvalues: np.ndarray  # (levels, J)
    degree: int

    @property
    def rates(self):
        """Observed orders from consecutive differences; needs three levels."""
        lam = self.eigenvalues
        if len(lam) < 3:
            return None
        d1 = np.abs(lam[1:-1] - lam[:-2])
        d2 = np.abs(lam[2:] - lam[1:-1])
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.log(d1 / d2) / np.log(2.0)

    @property
    def extrapolated(self):
        """Richardson limit from the last three levels."""
        lam = self.eigenvalues
        if len(lam) < 3:
            return None
        p = self.rates[-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            corr = (lam[-1] - lam[-2]) / (2.0 ** p - 1.0)
        corr = np.where(np.isfinite(corr), corr, 0.0)
        return lam[-1] + corr

    def to_dict(self):
        return {
            "h": list(map(float, self.h)),
            "degree": self.degree,
            "eigenvalues": self.eigenvalues.tolist(),
            "rates": None if self.rates is None else np.nan_to_num(self.rates, nan=-1.0).tolist(),
            "extrapolated": None if self.extrapolated is None else self.extrapolated.tolist(),
        }


def convergence_study(domain, beta, J, levels=3, h0=0.125, degree=2):
    """Eigenvalues on a mesh and its uniform refinements."""
    if levels < 3:
        raise ValueError("a convergence study needs at least three levels")
    mesh = triangulate(domain, h0)
    hs, lams = [], []
    for level in range(levels):
        if level:
            mesh = refine(mesh)
        pencil = assemble(build_space(mesh, degree))
        res = lowest_eigenpairs(pencil, beta, J)
        hs.append(h0 / 2 ** level)
        lams.append(res.eigenvalues)
    return ConvergenceStudy(h=hs, eigenvalues=np.array(lams), degree=degree)


# ---------------------------------------------------------------------------
# run directories
# ---------------------------------------------------------------------------


def config_hash(config):
    blob = json.dumps(config, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]


def run_directory(root, config, echo_lines=None):
    """Create ``root/<hash>`` holding the config echo and a version stamp."""
    path = os.path.join(root, config_hash(config))
    os.makedirs(path, exist_ok=True)
    with open(os.path.join(path, "config.txt"), "w", encoding="utf-8") as fh:
        if echo_lines is None:
            echo_lines = [f"{k}={config[k]}" for k in sorted(config)]
        fh.write("\n".join(echo_lines) + "\n")
    with open(os.path.join(path, "VERSION"), "w", encoding="ascii") as fh:
        fh.write(f"robin_lab {__version__}\n")
    return path


def write_summary(path, checks):
    """``summary.json`` with one boolean per named check and an overall verdict."""
    checks = {k: bool(v) for k, v in checks.items()}
    with open(os.path.join(path, "summary.json"), "w", encoding="ascii") as fh:
        json.dump({"passed": all(checks.values()), "checks": checks}, fh, indent=1, sort_keys=True)
