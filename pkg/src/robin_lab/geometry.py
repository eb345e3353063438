"""Convex planar domains and the geometric quantities the estimates consume.

Two representations are supported:

* :class:`ConvexPolygon` -- counterclockwise vertex list, support function
  evaluated exactly as a maximum over vertices.
* :class:`SmoothConvexBody` -- support function ``h`` sampled on a uniform
  angular grid.  Generic bodies use trigonometric (FFT) differentiation; outer
  parallel bodies of a polygon keep a reference to the polygon and evaluate
  ``h = h_P + r`` and its derivatives in closed form.

All objects are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import InvalidDomainError, UnsupportedDomainError

TWO_PI = 2.0 * np.pi
GEOM_TOL = 1e-12
DEFAULT_SAMPLES = 2048


def _unit(theta):
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def _readonly(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


# ---------------------------------------------------------------------------
# small dense LP: max t  s.t.  a_i . c + t <= b_i
# ---------------------------------------------------------------------------

def _simplex_standard(cost, A, b, tol=1e-12, max_iter=50000):
    """Two-phase tableau simplex for ``min cost.y, A y = b, y >= 0``.

    Bland's rule is used for both entering and leaving variables, so
    degenerate problems (many redundant constraints) terminate.  Returns the
    optimal ``y`` and the list of basic column indices.
    """
    m, n = A.shape
    A = A.copy()
    b = b.copy()
    neg = b < 0
    A[neg] *= -1.0
    b[neg] *= -1.0

    T = np.zeros((m, n + m + 1))
    T[:, :n] = A
    T[:, n:n + m] = np.eye(m)
    T[:, -1] = b
    basis = list(range(n, n + m))

    def run(c_full, allowed):
        for _ in range(max_iter):
            cb = c_full[basis]
            reduced = c_full[:-1] - cb @ T[:, :-1]
            candidates = np.flatnonzero((reduced < -tol) & allowed)
            if candidates.size == 0:
                return
            j = candidates[0]
            col = T[:, j]
            rows = np.flatnonzero(col > tol)
            if rows.size == 0:
                raise InvalidDomainError("unbounded LP (domain is not bounded)")
            ratios = T[rows, -1] / col[rows]
            best = ratios.min()
            ties = rows[ratios <= best + tol * max(1.0, abs(best))]
            i = min(ties, key=lambda r: basis[r])
            T[i] /= T[i, j]
            for r in range(m):
                if r != i:
                    T[r] -= T[r, j] * T[i]
            basis[i] = j
        raise InvalidDomainError("LP iteration cap reached")

    phase1 = np.zeros(n + m + 1)
    phase1[n:n + m] = 1.0
    run(phase1, np.ones(n + m, dtype=bool))
    if T[:, -1] @ phase1[basis] > 1e-9:
        raise InvalidDomainError("Chebyshev-center LP infeasible (unbounded domain)")
    # drive remaining zero-level artificials out of the basis
    for i in range(m):
        if basis[i] >= n:
            nz = np.flatnonzero(np.abs(T[i, :n]) > tol)
            if nz.size:
                j = nz[0]
                T[i] /= T[i, j]
                for r in range(m):
                    if r != i:
                        T[r] -= T[r, j] * T[i]
                basis[i] = j
    phase2 = np.zeros(n + m + 1)
    phase2[:n] = cost
    allowed = np.zeros(n + m, dtype=bool)
    allowed[:n] = True
    run(phase2, allowed)
    y = np.zeros(n)
    for i, j in enumerate(basis):
        if j < n:
            y[j] = T[i, -1]
    return y, basis


def chebyshev_center(normals, offsets):
    """Largest ball inside ``{x : normals[i] . x <= offsets[i]}``.

    Solved through the dual LP (three equality rows) with a tableau simplex.
    Normals must be unit vectors.  Returns ``(radius, center)``.
    """
    normals = np.asarray(normals, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    A = np.vstack([normals.T, np.ones(len(offsets))])
    rhs = np.array([0.0, 0.0, 1.0])
    _, basis = _simplex_standard(offsets, A, rhs)
    cols = [j for j in basis if j < len(offsets)]
    if len(cols) < 3:
        raise InvalidDomainError("degenerate Chebyshev-center LP")
    sys = np.column_stack([normals[cols], np.ones(3)])
    sol = np.linalg.solve(sys, offsets[cols])
    return float(sol[2]), sol[:2].copy()


# ---------------------------------------------------------------------------
# polygon clipping helpers
# ---------------------------------------------------------------------------

def clip_convex(points, normals, offsets):
    """Clip a convex polygon (CCW points) by half-planes ``n . x <= b``."""
    poly = [np.asarray(p, dtype=float) for p in points]
    for nrm, off in zip(np.asarray(normals, float), np.asarray(offsets, float)):
        if not poly:
            break
        out = []
        k = len(poly)
        for i in range(k):
            p, q = poly[i], poly[(i + 1) % k]
            dp, dq = nrm @ p - off, nrm @ q - off
            if dp <= 0:
                out.append(p)
            if (dp < 0 < dq) or (dq < 0 < dp):
                s = dp / (dp - dq)
                out.append(p + s * (q - p))
        poly = out
    return np.array(poly).reshape(-1, 2)


def polygon_area(points):
    """Signed shoelace area of a closed vertex list."""
    p = np.asarray(points, dtype=float)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


# ---------------------------------------------------------------------------
# domains
# ---------------------------------------------------------------------------

class ConvexPolygon:
    """Convex polygon with counterclockwise, strictly convex vertices.

    Input may be clockwise, may repeat the first vertex at the end and may
    contain collinear or duplicate vertices; all of that is canonicalized
    away.  Reflex turns raise :class:`InvalidDomainError`.
    """

    def __init__(self, vertices, tol=GEOM_TOL):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2 or len(v) < 3:
            raise InvalidDomainError("polygon needs at least 3 two-dimensional vertices")
        if len(v) > 3 and np.allclose(v[0], v[-1], atol=tol, rtol=0):
            v = v[:-1]
        if polygon_area(v) < 0:
            v = v[::-1]
        scale = max(float(np.ptp(v, axis=0).max()), tol)
        changed = True
        while changed and len(v) >= 3:
            changed = False
            prev = np.roll(v, 1, axis=0)
            nxt = np.roll(v, -1, axis=0)
            e1, e2 = v - prev, nxt - v
            cross = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
            if np.any(cross < -tol * scale**2):
                raise InvalidDomainError("polygon is not convex")
            flat = np.flatnonzero(cross <= tol * scale**2)
            if flat.size:
                v = np.delete(v, flat[0], axis=0)
                changed = True
        if len(v) < 3 or polygon_area(v) <= tol:
            raise InvalidDomainError("degenerate polygon (area <= tol)")
        self._v = _readonly(v)
        edges = np.roll(v, -1, axis=0) - v
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        tangents = edges / lengths[:, None]
        self._normals = _readonly(np.column_stack([tangents[:, 1], -tangents[:, 0]]))
        self._offsets = _readonly(np.einsum("ij,ij->i", self._normals, v))
        self._lengths = _readonly(lengths)

    def __repr__(self):
        return f"ConvexPolygon({len(self._v)} vertices)"

    # construction helpers
    @classmethod
    def rectangle(cls, a=1.0, b=1.0, origin=(0.0, 0.0)):
        x0, y0 = origin
        return cls([(x0, y0), (x0 + a, y0), (x0 + a, y0 + b), (x0, y0 + b)])

    @classmethod
    def unit_square(cls):
        return cls.rectangle(1.0, 1.0)

    @property
    def vertices(self):
        return self._v

    @property
    def normals(self):
        """Outward unit normal of edge ``i`` (from vertex ``i`` to ``i+1``)."""
        return self._normals

    @property
    def offsets(self):
        return self._offsets

    @property
    def edge_lengths(self):
        return self._lengths

    @property
    def area(self):
        return polygon_area(self._v)

    @property
    def perimeter(self):
        return float(self._lengths.sum())

    def scaled(self, s):
        return ConvexPolygon(self._v * s)

    def translated(self, d):
        return ConvexPolygon(self._v + np.asarray(d, float))

    def is_axis_rectangle(self, tol=GEOM_TOL):
        if len(self._v) != 4:
            return False
        n = np.abs(self._normals)
        return bool(np.all((n < tol) | (np.abs(n - 1.0) < tol)))

    def support(self, theta):
        """``h(theta) = max_v v . u(theta)``, exact."""
        u = _unit(theta)
        return (u @ self._v.T).max(axis=-1)

    def critical_directions(self):
        return np.mod(np.arctan2(self._normals[:, 1], self._normals[:, 0]), TWO_PI)

    def inner_distance(self, points):
        """``min_i (b_i - n_i . x)``: distance to the boundary for interior points."""
        p = np.atleast_2d(np.asarray(points, float))
        return (self._offsets[None, :] - p @ self._normals.T).min(axis=1)

    def contains(self, points, tol=GEOM_TOL):
        return self.inner_distance(points) >= -tol

    def closest_boundary_points(self, points):
        """Nearest point on the polygon boundary and the index of its edge."""
        p = np.atleast_2d(np.asarray(points, float))
        a = self._v[None, :, :]
        e = (np.roll(self._v, -1, axis=0) - self._v)[None, :, :]
        s = np.einsum("pkj,pkj->pk", p[:, None, :] - a, np.broadcast_to(e, (len(p),) + e.shape[1:]))
        s = np.clip(s / (self._lengths**2)[None, :], 0.0, 1.0)
        q = a + s[..., None] * e
        d = np.linalg.norm(p[:, None, :] - q, axis=2)
        k = d.argmin(axis=1)
        idx = np.arange(len(p))
        return q[idx, k], k, s[idx, k]

    def project(self, points):
        return self.closest_boundary_points(points)[0]

    def boundary_samples(self, spacing):
        """Points along the boundary, CCW from vertex 0, every corner included."""
        pts = []
        for i in range(len(self._v)):
            a, b = self._v[i], self._v[(i + 1) % len(self._v)]
            n = max(1, int(np.ceil(self._lengths[i] / spacing - 1e-9)))
            t = np.arange(n) / n
            pts.append(a[None, :] + t[:, None] * (b - a)[None, :])
        return np.vstack(pts)


class SmoothConvexBody:
    """Convex body given by its support function on a uniform angle grid.

    Parameters
    ----------
    samples : array_like, shape (N,)
        ``h(theta_i)`` with ``theta_i = 2 pi i / N``; ``N`` must be even.
    base : ConvexPolygon, optional
        When given, the body is the outer parallel body ``base + B_offset`` and
        all evaluations are exact.
    offset : float
        Parallel-body radius (only meaningful with ``base``).
    """

    def __init__(self, samples, base=None, offset=0.0, tol=GEOM_TOL):
        h = np.asarray(samples, dtype=float)
        if h.ndim != 1 or len(h) < 8 or len(h) % 2:
            raise InvalidDomainError("support samples must be a 1D grid of even length >= 8")
        self._h = _readonly(h)
        self.base = base
        self.offset = float(offset)
        n = len(h)
        if base is None:
            if np.any(h <= 0):
                raise InvalidDomainError("support function must be positive (origin interior)")
            X = np.fft.rfft(h)
            a = np.zeros(n // 2 + 1)
            b = np.zeros(n // 2 + 1)
            a[0] = X[0].real / n
            a[1:n // 2] = 2.0 * X[1:n // 2].real / n
            b[1:n // 2] = -2.0 * X[1:n // 2].imag / n
            a[n // 2] = X[n // 2].real / n
            self._a, self._b = a, b
            rc = self.radius_of_curvature(self.theta)
            if np.any(rc <= tol):
                raise InvalidDomainError("h + h'' <= 0 on the grid: body is not strictly convex")
        elif self.offset <= 0:
            raise InvalidDomainError("parallel body needs a positive radius")

    def __repr__(self):
        kind = f"parallel(r={self.offset:g})" if self.base is not None else "sampled"
        return f"SmoothConvexBody({kind}, N={len(self._h)})"

    # construction helpers
    @classmethod
    def disk(cls, radius=1.0, center=(0.0, 0.0), n=DEFAULT_SAMPLES):
        th = TWO_PI * np.arange(n) / n
        return cls(radius + _unit(th) @ np.asarray(center, float))

    @classmethod
    def ellipse(cls, a, b, n=DEFAULT_SAMPLES):
        th = TWO_PI * np.arange(n) / n
        return cls(np.sqrt((a * np.cos(th)) ** 2 + (b * np.sin(th)) ** 2))

    @property
    def samples(self):
        return self._h

    @property
    def n_samples(self):
        return len(self._h)

    @property
    def theta(self):
        return TWO_PI * np.arange(len(self._h)) / len(self._h)

    # --- support function and derivatives -------------------------------
    def _trig(self, theta, deriv):
        theta = np.asarray(theta, dtype=float)
        flat = theta.ravel()
        kmax = len(self._a) - 1
        k = np.arange(kmax + 1, dtype=float)
        a, b = self._a.copy(), self._b.copy()
        if deriv:
            a[kmax] = 0.0
        out = np.empty_like(flat)
        for s in range(0, len(flat), 2048):
            ph = np.outer(flat[s:s + 2048], k)
            c, sn = np.cos(ph), np.sin(ph)
            if deriv == 0:
                out[s:s + 2048] = c @ a + sn @ b
            elif deriv == 1:
                out[s:s + 2048] = (-sn @ (k * a)) + c @ (k * b)
            else:
                out[s:s + 2048] = -(c @ (k**2 * a) + sn @ (k**2 * b))
        return out.reshape(theta.shape)

    def support(self, theta):
        if self.base is not None:
            return self.base.support(theta) + self.offset
        return self._trig(theta, 0)

    def support_derivative(self, theta, order=1):
        """``h'`` (order 1) or ``h''`` (order 2)."""
        if self.base is not None:
            u = _unit(theta)
            v = self.base.vertices[np.argmax(u @ self.base.vertices.T, axis=-1)]
            if order == 1:
                return np.einsum("...j,...j->...", v, np.stack([-u[..., 1], u[..., 0]], -1))
            return -np.einsum("...j,...j->...", v, u)
        return self._trig(theta, order)

    def support_on_grid(self, m):
        """Support values on the uniform grid of ``m`` directions."""
        if self.base is not None:
            return self.support(TWO_PI * np.arange(m) / m)
        n = len(self._h)
        if m == n:
            return self._h.copy()
        if m > n:
            X = np.fft.rfft(self._h)
            Y = np.zeros(m // 2 + 1, dtype=complex)
            Y[:n // 2] = X[:n // 2]
            Y[n // 2] = X[n // 2] / 2.0
            return np.fft.irfft(Y, n=m) * (m / n)
        return self.support(TWO_PI * np.arange(m) / m)

    def radius_of_curvature(self, theta):
        if self.base is not None:
            return np.full(np.shape(theta), self.offset)
        return self._trig(theta, 0) + self._trig(theta, 2)

    def curvature(self, theta):
        """Boundary curvature ``1 / (h + h'')`` at normal direction ``theta``.

        For parallel bodies this is the arc curvature ``1/r``; the flat pieces
        carry no normal direction of their own.
        """
        rc = self.radius_of_curvature(theta)
        if np.any(rc <= 0):
            raise InvalidDomainError("h + h'' <= 0: body is not convex")
        return 1.0 / rc

    def boundary_point(self, theta):
        """``x(theta) = h u + h' u_perp``."""
        u = _unit(theta)
        if self.base is not None:
            v = self.base.vertices[np.argmax(u @ self.base.vertices.T, axis=-1)]
            return v + self.offset * u
        uperp = np.stack([-u[..., 1], u[..., 0]], -1)
        h = self._trig(theta, 0)
        hp = self._trig(theta, 1)
        return h[..., None] * u + hp[..., None] * uperp

    def critical_directions(self):
        if self.base is not None:
            return self.base.critical_directions()
        return np.zeros(0)

    # --- integral geometry ---------------------------------------------
    @property
    def perimeter(self):
        if self.base is not None:
            return self.base.perimeter + TWO_PI * self.offset
        return TWO_PI * self._a[0]

    @property
    def area(self):
        if self.base is not None:
            return self.base.area + self.base.perimeter * self.offset + np.pi * self.offset**2
        k = np.arange(len(self._a), dtype=float)
        amp = self._a**2 + self._b**2
        return float(np.pi * self._a[0] ** 2 + 0.5 * np.pi * np.sum((1 - k[1:] ** 2) * amp[1:]))

    # --- boundary access for meshing -----------------------------------
    def _arclength(self, theta):
        """Arclength from ``x(0)`` to ``x(theta)`` (sampled bodies)."""
        theta = np.asarray(theta, float)
        k = np.arange(1, len(self._a), dtype=float)
        a, b = self._a[1:].copy(), self._b[1:].copy()
        a[-1] = 0.0
        ph = np.multiply.outer(theta, k)
        integ = self._a[0] * theta + (np.sin(ph) @ (a / k)) - ((np.cos(ph) - 1.0) @ (b / k))
        return self._trig(theta, 1) - self._trig(np.zeros(1), 1)[0] + integ

    def _parallel_pieces(self):
        P = self.base
        r = self.offset
        nrm = P.normals
        pieces = []
        for i in range(len(P.vertices)):
            t0 = np.arctan2(nrm[i - 1, 1], nrm[i - 1, 0])
            t1 = np.arctan2(nrm[i, 1], nrm[i, 0])
            dt = np.mod(t1 - t0, TWO_PI)
            pieces.append(("arc", P.vertices[i], t0, dt, r * dt))
            a = P.vertices[i] + r * nrm[i]
            b = P.vertices[(i + 1) % len(P.vertices)] + r * nrm[i]
            pieces.append(("seg", a, b, None, P.edge_lengths[i]))
        return pieces

    def boundary_samples(self, spacing):
        """Boundary points at uniform arclength, CCW."""
        n = max(8, int(np.ceil(self.perimeter / spacing - 1e-9)))
        s = self.perimeter * np.arange(n) / n
        if self.base is not None:
            pts = np.empty((n, 2))
            start = 0.0
            pieces = self._parallel_pieces()
            for kind, p0, p1, dt, length in pieces:
                sel = (s >= start) & (s < start + length)
                loc = s[sel] - start
                if kind == "arc":
                    ang = p1 + loc / self.offset
                    pts[sel] = p0 + self.offset * _unit(ang)
                else:
                    pts[sel] = p0 + (loc / length)[:, None] * (p1 - p0)
                start += length
            return pts
        theta = TWO_PI * s / self.perimeter
        lo = np.zeros(n)
        hi = np.full(n, TWO_PI)
        for _ in range(60):
            f = self._arclength(theta) - s
            lo = np.where(f < 0, theta, lo)
            hi = np.where(f >= 0, theta, hi)
            step = theta - f / self.radius_of_curvature(theta)
            bad = (step <= lo) | (step >= hi)
            theta_new = np.where(bad, 0.5 * (lo + hi), step)
            if np.max(np.abs(theta_new - theta)) < 1e-15:
                theta = theta_new
                break
            theta = theta_new
        return self.boundary_point(theta)

    def boundary_parameter(self, points):
        """Normal angle ``theta`` of the nearest boundary point (Newton on theta)."""
        p = np.atleast_2d(np.asarray(points, float))
        grid = self.theta
        xg = self.boundary_point(grid)
        theta = np.empty(len(p))
        for s in range(0, len(p), 1024):
            d = ((p[s:s + 1024, None, :] - xg[None, :, :]) ** 2).sum(-1)
            theta[s:s + 1024] = grid[d.argmin(axis=1)]
        for _ in range(30):
            u = _unit(theta)
            uperp = np.stack([-u[:, 1], u[:, 0]], -1)
            x = self.boundary_point(theta)
            g = np.einsum("ij,ij->i", p - x, uperp)
            dg = -self.radius_of_curvature(theta) - np.einsum("ij,ij->i", p - x, u)
            step = g / dg
            step = np.clip(step, -0.1, 0.1)
            theta = theta - step
            if np.max(np.abs(step)) < 1e-15:
                break
        return np.mod(theta, TWO_PI)

    def project(self, points):
        """Nearest boundary point."""
        p = np.atleast_2d(np.asarray(points, float))
        if self.base is not None:
            q, k, _ = self.base.closest_boundary_points(p)
            d = p - q
            dist = np.linalg.norm(d, axis=1)
            inside = self.base.inner_distance(p) > 0
            direction = np.where(
                (inside | (dist < 1e-300))[:, None],
                self.base.normals[k],
                d / np.maximum(dist, 1e-300)[:, None],
            )
            return q + self.offset * direction
        return self.boundary_point(self.boundary_parameter(p))

    def boundary_curvature(self, points):
        """Curvature of the boundary at the point nearest to each input point."""
        p = np.atleast_2d(np.asarray(points, float))
        if self.base is not None:
            q = self.project(p)
            _, _, s = self.base.closest_boundary_points(q)
            on_arc = (s <= 1e-12) | (s >= 1.0 - 1e-12)
            return np.where(on_arc, 1.0 / self.offset, 0.0)
        return self.curvature(self.boundary_parameter(p))

    def inner_distance(self, points):
        """``min_theta (h(theta) - x . u(theta))`` over the sample grid."""
        p = np.atleast_2d(np.asarray(points, float))
        th = self.theta
        extra = self.critical_directions()
        if extra.size:
            th = np.concatenate([th, extra])
        u = _unit(th)
        h = self.support(th) if self.base is not None else np.concatenate([self._h, self.support(extra)])
        out = np.empty(len(p))
        for s in range(0, len(p), 1024):
            out[s:s + 1024] = (h[None, :] - p[s:s + 1024] @ u.T).min(axis=1)
        return out

    def contains(self, points, tol=GEOM_TOL):
        return self.inner_distance(points) >= -tol

    def scaled(self, s):
        if self.base is not None:
            return SmoothConvexBody(self._h * s, base=self.base.scaled(s), offset=self.offset * s)
        return SmoothConvexBody(self._h * s)


Domain = Union[ConvexPolygon, SmoothConvexBody]


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------

def _width(domain, theta):
    return domain.support(theta) + domain.support(np.asarray(theta) + np.pi)


def diameter(domain):
    """Diameter ``sup |x - y|``.

    Polygons: maximum over vertex pairs.  Smooth bodies: maximal width
    ``h(theta) + h(theta + pi)`` over the sample grid and the critical
    directions, followed by one bounded refinement around the best grid angle.
    """
    if isinstance(domain, ConvexPolygon):
        v = domain.vertices
        d = np.linalg.norm(v[:, None, :] - v[None, :, :], axis=2)
        return float(d.max())
    n = domain.n_samples
    h = domain.support_on_grid(n)
    w = h + np.roll(h, -n // 2)
    i = int(np.argmax(w))
    best = float(w[i])
    if domain.base is not None:
        v = domain.base.vertices
        d = v[:, None, :] - v[None, :, :]
        ii, jj = np.unravel_index(np.argmax(np.linalg.norm(d, axis=2)), d.shape[:2])
        crit = np.arctan2(d[ii, jj, 1], d[ii, jj, 0])
        best = max(best, float(_width(domain, crit)))
    step = TWO_PI / n
    res = minimize_scalar(
        lambda t: -float(_width(domain, t)),
        bounds=(domain.theta[i] - step, domain.theta[i] + step),
        method="bounded",
        options={"xatol": 1e-13},
    )
    return max(best, -float(res.fun))


def inradius_incenter(domain):
    """Inradius and a center of a largest inscribed disk (Chebyshev LP)."""
    if isinstance(domain, ConvexPolygon):
        if domain.area <= GEOM_TOL:
            raise InvalidDomainError("degenerate polygon")
        return chebyshev_center(domain.normals, domain.offsets)
    extra = domain.critical_directions()
    th = np.concatenate([domain.theta, extra])
    if domain.base is not None:
        offsets = domain.support(th)
    else:
        offsets = np.concatenate([domain.samples, domain.support(extra)])
    return chebyshev_center(_unit(th), offsets)


def hausdorff_distance(A, B, n_dirs=4096):
    """``max_theta |h_A - h_B|`` on a uniform grid of directions."""
    th = TWO_PI * np.arange(n_dirs) / n_dirs

    def values(d):
        if isinstance(d, SmoothConvexBody):
            return d.support_on_grid(n_dirs)
        return d.support(th)

    return float(np.max(np.abs(values(A) - values(B))))


def outer_parallel_body(polygon, r, n=DEFAULT_SAMPLES):
    """The Minkowski sum ``polygon + closed disk of radius r``."""
    if not isinstance(polygon, ConvexPolygon):
        raise UnsupportedDomainError("outer_parallel_body expects a ConvexPolygon")
    if not r > 0:
        raise InvalidDomainError("parallel-body radius must be positive")
    th = TWO_PI * np.arange(n) / n
    return SmoothConvexBody(polygon.support(th) + r, base=polygon, offset=r)


def inner_parallel_body(polygon, delta):
    """``{x in P : dist(x, boundary) >= delta}`` for ``0 <= delta < inradius``."""
    lo = polygon.vertices.min(axis=0) - 1.0
    hi = polygon.vertices.max(axis=0) + 1.0
    box = np.array([lo, [hi[0], lo[1]], hi, [lo[0], hi[1]]])
    pts = clip_convex(box, polygon.normals, polygon.offsets - delta)
    return ConvexPolygon(pts)


def min_x_dot_nu(domain, origin):
    """Minimum of ``(x - origin) . nu`` over the boundary."""
    o = np.asarray(origin, dtype=float)
    if isinstance(domain, ConvexPolygon):
        vals = domain.offsets - domain.normals @ o
    else:
        th = np.concatenate([domain.theta, domain.critical_directions()])
        vals = domain.support(th) - _unit(th) @ o
    m = float(vals.min())
    if m < -GEOM_TOL:
        raise InvalidDomainError("origin lies outside the domain")
    return m


def curvature(body, theta):
    """Boundary curvature of a smooth body at normal angle ``theta``."""
    if not isinstance(body, SmoothConvexBody):
        raise UnsupportedDomainError("curvature is only defined for smooth bodies")
    return body.curvature(theta)


@dataclass(frozen=True)
class GeometrySummary:
    diameter: float
    inradius: float
    incenter: tuple
    min_x_dot_nu: float

    @property
    def D(self):
        return self.diameter

    @property
    def rho(self):
        return self.inradius


def summarize(domain):
    D = diameter(domain)
    rho, c = inradius_incenter(domain)
    return GeometrySummary(D, rho, (float(c[0]), float(c[1])), min_x_dot_nu(domain, c))


def domain_area(domain):
    return float(domain.area)


def domain_perimeter(domain):
    return float(domain.perimeter)


def random_convex_polygon(rng, n_points=9, radius=1.0):
    """Convex hull of points at random angles and radii around the origin."""
    from scipy.spatial import ConvexHull

    while True:
        ang = np.sort(rng.uniform(0.0, TWO_PI, n_points))
        rad = radius * rng.uniform(0.6, 1.0, n_points)
        pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
        hull = ConvexHull(pts)
        try:
            poly = ConvexPolygon(pts[hull.vertices])
        except InvalidDomainError:
            continue
        rho, _ = inradius_incenter(poly)
        if rho > 0.25 * radius:
            return poly


# ---------------------------------------------------------------------------
# file format
# ---------------------------------------------------------------------------

def write_domain(path, domain):
    """Plain-text domain file with 17 significant digits."""
    with open(path, "w", encoding="ascii") as fh:
        if isinstance(domain, ConvexPolygon):
            fh.write(f"polygon {len(domain.vertices)}\n")
            for x, y in domain.vertices:
                fh.write(f"{x:.17g} {y:.17g}\n")
        else:
            fh.write(f"support {domain.n_samples}\n")
            for h in domain.samples:
                fh.write(f"{h:.17g}\n")


def read_domain(path):
    with open(path, encoding="ascii") as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    kind, count = lines[0].split()
    count = int(count)
    body = lines[1:1 + count]
    if len(body) != count:
        raise InvalidDomainError(f"expected {count} data lines, got {len(body)}")
    if kind == "polygon":
        return ConvexPolygon([[float(t) for t in ln.split()] for ln in body])
    if kind == "support":
        return SmoothConvexBody([float(ln) for ln in body])
    raise InvalidDomainError(f"unknown domain kind {kind!r}")
