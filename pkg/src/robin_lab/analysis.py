"""Discrete checks of the trace inequality, coercivity, integral identities and
Hessian bounds for Robin eigenpairs.

Boundary integrals are evaluated edge by edge with a four-point Gauss rule,
which is exact for every integrand used here because the trace of a P2
function and its tangential derivative are polynomials on each straight
boundary edge.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .eigensolve import count_below, pencil_extreme
from .errors import InconclusiveError, UnsupportedDomainError
from .fem import boundary_element_matrices, robin_matrix
from .geometry import SmoothConvexBody, inradius_incenter

# absolute floor below which squared norms of an L2-normalised eigenfunction
# are rounding noise (the constant Neumann mode)
NOISE_FLOOR = 1e-9

_GX, _GW = np.polynomial.legendre.leggauss(4)
GAUSS_T = 0.5 * (_GX + 1.0)
GAUSS_W = 0.5 * _GW


# ---------------------------------------------------------------------------
# reports
# ---------------------------------------------------------------------------


@dataclass
class IdentityReport:
    """Terms, residual and verdict of one identity or inequality check.

    For identities ``residual`` is the sum of the terms; for inequalities it
    is ``lhs - rhs``.  ``relative_residual`` is ``|residual| / max(scale, 1)``
    where ``scale`` is the largest term magnitude.
    """

    name: str
    terms: dict
    residual: float
    h: float | None = None
    beta: float | None = None
    lam: float | None = None
    domain: str = ""
    flags: list = field(default_factory=list)
    passed: bool | None = None
    extra: dict = field(default_factory=dict)

    @property
    def scale(self):
        return max((abs(v) for v in self.terms.values()), default=0.0)

    @property
    def relative_residual(self):
        return abs(self.residual) / max(self.scale, 1.0)

    def to_dict(self):
        return {
            "name": self.name,
            "terms": {k: float(v) for k, v in self.terms.items()},
            "residual": float(self.residual),
            "relative_residual": float(self.relative_residual),
            "h": None if self.h is None else float(self.h),
            "beta": None if self.beta is None else float(self.beta),
            "lambda": None if self.lam is None else float(self.lam),
            "domain": self.domain,
            "flags": list(self.flags),
            "passed": self.passed,
            "extra": {k: _jsonable(v) for k, v in self.extra.items()},
        }

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, np.ndarray):
        return v.tolist()
    return v


def _domain_id(space):
    return repr(space.mesh.domain) if space.mesh.domain is not None else "mesh"


# ---------------------------------------------------------------------------
# boundary trace
# ---------------------------------------------------------------------------


def _edge_shapes(degree, t):
    t = np.asarray(t, float)
    if degree == 1:
        return np.column_stack([1 - t, t]), np.column_stack([-np.ones_like(t), np.ones_like(t)])
    val = np.column_stack([(1 - t) * (1 - 2 * t), t * (2 * t - 1), 4 * t * (1 - t)])
    der = np.column_stack([4 * t - 3, 4 * t - 1, 4 - 8 * t])
    return val, der


class BoundaryTrace:
    """Boundary data of one finite element function.

    Attributes
    ----------
    values : ndarray
        Trace at the boundary dofs in loop order.
    tangential : ndarray, shape (Eb, 4)
        ``du/ds`` at the Gauss points of each boundary edge (exact piecewise
        derivative of the trace).
    normal_discrete : ndarray, shape (Eb, 4)
        ``grad u . nu`` from the adjacent element at the same points.
    x_dot_nu : ndarray, shape (Eb,)
        ``(x - origin) . nu``, constant on each straight edge.
    boundary_laplacian : ndarray
        Galerkin boundary Laplacian ``-Mb^{-1} Sb u`` at the loop dofs.
    """

    def __init__(self, space, u, origin=(0.0, 0.0)):
        mesh = space.mesh
        u = np.asarray(u, float)
        self.space = space
        self.origin = np.asarray(origin, float)
        bd = space.boundary_dofs
        ue = u[bd]
        val, der = _edge_shapes(space.degree, GAUSS_T)
        L = mesh.edge_lengths
        self.weights = L[:, None] * GAUSS_W[None, :]
        self.trace = ue @ val.T
        self.tangential = (ue @ der.T) / L[:, None]
        a = mesh.nodes[mesh.boundary_edges[:, 0]]
        b = mesh.nodes[mesh.boundary_edges[:, 1]]
        self.tangent = (b - a) / L[:, None]
        self.normal = np.array(mesh.normals)
        pts = a[:, None, :] + GAUSS_T[None, :, None] * (b - a)[:, None, :]
        self.points = pts
        rel = pts - self.origin
        self.x_dot_nu = ((0.5 * (a + b) - self.origin) * self.normal).sum(axis=1)
        self.x_dot_tau = np.einsum("eqx,ex->eq", rel, self.tangent)
        tri = np.repeat(mesh.boundary_triangle, len(GAUSS_T))
        flat = pts.reshape(-1, 2)
        lam = space.barycentric(tri, flat)
        grad = space.gradient_at(u, tri, lam).reshape(len(L), len(GAUSS_T), 2)
        self.normal_discrete = np.einsum("eqx,ex->eq", grad, self.normal)

        loop = space.boundary_dof_loop
        local = {int(g): i for i, g in enumerate(loop)}
        idx = np.vectorize(local.__getitem__)(bd)
        Me, Se = boundary_element_matrices(space)
        nb = len(loop)
        m = idx.shape[1]
        r = np.repeat(idx, m, axis=1).ravel()
        c = np.tile(idx, (1, m)).ravel()
        self.Mb = sp.csc_matrix((Me.ravel(), (r, c)), shape=(nb, nb))
        self.Sb = sp.csc_matrix((Se.ravel(), (r, c)), shape=(nb, nb))
        self.values = u[loop]
        self.boundary_laplacian = -spla.splu(self.Mb).solve(self.Sb @ self.values)

    def integrate(self, f):
        """Integral over the boundary of Gauss-point data ``f`` (Eb, 4)."""
        return float((self.weights * f).sum())

    @property
    def l2_sq(self):
        return self.integrate(self.trace ** 2)

    @property
    def tangential_sq(self):
        return self.integrate(self.tangential ** 2)

    @property
    def tangential_mean(self):
        """Integral of ``du/ds`` around the closed loop (zero up to rounding)."""
        return self.integrate(self.tangential)

    @property
    def u_boundary_laplacian(self):
        """``int u * Lap_bd u`` using the Galerkin boundary Laplacian."""
        return float(self.values @ (self.Mb @ self.boundary_laplacian))

    def robin_normal_residual(self, beta):
        """``|| du/dnu + beta u ||_{L2(boundary)}`` with the discrete normal derivative."""
        return math.sqrt(self.integrate((self.normal_discrete + beta * self.trace) ** 2))


def boundary_trace(space, u, origin=(0.0, 0.0)):
    return BoundaryTrace(space, u, origin)


# ---------------------------------------------------------------------------
# trace constant and coercivity
# ---------------------------------------------------------------------------


def trace_constant(pencil, eps, return_vector=False):
    """Smallest ``c`` with ``u'Bu <= eps u'Ku + c u'Mu`` on the discrete space."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    key = ("trace_constant", float(eps))
    if key not in pencil.cache:
        P = (pencil.B - eps * pencil.K).tocsr()
        lam, v = pencil_extreme(P, pencil.M, which="largest", return_vector=True)
        pencil.cache[key] = (max(0.0, lam), v)
    C, v = pencil.cache[key]
    return (C, v.copy()) if return_vector else C


def trace_residuals(pencil, eps, C, vectors):
    """``(eps u'Ku + C u'Mu - u'Bu) / u'Mu`` for each column of ``vectors``."""
    V = np.asarray(vectors, float)
    if V.ndim == 1:
        V = V[:, None]
    k = np.einsum("ij,ij->j", V, pencil.K @ V)
    m = np.einsum("ij,ij->j", V, pencil.M @ V)
    b = np.einsum("ij,ij->j", V, pencil.B @ V)
    return (eps * k + C * m - b) / m


def coercivity_check(pencil, beta, eps, tol=1e-9):
    """Positive semidefiniteness of ``K + beta B - 2 beta c M - c* (K + M)``.

    ``c`` is the trace constant at ``eps`` and
    ``c* = min(1 + beta eps, -beta c)``.
    """
    beta = float(beta)
    if not beta < 0:
        raise ValueError("coercivity_check needs beta < 0")
    if not 0 < eps < -1.0 / beta:
        raise ValueError(f"eps={eps} outside (0, {-1.0 / beta})")
    C = trace_constant(pencil, eps)
    cstar = min(1.0 + beta * eps, -beta * C)
    P = robin_matrix(pencil, beta) - 2.0 * beta * C * pencil.M - cstar * (pencil.K + pencil.M)
    mu = pencil_extreme(P.tocsr(), pencil.M, which="smallest")
    space = pencil.space
    return IdentityReport(
        name="coercivity",
        terms={"trace_constant": C, "coercivity_constant": cstar, "min_eigenvalue": mu},
        residual=mu,
        h=space.mesh.h_target,
        beta=beta,
        domain=_domain_id(space),
        passed=bool(mu >= -tol),
        extra={"eps": eps},
    )


# ---------------------------------------------------------------------------
# integral identities
# ---------------------------------------------------------------------------


def _default_origin(space, origin):
    if origin is not None:
        return np.asarray(origin, float)
    if space.mesh.domain is None:
        raise ValueError("origin required when the mesh has no domain")
    return inradius_incenter(space.mesh.domain)[1]


def rellich_pohozaev(space, u, lam, beta, origin=None):
    """Six-term Rellich-Pohozaev balance for an eigenpair in two dimensions.

    The normal derivative is replaced by ``-beta u``.  The same balance with
    the discrete one-sided normal derivative is stored in ``extra``.
    """
    origin = _default_origin(space, origin)
    tr = BoundaryTrace(space, u, origin)
    n = 2
    u = np.asarray(u, float)
    l2 = float(u @ (_mass(space) @ u))
    grad_sq = float(u @ (_stiff(space) @ u))
    xnu = tr.x_dot_nu[:, None]

    def terms_for(dnu):
        return {
            "half_lambda_bd_u2_xnu": 0.5 * lam * tr.integrate(tr.trace ** 2 * xnu),
            "minus_half_n_lambda_u2": -0.5 * n * lam * l2,
            "half_bd_dnu2_xnu": 0.5 * tr.integrate(dnu ** 2 * xnu),
            "minus_half_bd_tangential2_xnu": -0.5 * tr.integrate(tr.tangential ** 2 * xnu),
            "bd_dnu_x_tangential": tr.integrate(dnu * tr.x_dot_tau * tr.tangential),
            "half_n_minus_2_grad2": 0.5 * (n - 2) * grad_sq,
        }

    terms = terms_for(-beta * tr.trace)
    alt = terms_for(tr.normal_discrete)
    alt_res = sum(alt.values())
    alt_scale = max(abs(v) for v in alt.values())
    return IdentityReport(
        name="rellich_pohozaev",
        terms=terms,
        residual=sum(terms.values()),
        h=space.mesh.h_target,
        beta=float(beta),
        lam=float(lam),
        domain=_domain_id(space),
        extra={
            "discrete_normal_terms": alt,
            "discrete_normal_residual": alt_res,
            "discrete_normal_relative_residual": abs(alt_res) / max(alt_scale, 1.0),
            "origin": origin.tolist(),
        },
    )


def _mass(space):
    from .fem import _scatter, element_mass

    if not hasattr(space, "_mass_cache"):
        space._mass_cache = _scatter(space.cell_dofs, element_mass(space), space.n_dofs)
    return space._mass_cache


def _stiff(space):
    from .fem import _scatter, element_stiffness

    if not hasattr(space, "_stiff_cache"):
        space._stiff_cache = _scatter(space.cell_dofs, element_stiffness(space), space.n_dofs)
    return space._stiff_cache


def broken_hessian_sq(space, u, cells=None, weights=None):
    """``sum_T int_T |D^2 u|^2`` (Frobenius norm), optionally over a subset of cells.

    ``weights`` scales each cell's contribution, e.g. the fraction of the
    cell lying in a subdomain.
    """
    H = space.cell_hessians(u)
    dens = np.einsum("txy,txy->t", H, H) * space.areas
    if weights is not None:
        dens = dens * weights
    if cells is not None:
        dens = dens[cells]
    return float(dens.sum())


def broken_laplacian_sq(space, u):
    H = space.cell_hessians(u)
    return float(((H[:, 0, 0] + H[:, 1, 1]) ** 2 * space.areas).sum())


def reilly_check(space, u, lam, beta):
    """Two-dimensional Reilly balance for a Robin eigenpair on a smooth body.

    Residual: ``int |D^2 u|^2 - lam^2 int u^2 + int_bd (kappa beta^2 u^2
    - 2 beta u Lap_bd u + kappa |du/ds|^2)``.
    """
    domain = space.mesh.domain
    if not isinstance(domain, SmoothConvexBody):
        raise UnsupportedDomainError("Reilly check needs a smooth body with a pointwise curvature")
    if space.degree != 2:
        raise ValueError("Reilly check needs a P2 space")
    tr = BoundaryTrace(space, u, (0.0, 0.0))
    u = np.asarray(u, float)
    kappa = domain.boundary_curvature(tr.points.reshape(-1, 2)).reshape(tr.points.shape[:2])
    l2 = float(u @ (_mass(space) @ u))
    hess = broken_hessian_sq(space, u)
    ulap = tr.u_boundary_laplacian
    tang = tr.tangential_sq
    terms = {
        "hessian_sq": hess,
        "minus_laplacian_sq": -lam * lam * l2,
        "kappa_beta2_bd_u2": beta * beta * tr.integrate(kappa * tr.trace ** 2),
        "minus_2beta_bd_u_lapbd_u": -2.0 * beta * ulap,
        "kappa_bd_tangential2": tr.integrate(kappa * tr.tangential ** 2),
    }
    sbp = abs(ulap + tang) / max(tang, 1.0)
    return IdentityReport(
        name="reilly",
        terms=terms,
        residual=sum(terms.values()),
        h=space.mesh.h_target,
        beta=float(beta),
        lam=float(lam),
        domain=_domain_id(space),
        extra={
            "laplacian_sq_broken": broken_laplacian_sq(space, u),
            "plus_2beta_bd_tangential2": 2.0 * beta * tang,
            "summation_by_parts_relative": sbp,
        },
    )


# ---------------------------------------------------------------------------
# bounds
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BoundConstant:
    """Value of the explicit constant together with its radicand.

    When the radicand is negative the square root is taken of zero and
    ``flagged`` is set; ``radicand`` says by how much the formula failed.
    """

    value: float
    radicand: float
    flagged: bool


def bound_constant(D, rho, beta, lam, t, n=2):
    """``(D|beta| sqrt(t) + sqrt(R))^2 / rho^2`` with
    ``R = (D^2 beta^2 - (beta (n-2) - |lam + beta^2| D) rho) t - 2 lam rho``.
    """
    if not (D > 0 and rho > 0):
        raise ValueError("D and rho must be positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    R = (D * D * beta * beta - (beta * (n - 2) - abs(lam + beta * beta) * D) * rho) * t - 2.0 * lam * rho
    root = math.sqrt(R) if R >= 0 else 0.0
    value = (D * abs(beta) * math.sqrt(t) + root) ** 2 / rho ** 2
    return BoundConstant(value=value, radicand=R, flagged=R < 0)


def _radicand_flag(bc):
    return [f"negative_radicand:{bc.radicand:.17g}"] if bc.flagged else []


def tangential_bound_check(pencil, result, j, geometry, slack=0.05):
    """``int_bd |du/ds|^2`` against the explicit constant at ``t = int_bd u^2``.

    ``j`` is 1-based.
    """
    space = pencil.space
    u = result.eigenvectors[:, j - 1]
    lam = float(result.eigenvalues[j - 1])
    tr = BoundaryTrace(space, u)
    lhs = tr.tangential_sq
    t = tr.l2_sq
    bc = bound_constant(geometry.D, geometry.rho, result.beta, lam, t)
    return IdentityReport(
        name="tangential_bound",
        terms={"lhs": lhs, "rhs": bc.value, "bd_u2": t},
        residual=lhs - bc.value,
        h=space.mesh.h_target,
        beta=result.beta,
        lam=lam,
        domain=_domain_id(space),
        flags=_radicand_flag(bc),
        passed=bool(lhs <= bc.value * (1.0 + slack) + NOISE_FLOOR),
        extra={"radicand": bc.radicand, "slack": bc.value - lhs, "j": j},
    )


def hessian_rhs(geometry, beta, lam, eps=None, trace_c=None):
    """Limit bound on ``int |D^2 u|^2`` for an L2-normalised eigenfunction.

    ``lam^2`` for ``beta >= 0``; otherwise
    ``lam^2 - 2 beta C(D, rho, beta, lam, (eps lam + c(eps)) / (1 + eps beta))``.
    Returns the value and the :class:`BoundConstant` used (or ``None``).
    """
    if beta >= 0:
        return lam * lam, None
    if eps is None or not 0 < eps < -1.0 / beta:
        raise ValueError("beta < 0 needs eps in (0, -1/beta)")
    t = (eps * lam + trace_c) / (1.0 + eps * beta)
    bc = bound_constant(geometry.D, geometry.rho, beta, lam, max(t, 0.0))
    return lam * lam - 2.0 * beta * bc.value, bc


def hessian_bound_check(pencil, result, j, geometry, eps=None, slack=0.05):
    """Broken P2 Hessian norm of eigenfunction ``j`` (1-based) against its bound."""
    space = pencil.space
    if space.degree != 2:
        raise ValueError("Hessian checks need a P2 space")
    beta = result.beta
    u = result.eigenvectors[:, j - 1]
    lam = float(result.eigenvalues[j - 1])
    lhs = broken_hessian_sq(space, u)
    tr = BoundaryTrace(space, u)
    chain = lam * lam - 2.0 * beta * tr.tangential_sq
    C = None
    if beta < 0:
        if eps is None:
            eps = -1.0 / (2.0 * beta)
        C = trace_constant(pencil, eps)
    rhs, bc = hessian_rhs(geometry, beta, lam, eps, C)
    flags = _radicand_flag(bc) if bc is not None else []
    extra = {"reilly_chain_rhs": chain, "chain_passed": bool(lhs <= chain * (1.0 + slack) + NOISE_FLOOR), "j": j}
    if bc is not None:
        extra.update(radicand=bc.radicand, trace_constant=C, eps=eps)
    return IdentityReport(
        name="hessian_bound",
        terms={"lhs": lhs, "rhs": rhs},
        residual=lhs - rhs,
        h=space.mesh.h_target,
        beta=beta,
        lam=lam,
        domain=_domain_id(space),
        flags=flags,
        passed=bool(lhs <= rhs * (1.0 + slack) + NOISE_FLOOR),
        extra=extra,
    )


def negative_count(result, threshold=1e-10):
    """Number of computed eigenvalues below ``-threshold``.

    Raises :class:`InconclusiveError` unless the largest computed eigenvalue
    is positive, since otherwise more negative ones may be missing.
    """
    lam = np.asarray(result.eigenvalues)
    if not lam[-1] > threshold:
        raise InconclusiveError("largest computed eigenvalue is not positive; increase J")
    return int(np.count_nonzero(lam < -threshold))


def negative_count_inertia(pencil, beta, threshold=1e-10):
    """Same count from the inertia of ``K + beta B + threshold M`` alone."""
    return count_below(robin_matrix(pencil, beta).tocsc(), pencil.M.tocsc(), -threshold)
