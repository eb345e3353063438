"""Lowest eigenpairs of the Robin pencil ``(K + beta B) u = lambda M u``.

All iterations run on a shifted pencil ``(A + C M, M)`` that is positive
definite, and ``C`` is subtracted from the computed values.  Definiteness is
certified by the inertia of a symmetric LDL-type factorization: with a
symmetric permutation and no pivoting, the signs of the ``U`` diagonal in
SuperLU equal the signs of the pivots, which by Sylvester's law count the
eigenvalues below the shift.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, FactorizationError

DENSE_LIMIT = 400
MAX_ITER = 500


# ---------------------------------------------------------------------------
# factorization and inertia
# ---------------------------------------------------------------------------


def symmetric_factor(S):
    """Factor a symmetric sparse matrix with a symmetric ordering.

    Returns the SuperLU object and the number of negative pivots, or raises
    :class:`FactorizationError` if the factorization had to pivot off the
    diagonal (its inertia would then be meaningless) or hit a zero pivot.
    """
    S = sp.csc_matrix(S)
    try:
        lu = spla.splu(
            S,
            permc_spec="MMD_AT_PLUS_A",
            diag_pivot_thresh=0.0,
            options={"SymmetricMode": True},
        )
    except RuntimeError as exc:
        raise FactorizationError(f"factorization failed: {exc}") from exc
    if not np.array_equal(lu.perm_r, lu.perm_c):
        raise FactorizationError("factorization pivoted off the diagonal")
    d = lu.U.diagonal()
    if np.any(d == 0) or not np.all(np.isfinite(d)):
        raise FactorizationError("zero or non-finite pivot")
    return lu, int(np.count_nonzero(d < 0))


def count_below(A, M, sigma):
    """Number of generalized eigenvalues of ``(A, M)`` strictly below ``sigma``."""
    if A.shape[0] <= DENSE_LIMIT:
        w = sla.eigh(_dense(A), _dense(M), eigvals_only=True)
        return int(np.count_nonzero(w < sigma))
    _, neg = symmetric_factor(A - sigma * M)
    return neg


def is_positive_definite(S):
    if S.shape[0] <= DENSE_LIMIT:
        try:
            sla.cholesky(_dense(S))
            return True
        except sla.LinAlgError:
            return False
    try:
        _, neg = symmetric_factor(S)
    except FactorizationError:
        return False
    return neg == 0


def _dense(A):
    return A.toarray() if sp.issparse(A) else np.asarray(A, dtype=float)


# ---------------------------------------------------------------------------
# results
# ---------------------------------------------------------------------------


@dataclass
class SpectralResult:
    """Lowest eigenpairs of one Robin problem on one mesh.

    ``residuals[j]`` is ``||(A - lambda_j M) u_j|| / ||M u_j||`` with the
    unshifted ``A = K + beta B``.
    """

    beta: float
    shift: float
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    orthonormality_defect: float
    iterations: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def J(self):
        return len(self.eigenvalues)


def residual_norms(A, M, lam, U):
    AU = A @ U
    MU = M @ U
    R = AU - MU * lam[None, :]
    return np.linalg.norm(R, axis=0) / np.linalg.norm(MU, axis=0)


def fix_signs(U):
    """Scale columns so the entry of largest magnitude is positive."""
    U = np.array(U, dtype=float)
    idx = np.argmax(np.abs(U), axis=0)
    s = np.sign(U[idx, np.arange(U.shape[1])])
    s[s == 0] = 1.0
    return U * s[None, :]


def _rayleigh_ritz(A, M, V):
    """Ritz pairs of ``(A, M)`` on span(V), M-orthonormal, ascending."""
    Ah = V.T @ (A @ V)
    Mh = V.T @ (M @ V)
    Ah = 0.5 * (Ah + Ah.T)
    Mh = 0.5 * (Mh + Mh.T)
    w, Y = sla.eigh(Ah, Mh)
    return w, V @ Y


def _m_orthonormalize(M, V):
    G = V.T @ (M @ V)
    G = 0.5 * (G + G.T)
    w, Q = np.linalg.eigh(G)
    keep = w > w.max() * 1e-13
    return V @ (Q[:, keep] / np.sqrt(w[keep]))


def _start_vector(n):
    # fixed, dense, not an eigenvector of anything structured
    return np.cos(0.7 + 1.3 * np.arange(n)) + 1.5


def _solve_shifted(A, M, C, k):
    """Lowest ``k`` pairs of ``(A + C M, M)`` via shift-invert Lanczos plus refinement.

    Returns eigenvalues of the unshifted pencil, vectors, residuals and the
    factorization (``None`` on the dense path).
    """
    n = A.shape[0]
    S = (A + C * M).tocsc()
    if n <= DENSE_LIMIT:
        w, V = sla.eigh(_dense(S), _dense(M))
        lam, V = w[:k] - C, V[:, :k]
        return lam, V, residual_norms(A, M, lam, V), None
    lu, neg = symmetric_factor(S)
    if neg:
        raise FactorizationError(
            f"shifted pencil has {neg} negative pivots", suggested_shift=2.0 * C + 1.0
        )
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    mu, V = spla.eigsh(
        S, k=k, M=M.tocsr(), sigma=0.0, which="LM", OPinv=op,
        v0=_start_vector(n), tol=0.0, maxiter=MAX_ITER * k,
    )
    V = V[:, np.argsort(mu)]
    lam, V = _rayleigh_ritz(A, M, V)
    return lam, V, residual_norms(A, M, lam, V), lu


def lowest_eigenpairs(pencil, beta, J=6, tol=1e-9, eps=None, block=None):
    """Lowest ``J`` eigenpairs of ``(K + beta B, M)``.

    Parameters
    ----------
    pencil : SymPencil
    beta : float
        Robin parameter.
    J : int
        Number of eigenpairs returned.
    tol : float
        Residual bound every returned pair must satisfy.
    eps : float, optional
        Trace-inequality parameter for the coercivity shift; defaults to
        ``-1/(2 beta)`` for negative ``beta``.
    block : int, optional
        Working block size, default ``J + 5``.

    Raises
    ------
    ConvergenceError
        If the residual bound is not reached within the iteration cap.
    """
    from .fem import robin_matrix

    beta = float(beta)
    if J < 1:
        raise ValueError("J must be at least 1")
    A = robin_matrix(pencil, beta)
    M = pencil.M
    n = A.shape[0]
    if J > n:
        raise ValueError("J exceeds the number of degrees of freedom")
    C = coercive_shift(pencil, beta, eps)
    Cf = C + 1.0 if beta >= 0 else C
    k = min(block or J + 5, n - 1) if n > DENSE_LIMIT else n
    k = max(k, J)
    lam, V, res, lu = _solve_shifted(A, M, Cf, k)
    it = 0
    if lu is not None:
        while res[:J].max() > tol and it < MAX_ITER:
            V = lu.solve(np.asarray(M @ V))
            V = _m_orthonormalize(M, V)
            lam, V = _rayleigh_ritz(A, M, V)
            res = residual_norms(A, M, lam, V)
            it += 1
    lam, V, res = lam[:J], V[:, :J], res[:J]
    if res.max() > tol:
        raise ConvergenceError(
            f"residual {res.max():.3e} above tolerance {tol:.1e} after {it} iterations",
            residuals=res,
        )
    V = fix_signs(V)
    G = V.T @ (M @ V)
    defect = float(np.abs(G - np.eye(J)).max())
    return SpectralResult(
        beta=beta, shift=C, eigenvalues=lam, eigenvectors=V, residuals=res,
        orthonormality_defect=defect, iterations=it,
        meta={"factor_shift": Cf, "block": k},
    )


def coercive_shift(pencil, beta, eps=None, verify=True):
    """Shift ``C`` making ``K + beta B + C M`` coercive.

    Zero for ``beta >= 0``.  For ``beta < 0`` this is ``-2 beta c(eps)`` with
    ``c(eps)`` the discrete trace constant and ``eps`` in ``(0, -1/beta)``.
    """
    beta = float(beta)
    if beta >= 0:
        if eps is not None and not eps > 0:
            raise ValueError("eps must be positive")
        return 0.0
    if eps is None:
        eps = -1.0 / (2.0 * beta)
    if not 0.0 < eps < -1.0 / beta:
        raise ValueError(f"eps={eps} outside (0, {-1.0 / beta})")
    from .analysis import trace_constant
    from .fem import robin_matrix

    C = -2.0 * beta * trace_constant(pencil, eps)
    if verify and not is_positive_definite(robin_matrix(pencil, beta) + C * pencil.M):
        raise FactorizationError("shifted pencil is not positive definite", suggested_shift=2.0 * C)
    return C


def _spd_shift(Q, M, s0, step):
    """Smallest tried ``s >= s0`` (growing by doubling ``step``) with ``Q + s M`` SPD."""
    s = s0
    for _ in range(200):
        try:
            lu, neg = symmetric_factor((Q + s * M).tocsc())
            if neg == 0:
                return s, lu
        except FactorizationError:
            pass
        s = s0 + step
        step *= 2.0
    raise ConvergenceError("no positive definite shift found")


def _bottom_pairs(Q, M, lu, s, k, tol):
    n = Q.shape[0]
    S = (Q + s * M).tocsc()
    op = spla.LinearOperator((n, n), matvec=lu.solve, dtype=float)
    try:
        _, V = spla.eigsh(S, k=k, M=M, sigma=0.0, which="LM", OPinv=op,
                          v0=_start_vector(n), tol=tol, maxiter=MAX_ITER * k)
    except spla.ArpackError:
        # Krylov breakdown, e.g. when Q is a multiple of M; any block works
        V = np.column_stack([np.cos(0.7 * (i + 1) * np.arange(n) + i) for i in range(k)])
        V = _m_orthonormalize(M, lu.solve(np.asarray(M @ V)))
    return _rayleigh_ritz(Q, M, V)


def pencil_extreme(P, M, which="smallest", tol=1e-9, return_vector=False):
    """Extreme generalized eigenvalue of a symmetric pencil ``(P, M)``.

    ``M`` must be positive definite.  A first shift making ``P + s M``
    positive definite gives a rough estimate of the bottom eigenvalue; the
    final shift-invert solve then runs just below that estimate, where it
    converges in a few steps.  Definiteness at every shift is certified by
    the factorization inertia.
    """
    if which not in ("smallest", "largest"):
        raise ValueError("which must be 'smallest' or 'largest'")
    sign = 1.0 if which == "smallest" else -1.0
    Q = sp.csr_matrix(P) * sign
    M = sp.csr_matrix(M)
    n = Q.shape[0]
    if n <= DENSE_LIMIT:
        w, V = sla.eigh(_dense(Q), _dense(M))
        lam, u = w[0], V[:, 0]
    else:
        k = min(4, n - 1)
        scale = max(float(np.max(np.abs(Q.diagonal()) / M.diagonal())), 1.0)
        s, lu = _spd_shift(Q, M, 0.0, 1e-3 * scale)
        w, _ = _bottom_pairs(Q, M, lu, s, k, 1e-4)
        gap = 1e-3 * max(1.0, abs(w[0]), w[-1] - w[0])
        s, lu = _spd_shift(Q, M, -w[0] + gap, gap)
        w, V = _bottom_pairs(Q, M, lu, s, k, 0.0)
        res = residual_norms(Q, M, w, V)
        it = 0
        while res[0] > tol and it < MAX_ITER:
            V = _m_orthonormalize(M, lu.solve(np.asarray(M @ V)))
            w, V = _rayleigh_ritz(Q, M, V)
            res = residual_norms(Q, M, w, V)
            it += 1
        lam, u = w[0], V[:, 0]
    res0 = residual_norms(Q, M, np.array([lam]), u[:, None])[0]
    if res0 > tol * max(1.0, abs(lam)):
        raise ConvergenceError(f"extreme eigenpair residual {res0:.3e}", residuals=np.array([res0]))
    u = fix_signs(u[:, None])[:, 0]
    lam = sign * float(lam)
    return (lam, u) if return_vector else lam


def write_eigenvalues(path, result):
    """CSV with columns ``j,lambda,residual`` (1-based ``j``)."""
    with open(path, "w", encoding="ascii") as fh:
        fh.write("j,lambda,residual\n")
        for j, (lam, r) in enumerate(zip(result.eigenvalues, result.residuals), start=1):
            fh.write(f"{j},{lam:.17g},{r:.17g}\n")


def write_eigenvector(path, vec):
    with open(path, "w", encoding="ascii") as fh:
        fh.write("dof,value\n")
        for i, v in enumerate(vec):
            fh.write(f"{i},{v:.17g}\n")
