import numpy as np
import pytest
import scipy.linalg as sla
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import special

from robin_lab.analysis import negative_count, negative_count_inertia, trace_constant
from robin_lab.eigensolve import (
    DENSE_LIMIT,
    coercive_shift,
    count_below,
    lowest_eigenpairs,
    pencil_extreme,
    symmetric_factor,
    write_eigenvalues,
)
from robin_lab.errors import FactorizationError, InconclusiveError
from robin_lab.fem import assemble, build_space, robin_matrix
from robin_lab.geometry import ConvexPolygon
from robin_lab.mesh import triangulate
from robin_lab.oracles import interval_robin

from conftest import pencil_for, solve_for


def test_square_neumann():
    _, res = solve_for("square", 1 / 32, 0.0, 4)
    assert abs(res.eigenvalues[0]) <= 1e-10
    np.testing.assert_allclose(res.eigenvalues[1:3], np.pi**2, rtol=1e-5)
    assert res.residuals.max() <= 1e-9
    assert res.orthonormality_defect <= 1e-10


def test_disk_neumann_pair():
    _, res = solve_for("disk", 1 / 16, 0.0, 3)
    target = special.jnp_zeros(1, 1)[0] ** 2
    np.testing.assert_allclose(res.eigenvalues[1:3], target, rtol=2e-3)
    assert res.eigenvalues[2] - res.eigenvalues[1] < 1e-3 * target


def test_square_negative_matches_tensor_oracle():
    _, res = solve_for("square", 1 / 32, -1.0, 2)
    mu1 = interval_robin(-1.0, 1.0, 1).values()[0]
    assert res.eigenvalues[0] < 0
    assert res.eigenvalues[0] == pytest.approx(2 * mu1, rel=1e-6)


def test_dense_and_sparse_paths_agree():
    pencil = assemble(build_space(triangulate(ConvexPolygon.unit_square(), 0.0625), 2))
    assert pencil.K.shape[0] > DENSE_LIMIT
    res = lowest_eigenpairs(pencil, 1.0, 5)
    A = robin_matrix(pencil, 1.0).toarray()
    w = sla.eigh(A, pencil.M.toarray(), eigvals_only=True, subset_by_index=[0, 4])
    np.testing.assert_allclose(res.eigenvalues, w, rtol=1e-10)


def test_sign_convention_and_orthonormality():
    pencil, res = solve_for("square", 1 / 16, 1.0, 4)
    U = res.eigenvectors
    idx = np.argmax(np.abs(U), axis=0)
    assert np.all(U[idx, np.arange(U.shape[1])] > 0)
    G = U.T @ (pencil.M @ U)
    np.testing.assert_allclose(G, np.eye(4), atol=1e-10)


def test_coercive_shift_examples():
    pencil = pencil_for("square", 1 / 16)
    assert coercive_shift(pencil, 0.0) == 0.0
    assert coercive_shift(pencil, 1.0) == 0.0
    C = coercive_shift(pencil, -1.0, 0.5)
    assert C == pytest.approx(2 * trace_constant(pencil, 0.5), rel=1e-14)
    with pytest.raises(ValueError):
        coercive_shift(pencil, -1.0, 1.0)


def test_shifted_pencil_positive_for_positive_beta():
    pencil, res = solve_for("square", 1 / 16, 1.0, 1)
    low = pencil_extreme(robin_matrix(pencil, 1.0), pencil.M, "smallest")
    assert low == pytest.approx(res.eigenvalues[0], rel=1e-8)
    assert low > 0


def test_pencil_extreme_examples():
    pencil = pencil_for("square", 1 / 16)
    M = pencil.M
    assert pencil_extreme(M, M, "smallest") == pytest.approx(1.0, rel=1e-9)
    assert pencil_extreme(M, M, "largest") == pytest.approx(1.0, rel=1e-9)
    Z = sp.csr_matrix(M.shape)
    assert pencil_extreme(Z, M, "smallest") == pytest.approx(0.0, abs=1e-12)
    assert pencil_extreme(pencil.K, M, "smallest") == pytest.approx(0.0, abs=1e-8)


def test_negative_count_examples():
    _, res0 = solve_for("square", 1 / 16, 0.0, 4)
    assert negative_count(res0) == 0
    _, res1 = solve_for("square", 1 / 16, 1.0, 4)
    assert negative_count(res1) == 0
    pencil, resm = solve_for("square", 1 / 16, -1.0, 4)
    expected = (interval_robin(-1.0, 1.0, 4).values()[:, None] + interval_robin(-1.0, 1.0, 4).values()[None, :] < 0).sum()
    assert negative_count(resm) == expected == negative_count_inertia(pencil, -1.0)


def test_negative_count_inconclusive():
    _, res = solve_for("square", 1 / 16, -1.0, 1)
    with pytest.raises(InconclusiveError):
        negative_count(res)


def test_write_eigenvalues(tmp_path):
    _, res = solve_for("square", 1 / 16, 0.0, 4)
    write_eigenvalues(tmp_path / "ev.csv", res)
    rows = (tmp_path / "ev.csv").read_text().splitlines()
    assert rows[0] == "j,lambda,residual"
    assert float(rows[2].split(",")[1]) == res.eigenvalues[1]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(5, 40))
def test_inertia_matches_dense_spectrum(seed, n):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n))
    A = X + X.T
    w = np.linalg.eigvalsh(A)
    sigma = float(rng.uniform(w.min(), w.max()))
    if np.min(np.abs(w - sigma)) < 1e-8:
        return
    try:
        _, neg = symmetric_factor(sp.csc_matrix(A - sigma * np.eye(n)))
    except FactorizationError:
        # an indefinite matrix may need off-diagonal pivoting; that is refused, not miscounted
        return
    assert neg == int((w < sigma).sum())


@settings(max_examples=20, deadline=None)
@given(st.floats(-2.0, 2.0))
def test_count_below_matches_eigenvalues(sigma):
    pencil, res = solve_for("square", 1 / 16, 0.5, 8)
    lam = res.eigenvalues
    s = sigma * 30.0
    if np.min(np.abs(lam - s)) < 1e-6 or s > lam[-1]:
        return
    A = robin_matrix(pencil, 0.5).tocsc()
    assert count_below(A, pencil.M.tocsc(), s) == int((lam < s).sum())
