import numpy as np
import pytest
import sympy

from robin_lab.fem import (
    FemSpace,
    assemble,
    boundary_element_matrices,
    build_space,
    element_mass,
    element_stiffness,
    read_matrix,
    robin_matrix,
    write_matrix,
)
from robin_lab.geometry import ConvexPolygon, SmoothConvexBody
from robin_lab.mesh import TriMesh, triangulate


def one_triangle(p=((0, 0), (1, 0), (0, 1))):
    return TriMesh(np.array(p, float), np.array([[0, 1, 2]]))


def sympy_p1_matrices(p):
    """Exact P1 element matrices by symbolic integration over the triangle."""
    (x0, y0), (x1, y1), (x2, y2) = [tuple(map(sympy.Rational, q)) for q in p]
    s, t = sympy.symbols("s t")
    jac = sympy.Matrix([[x1 - x0, x2 - x0], [y1 - y0, y2 - y0]])
    det = jac.det()
    phis = [1 - s - t, s, t]
    inv = jac.inv().T
    grads = [inv * sympy.Matrix([sympy.diff(f, s), sympy.diff(f, t)]) for f in phis]

    def integrate(expr):
        return sympy.integrate(sympy.integrate(expr * abs(det), (t, 0, 1 - s)), (s, 0, 1))

    M = sympy.Matrix(3, 3, lambda i, j: integrate(phis[i] * phis[j]))
    K = sympy.Matrix(3, 3, lambda i, j: integrate(grads[i].dot(grads[j])))
    return np.array(M, dtype=float), np.array(K, dtype=float)


@pytest.mark.parametrize("p", [((0, 0), (1, 0), (0, 1)), ((0, 0), (3, 1), (1, 2))])
def test_p1_element_matrices_match_symbolic(p):
    space = build_space(one_triangle(p), 1)
    M_ref, K_ref = sympy_p1_matrices(p)
    np.testing.assert_allclose(element_mass(space)[0], M_ref, atol=1e-14)
    np.testing.assert_allclose(element_stiffness(space)[0], K_ref, atol=1e-14)


def test_p1_examples():
    space = build_space(one_triangle(), 1)
    A = 0.5
    Me = element_mass(space)[0]
    np.testing.assert_allclose(np.diag(Me), A / 6)
    assert Me[0, 1] == pytest.approx(A / 12)
    np.testing.assert_allclose(element_stiffness(space)[0], [[1, -0.5, -0.5], [-0.5, 0.5, 0], [-0.5, 0, 0.5]], atol=1e-15)


def test_p1_edge_mass():
    space = build_space(one_triangle(((0, 0), (2, 0), (0, 2))), 1)
    Mb, _ = boundary_element_matrices(space)
    L = space.mesh.edge_lengths
    for e in range(3):
        np.testing.assert_allclose(Mb[e], [[L[e] / 3, L[e] / 6], [L[e] / 6, L[e] / 3]], rtol=1e-14)


def test_dof_counts():
    assert build_space(one_triangle(), 1).n_dofs == 3
    assert build_space(one_triangle(), 2).n_dofs == 6
    m = triangulate(ConvexPolygon.unit_square(), 0.25)
    assert build_space(m, 2).n_dofs == m.n_nodes + len(m.edges)


@pytest.fixture(scope="module")
def square_pencil():
    return assemble(build_space(triangulate(ConvexPolygon.unit_square(), 0.125), 2))


def test_pencil_symmetric_by_construction(square_pencil):
    for A in (square_pencil.K, square_pencil.M, square_pencil.B):
        assert (A - A.T).nnz == 0 or abs(A - A.T).max() == 0.0


def test_constants_and_measures(square_pencil):
    one = np.ones(square_pencil.K.shape[0])
    assert one @ square_pencil.M @ one == pytest.approx(1.0, rel=1e-13)
    assert one @ square_pencil.B @ one == pytest.approx(4.0, rel=1e-13)
    assert np.abs(square_pencil.K @ one).max() < 1e-12


def test_robin_matrix_examples(square_pencil):
    assert (robin_matrix(square_pencil, 0.0) != square_pencil.K).nnz == 0
    c = 2.5 * np.ones(square_pencil.K.shape[0])
    A = robin_matrix(square_pencil, -1.0)
    np.testing.assert_allclose(A @ c, -(square_pencil.B @ c), atol=1e-12)
    assert c @ A @ c == pytest.approx(-4 * 2.5**2, rel=1e-13)


def test_p2_energy_of_quadratic(square_pencil):
    space = square_pencil.space
    u = space.interpolate(lambda x, y: x**2 + y)
    assert u @ square_pencil.K @ u == pytest.approx(7 / 3, rel=1e-13)
    x, y = sympy.symbols("x y")
    exact = sympy.integrate((x**2 + y) ** 2, (x, 0, 1), (y, 0, 1))
    assert u @ square_pencil.M @ u == pytest.approx(float(exact), rel=1e-13)


def test_p2_evaluation_and_hessian_exact():
    space = build_space(triangulate(SmoothConvexBody.disk(1.0), 0.25), 2)
    f = lambda x, y: 1 + 2 * x - y + x * x - 3 * x * y + 0.5 * y * y  # noqa: E731
    u = space.interpolate(f)
    pts = np.random.default_rng(0).uniform(-0.6, 0.6, (50, 2))
    np.testing.assert_allclose(space.evaluate(u, pts), f(pts[:, 0], pts[:, 1]), atol=1e-12)
    H = space.cell_hessians(u)
    np.testing.assert_allclose(H, np.broadcast_to([[2, -3], [-3, 1]], H.shape), atol=1e-9)


def test_matrix_file_roundtrip(tmp_path, square_pencil):
    write_matrix(tmp_path / "K.txt", square_pencil.K)
    back = read_matrix(tmp_path / "K.txt", square_pencil.K.shape[0])
    assert abs(back - square_pencil.K).max() == 0.0


def test_space_degree_validation():
    with pytest.raises(ValueError):
        FemSpace(one_triangle(), 3)
