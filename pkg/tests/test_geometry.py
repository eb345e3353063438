import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robin_lab.errors import InvalidDomainError, UnsupportedDomainError
from robin_lab.geometry import (
    ConvexPolygon,
    SmoothConvexBody,
    curvature,
    diameter,
    hausdorff_distance,
    inner_parallel_body,
    inradius_incenter,
    min_x_dot_nu,
    outer_parallel_body,
    random_convex_polygon,
    read_domain,
    write_domain,
)

ULP4 = 4 * np.finfo(float).eps


def test_diameter_square_and_disk():
    assert diameter(ConvexPolygon.unit_square()) == pytest.approx(math.sqrt(2), abs=1e-15)
    for R in (0.5, 1.0, 3.0):
        assert diameter(SmoothConvexBody.disk(R)) == pytest.approx(2 * R, rel=1e-13)


def test_diameter_parallel_body_matches_dense_sampling():
    sq = ConvexPolygon.unit_square()
    r = 0.1
    body = outer_parallel_body(sq, r)
    assert diameter(body) == pytest.approx(math.sqrt(2) + 2 * r, abs=ULP4 * 2)
    # brute force: farthest pair of densely sampled boundary points
    pts = body.boundary_samples(0.002)
    far = max(np.linalg.norm(pts - p, axis=1).max() for p in pts)
    # sampling step 0.002 on arcs of radius 0.1 loses about 1e-5 per end
    assert far <= diameter(body) + 1e-12
    assert far == pytest.approx(diameter(body), abs=2e-5)


def test_inradius_examples():
    rho, c = inradius_incenter(ConvexPolygon.unit_square())
    assert rho == pytest.approx(0.5, abs=1e-14)
    np.testing.assert_allclose(c, [0.5, 0.5], atol=1e-14)
    rho, c = inradius_incenter(SmoothConvexBody.disk(2.0))
    assert rho == pytest.approx(2.0, rel=1e-12)
    np.testing.assert_allclose(c, [0.0, 0.0], atol=1e-12)


def test_inradius_triangle_matches_incircle_formula():
    tri = ConvexPolygon([[0, 0], [1, 0], [0, 1]])
    rho, c = inradius_incenter(tri)
    expected = 2 * tri.area / tri.perimeter
    assert rho == pytest.approx(expected, rel=1e-13)
    # incenter is the side-length weighted vertex mean
    v = np.array([[0, 0], [1, 0], [0, 1]], float)
    w = np.array([math.sqrt(2), 1.0, 1.0])
    np.testing.assert_allclose(c, (w[:, None] * v).sum(0) / w.sum(), atol=1e-13)


def test_hausdorff_examples():
    sq = ConvexPolygon.unit_square()
    assert hausdorff_distance(sq, sq) == 0.0
    for r in (0.25, 0.03125):
        assert abs(hausdorff_distance(sq, outer_parallel_body(sq, r)) - r) <= ULP4


def test_hausdorff_square_vs_disk_brute_force():
    sq = ConvexPolygon.unit_square()
    th = 2 * np.pi * np.arange(1024) / 1024
    disk = SmoothConvexBody(1.0 + 0.5 * (np.cos(th) + np.sin(th)))
    got = hausdorff_distance(sq, disk)
    # independent oracle: 10^6 directions with closed-form support functions
    t = np.linspace(0, 2 * np.pi, 10**6, endpoint=False)
    c, s = np.cos(t), np.sin(t)
    h_sq = np.maximum(0, c) + np.maximum(0, s)
    h_disk = 1.0 + 0.5 * (c + s)
    assert got == pytest.approx(np.abs(h_sq - h_disk).max(), abs=1e-9)


def test_parallel_body_containment():
    sq = ConvexPolygon.unit_square()
    small, big = outer_parallel_body(sq, 0.1), outer_parallel_body(sq, 0.2)
    th = np.linspace(0, 2 * np.pi, 257)
    assert np.all(small.support(th) <= big.support(th))


@pytest.mark.parametrize("k", range(1, 7))
def test_parallel_body_geometry_is_exact(k):
    sq = ConvexPolygon.unit_square()
    r = 1.0 / k
    body = outer_parallel_body(sq, r)
    rho, _ = inradius_incenter(body)
    assert abs(rho - (0.5 + r)) <= ULP4 * (0.5 + r)
    assert abs(diameter(body) - (math.sqrt(2) + 2 * r)) <= ULP4 * 4
    assert body.area == pytest.approx(1 + 4 * r + math.pi * r * r, rel=1e-14)


def test_min_x_dot_nu_examples():
    assert min_x_dot_nu(ConvexPolygon.unit_square(), (0.5, 0.5)) == pytest.approx(0.5)
    assert min_x_dot_nu(SmoothConvexBody.disk(1.5), (0, 0)) == pytest.approx(1.5, rel=1e-12)


def test_min_x_dot_nu_random_polygons():
    rng = np.random.default_rng(7)
    for _ in range(100):
        poly = random_convex_polygon(rng)
        rho, c = inradius_incenter(poly)
        assert min_x_dot_nu(poly, c) >= rho - 1e-12


def test_curvature_examples():
    disk = SmoothConvexBody.disk(2.0)
    np.testing.assert_allclose(curvature(disk, np.linspace(0, 6, 13)), 0.5, rtol=1e-12)
    body = outer_parallel_body(ConvexPolygon.unit_square(), 0.2)
    # normal angles strictly inside a corner arc
    np.testing.assert_allclose(body.curvature(np.array([0.3, 1.0, 2.0, 4.0, 5.5])), 5.0, rtol=1e-12)
    with pytest.raises(UnsupportedDomainError):
        curvature(ConvexPolygon.unit_square(), 0.0)


def test_ellipse_curvature_closed_form():
    a, b = 2.0, 1.0
    ell = SmoothConvexBody.ellipse(a, b)
    th = np.linspace(0, 2 * np.pi, 37)
    h = np.sqrt(a**2 * np.cos(th) ** 2 + b**2 * np.sin(th) ** 2)
    # radius of curvature h + h'' equals a^2 b^2 / h^3 for an ellipse; the body
    # stores a truncated Fourier series of h, hence the 1e-9 tolerance
    np.testing.assert_allclose(ell.curvature(th), h**3 / (a * b) ** 2, rtol=1e-9)


def test_nonconvex_polygon_rejected():
    with pytest.raises(InvalidDomainError):
        ConvexPolygon([[0, 0], [2, 0], [1, 0.2], [2, 2], [0, 2]])


def test_polygon_canonicalization():
    p = ConvexPolygon([[0, 0], [0, 1], [1, 1], [1, 0], [0.5, 0], [0, 0]])
    assert len(p.vertices) == 4
    assert p.area == pytest.approx(1.0)


def test_inner_parallel_body_square():
    inner = inner_parallel_body(ConvexPolygon.unit_square(), 0.125)
    assert inner.area == pytest.approx(0.75**2, rel=1e-14)


def test_domain_file_roundtrip(tmp_path):
    rng = np.random.default_rng(3)
    poly = random_convex_polygon(rng)
    write_domain(tmp_path / "p.txt", poly)
    back = read_domain(tmp_path / "p.txt")
    np.testing.assert_array_equal(back.vertices, poly.vertices)
    ell = SmoothConvexBody.ellipse(1.5, 1.0)
    write_domain(tmp_path / "e.txt", ell)
    np.testing.assert_array_equal(read_domain(tmp_path / "e.txt").samples, ell.samples)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 1.0))
def test_parallel_body_hausdorff_property(seed, r):
    poly = random_convex_polygon(np.random.default_rng(seed))
    body = outer_parallel_body(poly, r)
    assert abs(hausdorff_distance(poly, body) - r) <= ULP4 * max(1.0, r) * 4
    rho0, _ = inradius_incenter(poly)
    rho, _ = inradius_incenter(body)
    assert rho == pytest.approx(rho0 + r, rel=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_incenter_disk_inside_polygon(seed):
    poly = random_convex_polygon(np.random.default_rng(seed))
    rho, c = inradius_incenter(poly)
    dist = poly.offsets - poly.normals @ c
    assert dist.min() == pytest.approx(rho, abs=1e-12)
    assert rho <= math.sqrt(poly.area / math.pi) + 1e-12
