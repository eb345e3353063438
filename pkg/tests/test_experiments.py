import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from robin_lab.experiments import (
    compare_subspaces,
    config_hash,
    convergence_study,
    eigen_clusters,
    h2_pipeline,
    run_directory,
    stability_sweep,
    worker_count,
    write_summary,
)
from robin_lab.geometry import ConvexPolygon, SmoothConvexBody, outer_parallel_body
from robin_lab.mesh import triangulate
from robin_lab.oracles import disk_robin


def test_eigen_clusters():
    lam = [0.0, 9.8696, 9.8696 + 1e-9, 19.7, 39.4, 39.4]
    assert eigen_clusters(lam) == [[0], [1, 2], [3], [4, 5]]


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_compare_subspaces_rotation_invariant(seed):
    rng = np.random.default_rng(seed)
    n, k = 30, 3
    X = rng.standard_normal((n, n))
    G = X @ X.T + n * np.eye(n)
    U = rng.standard_normal((n, k))
    Q, _ = np.linalg.qr(rng.standard_normal((k, k)))
    gap, _ = compare_subspaces(U, U @ Q, G)
    assert gap <= 1e-7
    W = U + 1e-3 * rng.standard_normal((n, k))
    gap2, _ = compare_subspaces(U, W, G)
    assert 0 < gap2 < 1


def test_sweep_with_zero_radius_entry():
    run = stability_sweep(ConvexPolygon.unit_square(), 0.0, 3, [0.0], h=1 / 16)
    assert run.hausdorff == [0.0]
    # the subspace distance is computed, not short-circuited: zero up to rounding
    assert run.h1_distances[0] <= 1e-12
    np.testing.assert_array_equal(run.eigenvalue_differences(), 0.0)


def test_strip_area_formula_and_mesh_area():
    sq = ConvexPolygon.unit_square()
    for r in (0.25, 0.0625):
        body = outer_parallel_body(sq, r)
        exact = 4 * r + math.pi * r * r
        assert body.area - sq.area == pytest.approx(exact, rel=1e-13)
        mesh = triangulate(body, 1 / 32)
        assert mesh.total_area - 1 == pytest.approx(exact, rel=0.02)


def test_short_sweep_outputs(tmp_path):
    run = stability_sweep(ConvexPolygon.unit_square(), 0.0, 4, [0.25, 0.125], h=1 / 16)
    run.write(tmp_path)
    rows = (tmp_path / "sweep.csv").read_text().splitlines()
    assert rows[0] == "k,r,dH,D,rho,area_strip,lambda_1,lambda_2,lambda_3,lambda_4"
    assert len(rows) == 3
    data = json.loads((tmp_path / "sweep_distances.json").read_text())
    assert len(data["h1_distances"]) == 2
    diff = run.eigenvalue_differences()
    assert np.all(diff[1, 1:] < diff[0, 1:])


def test_h2_constant_mode_zero():
    rep = h2_pipeline(ConvexPolygon.unit_square(), 0.0, 1, r_schedule=(0.25, 0.125), h=1 / 16, levels=2)
    assert np.abs(rep.values).max() <= 1e-18
    assert rep.passed_bound


def test_convergence_square_neumann():
    study = convergence_study(ConvexPolygon.unit_square(), 0.0, 2, levels=3, h0=0.25)
    assert study.extrapolated[1] == pytest.approx(math.pi**2, rel=1e-4)


def test_convergence_disk_robin():
    study = convergence_study(SmoothConvexBody.disk(1.0), 1.0, 1, levels=3, h0=0.125)
    assert study.extrapolated[0] == pytest.approx(disk_robin(1.0, 1.0, 1).values()[0], rel=1e-4)


def test_p2_rate_exceeds_p1():
    sq = ConvexPolygon.unit_square()
    p1 = convergence_study(sq, 1.0, 2, levels=3, h0=0.25, degree=1)
    p2 = convergence_study(sq, 1.0, 2, levels=3, h0=0.25, degree=2)
    assert np.all(p2.rates[-1] > p1.rates[-1])


def test_config_hash_and_run_directory(tmp_path):
    cfg = {"beta": "1", "domain": "square"}
    assert config_hash(cfg) == config_hash(dict(reversed(list(cfg.items()))))
    assert config_hash(cfg) != config_hash({**cfg, "beta": "2"})
    path = run_directory(tmp_path, cfg)
    assert (tmp_path / config_hash(cfg) / "VERSION").exists()
    write_summary(path, {"a": True, "b": False})
    summary = json.loads((tmp_path / config_hash(cfg) / "summary.json").read_text())
    assert summary == {"passed": False, "checks": {"a": True, "b": False}}


def test_worker_count(monkeypatch):
    monkeypatch.setenv("ROBIN_LAB_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("ROBIN_LAB_THREADS", "bogus")
    assert worker_count() == 1
