"""Shared fixtures: cached meshes, pencils and eigen-solves."""

from __future__ import annotations

import functools

import pytest

from robin_lab.eigensolve import lowest_eigenpairs
from robin_lab.fem import assemble, build_space
from robin_lab.geometry import ConvexPolygon, SmoothConvexBody
from robin_lab.mesh import triangulate

ACCEPTANCE_LINES = []


def make_domain(name):
    if name == "square":
        return ConvexPolygon.unit_square()
    if name == "disk":
        return SmoothConvexBody.disk(1.0)
    raise KeyError(name)


@functools.lru_cache(maxsize=None)
def mesh_for(name, h):
    return triangulate(make_domain(name), h)


@functools.lru_cache(maxsize=None)
def pencil_for(name, h, degree=2):
    return assemble(build_space(mesh_for(name, h), degree))


@functools.lru_cache(maxsize=None)
def solve_for(name, h, beta, J, degree=2):
    pencil = pencil_for(name, h, degree)
    return pencil, lowest_eigenpairs(pencil, beta, J)


@pytest.fixture
def acceptance():
    """Record one pass/fail line per acceptance criterion."""

    def record(label, passed, detail=""):
        ACCEPTANCE_LINES.append(f"{'PASS' if passed else 'FAIL'}  {label}  {detail}".rstrip())
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
