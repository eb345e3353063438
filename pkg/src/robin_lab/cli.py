"""Command-line interface.

Every command writes into ``<out>/<config hash>/`` a ``config.txt`` echo, a
``VERSION`` stamp, its result files and ``summary.json``.  Exit codes: 0 all
checks passed, 1 a check failed, 2 usage error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__
from .errors import (
    ConvergenceError,
    FactorizationError,
    InconclusiveError,
    InvalidDomainError,
    MeshError,
    UnsupportedDomainError,
)

EXIT_PASS, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

DEFAULTS = {
    "domain": "square",
    "beta": "0",
    "eps": "",
    "J": "6",
    "j": "1",
    "h": "0.015625",
    "order": "2",
    "r_schedule": "0.25,0.125,0.0625,0.03125,0.015625",
    "out": "runs",
    "seed": "0",
    "tol": "1e-9",
    "count": "10",
    "m_max": "20",
    "levels": "3",
    "h0": "0.125",
    "dump_vectors": "0",
}

COMMANDS = ("solve", "verify", "stability", "oracle", "convergence", "mesh-info")


def read_config_file(path):
    """Flat ``key=value`` file; blank lines and ``#`` comments are ignored."""
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            k, v = line.split("=", 1)
            k = k.strip()
            if k not in DEFAULTS:
                raise UsageError(f"{path}:{n}: unknown key {k!r}")
            out[k] = v.strip()
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="robin-lab", description="Robin Laplacian eigenvalue experiments")
    p.add_argument("--version", action="version", version=f"robin-lab {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd)
        sp.add_argument("--config", help="flat key=value file; flags override its values")
        for key in DEFAULTS:
            flag = "--" + key.replace("_", "-")
            if key == "dump_vectors":
                sp.add_argument(flag, dest=key, action="store_const", const="1", default=None)
            else:
                sp.add_argument(flag, dest=key, default=None)
    return p


def resolve_config(args):
    cfg = dict(DEFAULTS)
    if args.config:
        cfg.update(read_config_file(args.config))
    for key in DEFAULTS:
        v = getattr(args, key, None)
        if v is not None:
            cfg[key] = v
    cfg["command"] = args.command
    return cfg


def _float(cfg, key):
    try:
        v = float(cfg[key])
    except ValueError as exc:
        raise UsageError(f"{key} must be a number, got {cfg[key]!r}") from exc
    if not math.isfinite(v):
        raise UsageError(f"{key} must be finite")
    return v


def _int(cfg, key, lo=None):
    try:
        v = int(cfg[key])
    except ValueError as exc:
        raise UsageError(f"{key} must be an integer, got {cfg[key]!r}") from exc
    if lo is not None and v < lo:
        raise UsageError(f"{key} must be >= {lo}")
    return v


def parse_domain(text):
    """``square``, ``rectangle:a,b``, ``disk``, ``disk:R``, ``ellipse:a,b``,
    ``polygon:<file>`` or a bare domain file path."""
    from .geometry import ConvexPolygon, SmoothConvexBody, read_domain

    name, _, arg = text.partition(":")
    try:
        if name == "square":
            return ConvexPolygon.unit_square()
        if name == "rectangle":
            a, b = (float(x) for x in arg.split(","))
            return ConvexPolygon.rectangle(a, b)
        if name == "disk":
            return SmoothConvexBody.disk(float(arg) if arg else 1.0)
        if name == "ellipse":
            a, b = (float(x) for x in arg.split(","))
            return SmoothConvexBody.ellipse(a, b)
        if name == "polygon":
            return read_domain(arg)
        if os.path.isfile(text):
            return read_domain(text)
    except (ValueError, OSError) as exc:
        raise UsageError(f"bad domain {text!r}: {exc}") from exc
    raise UsageError(f"unknown domain {text!r}")


def _schedule(cfg):
    try:
        r = [float(x) for x in cfg["r_schedule"].split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError("r_schedule must be a comma-separated list of numbers") from exc
    if not r or any(b >= a for a, b in zip(r, r[1:])):
        raise UsageError("r_schedule must be non-empty and strictly decreasing")
    return r


def _eps(cfg, beta):
    if cfg["eps"] == "":
        return -1.0 / (2.0 * beta) if beta < 0 else None
    eps = _float(cfg, "eps")
    if beta < 0 and not 0 < eps < -1.0 / beta:
        raise UsageError(f"eps must lie in (0, {-1.0 / beta:g}) for beta={beta:g}")
    if not eps > 0:
        raise UsageError("eps must be positive")
    return eps


def _mesh(domain, h):
    from .geometry import inradius_incenter
    from .mesh import triangulate

    if not h > 0:
        raise UsageError("h must be positive")
    rho, _ = inradius_incenter(domain)
    if h > rho * (1.0 + 1e-12):
        raise UsageError(f"h={h:g} exceeds the inradius {rho:g}")
    return triangulate(domain, h)


def _pencil(cfg, domain):
    from .fem import assemble, build_space

    order = _int(cfg, "order")
    if order not in (1, 2):
        raise UsageError("order must be 1 or 2")
    mesh = _mesh(domain, _float(cfg, "h"))
    return assemble(build_space(mesh, order))


def _write_json(path, obj):
    with open(path, "w", encoding="ascii") as fh:
        json.dump(obj, fh, indent=1, sort_keys=True)


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_solve(cfg, outdir):
    from .eigensolve import lowest_eigenpairs, write_eigenvalues, write_eigenvector

    domain = parse_domain(cfg["domain"])
    beta = _float(cfg, "beta")
    J = _int(cfg, "J", 1)
    tol = _float(cfg, "tol")
    pencil = _pencil(cfg, domain)
    res = lowest_eigenpairs(pencil, beta, J, tol=tol, eps=_eps(cfg, beta))
    write_eigenvalues(os.path.join(outdir, "eigenvalues.csv"), res)
    if cfg["dump_vectors"] == "1":
        for j in range(J):
            write_eigenvector(os.path.join(outdir, f"eigenvector_{j + 1}.csv"), res.eigenvectors[:, j])
    for j, (lam, r) in enumerate(zip(res.eigenvalues, res.residuals), start=1):
        print(f"{j} {lam:.17g} {r:.3e}")
    return {
        "residuals_within_tol": bool(np.all(res.residuals <= tol)),
        "m_orthonormal": res.orthonormality_defect <= 1e-10,
        "above_minus_shift": bool(np.all(res.eigenvalues > -res.shift)) if beta < 0 else True,
        "nondecreasing": bool(np.all(np.diff(res.eigenvalues) >= 0)),
    }


def cmd_verify(cfg, outdir):
    from .analysis import (
        coercivity_check,
        hessian_bound_check,
        reilly_check,
        rellich_pohozaev,
        tangential_bound_check,
        trace_constant,
        trace_residuals,
    )
    from .eigensolve import lowest_eigenpairs
    from .geometry import SmoothConvexBody, summarize

    domain = parse_domain(cfg["domain"])
    beta = _float(cfg, "beta")
    J = _int(cfg, "J", 1)
    eps = _eps(cfg, beta)
    pencil = _pencil(cfg, domain)
    space = pencil.space
    geo = summarize(domain)
    res = lowest_eigenpairs(pencil, beta, J, eps=eps)
    rng = np.random.default_rng(_int(cfg, "seed"))
    reports, checks = [], {}

    eps_t = eps if eps is not None else 0.5
    C, v = trace_constant(pencil, eps_t, return_vector=True)
    one = np.ones(space.n_dofs)
    lower = float(one @ (pencil.B @ one)) / float(one @ (pencil.M @ one))
    rand = trace_residuals(pencil, eps_t, C, rng.standard_normal((space.n_dofs, 100)))
    ext = trace_residuals(pencil, eps_t, C, v)[0]
    reports.append({"name": "trace_constant", "eps": eps_t, "value": C, "constant_lower_bound": lower,
                    "min_random_residual": float(rand.min()), "extremal_residual": float(ext)})
    checks["trace_constant"] = bool(C >= lower * (1 - 1e-12) and rand.min() >= -1e-9 and abs(ext) <= 1e-8 * max(1.0, C))
    if beta < 0:
        rep = coercivity_check(pencil, beta, eps)
        reports.append(rep.to_dict())
        checks["coercivity"] = bool(rep.passed)
    rp_ok, bounds_ok, reilly_ok = True, True, True
    for j in range(1, J + 1):
        u, lam = res.eigenvectors[:, j - 1], res.eigenvalues[j - 1]
        rep = rellich_pohozaev(space, u, lam, beta)
        reports.append(rep.to_dict())
        rp_ok &= rep.relative_residual <= 0.05
        if space.degree == 2:
            for rep in (tangential_bound_check(pencil, res, j, geo),
                        hessian_bound_check(pencil, res, j, geo, eps=eps)):
                reports.append(rep.to_dict())
                bounds_ok &= bool(rep.passed)
            if isinstance(domain, SmoothConvexBody):
                rep = reilly_check(space, u, lam, beta)
                reports.append(rep.to_dict())
                reilly_ok &= rep.relative_residual <= 0.05 and rep.extra["summation_by_parts_relative"] <= 1e-8
    checks["rellich_pohozaev"] = bool(rp_ok)
    if space.degree == 2:
        checks["bounds"] = bool(bounds_ok)
        if isinstance(domain, SmoothConvexBody):
            checks["reilly"] = bool(reilly_ok)
    _write_json(os.path.join(outdir, "reports.json"), reports)
    for k, v in checks.items():
        print(f"{k}: {'pass' if v else 'FAIL'}")
    return checks


def cmd_stability(cfg, outdir):
    from .experiments import stability_sweep
    from .geometry import ConvexPolygon

    domain = parse_domain(cfg["domain"])
    if not isinstance(domain, ConvexPolygon):
        raise UsageError("stability sweeps need a polygon base domain")
    beta = _float(cfg, "beta")
    J = _int(cfg, "J", 1)
    order = _int(cfg, "order")
    r = _schedule(cfg)
    run = stability_sweep(domain, beta, J, r, h=_float(cfg, "h"), degree=order)
    run.write(outdir)
    if run.error:
        print(f"sweep stopped: {run.error}", file=sys.stderr)
        raise MeshError(run.error)
    radii = np.array(run.radii[: run.completed])
    diff = run.eigenvalue_differences()
    exact = lambda a, b: bool(np.all(np.abs(np.asarray(a) - b) <= 4e-16 * np.maximum(1.0, np.abs(b))))  # noqa: E731
    tail = diff[-3:] if len(diff) >= 3 else diff
    checks = {
        "hausdorff_equals_r": exact(run.hausdorff, radii),
        "diameter_offset": exact(np.array(run.diameters) - run.D0, 2 * radii),
        "inradius_offset": exact(np.array(run.inradii) - run.rho0, radii),
        "final_eigenvalue_within_1pct": bool(np.all(diff[-1] <= 0.01)),
        "eigenvalue_tail_decreasing": bool(np.all(np.diff(tail, axis=0) <= 1e-12)),
        "distance_tail_decreasing": len(run.distance_exceptions()) <= 1,
    }
    for i in range(run.completed):
        print(f"r={run.radii[i]:.6g} " + " ".join(f"{x:.6g}" for x in diff[i]) + f" dist={run.h1_distances[i]:.3e}")
    return checks


def cmd_oracle(cfg, outdir):
    from .oracles import disk_robin, interval_robin, rectangle_robin

    beta = _float(cfg, "beta")
    count = _int(cfg, "count", 1)
    name, _, arg = cfg["domain"].partition(":")
    try:
        if name == "square":
            spectrum = rectangle_robin(beta, 1.0, 1.0, count)
        elif name == "rectangle":
            a, b = (float(x) for x in arg.split(","))
            spectrum = rectangle_robin(beta, a, b, count)
        elif name == "interval":
            spectrum = interval_robin(beta, float(arg) if arg else 1.0, count)
        elif name == "disk":
            spectrum = disk_robin(beta, float(arg) if arg else 1.0, count, _int(cfg, "m_max", 0))
        else:
            raise UsageError(f"no oracle for domain {cfg['domain']!r}")
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    spectrum.write_csv(os.path.join(outdir, "oracle.csv"))
    for md in spectrum.modes:
        print(f"{md.value:.17g} x{md.multiplicity} {md.label}")
    return {"root_residuals": spectrum.max_residual <= 1e-12}


def cmd_convergence(cfg, outdir):
    from .experiments import convergence_study

    domain = parse_domain(cfg["domain"])
    beta = _float(cfg, "beta")
    J = _int(cfg, "J", 1)
    levels = _int(cfg, "levels", 3)
    order = _int(cfg, "order")
    study = convergence_study(domain, beta, J, levels=levels, h0=_float(cfg, "h0"), degree=order)
    _write_json(os.path.join(outdir, "convergence.json"), study.to_dict())
    with open(os.path.join(outdir, "convergence.csv"), "w", encoding="ascii") as fh:
        fh.write("h," + ",".join(f"lambda_{j}" for j in range(1, J + 1)) + "\n")
        for h, lam in zip(study.h, study.eigenvalues):
            fh.write(f"{h:.17g}," + ",".join(f"{v:.17g}" for v in lam) + "\n")
    print("rates:", np.array2string(study.rates[-1], precision=3))
    return {"rates_available": study.rates is not None}


def cmd_mesh_info(cfg, outdir):
    from .mesh import mesh_quality, write_mesh

    domain = parse_domain(cfg["domain"])
    h = _float(cfg, "h")
    mesh = _mesh(domain, h)
    q = mesh_quality(mesh)
    write_mesh(os.path.join(outdir, "mesh.txt"), mesh)
    info = dict(q.as_dict(), nodes=mesh.n_nodes, triangles=mesh.n_triangles,
                boundary_edges=len(mesh.boundary_edges), area=mesh.total_area,
                boundary_length=mesh.boundary_length)
    _write_json(os.path.join(outdir, "mesh_info.json"), info)
    for k in sorted(info):
        print(f"{k}: {info[k]}")
    return {"min_angle_20": q.min_angle >= 20.0, "max_edge_1p5h": q.max_edge <= 1.5 * h}


HANDLERS = {
    "solve": cmd_solve,
    "verify": cmd_verify,
    "stability": cmd_stability,
    "oracle": cmd_oracle,
    "convergence": cmd_convergence,
    "mesh-info": cmd_mesh_info,
}


def main(argv=None):
    from .experiments import run_directory, write_summary

    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = resolve_config(args)
        echo = [f"{k}={cfg[k]}" for k in ["command"] + sorted(DEFAULTS)]
        outdir = run_directory(cfg["out"], {k: cfg[k] for k in cfg if k != "out"}, echo)
        checks = HANDLERS[args.command](cfg, outdir)
    except (UsageError, InvalidDomainError, UnsupportedDomainError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ConvergenceError, FactorizationError, InconclusiveError, MeshError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    write_summary(outdir, checks)
    print(outdir)
    return EXIT_PASS if all(checks.values()) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
