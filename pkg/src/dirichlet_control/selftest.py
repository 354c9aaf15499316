"""Fast invariant battery behind the `selftest` CLI subcommand.

Each check is independent and prints one PASS/FAIL line; the runner returns
the number of failures (0 = success).  Checks favour breadth over depth and
finish in seconds; the pytest suite is the thorough version.
"""

from __future__ import annotations

import math
import tempfile
from pathlib import Path

import numpy as np

from .assembly import (
    assemble_mass_boundary,
    assemble_mass_domain,
    assemble_stiffness,
)
from .control import DiscreteProblem, ProblemData
from .manufactured import exact_fields
from .mesh import benchmark_domain, build_prism_mesh, domain_volume
from .optimize import quasi_interpolate, solve_unconstrained
from .quadrature import tet_rule, tri_rule
from .study import CSV_HEADER, ConvergenceRecord, read_csv, write_csv

__all__ = ["run_selftest"]

_OMEGAS = (math.pi / 2, math.pi * 2 / 3, math.pi * 3 / 4)


def _check_quadrature():
    # factorial formula for monomial integrals over the reference simplex
    rule = tet_rule(4)
    for (p, q, r) in ((2, 1, 1), (4, 0, 1), (2, 2, 1), (0, 0, 5)):
        x, y, z = (rule.points[:, 1], rule.points[:, 2], rule.points[:, 3])
        approx = float(rule.weights @ (x**p * y**q * z**r))
        exact = (math.factorial(p) * math.factorial(q) * math.factorial(r)
                 / math.factorial(p + q + r + 3))
        if abs(approx - exact) > 1e-13:
            return f"tet monomial ({p},{q},{r}): {approx} vs {exact}"
    rule2 = tri_rule(4)
    x, y = rule2.points[:, 1], rule2.points[:, 2]
    if abs(float(rule2.weights @ (x**2 * y**2)) - 1.0 / 180.0) > 1e-14:
        return "tri monomial (2,2)"
    return None


def _check_mesh_volumes():
    for omega in _OMEGAS:
        domain = benchmark_domain(omega)
        mesh = build_prism_mesh(domain, 2)
        m = assemble_mass_domain(mesh)
        total = float(np.ones(mesh.n_vertices) @ (m @ np.ones(mesh.n_vertices)))
        if abs(total - domain_volume(domain)) > 1e-10:
            return f"omega={omega:.3f}: mass total {total} vs {domain_volume(domain)}"
    return None


def _check_operators():
    mesh = build_prism_mesh(benchmark_domain(math.pi * 2 / 3), 2)
    a = assemble_stiffness(mesh)
    ones = np.ones(mesh.n_vertices)
    if np.max(np.abs(a @ ones)) > 1e-10:
        return "stiffness kernel: A 1 != 0"
    rng = np.random.default_rng(0)
    for _ in range(5):
        v = rng.standard_normal(mesh.n_vertices)
        if v @ (a @ v) < -1e-12:
            return "stiffness not PSD"
    mb = assemble_mass_boundary(mesh)
    nb = mb.shape[0]
    if abs(float(np.ones(nb) @ (mb @ np.ones(nb))) -
           _boundary_area(math.pi * 2 / 3)) > 1e-10:
        return "boundary mass total != surface area"
    return None


def _boundary_area(omega):
    # base polygon area twice (top+bottom) plus the four side rectangles
    base = domain_volume(benchmark_domain(omega))  # prism height 1
    cot = math.cos(omega) / math.sin(omega)
    sides = 1.0 + 1.0 + (1.0 - cot) + 1.0 / math.sin(omega)
    return 2.0 * base + sides


def _check_manufactured_fd():
    for omega in _OMEGAS:
        case = exact_fields(omega)
        h = 1e-4
        for x0 in ((0.35, 0.4, 0.45), (0.2, 0.6, 0.3)):
            x0 = np.array(x0)
            lap = 0.0
            for axis in range(3):
                e = np.zeros(3)
                e[axis] = h
                vals = [case.u(x0 + k * e) for k in (-2, -1, 0, 1, 2)]
                lap += (-vals[0] + 16 * vals[1] - 30 * vals[2]
                        + 16 * vals[3] - vals[4]) / (12 * h * h)
            f0 = case.f(x0)
            if abs(-lap - f0) > 1e-6 * max(1.0, abs(f0)):
                return f"f vs FD Laplacian at {tuple(x0)}: {-lap} vs {f0}"
    return None


def _check_gradient_and_hessian():
    omega = math.pi * 2 / 3
    case = exact_fields(omega)
    mesh = build_prism_mesh(benchmark_domain(omega), 1)
    prob = DiscreteProblem(mesh, ProblemData(alpha=1.0, f=case.f, u_d=case.u_d))
    rng = np.random.default_rng(1)
    q = rng.standard_normal(prob.dofmap.n_boundary)
    g = prob.reduced_gradient(q)
    d = rng.standard_normal(prob.dofmap.n_boundary)
    eps = 1e-3
    fd = (prob.reduced_cost(q + eps * d) - prob.reduced_cost(q - eps * d)) / (2 * eps)
    if abs(fd - prob.m_dot(g, d)) > 1e-6 * max(1.0, abs(fd)):
        return f"gradient FD mismatch: {fd} vs {prob.m_dot(g, d)}"
    dq = rng.standard_normal(prob.dofmap.n_boundary)
    du = prob.solve_state(dq, include_source=False)
    lhs = prob.m_dot(dq, prob.hessian_apply(dq))
    rhs = prob.m_dot(dq, dq) + float(du @ (prob.m @ du))
    if abs(lhs - rhs) > 1e-8 * abs(rhs):
        return f"Hessian identity: {lhs} vs {rhs}"
    return None


def _check_trace_extensions():
    omega = math.pi * 3 / 4
    case = exact_fields(omega)
    mesh = build_prism_mesh(benchmark_domain(omega), 2)
    prob = DiscreteProblem(mesh, ProblemData(alpha=1.0, f=case.f, u_d=case.u_d))
    q = prob.project_boundary(case.q)
    u = prob.solve_state(q)
    z = prob.solve_adjoint(u)
    t0 = prob.normal_trace(u, z, extension="zero")
    t1 = prob.normal_trace(u, z, extension="harmonic")
    gap = prob.m_norm(t1 - t0)
    if gap > 1e-8 * max(1.0, prob.m_norm(t0)):
        return f"extension dependence {gap:.2e}"
    return None


def _check_unconstrained_solver():
    omega = math.pi / 2
    case = exact_fields(omega)
    mesh = build_prism_mesh(benchmark_domain(omega), 1)
    data = ProblemData(alpha=1.0, f=case.f, u_d=case.u_d)
    prob = DiscreteProblem(mesh, data)
    sol = solve_unconstrained(mesh, data, problem=prob)
    if not sol.report.converged:
        return "CG did not converge"
    g = prob.reduced_gradient(sol.q)
    if prob.m_norm(g) > 1e-8:
        return f"gradient at optimum {prob.m_norm(g):.2e}"
    return None


def _check_quasi_interpolation():
    mesh = build_prism_mesh(benchmark_domain(math.pi * 2 / 3), 1)
    rng = np.random.default_rng(7)
    for _ in range(20):
        k = rng.uniform(-4, 4, size=3)
        g = lambda x, k=k: 0.5 * np.sin(x @ k)
        vals = quasi_interpolate(mesh, g)
        if np.any(vals < -0.5) or np.any(vals > 0.5):
            return "bound violation"
    return None


def _check_csv_round_trip():
    rec = ConvergenceRecord(1, 0.5, 100, 60, 1.25e-2, 3.5e-3, None, None, 42, 0.1)
    rec2 = ConvergenceRecord(2, 0.25, 500, 200, 6.0e-3, 9.0e-4, 1.05, 1.96, 99, 0.2)
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "records.csv"
        write_csv([rec, rec2], path)
        text = path.read_text()
        if not text.startswith(CSV_HEADER + "\n"):
            return "bad header"
        if "1.250000e-2" not in text:
            return "bad float format"
        back = read_csv(path)
    if back[0].rate_q is not None or abs(back[1].rate_u - 1.96) > 1e-9:
        return "round trip mismatch"
    if back[1].ndof_total != 500:
        return "int column mismatch"
    return None


_CHECKS = [
    ("quadrature exactness", _check_quadrature),
    ("mesh volumes", _check_mesh_volumes),
    ("operator invariants", _check_operators),
    ("manufactured fields vs finite differences", _check_manufactured_fd),
    ("reduced gradient and Hessian", _check_gradient_and_hessian),
    ("normal trace extension independence", _check_trace_extensions),
    ("unconstrained solve", _check_unconstrained_solver),
    ("quasi-interpolation bounds", _check_quasi_interpolation),
    ("csv round trip", _check_csv_round_trip),
]


def run_selftest(out=print) -> int:
    """Run all checks; print one PASS/FAIL line each; return failure count."""
    failures = 0
    for name, check in _CHECKS:
        try:
            detail = check()
        except Exception as exc:  # a crashing check is a failing check
            detail = f"exception: {exc!r}"
        if detail is None:
            out(f"PASS {name}")
        else:
            out(f"FAIL {name}: {detail}")
            failures += 1
    out(f"{len(_CHECKS) - failures}/{len(_CHECKS)} checks passed")
    return failures
