"""Convergence studies against the closed-form benchmark solution.

A study runs the discrete control solver on a refinement sequence of the
prism domain, measures L2 errors of control and state against the exact
fields, and reports observed convergence rates.  Output is a CSV file, an
optional log-log figure next to it, and optional per-level VTK exports.

CSV contract: header `level,h,ndof_total,ndof_boundary,err_q_L2,err_u_L2,
rate_q,rate_u,cg_iters_total,wall_seconds`; floats as 6-significant-digit
scientific notation with a bare exponent (`1.234560e-2`); undefined rates as
empty strings; newline "\\n".  For a fixed config (including seed) every
column except wall_seconds is deterministic.

A study covers the consecutive mesh levels base_level..base_level+levels-1
(level 0 of these domains has all eight vertices on the boundary, so it
admits no interior unknowns and is excluded).  When perturb_sigma > 0 each
level's mesh is an independently perturbed copy of the nominal refinement
(refinement never compounds perturbations), seeded by config.seed + level.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .assembly import integrate_l2_error_boundary, integrate_l2_error_domain
from .control import DiscreteProblem, ProblemData
from .manufactured import exact_fields, expected_rate
from .mesh import (
    benchmark_domain,
    build_prism_mesh,
    mesh_size,
    perturb_interior,
    refine_uniform,
    write_vtk,
)
from .optimize import OptimizerConfig, solve

__all__ = [
    "StudyConfig",
    "ConvergenceRecord",
    "CSV_HEADER",
    "run_study",
    "compute_rates",
    "write_csv",
    "read_csv",
    "render_figure",
]

CSV_HEADER = ("level,h,ndof_total,ndof_boundary,err_q_L2,err_u_L2,"
              "rate_q,rate_u,cg_iters_total,wall_seconds")


@dataclass(frozen=True)
class StudyConfig:
    omega_num: int
    omega_den: int
    levels: int
    concept: str = "p1"
    alpha: float = 1.0
    q_a: float = -math.inf
    q_b: float = math.inf
    perturb_sigma: float = 0.0
    seed: int = 0
    kappa: float = 1.0
    out: str | Path | None = "study.csv"
    vtk_dir: str | Path | None = None
    plot: bool = True
    tol_grad: float = 1e-10
    base_level: int = 1

    def __post_init__(self):
        if self.levels < 2:
            raise ValueError("levels must be >= 2 (rates need pairs)")
        if self.omega_num <= 0 or self.omega_den <= 0:
            raise ValueError("omega_num and omega_den must be positive")
        if self.base_level < 1:
            raise ValueError("base_level must be >= 1 (level 0 has no "
                             "interior vertices)")

    @property
    def omega(self) -> float:
        return math.pi * self.omega_num / self.omega_den


@dataclass
class ConvergenceRecord:
    level: int
    h: float
    ndof_total: int
    ndof_boundary: int
    err_q_L2: float
    err_u_L2: float
    rate_q: float | None
    rate_u: float | None
    cg_iters_total: int
    wall_seconds: float


def compute_rates(errors, hs):
    """Observed orders ln(e_{l-1}/e_l) / ln(h_{l-1}/h_l); None where undefined."""
    if not len(errors):
        return []
    rates = [None]
    for k in range(1, len(errors)):
        e0, e1 = errors[k - 1], errors[k]
        h0, h1 = hs[k - 1], hs[k]
        if e0 <= 0.0 or e1 <= 0.0 or h0 <= h1:
            rates.append(None)
        else:
            rates.append(math.log(e0 / e1) / math.log(h0 / h1))
    return rates


def _fmt_float(x: float) -> str:
    mant, _, exp = f"{x:.6e}".partition("e")
    return f"{mant}e{int(exp)}"


def _fmt_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return _fmt_float(float(value))


def write_csv(records, path) -> None:
    lines = [CSV_HEADER]
    for r in records:
        lines.append(",".join(_fmt_field(v) for v in (
            r.level, r.h, r.ndof_total, r.ndof_boundary, r.err_q_L2,
            r.err_u_L2, r.rate_q, r.rate_u, r.cg_iters_total, r.wall_seconds)))
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> list[ConvergenceRecord]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        out.append(ConvergenceRecord(
            level=int(row["level"]),
            h=float(row["h"]),
            ndof_total=int(row["ndof_total"]),
            ndof_boundary=int(row["ndof_boundary"]),
            err_q_L2=float(row["err_q_L2"]),
            err_u_L2=float(row["err_u_L2"]),
            rate_q=float(row["rate_q"]) if row["rate_q"] else None,
            rate_u=float(row["rate_u"]) if row["rate_u"] else None,
            cg_iters_total=int(row["cg_iters_total"]),
            wall_seconds=float(row["wall_seconds"]),
        ))
    return out


def run_study(config: StudyConfig) -> list[ConvergenceRecord]:
    """Solve the benchmark on config.levels consecutive mesh levels.

    The CSV at config.out is re-flushed after every level, so a failing level
    leaves the completed part on disk before the error propagates.
    """
    domain = benchmark_domain(config.omega)
    case = exact_fields(config.omega)
    data = ProblemData(alpha=config.alpha, q_a=config.q_a, q_b=config.q_b,
                       f=case.f, u_d=case.u_d)
    ocfg = OptimizerConfig(tol_grad=config.tol_grad, concept=config.concept)

    records: list[ConvergenceRecord] = []
    mesh = None
    try:
        for level in range(config.base_level, config.base_level + config.levels):
            mesh = (build_prism_mesh(domain, config.base_level) if mesh is None
                    else refine_uniform(mesh))
            work = mesh
            if config.perturb_sigma > 0.0:
                work = perturb_interior(mesh, config.perturb_sigma,
                                        config.seed + level)
            t0 = time.perf_counter()
            prob = DiscreteProblem(work, data)
            sol = solve(work, data, ocfg, problem=prob)
            err_q = integrate_l2_error_boundary(
                work, sol.trace_vector, case.q, 4, prob.dofmap,
                transform=sol.control_transform())
            err_u = integrate_l2_error_domain(work, sol.u, case.u, 4)
            wall = time.perf_counter() - t0
            records.append(ConvergenceRecord(
                level=level, h=mesh_size(work), ndof_total=prob.dofmap.n,
                ndof_boundary=prob.dofmap.n_boundary, err_q_L2=err_q,
                err_u_L2=err_u, rate_q=None, rate_u=None,
                cg_iters_total=sol.report.cg_iterations, wall_seconds=wall))
            _assign_rates(records)
            if config.out is not None:
                write_csv(records, config.out)
            if config.vtk_dir is not None:
                vdir = Path(config.vtk_dir)
                vdir.mkdir(parents=True, exist_ok=True)
                write_vtk(work, vdir / f"solution_level{level}.vtk",
                          {"state": sol.u, "adjoint": sol.z})
    except Exception:
        if config.out is not None:
            write_csv(records, config.out)
        raise
    return records


def _assign_rates(records):
    rq = compute_rates([r.err_q_L2 for r in records], [r.h for r in records])
    ru = compute_rates([r.err_u_L2 for r in records], [r.h for r in records])
    for r, a, b in zip(records, rq, ru):
        r.rate_q = a
        r.rate_u = b


def render_figure(records, config: StudyConfig, path=None):
    """Log-log error plot with the expected-rate reference slope; returns path."""
    from matplotlib.backends.backend_agg import FigureCanvasAgg
    from matplotlib.figure import Figure

    if path is None:
        base = Path(config.out if config.out is not None else "study.csv")
        path = base.with_suffix(".png")
    hs = np.array([r.h for r in records])
    eq = np.array([r.err_q_L2 for r in records])
    eu = np.array([r.err_u_L2 for r in records])
    theory = expected_rate(config.omega)

    fig = Figure(figsize=(6.0, 4.5))
    FigureCanvasAgg(fig)
    ax = fig.add_subplot(111)
    ax.loglog(hs, eq, "o-", label="control error, L2 boundary")
    ax.loglog(hs, eu, "s-", label="state error, L2 domain")
    if eq[-1] > 0:
        ref = eq[-1] * (hs / hs[-1]) ** theory.expected_rate
        ax.loglog(hs, ref, "k--", linewidth=0.9,
                  label=f"reference slope {theory.expected_rate:.3g}")
    ax.set_xlabel("mesh size h")
    ax.set_ylabel("error")
    ax.set_title(f"omega = {config.omega_num}*pi/{config.omega_den}, "
                 f"concept = {config.concept}")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    return Path(path)
