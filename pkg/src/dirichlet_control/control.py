"""Discrete optimal-control building blocks.

The state is sought in the affine space (extension of q) + V_h:

    u_h = E_h q + interior correction,   (grad u_h, grad phi) = (f, phi),

so its boundary nodal values equal q exactly.  The adjoint solves the
homogeneous-Dirichlet problem (grad phi, grad z_h) = (u_h - u_d, phi).  The
variational normal trace t in V_h^d is defined by

    (t, psi)_dO = (grad z_h, grad B psi) - (u_h - u_d, B psi)

for any extension B of boundary functions; with z_h solving the adjoint
equation the right side does not depend on B.  The default B is extension by
zero (the raw boundary rows of the residual); the discrete harmonic variant
is obtained from it by subtracting A[bdry, int] A[int, int]^{-1} rho, where
rho is the interior adjoint residual.

Reduced derivatives of j(q) = 1/2||u_h(q) - u_d||^2 + alpha/2 ||q||^2_dO:

    gradient  g = alpha q - t(q)
    Hessian   (H dq, psi)_dO = alpha (dq, psi)_dO + (S0 dq, S0 psi)_O

with S0 the source-free solution operator; H is independent of q.

Data functions (f, u_d) enter only through quadrature (degree 4 by default),
never through interpolation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .assembly import (
    DofMap,
    assemble_boundary_load,
    assemble_load,
    assemble_mass_boundary,
    assemble_mass_domain,
    assemble_stiffness,
    integrate_l2_error_domain,
)
from .mesh import Mesh
from .solver import DirichletSystem, SolverError, cg_solve

__all__ = ["ProblemData", "DiscreteProblem", "boundary_projection"]


@dataclass(frozen=True)
class ProblemData:
    """Cost weight, control bounds, and data functions of one benchmark problem."""

    alpha: float
    q_a: float = -math.inf
    q_b: float = math.inf
    f: Callable | None = None
    u_d: Callable | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.q_a < self.q_b:
            raise ValueError("q_a < q_b required")
        if not (self.q_a < 0.0 < self.q_b):
            raise ValueError("bounds must satisfy q_a < 0 < q_b")


def _zero(x):
    return np.zeros(x.shape[:-1])


def boundary_projection(mesh: Mesh, g, degree: int = 4,
                        dofmap: DofMap | None = None) -> np.ndarray:
    """L2(dO) projection of g onto the trace space (boundary mass solve)."""
    if dofmap is None:
        dofmap = DofMap.from_mesh(mesh)
    mb = assemble_mass_boundary(mesh, dofmap)
    rhs = assemble_boundary_load(mesh, g, degree, dofmap)
    q, report = cg_solve(mb, rhs, tol_rel=1e-12, precond=mb.diagonal())
    if not report.converged:
        raise SolverError("boundary mass solve failed")
    return q


class DiscreteProblem:
    """Assembled matrices and solution operators for one mesh and data set.

    All methods are deterministic; `cg_iterations` accumulates inner CG
    iteration counts for reporting (reset with `reset_counters`).
    """

    def __init__(self, mesh: Mesh, data: ProblemData, quad_degree: int = 4,
                 tol_rel: float = 1e-12):
        self.mesh = mesh
        self.data = data
        self.quad_degree = quad_degree
        self.tol_rel = tol_rel
        self.dofmap = DofMap.from_mesh(mesh)
        self.a = assemble_stiffness(mesh)
        self.m = assemble_mass_domain(mesh)
        self.mb = assemble_mass_boundary(mesh, self.dofmap)
        self._mb_diag = self.mb.diagonal()
        self.system = DirichletSystem(self.a, self.dofmap.interior, self.dofmap.boundary)
        self.f_load = (assemble_load(mesh, data.f, quad_degree)
                       if data.f is not None else np.zeros(mesh.n_vertices))
        self.ud_load = (assemble_load(mesh, data.u_d, quad_degree)
                        if data.u_d is not None else np.zeros(mesh.n_vertices))
        self.cg_iterations = 0

    # -- counters ---------------------------------------------------------

    def reset_counters(self):
        self.cg_iterations = 0

    def _count(self, report):
        self.cg_iterations += report.iterations

    # -- basic solves -----------------------------------------------------

    def mass_boundary_solve(self, rhs: np.ndarray) -> np.ndarray:
        x, report = cg_solve(self.mb, rhs, tol_rel=min(self.tol_rel, 1e-12),
                             precond=self._mb_diag)
        if not report.converged:
            raise SolverError("boundary mass solve failed")
        self._count(report)
        return x

    def project_boundary(self, g) -> np.ndarray:
        """P_h^d g: L2(dO)-projection of a boundary function onto V_h^d."""
        rhs = assemble_boundary_load(self.mesh, g, self.quad_degree, self.dofmap)
        return self.mass_boundary_solve(rhs)

    def solve_state(self, q: np.ndarray, include_source: bool = True) -> np.ndarray:
        """u_h with boundary nodal values q; include_source=False gives S0 q."""
        rhs = self.f_load if include_source else None
        u, report = self.system.solve(rhs_full=rhs, boundary_values=q,
                                      tol_rel=self.tol_rel)
        self._count(report)
        return u

    def solve_adjoint(self, u: np.ndarray, use_ud: bool = True) -> np.ndarray:
        """z_h in V_h with (grad phi, grad z) = (u - u_d, phi)."""
        rhs = self.m @ u
        if use_ud:
            rhs = rhs - self.ud_load
        z, report = self.system.solve(rhs_full=rhs, boundary_values=None,
                                      tol_rel=self.tol_rel)
        self._count(report)
        return z

    def normal_trace(self, u: np.ndarray, z: np.ndarray, use_ud: bool = True,
                     extension: str = "zero") -> np.ndarray:
        """Variational normal trace of z: solve (t, psi)_dO = residual pairing."""
        raw = self.a @ z - self.m @ u
        if use_ud:
            raw = raw + self.ud_load
        r = raw[self.dofmap.boundary].copy()
        if extension == "harmonic":
            rho = raw[self.dofmap.interior]
            w, report = cg_solve(self.system.apply_interior, rho,
                                 tol_rel=min(self.tol_rel, 1e-13),
                                 precond=self.system.jacobi())
            if not report.converged:
                raise SolverError("harmonic extension solve failed")
            self._count(report)
            full = np.zeros(self.dofmap.n)
            full[self.dofmap.interior] = w
            r -= (self.a @ full)[self.dofmap.boundary]
        elif extension != "zero":
            raise ValueError(f"unknown extension '{extension}'")
        return self.mass_boundary_solve(r)

    # -- reduced functional -----------------------------------------------

    def reduced_cost(self, q: np.ndarray) -> float:
        u = self.solve_state(q)
        ud = self.data.u_d if self.data.u_d is not None else _zero
        track = integrate_l2_error_domain(self.mesh, u, ud, self.quad_degree)
        return 0.5 * track**2 + 0.5 * self.data.alpha * float(q @ (self.mb @ q))

    def reduced_gradient(self, q: np.ndarray) -> np.ndarray:
        u = self.solve_state(q)
        z = self.solve_adjoint(u)
        t = self.normal_trace(u, z)
        return self.data.alpha * q - t

    def hessian_apply(self, dq: np.ndarray) -> np.ndarray:
        """H dq in V_h^d: one state, one adjoint-type, one boundary mass solve."""
        du = self.solve_state(dq, include_source=False)
        dz = self.solve_adjoint(du, use_ud=False)
        dt = self.normal_trace(du, dz, use_ud=False)
        return self.data.alpha * dq - dt

    def k_apply(self, dq: np.ndarray) -> np.ndarray:
        """Euclidean form M_d H dq (no boundary mass solve); used by active-set CG."""
        du = self.solve_state(dq, include_source=False)
        dz = self.solve_adjoint(du, use_ud=False)
        raw = self.a @ dz - self.m @ du
        return self.data.alpha * (self.mb @ dq) - raw[self.dofmap.boundary]

    # -- norms --------------------------------------------------------------

    def m_dot(self, u: np.ndarray, v: np.ndarray) -> float:
        return float(u @ (self.mb @ v))

    def m_norm(self, v: np.ndarray) -> float:
        return math.sqrt(max(self.m_dot(v, v), 0.0))
