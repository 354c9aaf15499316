"""Preconditioned conjugate gradients and Dirichlet dof elimination.

cg_solve works on an abstract SPD operator given as a callable v -> A v (or
any object supporting @).  The optional `dot` argument replaces the Euclidean
inner product; convergence is then measured in the norm induced by `dot`,
which the reduced-Hessian solve uses to stop directly on the M-norm of the
gradient.  `precond` may be a diagonal (1d array) or a callable r -> M^{-1} r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["SolveReport", "SolverError", "cg_solve", "eliminate_dirichlet", "DirichletSystem"]


class SolverError(RuntimeError):
    pass


@dataclass
class SolveReport:
    iterations: int
    rel_residual: float
    converged: bool


def _as_apply(op):
    if callable(op):
        return op
    return lambda v: op @ v


def cg_solve(op, rhs, tol_rel: float = 1e-10, max_iter: int | None = None,
             precond=None, dot=None, x0=None):
    """Solve op x = rhs for SPD op; returns (x, SolveReport).

    Stops when ||rhs - op x|| <= tol_rel * ||rhs|| in the `dot`-induced norm.
    rhs = 0 returns x = 0 after 0 iterations.  Non-finite values raise
    SolverError.
    """
    apply_op = _as_apply(op)
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    if not np.all(np.isfinite(rhs)):
        raise SolverError("non-finite right-hand side")
    if max_iter is None:
        max_iter = 10 * n
    if dot is None:
        dot = np.dot
    if precond is None:
        apply_m = lambda r: r
    elif callable(precond):
        apply_m = precond
    else:
        dinv = 1.0 / np.asarray(precond, dtype=float)
        apply_m = lambda r: dinv * r

    rhs_norm = np.sqrt(dot(rhs, rhs))
    if rhs_norm == 0.0:
        return np.zeros(n), SolveReport(0, 0.0, True)

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = rhs - apply_op(x) if x0 is not None else rhs.copy()
    z = apply_m(r)
    p = z.copy()
    rz = dot(r, z)
    res = np.sqrt(dot(r, r))
    it = 0
    while res > tol_rel * rhs_norm and it < max_iter:
        q = apply_op(p)
        pq = dot(p, q)
        if not np.isfinite(pq) or pq <= 0.0:
            raise SolverError(f"operator not SPD or non-finite (p.Ap = {pq})")
        alpha = rz / pq
        x += alpha * p
        r -= alpha * q
        it += 1
        if it % 50 == 0:
            # guard against residual drift on long solves
            r = rhs - apply_op(x)
        z = apply_m(r)
        rz_new = dot(r, z)
        if not np.isfinite(rz_new):
            raise SolverError("non-finite residual in cg")
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
        res = np.sqrt(dot(r, r))
    return x, SolveReport(it, float(res / rhs_norm), bool(res <= tol_rel * rhs_norm))


class DirichletSystem:
    """Interior restriction of a matrix with boundary values moved to the rhs.

    Keeps the full CSR matrix and masks rows/columns at apply time; one matrix
    serves state, adjoint and Hessian solves.
    """

    def __init__(self, a, interior, boundary):
        self.a = a
        self.interior = np.asarray(interior)
        self.boundary = np.asarray(boundary)
        self.n = a.shape[0]
        self._diag = a.diagonal()[self.interior]

    def apply_interior(self, v):
        full = np.zeros(self.n)
        full[self.interior] = v
        return (self.a @ full)[self.interior]

    def jacobi(self):
        return self._diag

    def reduced_rhs(self, rhs_full=None, boundary_values=None):
        """rhs_int = F_int - A[int, bdry] g."""
        out = np.zeros(self.interior.size)
        if rhs_full is not None:
            out += np.asarray(rhs_full)[self.interior]
        if boundary_values is not None:
            full = np.zeros(self.n)
            full[self.boundary] = boundary_values
            out -= (self.a @ full)[self.interior]
        return out

    def solve(self, rhs_full=None, boundary_values=None, tol_rel=1e-10,
              max_iter=None):
        """Full-length solution with the prescribed boundary values."""
        rhs = self.reduced_rhs(rhs_full, boundary_values)
        x_int, report = cg_solve(self.apply_interior, rhs, tol_rel=tol_rel,
                                 max_iter=max_iter, precond=self.jacobi())
        if not report.converged:
            raise SolverError(
                f"cg did not converge in {report.iterations} iterations "
                f"(relative residual {report.rel_residual:.3e})")
        full = np.zeros(self.n)
        full[self.interior] = x_int
        if boundary_values is not None:
            full[self.boundary] = boundary_values
        return full, report


def eliminate_dirichlet(a, boundary_dofs, boundary_values, rhs=None):
    """(interior operator, adjusted interior rhs) for A with fixed boundary dofs."""
    n = a.shape[0]
    mask = np.ones(n, dtype=bool)
    mask[boundary_dofs] = False
    interior = np.nonzero(mask)[0]
    system = DirichletSystem(a, interior, np.asarray(boundary_dofs))
    return system, system.reduced_rhs(rhs, boundary_values)
