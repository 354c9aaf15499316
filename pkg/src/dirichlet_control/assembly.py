"""P1 Lagrange assembly on tetrahedra and boundary triangles.

Matrices are scipy CSR in canonical form (sorted indices, summed duplicates).
Boundary objects live on the boundary dof numbering defined by DofMap:
boundary dofs are the boundary vertices in ascending vertex order.

Data callables (f, u_d, exact solutions, boundary data) take an array of
points with shape (..., 3) and return values of shape (...).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, distance_to_boundary, mesh_size
from .quadrature import tet_rule, tri_rule

__all__ = [
    "DofMap",
    "assemble_stiffness",
    "assemble_mass_domain",
    "assemble_mass_boundary",
    "assemble_load",
    "assemble_boundary_load",
    "boundary_load_from_values",
    "boundary_l2_distance",
    "integrate_l2_error_domain",
    "integrate_l2_error_boundary",
    "weighted_gradient_norm",
]


@dataclass(frozen=True)
class DofMap:
    """Vertex dofs split into boundary and interior (P1: dof = vertex)."""

    n: int
    boundary: np.ndarray    # vertex indices, ascending
    interior: np.ndarray
    to_boundary: np.ndarray  # vertex -> boundary dof position, -1 for interior

    @classmethod
    def from_mesh(cls, mesh: Mesh) -> "DofMap":
        flags = mesh.boundary_vertex_flags
        boundary = np.nonzero(flags)[0]
        interior = np.nonzero(~flags)[0]
        to_boundary = np.full(mesh.n_vertices, -1, dtype=np.int64)
        to_boundary[boundary] = np.arange(boundary.size)
        for arr in (boundary, interior, to_boundary):
            arr.setflags(write=False)
        return cls(mesh.n_vertices, boundary, interior, to_boundary)

    @property
    def n_boundary(self) -> int:
        return self.boundary.size

    @property
    def n_interior(self) -> int:
        return self.interior.size


def _tet_geometry(mesh):
    """Signed volumes (m,) and P1 basis gradients (m, 4, 3)."""
    v = mesh.vertices[mesh.tets]
    d = v[:, 1:] - v[:, :1]
    vol = np.linalg.det(d) / 6.0
    if np.any(vol <= 0):
        raise ValueError("degenerate tetrahedron in assembly")
    dinv = np.linalg.inv(d)
    grads = np.empty((mesh.n_tets, 4, 3))
    grads[:, 1:] = np.transpose(dinv, (0, 2, 1))
    grads[:, 0] = -grads[:, 1:].sum(axis=1)
    return vol, grads


def _face_geometry(mesh):
    v = mesh.vertices[mesh.boundary_faces]
    cr = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    return 0.5 * np.linalg.norm(cr, axis=1)


def _scatter(cells, local, n):
    k = cells.shape[1]
    rows = np.broadcast_to(cells[:, :, None], local.shape).ravel()
    cols = np.broadcast_to(cells[:, None, :], local.shape).ravel()
    a = sp.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()
    a.sum_duplicates()
    a.sort_indices()
    return a


def _tet_points(mesh, rule):
    """Quadrature points of every tet, (m, nq, 3)."""
    return np.einsum("qi,mid->mqd", rule.points, mesh.vertices[mesh.tets])


def _face_points(mesh, rule):
    return np.einsum("qi,mid->mqd", rule.points, mesh.vertices[mesh.boundary_faces])


def assemble_stiffness(mesh: Mesh) -> sp.csr_matrix:
    """(grad phi_i, grad phi_j); symmetric PSD with kernel = constants."""
    vol, grads = _tet_geometry(mesh)
    local = vol[:, None, None] * np.einsum("mid,mjd->mij", grads, grads)
    return _scatter(mesh.tets, local, mesh.n_vertices)


def assemble_mass_domain(mesh: Mesh, degree: int = 2) -> sp.csr_matrix:
    """(phi_i, phi_j) on the volume mesh; exact for P1 x P1 at degree 2."""
    vol, _ = _tet_geometry(mesh)
    rule = tet_rule(degree)
    c = 6.0 * np.einsum("q,qi,qj->ij", rule.weights, rule.points, rule.points)
    local = vol[:, None, None] * c
    return _scatter(mesh.tets, local, mesh.n_vertices)


def assemble_mass_boundary(mesh: Mesh, dofmap: DofMap | None = None,
                           degree: int = 2) -> sp.csr_matrix:
    """(phi_i, phi_j) over the boundary triangles, on boundary dofs."""
    if dofmap is None:
        dofmap = DofMap.from_mesh(mesh)
    areas = _face_geometry(mesh)
    rule = tri_rule(degree)
    c = 2.0 * np.einsum("q,qi,qj->ij", rule.weights, rule.points, rule.points)
    local = areas[:, None, None] * c
    faces_b = dofmap.to_boundary[mesh.boundary_faces]
    return _scatter(faces_b, local, dofmap.n_boundary)


def assemble_load(mesh: Mesh, f, degree: int) -> np.ndarray:
    """Vector of (f, phi_i) over the volume at the requested quadrature degree."""
    vol, _ = _tet_geometry(mesh)
    rule = tet_rule(degree)
    fx = np.asarray(f(_tet_points(mesh, rule)), dtype=float)
    local = 6.0 * vol[:, None] * ((rule.weights * fx) @ rule.points)
    out = np.zeros(mesh.n_vertices)
    np.add.at(out, mesh.tets, local)
    return out


def assemble_boundary_load(mesh: Mesh, g, degree: int,
                           dofmap: DofMap | None = None) -> np.ndarray:
    """Vector of (g, phi_i) over the boundary triangles, on boundary dofs."""
    if dofmap is None:
        dofmap = DofMap.from_mesh(mesh)
    areas = _face_geometry(mesh)
    rule = tri_rule(degree)
    gx = np.asarray(g(_face_points(mesh, rule)), dtype=float)
    local = 2.0 * areas[:, None] * ((rule.weights * gx) @ rule.points)
    out = np.zeros(dofmap.n_boundary)
    np.add.at(out, dofmap.to_boundary[mesh.boundary_faces], local)
    return out


def boundary_load_from_values(mesh: Mesh, boundary_coeffs, degree: int,
                              dofmap: DofMap | None = None,
                              transform=None) -> np.ndarray:
    """Vector of (T(q_h), phi_i) for P1 boundary data q_h, T an optional map.

    With transform = cutoff this integrates the pointwise projection of a P1
    function against the trace basis without sub-cell meshing.
    """
    if dofmap is None:
        dofmap = DofMap.from_mesh(mesh)
    areas = _face_geometry(mesh)
    rule = tri_rule(degree)
    qb = np.asarray(boundary_coeffs, dtype=float)[dofmap.to_boundary[mesh.boundary_faces]]
    qh = qb @ rule.points.T
    if transform is not None:
        qh = transform(qh)
    local = 2.0 * areas[:, None] * ((rule.weights * qh) @ rule.points)
    out = np.zeros(dofmap.n_boundary)
    np.add.at(out, dofmap.to_boundary[mesh.boundary_faces], local)
    return out


def boundary_l2_distance(mesh: Mesh, coeffs_a, coeffs_b, degree: int,
                         dofmap: DofMap | None = None,
                         transform=None) -> float:
    """Quadrature L2(dO) distance between two (transformed) P1 boundary functions."""
    if dofmap is None:
        dofmap = DofMap.from_mesh(mesh)
    areas = _face_geometry(mesh)
    rule = tri_rule(degree)
    faces_b = dofmap.to_boundary[mesh.boundary_faces]
    qa = np.asarray(coeffs_a, dtype=float)[faces_b] @ rule.points.T
    qb = np.asarray(coeffs_b, dtype=float)[faces_b] @ rule.points.T
    if transform is not None:
        qa = transform(qa)
        qb = transform(qb)
    err2 = 2.0 * areas * ((qa - qb) ** 2 @ rule.weights)
    return float(np.sqrt(err2.sum()))


def integrate_l2_error_domain(mesh: Mesh, coeffs, exact, degree: int) -> float:
    """|| u_h - exact ||_{L2(O)} by cellwise quadrature."""
    vol, _ = _tet_geometry(mesh)
    rule = tet_rule(degree)
    uh = np.asarray(coeffs, dtype=float)[mesh.tets] @ rule.points.T
    ex = np.asarray(exact(_tet_points(mesh, rule)), dtype=float)
    err2 = 6.0 * vol * ((uh - ex) ** 2 @ rule.weights)
    return float(np.sqrt(err2.sum()))


def integrate_l2_error_boundary(mesh: Mesh, boundary_coeffs, exact, degree: int,
                                dofmap: DofMap | None = None,
                                transform=None) -> float:
    """|| q_h - exact ||_{L2(dO)}; transform (if given) maps q_h quadrature values.

    transform implements controls that are pointwise cutoffs of a P1 function:
    it is applied to the finite element values before the difference is squared.
    """
    if dofmap is None:
        dofmap = DofMap.from_mesh(mesh)
    areas = _face_geometry(mesh)
    rule = tri_rule(degree)
    qb = np.asarray(boundary_coeffs, dtype=float)[dofmap.to_boundary[mesh.boundary_faces]]
    qh = qb @ rule.points.T
    if transform is not None:
        qh = transform(qh)
    ex = np.asarray(exact(_face_points(mesh, rule)), dtype=float)
    err2 = 2.0 * areas * ((qh - ex) ** 2 @ rule.weights)
    return float(np.sqrt(err2.sum()))


def weighted_gradient_norm(mesh: Mesh, coeffs, kappa: float, degree: int = 2) -> float:
    """|| rho_tilde^{1/2} grad u_h ||_{L2(O)} with rho_tilde = sqrt(rho^2 + (kappa h)^2).

    rho is the exact polyhedral boundary distance, h the mesh size; gradients
    of P1 functions are cellwise constant, the weight is integrated cellwise.
    """
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    vol, grads = _tet_geometry(mesh)
    gu = np.einsum("mid,mi->md", grads, np.asarray(coeffs, dtype=float)[mesh.tets])
    gu2 = np.einsum("md,md->m", gu, gu)
    rule = tet_rule(degree)
    pts = _tet_points(mesh, rule)
    rho = distance_to_boundary(mesh.domain, pts.reshape(-1, 3)).reshape(pts.shape[:2])
    kh = kappa * mesh_size(mesh)
    rho_t = np.sqrt(rho * rho + kh * kh)
    cell_weight = 6.0 * vol * (rho_t @ rule.weights)
    return float(np.sqrt(np.sum(gu2 * cell_weight)))
