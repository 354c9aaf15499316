"""Shared oracles for the test suite: finite differences, point sampling, dense solves."""

import numpy as np

from dirichlet_control.mesh import distance_to_boundary


def fd_second(fn, x, axis, h):
    """4th-order central second derivative along one axis."""
    e = np.zeros(3)
    e[axis] = 1.0
    vals = [fn(np.asarray(x) + k * h * e) for k in (-2, -1, 0, 1, 2)]
    return (-vals[0] + 16 * vals[1] - 30 * vals[2] + 16 * vals[3] - vals[4]) / (12 * h * h)


def fd_laplacian(fn, x, h):
    return sum(fd_second(fn, x, axis, h) for axis in range(3))


def fd_grad(fn, x, h):
    """4th-order central first derivatives."""
    out = np.zeros(3)
    for axis in range(3):
        e = np.zeros(3)
        e[axis] = 1.0
        vals = [fn(np.asarray(x) + k * h * e) for k in (-2, -1, 1, 2)]
        out[axis] = (vals[0] - 8 * vals[1] + 8 * vals[2] - vals[3]) / (12 * h)
    return out


def sample_interior_points(domain, n, seed, min_dist=0.01, min_r=0.02):
    """Random interior points, kept away from the boundary and the singular edge."""
    rng = np.random.default_rng(seed)
    pts = []
    while len(pts) < n:
        # the base polygon fits in [-1, 1] x [0, 1] for every benchmark angle
        cand = rng.uniform([-1.0, 0.0, 0.0], [1.0, 1.0, 1.0], size=(4 * n, 3))
        d = domain.offsets - cand @ domain.normals.T
        ok = d.min(axis=1) >= min_dist
        ok &= np.hypot(cand[:, 0], cand[:, 1]) >= min_r
        pts.extend(cand[ok])
    return np.array(pts[:n])


def sample_boundary_points(domain, n, seed, margin=1e-6):
    """Random points on the boundary faces (uniform over a covering patch, rejected)."""
    rng = np.random.default_rng(seed)
    pts = []
    k = domain.normals.shape[0]
    while len(pts) < n:
        plane = rng.integers(0, k)
        a, b = domain.normals[plane], domain.offsets[plane]
        # sample in a box, then project onto the plane
        cand = rng.uniform([-1.0, 0.0, 0.0], [1.0, 1.0, 1.0])
        cand = cand - (a @ cand - b) * a
        d = domain.offsets - cand @ domain.normals.T
        if d.min() >= -1e-12:
            pts.append(cand)
    return np.array(pts[:n])


def dense_interior_solve(a_csr, interior, rhs_interior):
    """Dense factorization oracle for the interior block."""
    a_dense = a_csr.toarray()[np.ix_(interior, interior)]
    return np.linalg.solve(a_dense, rhs_interior)


def dense_reduced_system(prob):
    """Dense reduced optimality system K q = r0 built column by column.

    Independent of the iterative pipeline: explicit source-free solution
    columns U, Gram G = U^T M U, K = alpha M_b + G, and the affine part r0
    from dense state/adjoint solves at q = 0.
    """
    a = prob.a.toarray()
    m = prob.m.toarray()
    mb = prob.mb.toarray()
    interior = prob.dofmap.interior
    boundary = prob.dofmap.boundary
    n, nb = prob.dofmap.n, boundary.size

    u_cols = np.zeros((n, nb))
    u_cols[boundary] = np.eye(nb)
    if interior.size:
        a_ii = a[np.ix_(interior, interior)]
        a_ib = a[np.ix_(interior, boundary)]
        u_cols[interior] = np.linalg.solve(a_ii, -a_ib)
    gram = u_cols.T @ m @ u_cols
    k = prob.data.alpha * mb + gram

    u_f = np.zeros(n)
    if interior.size:
        u_f[interior] = np.linalg.solve(a_ii, prob.f_load[interior])
    z_f = np.zeros(n)
    rhs_z = m @ u_f - prob.ud_load
    if interior.size:
        z_f[interior] = np.linalg.solve(a_ii, rhs_z[interior])
    r0 = (a @ z_f - m @ u_f + prob.ud_load)[boundary]
    return k, r0, mb


def projected_gradient_qp(k, r0, q_a, q_b, tol=1e-12, max_iter=2_000_000):
    """Brute-force box-QP oracle: projected gradient with step 1/lambda_max."""
    step = 1.0 / np.linalg.eigvalsh(k)[-1]
    q = np.clip(np.zeros(r0.size), q_a, q_b)
    for _ in range(max_iter):
        grad = k @ q - r0
        q_next = np.clip(q - step * grad, q_a, q_b)
        if np.linalg.norm(q_next - q) <= tol * step * max(np.linalg.norm(r0), 1.0):
            return q_next
        q = q_next
    raise RuntimeError("projected gradient oracle did not converge")
