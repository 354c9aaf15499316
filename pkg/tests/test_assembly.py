"""Assembled operators: examples with known values plus structural invariants."""

import math

import numpy as np
import pytest

from dirichlet_control.assembly import (
    DofMap,
    assemble_boundary_load,
    assemble_load,
    assemble_mass_boundary,
    assemble_mass_domain,
    assemble_stiffness,
    integrate_l2_error_boundary,
    integrate_l2_error_domain,
    weighted_gradient_norm,
)
from dirichlet_control.mesh import (
    Mesh,
    benchmark_domain,
    build_prism_mesh,
    domain_volume,
    mesh_size,
    refine_uniform,
)


@pytest.fixture(scope="module")
def cube2():
    return build_prism_mesh(benchmark_domain(math.pi / 2), 2)


@pytest.fixture(scope="module")
def wedge1():
    return build_prism_mesh(benchmark_domain(3 * math.pi / 4), 1)


def test_stiffness_reference_tet():
    # unit right tet: diagonal entry at the right-angle vertex is 1/2
    dom = benchmark_domain(math.pi / 2)
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    tets = np.array([[0, 1, 2, 3]])
    fake = Mesh(dom, verts, tets, np.zeros((0, 3), dtype=np.int64),
                np.zeros(0, dtype=np.int64), np.ones(4, dtype=bool), 0, 1.0, 1.0)
    a = assemble_stiffness(fake)
    assert abs(a[0, 0] - 0.5) < 1e-14


def test_stiffness_kernel_and_psd(cube2):
    a = assemble_stiffness(cube2)
    ones = np.ones(cube2.n_vertices)
    assert np.abs(a @ ones).max() < 1e-10
    rng = np.random.default_rng(0)
    for _ in range(100):
        x = rng.standard_normal(cube2.n_vertices)
        assert x @ (a @ x) >= -1e-12


def test_stiffness_symmetric(cube2):
    a = assemble_stiffness(cube2)
    d = a - a.T
    assert abs(d).max() < 1e-12 * abs(a).max()


@pytest.mark.parametrize("omega", [math.pi / 2, 3 * math.pi / 4])
def test_mass_total_is_volume(omega):
    mesh = build_prism_mesh(benchmark_domain(omega), 2)
    m = assemble_mass_domain(mesh)
    ones = np.ones(mesh.n_vertices)
    assert abs(ones @ (m @ ones) - domain_volume(mesh.domain)) < 1e-10


def test_mass_single_tet_row_sums():
    dom = benchmark_domain(math.pi / 2)
    verts = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    tets = np.array([[0, 1, 2, 3]])
    fake = Mesh(dom, verts, tets, np.zeros((0, 3), dtype=np.int64),
                np.zeros(0, dtype=np.int64), np.ones(4, dtype=bool), 0, 1.0, 1.0)
    m = assemble_mass_domain(fake)
    vol = 1.0 / 6.0
    assert np.allclose(np.asarray(m.sum(axis=1)).ravel(), vol / 4.0, atol=1e-14)


def test_boundary_mass_total_area(cube2):
    dofmap = DofMap.from_mesh(cube2)
    mb = assemble_mass_boundary(cube2, dofmap)
    ones = np.ones(dofmap.n_boundary)
    assert abs(ones @ (mb @ ones) - 6.0) < 1e-10
    fine = refine_uniform(cube2)
    dof_f = DofMap.from_mesh(fine)
    mf = assemble_mass_boundary(fine, dof_f)
    of = np.ones(dof_f.n_boundary)
    assert abs(of @ (mf @ of) - 6.0) < 1e-10


def test_boundary_mass_row_sums_single_face(cube2):
    # P1 boundary mass: row sums restricted to one triangle equal area/3
    dofmap = DofMap.from_mesh(cube2)
    areas_total = assemble_mass_boundary(cube2, dofmap) @ np.ones(dofmap.n_boundary)
    # each boundary vertex accumulates area/3 of every incident face
    v = cube2.vertices[cube2.boundary_faces]
    areas = 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)
    acc = np.zeros(dofmap.n_boundary)
    np.add.at(acc, dofmap.to_boundary[cube2.boundary_faces],
              np.repeat(areas[:, None] / 3.0, 3, axis=1))
    assert np.allclose(areas_total, acc, atol=1e-12)


def test_load_constant_equals_mass_row_sums(cube2):
    m = assemble_mass_domain(cube2)
    load = assemble_load(cube2, lambda x: np.ones(x.shape[:-1]), 2)
    assert np.allclose(load, np.asarray(m.sum(axis=1)).ravel(), atol=1e-12)
    zero = assemble_load(cube2, lambda x: np.zeros(x.shape[:-1]), 2)
    assert np.all(zero == 0)


def test_load_linear_integral(cube2):
    load = assemble_load(cube2, lambda x: x[..., 0], 2)
    assert abs(load.sum() - 0.5) < 1e-12


def test_boundary_load_constant(cube2):
    dofmap = DofMap.from_mesh(cube2)
    load = assemble_boundary_load(cube2, lambda x: np.ones(x.shape[:-1]), 2, dofmap)
    assert abs(load.sum() - 6.0) < 1e-12


def test_l2_error_self_is_zero(cube2):
    coeffs = cube2.vertices[:, 0] + 2.0 * cube2.vertices[:, 2]
    err = integrate_l2_error_domain(cube2, coeffs,
                                    lambda x: x[..., 0] + 2.0 * x[..., 2], 4)
    assert err < 1e-13


def test_l2_error_constant_one(cube2):
    err = integrate_l2_error_domain(cube2, np.zeros(cube2.n_vertices),
                                    lambda x: np.ones(x.shape[:-1]), 4)
    assert abs(err - 1.0) < 1e-12


def test_l2_error_interpolation_rate():
    # nodal interpolant of x1^2 converges at order 2 in L2
    mesh = build_prism_mesh(benchmark_domain(math.pi / 2), 1)
    errs, hs = [], []
    exact = lambda x: x[..., 0] ** 2
    for _ in range(3):
        coeffs = mesh.vertices[:, 0] ** 2
        errs.append(integrate_l2_error_domain(mesh, coeffs, exact, 4))
        hs.append(mesh.h)
        mesh = refine_uniform(mesh)
    r1 = math.log(errs[0] / errs[1]) / math.log(hs[0] / hs[1])
    r2 = math.log(errs[1] / errs[2]) / math.log(hs[1] / hs[2])
    assert abs(r1 - 2.0) < 0.2 and abs(r2 - 2.0) < 0.2


def test_l2_error_boundary_examples(wedge1):
    dofmap = DofMap.from_mesh(wedge1)
    trace = wedge1.vertices[dofmap.boundary, 1]
    err = integrate_l2_error_boundary(wedge1, trace, lambda x: x[..., 1], 4, dofmap)
    assert err < 1e-13
    # cutoff transform clips the P1 values before comparison
    err2 = integrate_l2_error_boundary(
        wedge1, trace, lambda x: np.minimum(x[..., 1], 0.5), 4, dofmap,
        transform=lambda v: np.minimum(v, 0.5))
    assert err2 < 1e-13


def test_weighted_norm_constant_is_zero(cube2):
    assert weighted_gradient_norm(cube2, np.ones(cube2.n_vertices), 1.0) < 1e-14


def test_weighted_norm_large_kappa_limit():
    mesh = build_prism_mesh(benchmark_domain(math.pi / 2), 0)
    kappa = 10.0 / mesh_size(mesh)  # kappa h = 10
    val = weighted_gradient_norm(mesh, mesh.vertices[:, 0], kappa)
    assert abs(val - math.sqrt(10.0)) < 0.05 * math.sqrt(10.0)


def test_weighted_norm_lower_bound(cube2):
    rng = np.random.default_rng(3)
    coeffs = rng.standard_normal(cube2.n_vertices)
    kh = 1.0 * mesh_size(cube2)
    a = assemble_stiffness(cube2)
    grad_l2 = math.sqrt(coeffs @ (a @ coeffs))
    val = weighted_gradient_norm(cube2, coeffs, 1.0)
    assert val >= math.sqrt(kh) * grad_l2 * (1.0 - 1e-12)


def test_weighted_norm_rejects_small_kappa(cube2):
    with pytest.raises(ValueError):
        weighted_gradient_norm(cube2, np.ones(cube2.n_vertices), 0.5)


def test_dofmap_partition(cube2):
    dofmap = DofMap.from_mesh(cube2)
    assert dofmap.n_boundary + dofmap.n_interior == cube2.n_vertices
    assert np.intersect1d(dofmap.boundary, dofmap.interior).size == 0
    assert np.all(dofmap.to_boundary[dofmap.boundary] == np.arange(dofmap.n_boundary))
    assert np.all(dofmap.to_boundary[dofmap.interior] == -1)
