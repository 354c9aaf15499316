"""Closed-form benchmark fields against finite-difference oracles.

The source f and desired state u_d are hand-derived; the finite-difference
comparison here is the independent check that the derivation is right.
"""

import math

import numpy as np
import pytest

from dirichlet_control.manufactured import exact_fields, expected_rate
from dirichlet_control.mesh import benchmark_domain

from helpers import fd_grad, fd_laplacian, sample_boundary_points, sample_interior_points

OMEGAS = [math.pi / 2, 2 * math.pi / 3, 3 * math.pi / 4]


def scalar(fn):
    return lambda x: float(fn(np.asarray(x, dtype=float)))


@pytest.mark.parametrize("omega", OMEGAS)
def test_source_matches_fd_laplacian(omega):
    # f = -Lap u at 50 random interior points, 4th-order stencil, step 1e-4
    case = exact_fields(omega)
    dom = benchmark_domain(omega)
    pts = sample_interior_points(dom, 50, seed=1)
    u = scalar(case.u)
    worst = 0.0
    for x in pts:
        fd = -fd_laplacian(u, x, 1e-4)
        val = float(case.f(x))
        worst = max(worst, abs(val - fd) / max(1.0, abs(fd)))
    assert worst < 1e-6


@pytest.mark.parametrize("omega", OMEGAS)
def test_desired_state_matches_fd_laplacian(omega):
    case = exact_fields(omega)
    dom = benchmark_domain(omega)
    pts = sample_interior_points(dom, 50, seed=2)
    z = scalar(case.z)
    worst = 0.0
    for x in pts:
        fd = float(case.u(x)) + fd_laplacian(z, x, 1e-4)
        val = float(case.u_d(x))
        worst = max(worst, abs(val - fd) / max(1.0, abs(fd)))
    assert worst < 1e-6


@pytest.mark.parametrize("omega", OMEGAS)
def test_grad_z_matches_fd(omega):
    case = exact_fields(omega)
    dom = benchmark_domain(omega)
    pts = sample_interior_points(dom, 30, seed=3)
    z = scalar(case.z)
    for x in pts:
        fd = fd_grad(z, x, 1e-4)
        val = case.grad_z(x)
        assert np.linalg.norm(val - fd) < 1e-7 * max(1.0, np.linalg.norm(fd))


@pytest.mark.parametrize("omega", OMEGAS)
def test_adjoint_vanishes_on_boundary(omega):
    case = exact_fields(omega)
    pts = sample_boundary_points(benchmark_domain(omega), 200, seed=4)
    assert np.abs(case.z(pts)).max() < 1e-12


def test_state_vanishes_on_singular_edge():
    case = exact_fields(2 * math.pi / 3)
    for x3 in (0.0, 0.3, 0.7, 1.0):
        assert case.u(np.array([0.0, 0.0, x3])) == 0.0
        assert case.f(np.array([0.0, 0.0, x3])) == 0.0


@pytest.mark.parametrize("omega", OMEGAS)
def test_singular_function_harmonic(omega):
    # Lap(r^lam sin(lam phi)) = 0; underpins the closed-form derivation
    lam = math.pi / omega

    def s(x):
        r = math.hypot(x[0], x[1])
        return r**lam * math.sin(lam * math.atan2(x[1], x[0]))

    pts = sample_interior_points(benchmark_domain(omega), 25, seed=5, min_r=0.1)
    for x in pts:
        lap = fd_laplacian(s, x, 1e-4)
        scale = sum(abs(fd_grad(s, x, 1e-4))) + 1.0
        assert abs(lap) < 1e-6 * scale


@pytest.mark.parametrize("omega", OMEGAS)
def test_optimality_trace_identity_on_faces(omega):
    # alpha q - dz/dn = 0 on face interiors (alpha = 1)
    case = exact_fields(omega)
    dom = benchmark_domain(omega)
    pts = sample_boundary_points(dom, 300, seed=6)
    d = dom.offsets - pts @ dom.normals.T
    for x, plane_d in zip(pts, d):
        order = np.argsort(plane_d)
        # skip points near face intersections: normal is ambiguous there
        if plane_d[order[1]] < 1e-3:
            continue
        n = dom.normals[order[0]]
        dn = float(case.grad_z(x) @ n)
        q = float(case.q(x))
        assert abs(case.alpha * q - dn) <= 1e-8 * max(1.0, abs(q))


def test_expected_rates():
    r = expected_rate(3 * math.pi / 4)
    assert abs(r.expected_rate - 5.0 / 6.0) < 1e-14 and not r.log_factor
    r = expected_rate(2 * math.pi / 3)
    assert abs(r.expected_rate - 1.0) < 1e-14 and r.log_factor
    r = expected_rate(math.pi / 2)
    assert abs(r.expected_rate - 1.0) < 1e-14 and r.log_factor
    assert 0.5 < expected_rate(0.99 * math.pi).expected_rate <= 1.0


def test_alpha_and_lambda():
    for omega in OMEGAS:
        case = exact_fields(omega)
        assert case.alpha == 1.0
        assert abs(case.lam - math.pi / omega) < 1e-14


def test_vectorized_evaluation_shapes():
    case = exact_fields(2 * math.pi / 3)
    x = sample_interior_points(benchmark_domain(2 * math.pi / 3), 7, seed=8)
    assert case.u(x).shape == (7,)
    assert case.f(x).shape == (7,)
    assert case.u_d(x).shape == (7,)
    assert case.grad_z(x).shape == (7, 3)
    # pointwise and vectorized evaluations agree
    assert np.allclose([case.f(xi) for xi in x], case.f(x), rtol=1e-14)
