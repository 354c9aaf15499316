"""Closed-form benchmark fields for the prism domains.

With r, phi cylindrical coordinates in the base plane, lam = pi/omega, and
the polynomial bubbles p1 = 1-x1^2, p2 = 1-x2^2, p3 = x3^2(1-x3)^2,

    u(x) = -lam r^(lam-1) p1 p2 p3 + 2 r^lam sin(lam phi) (r^2 - 2) p3
    z(x) =  r^lam sin(lam phi) p1 p2 p3
    q    =  u restricted to the boundary
    f    = -Lap u        (state equation source)
    u_d  =  u + Lap z    (desired state)

f and Lap z are implemented from hand-derived closed forms (products of the
harmonic function r^lam sin(lam phi), its derivatives, and the bubbles); the
derivation is validated against a finite-difference oracle in the tests.
These fields satisfy the first-order optimality system with alpha = 1: z has
a homogeneous boundary trace and dz/dn = q on every face.

Near the edge r = 0 the source behaves like r^(lam-3), which is unbounded for
lam < 3; evaluation at r = 0 returns 0 by convention (a measure-zero set that
the quadrature rules in this package never sample).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = ["ManufacturedCase", "TheoryRates", "exact_fields", "expected_rate"]


@dataclass(frozen=True)
class ManufacturedCase:
    omega: float
    lam: float
    alpha: float
    u: Callable          # exact optimal state
    z: Callable          # exact adjoint
    q: Callable          # exact optimal control = trace of u
    f: Callable          # -Lap u
    u_d: Callable        # u + Lap z
    grad_z: Callable     # gradient of z, shape (..., 3)


@dataclass(frozen=True)
class TheoryRates:
    s_max: float
    expected_rate: float
    log_factor: bool


def _pieces(x, lam):
    x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
    r = np.hypot(x1, x2)
    phi = np.arctan2(x2, x1)
    # domain points carry phi in [0, omega]; clamp rounding spill at phi ~ 0
    omega = math.pi / lam
    phi = np.clip(phi, 0.0, omega)

    pos = r > 0.0
    rs = np.where(pos, r, 1.0)  # safe base for negative powers

    s = np.where(pos, rs**lam, 0.0) * np.sin(lam * phi)
    sx = lam * np.where(pos, rs ** (lam - 1), 0.0) * np.sin((lam - 1) * phi)
    sy = lam * np.where(pos, rs ** (lam - 1), 0.0) * np.cos((lam - 1) * phi)
    g = np.where(pos, rs ** (lam - 1), 0.0)
    rl3 = np.where(pos, rs ** (lam - 3), 0.0)
    gx = (lam - 1) * rl3 * x1
    gy = (lam - 1) * rl3 * x2
    lap_g = (lam - 1) ** 2 * rl3

    p1 = 1.0 - x1**2
    p2 = 1.0 - x2**2
    p3 = x3**2 * (1.0 - x3) ** 2
    p3p = 2.0 * x3 * (1.0 - x3) * (1.0 - 2.0 * x3)
    p3pp = 2.0 - 12.0 * x3 + 12.0 * x3**2
    return locals()


def exact_fields(omega: float) -> ManufacturedCase:
    """Benchmark fields for angle omega in [pi/2, pi)."""
    if not (math.pi / 2 - 1e-12 <= omega < math.pi):
        raise ValueError(f"omega = {omega} outside [pi/2, pi)")
    lam = math.pi / omega

    def u(x):
        c = _pieces(np.asarray(x, dtype=float), lam)
        P = c["p1"] * c["p2"] * c["p3"]
        R = (c["r"] ** 2 - 2.0) * c["p3"]
        return -lam * c["g"] * P + 2.0 * c["s"] * R

    def z(x):
        c = _pieces(np.asarray(x, dtype=float), lam)
        return c["s"] * c["p1"] * c["p2"] * c["p3"]

    def grad_z(x):
        c = _pieces(np.asarray(x, dtype=float), lam)
        p1, p2, p3 = c["p1"], c["p2"], c["p3"]
        P = p1 * p2 * p3
        dP1 = -2.0 * c["x1"] * p2 * p3
        dP2 = -2.0 * c["x2"] * p1 * p3
        out = np.empty(c["x1"].shape + (3,))
        out[..., 0] = c["sx"] * P + c["s"] * dP1
        out[..., 1] = c["sy"] * P + c["s"] * dP2
        out[..., 2] = c["s"] * p1 * p2 * c["p3p"]
        return out

    def _lap_z(c):
        p1, p2, p3 = c["p1"], c["p2"], c["p3"]
        P = p1 * p2 * p3
        dP1 = -2.0 * c["x1"] * p2 * p3
        dP2 = -2.0 * c["x2"] * p1 * p3
        lap_P = -2.0 * p2 * p3 - 2.0 * p1 * p3 + p1 * p2 * c["p3pp"]
        return 2.0 * (c["sx"] * dP1 + c["sy"] * dP2) + c["s"] * lap_P

    def f(x):
        c = _pieces(np.asarray(x, dtype=float), lam)
        p1, p2, p3 = c["p1"], c["p2"], c["p3"]
        P = p1 * p2 * p3
        dP1 = -2.0 * c["x1"] * p2 * p3
        dP2 = -2.0 * c["x2"] * p1 * p3
        lap_P = -2.0 * p2 * p3 - 2.0 * p1 * p3 + p1 * p2 * c["p3pp"]
        dR1 = 2.0 * c["x1"] * p3
        dR2 = 2.0 * c["x2"] * p3
        lap_R = 4.0 * p3 + (c["r"] ** 2 - 2.0) * c["p3pp"]
        lap_gp = c["lap_g"] * P + 2.0 * (c["gx"] * dP1 + c["gy"] * dP2) + c["g"] * lap_P
        lap_sr = 2.0 * (c["sx"] * dR1 + c["sy"] * dR2) + c["s"] * lap_R
        return lam * lap_gp - 2.0 * lap_sr

    def u_d(x):
        c = _pieces(np.asarray(x, dtype=float), lam)
        P = c["p1"] * c["p2"] * c["p3"]
        R = (c["r"] ** 2 - 2.0) * c["p3"]
        ubar = -lam * c["g"] * P + 2.0 * c["s"] * R
        return ubar + _lap_z(c)

    return ManufacturedCase(float(omega), lam, 1.0, u, z, u, f, u_d, grad_z)


def expected_rate(omega: float) -> TheoryRates:
    """Convergence order of the control error: 1/2 + min(pi/omega - 1, 1/2).

    The log factor is active in the limit case s_max = 1/2 (rate h |ln h|).
    """
    if not (math.pi / 2 - 1e-12 <= omega < math.pi):
        raise ValueError(f"omega = {omega} outside [pi/2, pi)")
    s_max = min(math.pi / omega - 1.0, 0.5)
    return TheoryRates(s_max, 0.5 + s_max, s_max >= 0.5 - 1e-14)
