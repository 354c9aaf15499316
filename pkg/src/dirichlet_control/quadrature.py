"""Fixed quadrature rules on reference tetrahedra and triangles.

Points are stored as barycentric coordinates, weights are normalized to the
reference measure (1/6 for the tetrahedron, 1/2 for the triangle), so

    integral over a cell  =  (|cell| / ref_measure) * sum_k w_k f(x_k)
                          =  6|T| * sum w_k f(x_k)   on tetrahedra,
                          =  2|F| * sum w_k f(x_k)   on triangles.

All stored rules have strictly positive weights.  Rules served for degree
requests >= 3 on tetrahedra keep every point off the element edges (at most
one zero barycentric coordinate); integrands in this package blow up on the
domain edge r = 0, which is always an element edge of the benchmark meshes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadratureRule", "tet_rule", "tri_rule"]


@dataclass(frozen=True)
class QuadratureRule:
    """Barycentric points (n, d+1) and weights (n,) summing to the reference measure."""

    cell: str          # "tet" or "tri"
    degree: int        # highest polynomial degree integrated exactly
    points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.points.setflags(write=False)
        self.weights.setflags(write=False)


def _perms(coords):
    """Distinct permutations of a barycentric tuple, in a fixed deterministic order."""
    from itertools import permutations

    seen = []
    for p in permutations(range(len(coords))):
        tup = tuple(coords[i] for i in p)
        if not any(np.allclose(tup, s, rtol=0, atol=1e-14) for s in seen):
            seen.append(tup)
    return seen


def _symmetric_rule(cell, degree, groups):
    pts, wts = [], []
    for coords, w in groups:
        for tup in _perms(coords):
            pts.append(tup)
            wts.append(w)
    ref = 1.0 / 6.0 if cell == "tet" else 0.5
    points = np.array(pts, dtype=float)
    weights = np.array(wts, dtype=float) * ref
    return QuadratureRule(cell, degree, points, weights)


# Keast 4-point rule, degree 2.
_TET_A = 0.585410196624969
_TET_B = 0.138196601125011

# Keast 15-point rule, degree 5 (weights in sum-to-one convention).
_K15_B = 0.7272727272727273
_K15_C = 0.4334498464263357

_TET_RULES = [
    _symmetric_rule("tet", 2, [((_TET_A, _TET_B, _TET_B, _TET_B), 0.25)]),
    _symmetric_rule(
        "tet",
        5,
        [
            ((0.25, 0.25, 0.25, 0.25), 0.1817020685825351),
            ((0.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), 0.0361607142857143),
            ((_K15_B, (1 - _K15_B) / 3, (1 - _K15_B) / 3, (1 - _K15_B) / 3), 0.0698714945161738),
            ((_K15_C, _K15_C, 0.5 - _K15_C, 0.5 - _K15_C), 0.0656948493683187),
        ],
    ),
]

# Strang-Fix / Dunavant triangle rules.
_TRI6_A = 0.816847572980459
_TRI6_B = 0.108103018168070
_TRI7_A = 0.797426985353087
_TRI7_B = 0.470142064105115

_TRI_RULES = [
    _symmetric_rule("tri", 2, [((2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0), 1.0 / 3.0)]),
    _symmetric_rule(
        "tri",
        4,
        [
            ((_TRI6_A, (1 - _TRI6_A) / 2, (1 - _TRI6_A) / 2), 0.109951743655322),
            ((_TRI6_B, (1 - _TRI6_B) / 2, (1 - _TRI6_B) / 2), 0.223381589678011),
        ],
    ),
    _symmetric_rule(
        "tri",
        5,
        [
            ((1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0), 0.225),
            ((_TRI7_A, (1 - _TRI7_A) / 2, (1 - _TRI7_A) / 2), 0.125939180544827),
            ((1 - 2 * _TRI7_B, _TRI7_B, _TRI7_B), 0.132394152788506),
        ],
    ),
]


def tet_rule(degree: int) -> QuadratureRule:
    """Smallest stored tetrahedron rule exact to at least ``degree``."""
    for rule in _TET_RULES:
        if rule.degree >= degree:
            return rule
    raise ValueError(f"no tetrahedron rule of degree {degree}")


def tri_rule(degree: int) -> QuadratureRule:
    """Smallest stored triangle rule exact to at least ``degree``."""
    for rule in _TRI_RULES:
        if rule.degree >= degree:
            return rule
    raise ValueError(f"no triangle rule of degree {degree}")
