"""Tetrahedral meshes of the benchmark prism domains.

The domains are convex prisms O_w = B_w x (0,1) where B_w is the quadrilateral
with vertices (0,0), (1,0), (1,1), (cot w, 1) and interior angle w at the
origin, w in [pi/2, pi).  The vertical edge above the origin (r = 0) is where
the solutions of the control problem lose regularity; the critical exponent is
lam = pi/w in (1, 2].

Level 0 is the coarsest extruded triangulation (2 base triangles x 1 layer x
3 tets).  Refinement is red (8 children per tet, edge midpoints); prisms are
split with diagonals chosen by global vertex index so that neighbouring prisms
conform.  Meshes are immutable after construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "HalfSpaceDomain",
    "Mesh",
    "benchmark_domain",
    "build_prism_mesh",
    "refine_uniform",
    "perturb_interior",
    "distance_to_boundary",
    "mesh_size",
    "max_edge_length",
    "shape_regularity",
    "domain_volume",
    "write_vtk",
]


@dataclass(frozen=True)
class HalfSpaceDomain:
    """Convex domain {x : normals[i] . x <= offsets[i] for all i}.

    normals are unit vectors; omega is the interior edge angle at the origin
    edge {x1 = x2 = 0}; lam = pi/omega is the critical regularity exponent.
    """

    normals: np.ndarray
    offsets: np.ndarray
    omega: float
    lam: float

    def __post_init__(self):
        normals = np.atleast_2d(np.asarray(self.normals, dtype=float))
        offsets = np.asarray(self.offsets, dtype=float).ravel()
        object.__setattr__(self, "normals", normals)
        object.__setattr__(self, "offsets", offsets)
        if normals.shape[0] != offsets.shape[0] or normals.shape[1] != 3:
            raise ValueError("normals must be (k,3) with matching offsets")
        lengths = np.linalg.norm(normals, axis=1)
        if not np.allclose(lengths, 1.0, rtol=0, atol=1e-12):
            raise ValueError("half-space normals must have unit length")
        if not (math.pi / 2 - 1e-12 <= self.omega < math.pi):
            raise ValueError(f"omega = {self.omega} outside [pi/2, pi)")
        if abs(self.lam - math.pi / self.omega) > 1e-12:
            raise ValueError("lam must equal pi/omega")
        # the singular edge {r=0} x (0,1) must lie in exactly two face planes
        on_edge = (np.abs(offsets) <= 1e-12) & (np.abs(normals[:, 2]) <= 1e-12)
        if int(np.count_nonzero(on_edge)) != 2:
            raise ValueError("origin edge must lie in exactly two half-space planes")
        normals.setflags(write=False)
        offsets.setflags(write=False)


def benchmark_domain(omega: float) -> HalfSpaceDomain:
    """Prism domain O_w with base (0,0), (1,0), (1,1), (cot w, 1) and height 1."""
    if not (math.pi / 2 - 1e-12 <= omega < math.pi):
        raise ValueError(f"omega = {omega} outside [pi/2, pi)")
    s, c = math.sin(omega), math.cos(omega)
    normals = np.array(
        [
            [0.0, -1.0, 0.0],   # x2 >= 0 (contains the singular edge)
            [-s, c, 0.0],       # wedge plane at angle omega (contains the edge)
            [1.0, 0.0, 0.0],    # x1 <= 1
            [0.0, 1.0, 0.0],    # x2 <= 1
            [0.0, 0.0, -1.0],   # x3 >= 0
            [0.0, 0.0, 1.0],    # x3 <= 1
        ]
    )
    offsets = np.array([0.0, 0.0, 1.0, 1.0, 0.0, 1.0])
    return HalfSpaceDomain(normals, offsets, float(omega), math.pi / omega)


def domain_volume(domain: HalfSpaceDomain) -> float:
    """Analytic volume of the benchmark prism (shoelace area of the base x 1)."""
    cot = math.cos(domain.omega) / math.sin(domain.omega)
    return (2.0 - cot) / 2.0


@dataclass(frozen=True)
class Mesh:
    """Conforming tetrahedral mesh; arrays are locked after construction.

    boundary_faces[i] is a vertex triple lying on the domain plane
    boundary_face_ids[i] (index into domain.normals).  h is the longest edge.
    """

    domain: HalfSpaceDomain
    vertices: np.ndarray
    tets: np.ndarray
    boundary_faces: np.ndarray
    boundary_face_ids: np.ndarray
    boundary_vertex_flags: np.ndarray
    level: int
    h: float
    level0_min_quality: float = field(repr=False, default=0.0)

    def __post_init__(self):
        for name in ("vertices", "tets", "boundary_faces", "boundary_face_ids",
                     "boundary_vertex_flags"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_tets(self) -> int:
        return self.tets.shape[0]


def _signed_volumes(vertices, tets):
    v = vertices[tets]
    d = v[:, 1:] - v[:, :1]
    return np.linalg.det(d) / 6.0


def _fix_orientation(vertices, tets):
    vol = _signed_volumes(vertices, tets)
    flip = vol < 0
    if np.any(flip):
        tets = tets.copy()
        tets[flip, 2], tets[flip, 3] = tets[flip, 3].copy(), tets[flip, 2].copy()
    if np.any(_signed_volumes(vertices, tets) <= 0):
        raise ValueError("degenerate tetrahedron (zero volume)")
    return tets


def max_edge_length(vertices, tets) -> float:
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    v = vertices[tets]
    best = 0.0
    for i, j in pairs:
        e = np.linalg.norm(v[:, i] - v[:, j], axis=1)
        best = max(best, float(e.max()))
    return best


def mesh_size(mesh: Mesh) -> float:
    """Longest edge over all tets."""
    return max_edge_length(mesh.vertices, mesh.tets)


def _tet_qualities(vertices, tets):
    """inradius / longest edge per tet (shape regularity measure)."""
    v = vertices[tets]
    vol = _signed_volumes(vertices, tets)
    # face areas opposite each vertex
    areas = np.zeros((tets.shape[0], 4))
    for k, (i, j, l) in enumerate([(1, 2, 3), (0, 2, 3), (0, 1, 3), (0, 1, 2)]):
        cr = np.cross(v[:, j] - v[:, i], v[:, l] - v[:, i])
        areas[:, k] = 0.5 * np.linalg.norm(cr, axis=1)
    inradius = 3.0 * vol / areas.sum(axis=1)
    longest = np.zeros(tets.shape[0])
    for i, j in [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]:
        np.maximum(longest, np.linalg.norm(v[:, i] - v[:, j], axis=1), out=longest)
    return inradius / longest


def shape_regularity(mesh: Mesh) -> float:
    """min over tets of inradius/diameter."""
    return float(_tet_qualities(mesh.vertices, mesh.tets).min())


def _boundary_faces(vertices, tets, domain):
    faces = np.concatenate(
        [tets[:, [1, 2, 3]], tets[:, [0, 2, 3]], tets[:, [0, 1, 3]], tets[:, [0, 1, 2]]]
    )
    faces = np.sort(faces, axis=1)
    uniq, counts = np.unique(faces, axis=0, return_counts=True)
    bfaces = uniq[counts == 1]
    if np.any(counts > 2):
        raise ValueError("non-conforming mesh: face shared by more than two tets")
    # match each boundary face to the unique domain plane containing it
    coords = vertices[bfaces]                       # (k, 3, 3)
    res = np.einsum("kvd,pd->kvp", coords, domain.normals) - domain.offsets
    worst = np.abs(res).max(axis=1)                 # (k, planes)
    ids = np.argmin(worst, axis=1)
    if np.any(worst[np.arange(len(ids)), ids] > 1e-9):
        raise ValueError("boundary face not contained in any domain plane")
    flags = np.zeros(vertices.shape[0], dtype=bool)
    flags[bfaces.ravel()] = True
    return bfaces, ids.astype(np.int64), flags


def _make_mesh(domain, vertices, tets, level, level0_min_quality=None):
    tets = _fix_orientation(vertices, tets)
    bfaces, ids, flags = _boundary_faces(vertices, tets, domain)
    h = max_edge_length(vertices, tets)
    if level0_min_quality is None:
        level0_min_quality = float(_tet_qualities(vertices, tets).min())
    return Mesh(domain, vertices, tets, bfaces, ids, flags, level, h,
                level0_min_quality)


def build_prism_mesh(domain: HalfSpaceDomain, level: int) -> Mesh:
    """Mesh O_w by extruding the 2-triangle base split, then refine `level` times.

    The base is split by the diagonal (0,0)-(1,1); each prism becomes 3 tets
    with quad-face diagonals fixed by sorted global vertex indices, which makes
    neighbouring prisms conform.
    """
    if level < 0:
        raise ValueError("level must be >= 0")
    omega = domain.omega
    x4 = math.cos(omega) / math.sin(omega)
    base = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [x4, 1.0]])
    vertices = np.zeros((8, 3))
    vertices[:4, :2] = base
    vertices[4:, :2] = base
    vertices[4:, 2] = 1.0

    tets = []
    for tri in ((0, 1, 2), (0, 2, 3)):
        b = np.sort(np.array(tri))
        t = b + 4
        tets.append((b[0], b[1], b[2], t[0]))
        tets.append((b[1], b[2], t[0], t[1]))
        tets.append((b[2], t[0], t[1], t[2]))
    mesh = _make_mesh(domain, vertices, np.array(tets, dtype=np.int64), 0)
    for _ in range(level):
        mesh = refine_uniform(mesh)
    return mesh


# children around the chosen octahedron diagonal: equator cycles per diagonal,
# local midpoint numbering m[k] = midpoint of edge _EDGES[k]
_EDGES = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
_DIAGONALS = [
    ((1, 4), (0, 2, 5, 3)),   # m02-m13, equator m01 m03 m23 m12
    ((0, 5), (1, 2, 4, 3)),   # m01-m23, equator m02 m03 m13 m12
    ((2, 3), (0, 1, 5, 4)),   # m03-m12, equator m01 m02 m23 m13
]


def refine_uniform(mesh: Mesh) -> Mesh:
    """Red refinement: each tet splits into 8 via edge midpoints.

    Corner children are fixed; the interior octahedron is split around its
    shortest diagonal (deterministic tie rule), which keeps the refined family
    shape regular.
    """
    vertices = mesh.vertices
    tets = mesh.tets
    nv = vertices.shape[0]

    edges = np.concatenate([tets[:, list(e)] for e in _EDGES])
    edges = np.sort(edges, axis=1)
    uniq, inverse = np.unique(edges, axis=0, return_inverse=True)
    midpoints = 0.5 * (vertices[uniq[:, 0]] + vertices[uniq[:, 1]])
    new_vertices = np.vstack([vertices, midpoints])
    # m[k, t] = global index of midpoint of local edge k in tet t
    m = (nv + inverse).reshape(6, tets.shape[0])

    x = [tets[:, i] for i in range(4)]
    children = [
        np.column_stack([x[0], m[0], m[1], m[2]]),
        np.column_stack([x[1], m[0], m[3], m[4]]),
        np.column_stack([x[2], m[1], m[3], m[5]]),
        np.column_stack([x[3], m[2], m[4], m[5]]),
    ]
    # octahedron: pick the shortest of the three diagonals per tet
    dlen = np.stack(
        [np.linalg.norm(new_vertices[m[a]] - new_vertices[m[b]], axis=1)
         for (a, b), _ in _DIAGONALS]
    )
    choice = np.argmin(dlen, axis=0)    # first minimum wins: deterministic
    for c, ((a, b), eq) in enumerate(_DIAGONALS):
        sel = choice == c
        if not np.any(sel):
            continue
        for k in range(4):
            e1, e2 = eq[k], eq[(k + 1) % 4]
            children.append(
                np.column_stack([m[a][sel], m[b][sel], m[e1][sel], m[e2][sel]])
            )
    new_tets = np.vstack(children)
    return _make_mesh(mesh.domain, new_vertices, new_tets, mesh.level + 1,
                      mesh.level0_min_quality)


def _vertex_incidence(tets, n_vertices):
    order = np.argsort(tets.ravel(), kind="stable")
    tet_of = order // 4
    counts = np.bincount(tets.ravel(), minlength=n_vertices)
    offsets = np.concatenate([[0], np.cumsum(counts)])
    return tet_of, offsets


def _min_incident_edge(vertices, tets, n_vertices):
    lmin = np.full(n_vertices, np.inf)
    for i, j in _EDGES:
        a, b = tets[:, i], tets[:, j]
        ln = np.linalg.norm(vertices[a] - vertices[b], axis=1)
        np.minimum.at(lmin, a, ln)
        np.minimum.at(lmin, b, ln)
    return lmin


def perturb_interior(mesh: Mesh, sigma: float, seed: int) -> Mesh:
    """Displace interior vertices by deterministic pseudo-random vectors.

    Each interior vertex moves by at most sigma times its min incident edge
    length; the generator is Philox keyed by (seed, vertex index), so results
    are reproducible and independent of iteration order.  Displacements are
    halved until all incident tets keep positive volume and acceptable shape.
    """
    if not 0.0 <= sigma <= 0.3:
        raise ValueError("sigma must lie in [0, 0.3]")
    if sigma == 0.0:
        return mesh
    vertices = mesh.vertices.copy()
    tets = mesh.tets
    n = mesh.n_vertices
    lmin = _min_incident_edge(vertices, tets, n)
    tet_of, offsets = _vertex_incidence(tets, n)
    quality_floor = 0.25 * mesh.level0_min_quality
    key_hi = np.uint64(seed % (2**64))

    interior = np.nonzero(~mesh.boundary_vertex_flags)[0]
    for i in interior:
        gen = np.random.Generator(
            np.random.Philox(key=np.array([key_hi, np.uint64(i)], dtype=np.uint64))
        )
        d = sigma * lmin[i] * gen.uniform(-1.0, 1.0, size=3) / math.sqrt(3.0)
        incident = tet_of[offsets[i]:offsets[i + 1]]
        local = tets[incident]
        orig = vertices[i].copy()
        for _ in range(60):
            vertices[i] = orig + d
            vol = _signed_volumes(vertices, local)
            if np.all(vol > 0) and _tet_qualities(vertices, local).min() >= quality_floor:
                break
            d *= 0.5
        else:
            vertices[i] = orig
    return _make_mesh(mesh.domain, vertices, tets.copy(), mesh.level,
                      mesh.level0_min_quality)


def distance_to_boundary(domain: HalfSpaceDomain, x) -> np.ndarray | float:
    """min_i (b_i - a_i . x); exact dist(x, dO) for convex half-space intersections."""
    x = np.asarray(x, dtype=float)
    d = domain.offsets - x @ domain.normals.T
    dist = d.min(axis=-1)
    if np.any(dist < -1e-12):
        raise ValueError("point outside the closed domain")
    return dist if dist.ndim else float(dist)


def write_vtk(mesh: Mesh, path, point_data: dict[str, np.ndarray] | None = None):
    """Legacy ASCII VTK export (UNSTRUCTURED_GRID, cell type 10)."""
    lines = [
        "# vtk DataFile Version 3.0",
        f"tetrahedral mesh level {mesh.level}",
        "ASCII",
        "DATASET UNSTRUCTURED_GRID",
        f"POINTS {mesh.n_vertices} double",
    ]
    lines += [" ".join(f"{c:.16g}" for c in v) for v in mesh.vertices]
    lines.append(f"CELLS {mesh.n_tets} {5 * mesh.n_tets}")
    lines += ["4 " + " ".join(str(int(i)) for i in t) for t in mesh.tets]
    lines.append(f"CELL_TYPES {mesh.n_tets}")
    lines += ["10"] * mesh.n_tets
    if point_data:
        lines.append(f"POINT_DATA {mesh.n_vertices}")
        for name, values in point_data.items():
            lines.append(f"SCALARS {name} double 1")
            lines.append("LOOKUP_TABLE default")
            lines += [f"{float(v):.16g}" for v in values]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
