"""Iso-surface extraction on a regular grid via the 256-case marching cubes.

Vertices are deduplicated with a global edge key (axis + lattice coordinates
of the edge), so triangles from neighboring cells share vertices exactly and
closed level sets come out watertight. Winding is chosen so face normals
point toward increasing field values (outward, for the signed-distance
convention used in this package).
"""

from __future__ import annotations

from dataclasses import dataclass, field as dataclass_field

import numpy as np

from .geometry import BoundingCube, ScalarField, TriangleMesh
from .mc_tables import CORNER_OFFSETS, EDGE_CORNERS, EDGE_TABLE, TRI_TABLE

# Corner values closer together than this interpolate to the edge midpoint.
_INTERP_GUARD = 1e-12

# Per-edge: (axis, lattice offset of the edge base) derived from corner pairs.
_EDGE_AXIS_BASE = []
for _c0, _c1 in EDGE_CORNERS:
    _o0 = np.array(CORNER_OFFSETS[_c0])
    _o1 = np.array(CORNER_OFFSETS[_c1])
    _axis = int(np.flatnonzero(_o0 != _o1)[0])
    _EDGE_AXIS_BASE.append((_axis, tuple(np.minimum(_o0, _o1))))


@dataclass(frozen=True)
class GridSpec:
    """Sampling lattice for extraction: ``resolution`` cells per axis across
    the bounding cube, at level set ``iso_value``."""

    resolution: int = 64
    cube: BoundingCube = dataclass_field(default_factory=BoundingCube)
    iso_value: float = 0.0

    def __post_init__(self):
        if self.resolution < 2:
            raise ValueError("resolution must be >= 2")

    def axis_coords(self) -> np.ndarray:
        h = self.cube.half_extent
        return np.linspace(-h, h, self.resolution + 1)


def _corner_values(field_: ScalarField, grid: GridSpec) -> np.ndarray:
    coords = grid.axis_coords()
    n = grid.resolution + 1
    xs, ys, zs = np.meshgrid(coords, coords, coords, indexing="ij")
    pts = np.stack([xs.ravel(), ys.ravel(), zs.ravel()], axis=1)
    return field_.eval(pts).reshape(n, n, n) - grid.iso_value


def marching_cubes(field_: ScalarField, grid: GridSpec) -> TriangleMesh:
    """Extract the iso surface of ``field_`` over ``grid``.

    Returns an empty mesh (no vertices, no faces) when the field has no sign
    change anywhere on the lattice; callers treat that as the empty-surface
    flag rather than an error.
    """
    values = _corner_values(field_, grid)
    res = grid.resolution
    coords = grid.axis_coords()

    inside = values < 0.0
    # Case index per cell from the 8 corner signs (vectorized).
    case = np.zeros((res, res, res), dtype=np.uint16)
    for bit, (dx, dy, dz) in enumerate(CORNER_OFFSETS):
        case |= inside[dx : res + dx, dy : res + dy, dz : res + dz].astype(np.uint16) << bit

    edge_mask = np.asarray(EDGE_TABLE, dtype=np.uint16)[case]
    cells = np.argwhere(edge_mask != 0)
    if len(cells) == 0:
        return TriangleMesh(np.empty((0, 3)), np.empty((0, 3), dtype=np.int64))

    vertex_ids: dict = {}
    vertices: list = []
    faces: list = []

    for ci, cj, ck in cells:
        cell_case = int(case[ci, cj, ck])
        crossed = EDGE_TABLE[cell_case]
        cell_vertex: list = [-1] * 12
        for edge in range(12):
            if not crossed & (1 << edge):
                continue
            axis, base = _EDGE_AXIS_BASE[edge]
            key = (axis, ci + base[0], cj + base[1], ck + base[2])
            vid = vertex_ids.get(key)
            if vid is None:
                c0, c1 = EDGE_CORNERS[edge]
                o0 = CORNER_OFFSETS[c0]
                o1 = CORNER_OFFSETS[c1]
                i0 = (ci + o0[0], cj + o0[1], ck + o0[2])
                i1 = (ci + o1[0], cj + o1[1], ck + o1[2])
                v0 = values[i0]
                v1 = values[i1]
                if abs(v1 - v0) < _INTERP_GUARD:
                    t = 0.5
                else:
                    t = v0 / (v0 - v1)
                p0 = np.array([coords[i0[0]], coords[i0[1]], coords[i0[2]]])
                p1 = np.array([coords[i1[0]], coords[i1[1]], coords[i1[2]]])
                vid = len(vertices)
                vertices.append(p0 + t * (p1 - p0))
                vertex_ids[key] = vid
            cell_vertex[edge] = vid
        tri = TRI_TABLE[cell_case]
        for t0, t1, t2 in zip(tri[0::3], tri[1::3], tri[2::3]):
            a, b, c = cell_vertex[t0], cell_vertex[t1], cell_vertex[t2]
            if a == b or b == c or a == c:
                continue
            # Table order winds clockwise seen from outside under our sign
            # convention; emit reversed so normals point toward field > 0.
            faces.append((a, c, b))

    return TriangleMesh(np.array(vertices), np.array(faces, dtype=np.int64))
