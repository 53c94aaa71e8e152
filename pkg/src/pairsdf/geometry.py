"""Analytic signed-distance shapes, point clouds, triangle meshes, OBJ I/O.

Sign convention throughout the package: negative inside, positive outside,
zero on the surface. All evaluation methods are batched: ``q`` may be a
single point of shape ``(3,)`` or a stack of points ``(..., 3)``, and the
result drops the last axis.

Everything here is immutable after construction, so concurrent read-only
evaluation is safe.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class DegenerateInput(ValueError):
    """All points coincide (or otherwise span a zero-size bounding box)."""


class ParseError(ValueError):
    """Malformed mesh file; carries the 1-based offending line number."""

    def __init__(self, message: str, line: int):
        super().__init__(f"line {line}: {message}")
        self.line = line


def _as_points(q) -> np.ndarray:
    q = np.asarray(q, dtype=np.float64)
    if q.shape[-1] != 3:
        raise ValueError(f"expected points with last axis 3, got shape {q.shape}")
    return q


class ScalarField:
    """Evaluation contract: a scalar signed distance for every 3D query."""

    def eval(self, q) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class BoundingCube:
    """Axis-aligned cube [-h, h]^3 centered at the origin."""

    half_extent: float = 0.5

    def __post_init__(self):
        if self.half_extent <= 0:
            raise ValueError("half_extent must be positive")

    @property
    def diagonal(self) -> float:
        return 2.0 * self.half_extent * np.sqrt(3.0)


class AnalyticSdf(ScalarField):
    """Closed-form signed distance shape. Subclasses implement eval()."""

    def eval(self, q) -> np.ndarray:
        raise NotImplementedError


@dataclass(frozen=True)
class Sphere(AnalyticSdf):
    center: tuple = (0.0, 0.0, 0.0)
    radius: float = 0.4

    def eval(self, q) -> np.ndarray:
        q = _as_points(q)
        return np.linalg.norm(q - np.asarray(self.center), axis=-1) - self.radius


@dataclass(frozen=True)
class Box(AnalyticSdf):
    center: tuple = (0.0, 0.0, 0.0)
    half_extents: tuple = (0.3, 0.3, 0.3)

    def eval(self, q) -> np.ndarray:
        q = _as_points(q)
        d = np.abs(q - np.asarray(self.center)) - np.asarray(self.half_extents)
        outside = np.linalg.norm(np.maximum(d, 0.0), axis=-1)
        inside = np.minimum(d.max(axis=-1), 0.0)
        return outside + inside


@dataclass(frozen=True)
class Torus(AnalyticSdf):
    """Torus around the z axis through ``center``."""

    center: tuple = (0.0, 0.0, 0.0)
    major_radius: float = 0.28
    minor_radius: float = 0.13

    def eval(self, q) -> np.ndarray:
        q = _as_points(q) - np.asarray(self.center)
        ring = np.hypot(q[..., 0], q[..., 1]) - self.major_radius
        return np.hypot(ring, q[..., 2]) - self.minor_radius


@dataclass(frozen=True)
class Union(AnalyticSdf):
    """min() of two fields: exact outside overlaps, a lower bound inside."""

    left: AnalyticSdf = field(default_factory=Sphere)
    right: AnalyticSdf = field(default_factory=Sphere)

    def eval(self, q) -> np.ndarray:
        return np.minimum(self.left.eval(q), self.right.eval(q))


@dataclass(frozen=True)
class SmoothUnion(AnalyticSdf):
    """Polynomial smooth-min blend of two fields over a band of width ``blend``."""

    left: AnalyticSdf = field(default_factory=Sphere)
    right: AnalyticSdf = field(default_factory=Sphere)
    blend: float = 0.05

    def eval(self, q) -> np.ndarray:
        a = self.left.eval(q)
        b = self.right.eval(q)
        h = np.clip(0.5 + 0.5 * (b - a) / self.blend, 0.0, 1.0)
        return b * (1.0 - h) + a * h - self.blend * h * (1.0 - h)


def eval_sdf(shape: ScalarField, q) -> np.ndarray:
    """Signed distance of ``q`` under ``shape`` (batched)."""
    return shape.eval(q)


def numerical_gradient(field_: ScalarField, q, step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient, shape ``(..., 3)``. Works for any field."""
    q = _as_points(q)
    grad = np.empty_like(q)
    for axis in range(3):
        offset = np.zeros(3)
        offset[axis] = step
        grad[..., axis] = (field_.eval(q + offset) - field_.eval(q - offset)) / (2 * step)
    return grad


_SHAPES = {
    "sphere": lambda: Sphere(radius=0.4),
    "box": lambda: Box(half_extents=(0.3, 0.3, 0.3)),
    "torus": lambda: Torus(major_radius=0.28, minor_radius=0.13),
    "twin": lambda: Union(
        Sphere(center=(-0.18, 0.0, 0.0), radius=0.22),
        Sphere(center=(0.18, 0.0, 0.0), radius=0.22),
    ),
    "blend": lambda: SmoothUnion(
        Sphere(center=(-0.15, 0.0, 0.0), radius=0.22),
        Sphere(center=(0.15, 0.0, 0.0), radius=0.22),
        blend=0.08,
    ),
}


def shape_by_name(name: str) -> AnalyticSdf:
    """Look up a ground-truth shape by its id (sphere, box, torus, twin, blend)."""
    try:
        return _SHAPES[name]()
    except KeyError:
        raise KeyError(f"unknown shape {name!r}; choices: {sorted(_SHAPES)}") from None


def shape_names() -> list[str]:
    return sorted(_SHAPES)


class PointCloud:
    """Ordered 3D points with optional per-point unit normals.

    ``points`` is an (n, 3) float64 array; ``normals`` is None or an array of
    the same shape. Arrays are copied on construction and frozen.
    """

    def __init__(self, points, normals=None):
        pts = np.array(points, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise ValueError(f"points must be (n, 3), got {pts.shape}")
        self.points = pts
        self.normals: Optional[np.ndarray] = None
        if normals is not None:
            nrm = np.array(normals, dtype=np.float64)
            if nrm.shape != pts.shape:
                raise ValueError("normals must match points shape")
            self.normals = nrm
            self.normals.setflags(write=False)
        self.points.setflags(write=False)

    def __len__(self) -> int:
        return self.points.shape[0]

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """(min corner, max corner) of the axis-aligned bounding box."""
        return self.points.min(axis=0), self.points.max(axis=0)


class TriangleMesh:
    """Indexed triangle mesh with the edge adjacency needed for smoothness scoring.

    Faces must reference valid vertices and contain no repeated index.
    """

    def __init__(self, vertices, faces):
        verts = np.array(vertices, dtype=np.float64).reshape(-1, 3)
        tris = np.array(faces, dtype=np.int64).reshape(-1, 3)
        n = verts.shape[0]
        if tris.size:
            if tris.min() < 0 or tris.max() >= n:
                raise ValueError("face index out of range")
            if (
                (tris[:, 0] == tris[:, 1])
                | (tris[:, 1] == tris[:, 2])
                | (tris[:, 0] == tris[:, 2])
            ).any():
                raise ValueError("degenerate face (repeated vertex index)")
        self.vertices = verts
        self.faces = tris
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)
        self._edges = None

    @property
    def is_empty(self) -> bool:
        return self.faces.shape[0] == 0

    def edge_table(self) -> dict:
        """Undirected edge -> incidence records.

        Key ``(v0, v1)`` with ``v0 < v1``; value is a list of
        ``(face_index, opposite_vertex, forward)`` where ``forward`` is True
        when that face traverses the edge as v0 -> v1 in winding order.
        """
        if self._edges is None:
            edges: dict = {}
            for f_idx, (i, j, k) in enumerate(self.faces):
                for a, b, opp in ((i, j, k), (j, k, i), (k, i, j)):
                    key = (a, b) if a < b else (b, a)
                    edges.setdefault(key, []).append((f_idx, int(opp), a < b))
            self._edges = edges
        return self._edges

    def interior_edges(self) -> dict:
        """Edges with exactly two incident faces."""
        return {e: inc for e, inc in self.edge_table().items() if len(inc) == 2}

    def boundary_edge_count(self) -> int:
        return sum(1 for inc in self.edge_table().values() if len(inc) == 1)

    def is_watertight(self) -> bool:
        if self.is_empty:
            return False
        return all(len(inc) == 2 for inc in self.edge_table().values())

    def face_areas(self) -> np.ndarray:
        v = self.vertices
        f = self.faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        return 0.5 * np.linalg.norm(cross, axis=1)

    def area(self) -> float:
        return float(self.face_areas().sum())

    def face_normals(self) -> np.ndarray:
        """Unit normals per face, following winding order."""
        v = self.vertices
        f = self.faces
        cross = np.cross(v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]])
        norm = np.linalg.norm(cross, axis=1, keepdims=True)
        return cross / np.maximum(norm, 1e-300)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.vertices.min(axis=0), self.vertices.max(axis=0)


@dataclass(frozen=True)
class Transform:
    """Uniform scale followed by translation: p -> scale * p + offset."""

    scale: float
    offset: tuple

    def apply(self, points) -> np.ndarray:
        return self.scale * _as_points(points) + np.asarray(self.offset)


def normalize_to_cube(obj, target: BoundingCube = BoundingCube(0.5)):
    """Center the bounding box at the origin and scale the largest half-dimension
    to ``target.half_extent``. Returns (same-kind object, applied Transform).

    Raises DegenerateInput when all points coincide.
    """
    if isinstance(obj, TriangleMesh):
        pts = obj.vertices
    elif isinstance(obj, PointCloud):
        pts = obj.points
    else:
        pts = _as_points(np.atleast_2d(obj))
    if pts.shape[0] < 1:
        raise DegenerateInput("need at least one point")
    lo = pts.min(axis=0)
    hi = pts.max(axis=0)
    half = (hi - lo) / 2.0
    largest = half.max()
    if largest <= 0.0:
        raise DegenerateInput("all points coincide")
    scale = target.half_extent / largest
    center = (hi + lo) / 2.0
    transform = Transform(scale=float(scale), offset=tuple(-scale * center))
    moved = transform.apply(pts)
    if isinstance(obj, TriangleMesh):
        return TriangleMesh(moved, obj.faces), transform
    if isinstance(obj, PointCloud):
        return PointCloud(moved, obj.normals), transform
    return moved, transform


def save_mesh(mesh: TriangleMesh, path, comment: str | None = None) -> None:
    """Write an ASCII OBJ: ``v x y z`` and ``f i j k`` lines (1-based, triangles)."""
    lines = []
    if comment:
        for part in comment.splitlines():
            lines.append(f"# {part}")
    for x, y, z in mesh.vertices:
        lines.append(f"v {x:.9g} {y:.9g} {z:.9g}")
    for i, j, k in mesh.faces:
        lines.append(f"f {i + 1} {j + 1} {k + 1}")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path) -> TriangleMesh:
    """Read an ASCII OBJ written by save_mesh. Strict: only v/f/comment lines."""
    vertices: list = []
    faces: list = []
    face_lines: list = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if tokens[0] == "v":
                if len(tokens) != 4:
                    raise ParseError("vertex line must be 'v x y z'", lineno)
                try:
                    vertices.append([float(t) for t in tokens[1:]])
                except ValueError:
                    raise ParseError("non-numeric vertex coordinate", lineno) from None
            elif tokens[0] == "f":
                if len(tokens) != 4:
                    raise ParseError("face line must be 'f i j k' (triangles only)", lineno)
                try:
                    idx = [int(t) for t in tokens[1:]]
                except ValueError:
                    raise ParseError("non-integer face index", lineno) from None
                if any(i < 1 for i in idx):
                    raise ParseError("face indices are 1-based and positive", lineno)
                faces.append([i - 1 for i in idx])
                face_lines.append(lineno)
            else:
                raise ParseError(f"unsupported directive {tokens[0]!r}", lineno)
    n = len(vertices)
    for f, lineno in zip(faces, face_lines):
        if any(i >= n for i in f):
            raise ParseError("face references missing vertex", lineno)
    return TriangleMesh(np.array(vertices, dtype=np.float64).reshape(-1, 3), faces)
