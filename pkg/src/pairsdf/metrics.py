"""Reconstruction quality metrics for point sets, meshes, and fields.

Point-set metrics (chamfer, f_score, normal_consistency) accelerate the
nearest-neighbor search with a k-d tree but recompute the final distances
from the matched indices with plain vectorized arithmetic, so results are
bit-identical to an O(n^2) brute-force evaluation.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .geometry import BoundingCube, PointCloud, ScalarField, TriangleMesh
from .rng import substream


class EmptySet(ValueError):
    """A point-set metric needs at least one point per side."""


class MissingNormals(ValueError):
    """normal_consistency requires unit normals on both clouds."""


class NoInteriorEdges(ValueError):
    """Mesh smoothness needs at least one edge with two incident faces."""


class ZeroArea(ValueError):
    """Cannot sample a mesh whose total face area is zero."""


@dataclass
class MetricsReport:
    """Named scalar results plus run provenance."""

    chamfer: float
    f_score: float
    tau: float
    nc: Optional[float]
    mnc: Optional[float]
    iou: Optional[float]
    n_samples: int
    seed: int
    config_hash: str = ""
    mnc_boundary_edges: int = 0

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls(**json.loads(text))


def _points_of(obj) -> np.ndarray:
    pts = obj.points if isinstance(obj, PointCloud) else np.asarray(obj, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3 or len(pts) == 0:
        raise EmptySet("need a non-empty (n, 3) point set")
    return pts


def nearest_distances(p: np.ndarray, q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(indices into q, exact distances) of each p's nearest neighbor in q."""
    _, idx = cKDTree(q).query(p)
    diff = p - q[idx]
    return idx, np.sqrt((diff * diff).sum(axis=1))


def chamfer(p_set, q_set) -> float:
    """Symmetric mean nearest-neighbor Euclidean distance (unsquared, summed
    over both directions)."""
    p = _points_of(p_set)
    q = _points_of(q_set)
    _, d_pq = nearest_distances(p, q)
    _, d_qp = nearest_distances(q, p)
    return float(np.mean(d_pq) + np.mean(d_qp))


def f_score(p_set, q_set, tau: float = 0.02) -> float:
    """Harmonic mean of precision/recall at distance threshold tau."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    p = _points_of(p_set)
    q = _points_of(q_set)
    _, d_pq = nearest_distances(p, q)
    _, d_qp = nearest_distances(q, p)
    precision = float(np.mean(d_pq <= tau))
    recall = float(np.mean(d_qp <= tau))
    if precision + recall == 0.0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


def normal_consistency(p_cloud: PointCloud, q_cloud: PointCloud) -> float:
    """Mean absolute cosine between nearest-neighbor-matched normals,
    averaged over both matching directions."""
    if p_cloud.normals is None or q_cloud.normals is None:
        raise MissingNormals("both clouds need normals")
    p = _points_of(p_cloud)
    q = _points_of(q_cloud)
    idx_pq, _ = nearest_distances(p, q)
    idx_qp, _ = nearest_distances(q, p)
    forward = np.abs(np.einsum("ij,ij->i", p_cloud.normals, q_cloud.normals[idx_pq])).mean()
    backward = np.abs(np.einsum("ij,ij->i", q_cloud.normals, p_cloud.normals[idx_qp])).mean()
    return float((forward + backward) / 2.0)


def mesh_normal_consistency(mesh: TriangleMesh) -> float:
    """Per-edge smoothness in [0, 2]: one minus the cosine between the
    unnormalized cross products of the two faces meeting at each interior
    edge, averaged. Boundary edges are skipped."""
    value, _ = mesh_normal_consistency_detail(mesh)
    return value


def mesh_normal_consistency_detail(mesh: TriangleMesh) -> tuple[float, int]:
    """(score, number of skipped boundary edges)."""
    interior = mesh.interior_edges()
    if not interior:
        raise NoInteriorEdges("mesh has no edge with exactly two incident faces")
    v = mesh.vertices
    total = 0.0
    for (i0, i1), incidence in interior.items():
        # a is the opposite vertex of the face traversing i0 -> i1; b the other.
        if incidence[0][2]:
            a_idx, b_idx = incidence[0][1], incidence[1][1]
        else:
            a_idx, b_idx = incidence[1][1], incidence[0][1]
        v0, v1, a, b = v[i0], v[i1], v[a_idx], v[b_idx]
        cross_a = np.cross(v1 - v0, a - v0)
        cross_b = np.cross(b - v0, v1 - v0)
        denom = np.linalg.norm(cross_a) * np.linalg.norm(cross_b)
        if denom == 0.0:
            continue
        total += 1.0 - float(cross_a @ cross_b) / denom
    return total / len(interior), mesh.boundary_edge_count()


def iou(
    field_a: ScalarField,
    field_b: ScalarField,
    n_samples: int = 10_000,
    cube: BoundingCube = BoundingCube(0.5),
    seed: int = 0,
) -> float:
    """Volumetric intersection-over-union of the inside regions (field < 0),
    estimated from uniform cube samples. Returns 1.0 when both are empty."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    gen = substream(seed, "iou-samples")
    h = cube.half_extent
    pts = gen.uniform(-h, h, (n_samples, 3))
    inside_a = field_a.eval(pts) < 0.0
    inside_b = field_b.eval(pts) < 0.0
    union = np.logical_or(inside_a, inside_b).sum()
    if union == 0:
        return 1.0
    return float(np.logical_and(inside_a, inside_b).sum() / union)


def sample_mesh_surface(mesh: TriangleMesh, n: int, seed: int) -> PointCloud:
    """Area-weighted surface samples with face normals attached."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if mesh.is_empty:
        raise ZeroArea("mesh has no faces")
    areas = mesh.face_areas()
    total = areas.sum()
    if total <= 0.0:
        raise ZeroArea("mesh has zero total area")
    gen = substream(seed, "mesh-samples")
    face_idx = gen.choice(len(areas), size=n, p=areas / total)
    u = gen.random(n)
    w = gen.random(n)
    flip = u + w > 1.0
    u[flip] = 1.0 - u[flip]
    w[flip] = 1.0 - w[flip]
    tri = mesh.vertices[mesh.faces[face_idx]]  # (n, 3, 3)
    pts = tri[:, 0] + u[:, None] * (tri[:, 1] - tri[:, 0]) + w[:, None] * (tri[:, 2] - tri[:, 0])
    normals = mesh.face_normals()[face_idx]
    return PointCloud(pts, normals)
