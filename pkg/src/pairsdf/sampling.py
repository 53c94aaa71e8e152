"""Surface sampling from analytic shapes and query-batch construction.

Surface samples come from projecting uniform cube candidates onto the zero
level set (Newton iteration on the signed distance), then thinning with
farthest-point subsampling to approximate area uniformity. Query batches
concatenate the two noisy input clouds (near-surface half) with uniform
volume draws (the other half).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import BoundingCube, PointCloud, ScalarField, numerical_gradient
from .rng import substream

NEAR_SURFACE = 0
UNIFORM_VOLUME = 1

_PROJECT_TOL = 1e-6
_PROJECT_MAX_ITERS = 50


class ConvergenceFailure(RuntimeError):
    """Surface projection missed tolerance for more than 1% of candidates."""


@dataclass(frozen=True)
class QueryBatch:
    """Supervision coordinates with per-point provenance tags.

    ``tags[i]`` is NEAR_SURFACE for points copied from the input clouds and
    UNIFORM_VOLUME for cube draws.
    """

    points: np.ndarray
    tags: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]


def project_to_surface(field: ScalarField, candidates: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Newton-project candidates onto the zero set: p <- p - f(p) g / |g|^2.

    Returns (projected points, converged mask). Gradients come from central
    differences so any ScalarField works.
    """
    pts = np.array(candidates, dtype=np.float64)
    active = np.ones(len(pts), dtype=bool)
    for _ in range(_PROJECT_MAX_ITERS):
        values = field.eval(pts[active])
        done = np.abs(values) <= _PROJECT_TOL
        idx = np.flatnonzero(active)
        active[idx[done]] = False
        if not active.any():
            break
        sub = pts[active]
        grad = numerical_gradient(field, sub)
        norm2 = (grad * grad).sum(axis=1)
        norm2 = np.maximum(norm2, 1e-12)
        pts[active] = sub - (field.eval(sub) / norm2)[:, None] * grad
    converged = np.abs(field.eval(pts)) <= _PROJECT_TOL
    return pts, converged


def farthest_point_subsample(points: np.ndarray, n: int) -> np.ndarray:
    """Greedy farthest-point selection of ``n`` rows, starting from row 0."""
    m = len(points)
    if n >= m:
        return np.arange(m)
    chosen = np.empty(n, dtype=np.int64)
    chosen[0] = 0
    dist = np.linalg.norm(points - points[0], axis=1)
    for i in range(1, n):
        nxt = int(dist.argmax())
        chosen[i] = nxt
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    return chosen


def sample_surface(
    shape: ScalarField,
    n: int,
    seed: int,
    cube: BoundingCube = BoundingCube(0.5),
    with_normals: bool = True,
) -> PointCloud:
    """Approximately area-uniform samples of the zero level set.

    Every returned point satisfies |sdf| <= 1e-6. Normals (when requested)
    are normalized central-difference gradients at the samples.

    Raises ConvergenceFailure when more than 1% of projection candidates
    fail to reach tolerance within 50 iterations.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    gen = substream(seed, "surface-candidates")
    h = cube.half_extent
    n_candidates = max(4 * n, 4096)
    candidates = gen.uniform(-h, h, (n_candidates, 3))
    projected, converged = project_to_surface(shape, candidates)
    n_failed = int((~converged).sum())
    if n_failed > 0.01 * n_candidates:
        raise ConvergenceFailure(
            f"{n_failed}/{n_candidates} candidates failed to project to the surface"
        )
    surface = projected[converged]
    if len(surface) < n:
        raise ConvergenceFailure(f"only {len(surface)} converged candidates for n={n}")
    keep = farthest_point_subsample(surface, n)
    pts = surface[keep]
    if not with_normals:
        return PointCloud(pts)
    grad = numerical_gradient(shape, pts)
    norms = np.linalg.norm(grad, axis=1, keepdims=True)
    return PointCloud(pts, grad / np.maximum(norms, 1e-12))


def build_query_batch(
    p1: PointCloud,
    p2: PointCloud,
    n_uniform: int,
    cube: BoundingCube = BoundingCube(0.5),
    seed: int = 0,
) -> QueryBatch:
    """Near-surface queries = p1 then p2 verbatim; plus uniform cube draws."""
    if len(p1) == 0 or len(p2) == 0:
        raise ValueError("input clouds must be non-empty")
    near = np.concatenate([p1.points, p2.points], axis=0)
    if n_uniform > 0:
        gen = substream(seed, "uniform-queries")
        h = cube.half_extent
        volume = gen.uniform(-h, h, (n_uniform, 3))
        points = np.concatenate([near, volume], axis=0)
    else:
        points = near
    tags = np.full(len(points), UNIFORM_VOLUME, dtype=np.uint8)
    tags[: len(near)] = NEAR_SURFACE
    return QueryBatch(points=points, tags=tags)


def save_xyz(cloud: PointCloud, path) -> None:
    """One ``x y z`` line per point, 9 significant digits."""
    with open(path, "w") as fh:
        for x, y, z in cloud.points:
            fh.write(f"{x:.9g} {y:.9g} {z:.9g}\n")


def load_xyz(path) -> PointCloud:
    """Read an XYZ cloud; blank lines and ``#`` comments are skipped."""
    rows = []
    with open(path) as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ValueError(f"expected 3 columns, got {len(parts)}: {line!r}")
            rows.append([float(p) for p in parts])
    return PointCloud(np.array(rows, dtype=np.float64).reshape(-1, 3))
