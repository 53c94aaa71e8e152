"""Frozen point-to-SDF estimator: k-NN PCA plane signed distance.

Given a (noisy) point cloud, the estimator answers signed-distance queries
by fitting a plane to the k nearest cloud points (normal = least-variance
principal direction), orienting the normal away from the cloud centroid,
and returning the signed offset of the query from that plane. It has no
learned parameters and is immutable after construction, so its outputs are
a fixed deterministic function of the cloud.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .geometry import PointCloud

# Relative eigenvalue threshold below which a principal direction counts as
# collapsed when deciding PCA rank.
_RANK_EPS = 1e-12


class TooFewPoints(ValueError):
    """Cloud smaller than the requested neighborhood."""


class NearestPlaneSdf:
    """Deterministic signed distance to local PCA planes of a fixed cloud.

    ``clamp`` bounds |value| (default: the diagonal of the unit-normalization
    cube) so far-field outliers cannot dominate a squared-error loss.
    """

    def __init__(self, cloud: PointCloud, k: int = 16, clamp: float = float(2.0 * 0.5 * np.sqrt(3.0))):
        if k < 3:
            raise TooFewPoints("k must be >= 3")
        if len(cloud) < k:
            raise TooFewPoints(f"cloud has {len(cloud)} points, need at least k={k}")
        self.cloud = cloud
        self.k = int(k)
        self.clamp = float(clamp)
        self.anchor = cloud.points.mean(axis=0)
        self._tree = cKDTree(cloud.points)

    def eval(self, q) -> np.ndarray:
        """Signed plane distance at q (batched)."""
        q = np.asarray(q, dtype=np.float64)
        lead = q.shape[:-1]
        pts = q.reshape(-1, 3)
        dist, idx = self._tree.query(pts, k=self.k)
        dist = dist.reshape(len(pts), self.k)
        idx = idx.reshape(len(pts), self.k)
        # Equal distances are tied in ascending point-index order.
        order = np.lexsort((idx, dist), axis=1)
        idx = np.take_along_axis(idx, order, axis=1)

        nbrs = self.cloud.points[idx]  # (m, k, 3)
        centroid = nbrs.mean(axis=1)
        centered = nbrs - centroid[:, None, :]
        cov = np.einsum("mki,mkj->mij", centered, centered) / self.k
        eigvals, eigvecs = np.linalg.eigh(cov)  # ascending eigenvalues
        normal = eigvecs[:, :, 0]

        # Orient away from the cloud centroid; break exact ties by forcing a
        # positive dominant component so eigenvector sign is canonical.
        toward = centroid - self.anchor
        side = np.einsum("mi,mi->m", toward, normal)
        flip = side < 0.0
        normal[flip] = -normal[flip]
        undecided = side == 0.0
        if undecided.any():
            sub = normal[undecided]
            dom = np.abs(sub).argmax(axis=1)
            sign = sub[np.arange(len(sub)), dom]
            normal[undecided] = sub * np.where(sign < 0.0, -1.0, 1.0)[:, None]

        values = np.einsum("mi,mi->m", pts - centroid, normal)

        # Degenerate neighborhoods (PCA rank < 2): unsigned nearest-point
        # distance, signed by comparing anchor distances along the query ray.
        scale = np.maximum(eigvals[:, 2], _RANK_EPS)
        rank2 = eigvals[:, 1] > _RANK_EPS * scale
        if not rank2.all():
            bad = ~rank2
            nn = self.cloud.points[idx[bad, 0]]
            base = np.linalg.norm(pts[bad] - nn, axis=1)
            outside = np.linalg.norm(pts[bad] - self.anchor, axis=1) > np.linalg.norm(
                nn - self.anchor, axis=1
            )
            values[bad] = np.where(outside, base, -base)

        values = np.clip(values, -self.clamp, self.clamp)
        return values.reshape(lead)


def build_target(cloud: PointCloud, k: int = 16, clamp: float | None = None) -> NearestPlaneSdf:
    """Construct the frozen estimator over ``cloud`` with neighborhood size k."""
    if clamp is None:
        return NearestPlaneSdf(cloud, k=k)
    return NearestPlaneSdf(cloud, k=k, clamp=clamp)


def eval_target(estimator: NearestPlaneSdf, q) -> np.ndarray:
    """Signed distance from the frozen estimator (batched)."""
    return estimator.eval(q)
