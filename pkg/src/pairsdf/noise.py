"""Corruption laws for generating independent noisy observations of a cloud.

Each law perturbs every coordinate of every point independently. All laws are
parameterized so that their standard deviation equals ``sigma``, which keeps
results comparable across laws at the same noise level:

- gaussian: N(mu, sigma^2)
- uniform:  U(-sigma*sqrt(3), +sigma*sqrt(3))
- discrete: one of {-sigma*sqrt(1.5), 0, +sigma*sqrt(1.5)}, equal probability
- laplace:  Laplace(0, sigma/sqrt(2))

Only the gaussian law takes a nonzero mean (the bias ablation); the others
are zero-mean by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import PointCloud
from .rng import substream

LAWS = ("gaussian", "uniform", "discrete", "laplace")


@dataclass(frozen=True)
class NoiseSpec:
    law: str = "gaussian"
    sigma: float = 0.01
    mu: float = 0.0

    def __post_init__(self):
        if self.law not in LAWS:
            raise ValueError(f"unknown noise law {self.law!r}; choices: {LAWS}")
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.mu != 0.0 and self.law != "gaussian":
            raise ValueError("nonzero mu is only defined for the gaussian law")


def draw_offsets(spec: NoiseSpec, shape: tuple, gen: np.random.Generator) -> np.ndarray:
    """Per-coordinate noise draws of the given array shape."""
    if spec.law == "gaussian":
        return spec.mu + spec.sigma * gen.standard_normal(shape)
    if spec.law == "uniform":
        half = spec.sigma * np.sqrt(3.0)
        return gen.uniform(-half, half, shape)
    if spec.law == "discrete":
        # 3-point law {-s, 0, +s} with s = sigma*sqrt(3/2) has std exactly sigma.
        step = spec.sigma * np.sqrt(1.5)
        return (gen.integers(0, 3, shape).astype(np.float64) - 1.0) * step
    if spec.law == "laplace":
        return gen.laplace(0.0, spec.sigma / np.sqrt(2.0), shape)
    raise AssertionError(spec.law)


def corrupt(cloud: PointCloud, spec: NoiseSpec, seed: int) -> PointCloud:
    """One noisy observation of ``cloud``; deterministic in (cloud, spec, seed).

    Cardinality and ordering are preserved; normals are dropped because they
    no longer describe the perturbed points.
    """
    if len(cloud) == 0:
        raise ValueError("cloud must be non-empty")
    gen = substream(seed, "corrupt")
    if spec.sigma == 0.0 and spec.mu == 0.0:
        return PointCloud(cloud.points)
    return PointCloud(cloud.points + draw_offsets(spec, cloud.points.shape, gen))


def make_pair(cloud: PointCloud, spec: NoiseSpec, seed: int) -> tuple[PointCloud, PointCloud]:
    """Two independently corrupted observations of ``cloud``.

    The two members draw from decorrelated substreams hashed from
    (seed, member index), so their noise fields are independent.
    """
    if len(cloud) == 0:
        raise ValueError("cloud must be non-empty")
    members = []
    for member in (0, 1):
        gen = substream(seed, "pair", member)
        if spec.sigma == 0.0 and spec.mu == 0.0:
            members.append(PointCloud(cloud.points))
        else:
            members.append(PointCloud(cloud.points + draw_offsets(spec, cloud.points.shape, gen)))
    return members[0], members[1]
