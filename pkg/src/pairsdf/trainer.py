"""Training loops: paired-noisy supervision plus the two reference baselines.

Supervision modes
-----------------
paired_noisy   queries come from both noisy clouds; targets from the frozen
               plane estimator built on the second cloud. Fresh pairs are
               drawn every iteration, and the estimator's error is
               approximately zero-mean, so the squared-error fit converges
               toward the clean field even though every target is noisy.
clean_oracle   same queries, targets from the analytic ground-truth field
               (upper reference).
single_noisy   overfits a single frozen noisy observation: the first noisy
               cloud supplies both the near-surface queries (duplicated to
               keep the query budget identical) and the target estimator for
               the whole run. This is the no-pairing lower reference; the
               field converges to one noisy surface estimate instead of an
               average over many.

All randomness is derived from the run seed; two runs with the same config
produce identical records and parameters.
"""

from __future__ import annotations

import json
import time
from dataclasses import dataclass, field as dataclass_field, replace

import numpy as np

from .field import AdamWState, NeuralSdf, TrainingDiverged, adamw_step
from .geometry import AnalyticSdf, BoundingCube, PointCloud, shape_by_name
from .noise import NoiseSpec, make_pair
from .rng import derive_key, substream
from .sampling import build_query_batch, sample_surface
from .target import build_target

MODES = ("paired_noisy", "clean_oracle", "single_noisy")

HOLDOUT_UNIFORM = 8192
HOLDOUT_SURFACE = 2048


@dataclass(frozen=True)
class TrainConfig:
    shape: str = "sphere"
    noise: NoiseSpec = dataclass_field(default_factory=NoiseSpec)
    mode: str = "paired_noisy"
    n_points: int = 2048
    n_uniform_queries: int = 4096
    epochs: int = 10
    pairs_per_epoch: int = 4
    batch_size: int = 512
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    target_k: int = 8
    half_extent: float = 0.5
    encoding_levels: int = 6
    hidden_layers: tuple = (128, 128, 128, 128)
    seed: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}; choices: {MODES}")
        for name in ("n_points", "n_uniform_queries", "epochs", "pairs_per_epoch", "batch_size"):
            if getattr(self, name) < (0 if name == "epochs" else 1):
                raise ValueError(f"{name} must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")

    @property
    def cube(self) -> BoundingCube:
        return BoundingCube(self.half_extent)


@dataclass
class TrainRecord:
    """Per-epoch training statistics plus the checkpoint reference."""

    losses: list = dataclass_field(default_factory=list)
    holdout_mse: list = dataclass_field(default_factory=list)
    wall_times: list = dataclass_field(default_factory=list)
    total_steps: int = 0
    checkpoint: str = ""

    def append_epoch(self, loss: float, mse: float, seconds: float) -> None:
        self.losses.append(loss)
        self.holdout_mse.append(mse)
        self.wall_times.append(seconds)

    def epoch_rows(self) -> list[dict]:
        return [
            {"epoch": i, "loss": l, "holdout_mse": m, "wall_time": w}
            for i, (l, m, w) in enumerate(zip(self.losses, self.holdout_mse, self.wall_times))
        ]

    def to_jsonl(self, path, meta: dict | None = None) -> None:
        """One epoch per line; an optional meta line comes first.

        Wall times are measurements, not derived data, so byte-identical
        reruns are only guaranteed for the loss and mse fields.
        """
        with open(path, "w") as fh:
            if meta:
                fh.write(json.dumps({"meta": meta}, sort_keys=True) + "\n")
            for row in self.epoch_rows():
                fh.write(json.dumps(row, sort_keys=True) + "\n")


def build_holdout(shape: AnalyticSdf, cfg: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Fixed evaluation set: uniform cube points plus clean surface points,
    from reserved substreams never touched by training."""
    gen = substream(cfg.seed, "holdout-uniform")
    h = cfg.half_extent
    uniform = gen.uniform(-h, h, (HOLDOUT_UNIFORM, 3))
    surface = sample_surface(
        shape, HOLDOUT_SURFACE, derive_key(cfg.seed, "holdout-surface"), cfg.cube, with_normals=False
    ).points
    points = np.concatenate([uniform, surface], axis=0)
    return points, shape.eval(points)


class _SingleCloudState:
    """Frozen first observation and its estimator for single_noisy runs."""

    def __init__(self, clean_cloud: PointCloud, cfg: TrainConfig, swap_pair: bool):
        pair_seed = derive_key(cfg.seed, "pair", 0, 0)
        p1, p2 = make_pair(clean_cloud, cfg.noise, pair_seed)
        self.cloud = p2 if swap_pair else p1
        self.estimator = build_target(self.cloud, k=cfg.target_k)


def train_epoch(
    field_: NeuralSdf,
    opt: AdamWState,
    clean_cloud: PointCloud,
    shape: AnalyticSdf,
    cfg: TrainConfig,
    epoch: int,
    swap_pair: bool = False,
    single_state: "_SingleCloudState | None" = None,
) -> dict:
    """Run one epoch in place; returns {'loss': mean step loss, 'steps': n}."""
    if cfg.mode == "single_noisy" and single_state is None:
        single_state = _SingleCloudState(clean_cloud, cfg, swap_pair)
    losses = []
    steps = 0
    for it in range(cfg.pairs_per_epoch):
        query_seed = derive_key(cfg.seed, "queries", epoch, it)
        if cfg.mode == "single_noisy":
            frozen = single_state.cloud
            batch = build_query_batch(frozen, frozen, cfg.n_uniform_queries, cfg.cube, query_seed)
            points = batch.points
            targets = single_state.estimator.eval(points)
        else:
            pair_seed = derive_key(cfg.seed, "pair", epoch, it)
            p1, p2 = make_pair(clean_cloud, cfg.noise, pair_seed)
            if swap_pair:
                p1, p2 = p2, p1
            batch = build_query_batch(p1, p2, cfg.n_uniform_queries, cfg.cube, query_seed)
            points = batch.points
            if cfg.mode == "clean_oracle":
                targets = shape.eval(points)
            else:
                targets = build_target(p2, k=cfg.target_k).eval(points)
        order = substream(cfg.seed, "shuffle", epoch, it).permutation(len(points))
        points = points[order]
        targets = targets[order]
        for start in range(0, len(points), cfg.batch_size):
            stop = start + cfg.batch_size
            loss, grads = field_.backward(points[start:stop], targets[start:stop])
            adamw_step(field_, opt, grads)
            losses.append(loss)
            steps += 1
    return {"loss": float(np.mean(losses)) if losses else float("nan"), "steps": steps}


def run_training(cfg: TrainConfig, swap_pair: bool = False) -> tuple[NeuralSdf, TrainRecord]:
    """Full deterministic run. On divergence, raises TrainingDiverged carrying
    the record so far and the last finite parameters as ``exc.last_field``."""
    shape = shape_by_name(cfg.shape)
    clean_cloud = sample_surface(shape, cfg.n_points, derive_key(cfg.seed, "clean-cloud"), cfg.cube)
    holdout_points, holdout_targets = build_holdout(shape, cfg)
    field_ = NeuralSdf(cfg.encoding_levels, cfg.hidden_layers, seed=cfg.seed)
    opt = AdamWState.for_field(field_, cfg.learning_rate, cfg.weight_decay)
    single_state = (
        _SingleCloudState(clean_cloud, cfg, swap_pair) if cfg.mode == "single_noisy" else None
    )
    record = TrainRecord()
    snapshot = field_.copy()
    for epoch in range(cfg.epochs):
        t0 = time.perf_counter()
        try:
            stats = train_epoch(
                field_, opt, clean_cloud, shape, cfg, epoch,
                swap_pair=swap_pair, single_state=single_state,
            )
        except TrainingDiverged as exc:
            exc.record = record
            exc.last_field = snapshot
            raise
        mse = float(np.mean((field_.forward(holdout_points) - holdout_targets) ** 2))
        record.append_epoch(stats["loss"], mse, time.perf_counter() - t0)
        record.total_steps += stats["steps"]
        snapshot = field_.copy()
    return field_, record


def baseline_config(cfg: TrainConfig, mode: str) -> TrainConfig:
    """Same run with a different supervision mode (identical seeds/budget)."""
    return replace(cfg, mode=mode)
