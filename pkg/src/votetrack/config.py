"""Run configuration: one flat record holding every tunable constant.

Defaults are artifact choices, not claims about any reference system. All of
them can be overridden through a JSON config file (see `Config.from_json`);
unknown keys are rejected so typos fail loudly.
"""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

from .errors import ConfigError


@dataclass
class Config:
    seed: int = 0

    # point budgets
    n_template: int = 512       # template cloud size after resampling
    n_search: int = 1024        # search-region cloud size after resampling
    n_seeds: int = 128          # seeds drawn from the search cloud

    # feature widths
    feature_dim: int = 128      # per-seed feature width
    attn_dim: int = 64          # latent width inside the attention blocks
    sa_dim: int = 64            # backbone set-abstraction feature width
    sa_neighbors: int = 16      # neighborhood size for the set abstraction

    # attention sampling
    sparse_samples: int = 16    # stride-sampled neighbors for the global block
    knn_samples: int = 16       # nearest neighbors for the local block

    # proposals
    n_proposals: int = 64       # proposals picked from the votes (< n_seeds)
    fps_start: int = 0          # start index for farthest point sampling
    head_vote_neighbors: int = 8   # votes pooled per proposal in the heads

    # loss weights and score-label radii
    lambda_imp: float = 0.5
    lambda_score: float = 1.0
    lambda_center_rot: float = 1.0
    r_pos: float = 0.3          # proposals closer than this are positives (m)
    r_neg: float = 0.6          # proposals farther than this are negatives (m)

    # tracker
    search_margin: float = 2.0  # search-region enlargement per axis (m)

    # optimization
    lr: float = 0.01
    momentum: float = 0.9
    steps: int = 500
    batch_size: int = 4         # frame pairs averaged per step
    lr_decay_factor: float = 1.0   # multiplier applied late in training
    lr_decay_at: float = 0.8       # fraction of steps after which it applies
    checkpoint_every: int = 0   # 0 = final checkpoint only

    # training-time reference jitter, simulating tracking drift (std devs)
    train_jitter_center: float = 0.1
    train_jitter_yaw: float = 0.05

    # component switches (ablations)
    use_global: bool = True     # global attention block
    use_local: bool = True      # local attention block
    use_importance: bool = True # importance branch + weighted offset loss
    use_batch_norm: bool = False            # batch instead of layer norm in MLPs
    couple_importance_grad: bool = False    # let the offset loss update the branch

    def validate(self) -> "Config":
        positive = [
            "n_template", "n_search", "n_seeds", "feature_dim", "attn_dim",
            "sa_dim", "sa_neighbors", "sparse_samples", "knn_samples",
            "n_proposals", "steps", "batch_size",
        ]
        for name in positive:
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if self.feature_dim < 2:
            raise ConfigError("feature_dim must be at least 2")
        if self.n_seeds > self.n_search:
            raise ConfigError("n_seeds cannot exceed n_search")
        if self.sparse_samples > self.n_seeds:
            raise ConfigError("sparse_samples cannot exceed n_seeds")
        if self.knn_samples > self.n_seeds:
            raise ConfigError("knn_samples cannot exceed n_seeds")
        if self.n_proposals >= self.n_seeds:
            raise ConfigError("n_proposals must be smaller than n_seeds")
        if not 0 <= self.fps_start < self.n_seeds:
            raise ConfigError("fps_start out of range")
        if self.head_vote_neighbors < 1:
            raise ConfigError("head_vote_neighbors must be at least 1")
        for name in ("lambda_imp", "lambda_score", "lambda_center_rot"):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if self.r_pos <= 0 or self.r_neg < self.r_pos:
            raise ConfigError("need 0 < r_pos <= r_neg")
        if self.search_margin <= 0:
            raise ConfigError("search_margin must be positive")
        if self.train_jitter_center < 0 or self.train_jitter_yaw < 0:
            raise ConfigError("training jitter magnitudes must be non-negative")
        if self.lr_decay_factor <= 0 or not 0 <= self.lr_decay_at <= 1:
            raise ConfigError("need lr_decay_factor > 0 and lr_decay_at in [0, 1]")
        return self

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "Config":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            cfg = cls(**data)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc
        return cfg.validate()

    @classmethod
    def from_json(cls, text: str) -> "Config":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config JSON must be an object")
        return cls.from_dict(data)

    @classmethod
    def load(cls, path) -> "Config":
        try:
            with open(path) as fh:
                return cls.from_json(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path}: {exc}") from exc

    def replace(self, **changes) -> "Config":
        return dataclasses.replace(self, **changes).validate()
