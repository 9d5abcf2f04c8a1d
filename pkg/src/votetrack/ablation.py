"""Ablation sweeps: train and evaluate one model variant per axis value.

Axes:
  m          -- global-block sparse sample count (e.g. 4, 8, 16, 32)
  n          -- local-block KNN size (e.g. 8, 16, 24)
  components -- the component ladder: "no-glt" (both attention blocks
                bypassed, plain offset loss), "gt-only" (global block only),
                "gt-lt" (both blocks, unweighted loss), "full" (both blocks
                plus the importance-weighted training strategy)

Every variant trains on the same seeded synthetic dataset with an identical
budget and is evaluated on the same held-out sequences.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from .config import Config
from .data import GenSpec, Sequence, generate_dataset
from .errors import ConfigError
from .metrics import evaluate
from .training import train

COMPONENT_VARIANTS = {
    "no-glt": dict(use_global=False, use_local=False, use_importance=False),
    "gt-only": dict(use_global=True, use_local=False, use_importance=False),
    "gt-lt": dict(use_global=True, use_local=True, use_importance=False),
    "full": dict(use_global=True, use_local=True, use_importance=True),
}

AXES = ("m", "n", "components")


@dataclass(frozen=True)
class AblationRow:
    axis: str
    value: str
    success: float
    precision: float


def variant_config(cfg: Config, axis: str, value) -> Config:
    if axis == "m":
        return cfg.replace(sparse_samples=int(value))
    if axis == "n":
        return cfg.replace(knn_samples=int(value))
    if axis == "components":
        try:
            switches = COMPONENT_VARIANTS[str(value)]
        except KeyError:
            raise ConfigError(
                f"unknown component variant {value!r}; choose from "
                f"{sorted(COMPONENT_VARIANTS)}") from None
        return cfg.replace(**switches)
    raise ConfigError(f"unknown ablation axis {axis!r}; choose from {AXES}")


def default_ablation_data(cfg: Config, train_sequences: int = 4,
                          eval_sequences: int = 2,
                          frames: int = 12) -> tuple[list[Sequence], list[Sequence]]:
    """A small seeded synthetic dataset shared by every variant."""
    train_spec = GenSpec(sequences=train_sequences, frames=frames,
                         seed=cfg.seed * 7 + 1)
    eval_spec = GenSpec(sequences=eval_sequences, frames=frames,
                        seed=cfg.seed * 7 + 2)
    return generate_dataset(train_spec), generate_dataset(eval_spec)


def ablate(cfg: Config, axis: str, values, train_seqs: list[Sequence],
           eval_seqs: list[Sequence]) -> list[AblationRow]:
    rows = []
    for value in values:
        vcfg = variant_config(cfg, axis, value)
        run = train(train_seqs, vcfg)
        report = evaluate(eval_seqs, run.store, vcfg)
        rows.append(AblationRow(axis=axis, value=str(value),
                                success=report.success,
                                precision=report.precision))
    return rows


def write_ablation_csv(rows: list[AblationRow], path) -> None:
    lines = ["axis,value,success,precision"]
    for r in rows:
        lines.append(f"{r.axis},{r.value},{r.success!r},{r.precision!r}")
    Path(path).write_text("\n".join(lines) + "\n")
