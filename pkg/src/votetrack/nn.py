"""Parameter storage, MLP building blocks, SGD, and checkpoint files.

Parameters are float64 arrays wrapped in autodiff Nodes whose gradients
accumulate across forward/backward cycles until `zero_grad`. Initialization
is seeded per parameter name, so the set of *other* registered parameters
never changes a weight's initial value (ablation variants stay comparable).
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, DataError, NumericError

CHECKPOINT_MAGIC = "VOTETRACK-CKPT v1"


class ParamStore:
    """Named dense parameter matrices plus same-shape gradient buffers."""

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self._params: dict[str, ad.Node] = {}
        self._velocity: dict[str, np.ndarray] = {}

    def _init_rng(self, name: str) -> np.random.Generator:
        return np.random.default_rng(
            np.random.SeedSequence([self.seed, zlib.crc32(name.encode())]))

    def register(self, name: str, shape: tuple[int, ...], init: str = "uniform",
                 fan_in: int | None = None) -> ad.Node:
        if name in self._params:
            raise ConfigError(f"parameter {name!r} registered twice")
        if init == "uniform":
            bound = np.sqrt(1.0 / (fan_in if fan_in is not None else shape[0]))
            value = self._init_rng(name).uniform(-bound, bound, size=shape)
        elif init == "zeros":
            value = np.zeros(shape)
        elif init == "ones":
            value = np.ones(shape)
        else:
            raise ValueError(f"unknown init {init!r}")
        node = ad.Node(np.asarray(value, dtype=np.float64))
        node.grad = np.zeros(shape)
        self._params[name] = node
        return node

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __getitem__(self, name: str) -> ad.Node:
        try:
            return self._params[name]
        except KeyError:
            raise ConfigError(f"parameter {name!r} is not registered") from None

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def n_values(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.grad[...] = 0.0

    def sgd_step(self, lr: float, momentum: float = 0.0) -> None:
        """Momentum SGD over all parameters; rejects non-finite gradients."""
        for name, p in self._params.items():
            if not np.all(np.isfinite(p.grad)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            if momentum != 0.0:
                vel = self._velocity.get(name)
                if vel is None:
                    vel = self._velocity.setdefault(name, np.zeros_like(p.value))
                vel *= momentum
                vel += p.grad
                update = vel
            else:
                update = p.grad
            p.value -= lr * update
            if not np.all(np.isfinite(p.value)):
                raise NumericError(f"parameter {name!r} became non-finite after update")

    # -- checkpoint io ------------------------------------------------------

    def save(self, path, config_json: str) -> None:
        """Write a versioned text checkpoint: config, then name/shape/values."""
        lines = [CHECKPOINT_MAGIC, config_json, str(len(self._params))]
        for name, p in self._params.items():
            lines.append(f"{name} {json.dumps(list(p.value.shape))}")
            lines.append(" ".join(repr(float(v)) for v in p.value.ravel()))
        with open(path, "w") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def load(cls, path) -> tuple["ParamStore", str]:
        """Read a checkpoint; returns the store and the embedded config JSON."""
        try:
            with open(path) as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
        if not lines or lines[0] != CHECKPOINT_MAGIC:
            raise ConfigError(
                f"checkpoint {path} has wrong or missing magic header "
                f"(expected {CHECKPOINT_MAGIC!r})")
        config_json = lines[1]
        try:
            seed = json.loads(config_json).get("seed", 0)
            count = int(lines[2])
        except (json.JSONDecodeError, ValueError, IndexError) as exc:
            raise DataError(f"malformed checkpoint header in {path}") from exc
        store = cls(seed=seed)
        row = 3
        for _ in range(count):
            try:
                name, shape_json = lines[row].split(" ", 1)
                shape = tuple(json.loads(shape_json))
                values = np.fromiter(
                    (float(tok) for tok in lines[row + 1].split()), dtype=np.float64)
            except (ValueError, IndexError, json.JSONDecodeError) as exc:
                raise DataError(f"malformed checkpoint entry near line {row}") from exc
            if values.size != int(np.prod(shape)):
                raise DataError(f"checkpoint entry {name!r} has wrong value count")
            node = ad.Node(values.reshape(shape).astype(np.float64))
            node.grad = np.zeros(shape)
            store._params[name] = node
            row += 2
        return store, config_json


# ---------------------------------------------------------------------------
# MLPs


@dataclass(frozen=True)
class MLPSpec:
    """Layer widths plus per-layer activation and normalization flags."""

    widths: tuple[int, ...]               # (in, h1, ..., out)
    activations: tuple[str, ...]          # per layer: "relu" | "none"
    norms: tuple[str, ...]                # per layer: "none" | "layer" | "batch"

    def __post_init__(self):
        if len(self.widths) < 2:
            raise ValueError("an MLP needs at least one layer")
        if any(w <= 0 for w in self.widths):
            raise ValueError("layer widths must be positive")
        n_layers = len(self.widths) - 1
        if len(self.activations) != n_layers or len(self.norms) != n_layers:
            raise ValueError("need one activation and one norm flag per layer")
        for a in self.activations:
            if a not in ("relu", "none"):
                raise ValueError(f"unknown activation {a!r}")
        for n in self.norms:
            if n not in ("none", "layer", "batch"):
                raise ValueError(f"unknown norm {n!r}")

    @property
    def n_layers(self) -> int:
        return len(self.widths) - 1


def relu_mlp(widths, norm: str = "none") -> MLPSpec:
    """ReLU (and optional norm) after every layer except the last."""
    n = len(widths) - 1
    return MLPSpec(
        widths=tuple(widths),
        activations=("relu",) * (n - 1) + ("none",),
        norms=(norm,) * (n - 1) + ("none",),
    )


def register_mlp(store: ParamStore, prefix: str, spec: MLPSpec) -> None:
    # biases are fan-in-scaled uniform like the weights, which keeps ReLU
    # preactivations away from the kink even for exact-zero inputs
    for i in range(spec.n_layers):
        store.register(f"{prefix}.w{i}", (spec.widths[i], spec.widths[i + 1]))
        store.register(f"{prefix}.b{i}", (spec.widths[i + 1],),
                       fan_in=spec.widths[i])
        if spec.norms[i] != "none":
            store.register(f"{prefix}.ng{i}", (spec.widths[i + 1],), init="ones")
            store.register(f"{prefix}.nb{i}", (spec.widths[i + 1],), init="zeros")


def mlp_forward(tape: ad.Tape, store: ParamStore, prefix: str, spec: MLPSpec,
                x: ad.Node) -> ad.Node:
    """Sequential linear -> (norm) -> activation layers over a 2D input."""
    if x.value.ndim != 2:
        raise ValueError("mlp_forward expects a 2D input")
    if x.value.shape[1] != spec.widths[0]:
        raise ValueError(
            f"mlp input width {x.value.shape[1]} != spec width {spec.widths[0]}")
    h = x
    for i in range(spec.n_layers):
        h = ad.linear(tape, h, store[f"{prefix}.w{i}"], store[f"{prefix}.b{i}"])
        if spec.norms[i] == "layer":
            h = ad.layer_norm(tape, h, store[f"{prefix}.ng{i}"], store[f"{prefix}.nb{i}"])
        elif spec.norms[i] == "batch":
            h = ad.batch_norm(tape, h, store[f"{prefix}.ng{i}"], store[f"{prefix}.nb{i}"])
        if spec.activations[i] == "relu":
            h = ad.relu(tape, h)
    return h


def mlp_forward_3d(tape: ad.Tape, store: ParamStore, prefix: str, spec: MLPSpec,
                   x: ad.Node) -> ad.Node:
    """Apply a shared MLP over the last axis of an (A, B, C) input."""
    a, b, c = x.value.shape
    flat = ad.reshape(tape, x, (a * b, c))
    out = mlp_forward(tape, store, prefix, spec, flat)
    return ad.reshape(tape, out, (a, b, spec.widths[-1]))
