"""Reverse-mode automatic differentiation over dense float64 arrays.

A `Tape` records one backward closure per primitive applied during a forward
pass and replays them in reverse. Recording order is forward order, which is
a valid topological order, so no graph sort is needed. Intermediate nodes are
fresh per tape; parameter nodes live in a `nn.ParamStore` and their gradients
accumulate across tapes until zeroed.

Only the broadcasting patterns the model actually uses are implemented; each
op spells out its own backward rule instead of relying on generic broadcast
logic.
"""
from __future__ import annotations

import logging

import numpy as np

log = logging.getLogger(__name__)

NORM_EPS = 1e-5
BCE_EPS = 1e-7


class Node:
    """One value in a taped computation: an ndarray plus its gradient."""

    __slots__ = ("value", "grad")

    def __init__(self, value: np.ndarray):
        self.value = value
        self.grad: np.ndarray | None = None

    @property
    def shape(self):
        return self.value.shape

    def accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        self.grad += g


class Tape:
    """Ordered record of primitive ops, replayed in reverse by backward()."""

    def __init__(self):
        self._backward_fns = []
        self._consumed = False

    def record(self, out: Node, fn) -> None:
        self._backward_fns.append((out, fn))

    def __len__(self) -> int:
        return len(self._backward_fns)

    def backward(self, loss: Node) -> None:
        """Accumulate d(loss)/d(node) into every node recorded on this tape.

        Ops whose output never received a gradient (unconsumed branches) are
        skipped: their contribution is identically zero.
        """
        if not self._backward_fns:
            raise RuntimeError("backward called on an empty tape (no forward pass recorded)")
        if self._consumed:
            raise RuntimeError("tape already consumed; run a fresh forward pass")
        if loss.value.ndim != 0:
            raise ValueError(f"loss must be a scalar node, got shape {loss.value.shape}")
        self._consumed = True
        loss.grad = np.ones_like(loss.value)
        for out, fn in reversed(self._backward_fns):
            if out.grad is not None:
                fn()


def constant(value) -> Node:
    """A node carrying a fixed array; gradients flowing into it are dropped."""
    return Node(np.asarray(value, dtype=np.float64))


def _scalar(value: float) -> Node:
    return Node(np.asarray(value, dtype=np.float64))


def zero_scalar() -> Node:
    return _scalar(0.0)


# ---------------------------------------------------------------------------
# arithmetic


def add(tape: Tape, a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ValueError(f"add shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Node(a.value + b.value)

    def backward():
        a.accumulate(out.grad)
        b.accumulate(out.grad)

    tape.record(out, backward)
    return out


def sub(tape: Tape, a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ValueError(f"sub shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Node(a.value - b.value)

    def backward():
        a.accumulate(out.grad)
        b.accumulate(-out.grad)

    tape.record(out, backward)
    return out


def mul(tape: Tape, a: Node, b: Node) -> Node:
    if a.value.shape != b.value.shape:
        raise ValueError(f"mul shape mismatch: {a.value.shape} vs {b.value.shape}")
    out = Node(a.value * b.value)

    def backward():
        a.accumulate(out.grad * b.value)
        b.accumulate(out.grad * a.value)

    tape.record(out, backward)
    return out


def add_const(tape: Tape, a: Node, c) -> Node:
    out = Node(a.value + np.asarray(c, dtype=np.float64))

    def backward():
        a.accumulate(out.grad)

    tape.record(out, backward)
    return out


def sub_const(tape: Tape, a: Node, c) -> Node:
    return add_const(tape, a, -np.asarray(c, dtype=np.float64))


def mul_const(tape: Tape, a: Node, c) -> Node:
    c = np.asarray(c, dtype=np.float64)
    out = Node(a.value * c)

    def backward():
        g = out.grad * c
        # collapse broadcast dimensions the constant introduced, if any
        if g.shape != a.value.shape:
            raise ValueError("mul_const constant must not broadcast the node")
        a.accumulate(g)

    tape.record(out, backward)
    return out


def linear(tape: Tape, x: Node, w: Node, b: Node) -> Node:
    """y = x @ W + bias for 2D x; the workhorse of every MLP."""
    if x.value.ndim != 2 or w.value.ndim != 2:
        raise ValueError("linear expects 2D input and weight")
    if x.value.shape[1] != w.value.shape[0]:
        raise ValueError(
            f"linear shape mismatch: input {x.value.shape} vs weight {w.value.shape}")
    if b.value.shape != (w.value.shape[1],):
        raise ValueError(f"bias shape {b.value.shape} does not match weight {w.value.shape}")
    out = Node(x.value @ w.value + b.value)

    def backward():
        g = out.grad
        x.accumulate(g @ w.value.T)
        w.accumulate(x.value.T @ g)
        b.accumulate(g.sum(axis=0))

    tape.record(out, backward)
    return out


# ---------------------------------------------------------------------------
# nonlinearities and normalization


def relu(tape: Tape, x: Node) -> Node:
    mask = x.value > 0
    out = Node(np.where(mask, x.value, 0.0))

    def backward():
        x.accumulate(out.grad * mask)

    tape.record(out, backward)
    return out


def sigmoid(tape: Tape, x: Node) -> Node:
    v = x.value
    s = np.where(v >= 0, 1.0 / (1.0 + np.exp(-np.abs(v))),
                 np.exp(-np.abs(v)) / (1.0 + np.exp(-np.abs(v))))
    out = Node(s)

    def backward():
        x.accumulate(out.grad * s * (1.0 - s))

    tape.record(out, backward)
    return out


def softmax(tape: Tape, x: Node, axis: int) -> Node:
    shifted = x.value - x.value.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)
    out = Node(s)

    def backward():
        g = out.grad
        x.accumulate(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    tape.record(out, backward)
    return out


def layer_norm(tape: Tape, x: Node, gain: Node, bias: Node, eps: float = NORM_EPS) -> Node:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    c = x.value.shape[-1]
    if gain.value.shape != (c,) or bias.value.shape != (c,):
        raise ValueError("layer_norm gain/bias must match the channel width")
    mu = x.value.mean(axis=-1, keepdims=True)
    var = x.value.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.value - mu) * inv
    out = Node(xhat * gain.value + bias.value)

    def backward():
        g = out.grad
        lead = tuple(range(g.ndim - 1))
        gain.accumulate((g * xhat).sum(axis=lead))
        bias.accumulate(g.sum(axis=lead))
        gx = g * gain.value
        x.accumulate(inv * (gx - gx.mean(axis=-1, keepdims=True)
                            - xhat * (gx * xhat).mean(axis=-1, keepdims=True)))

    tape.record(out, backward)
    return out


def batch_norm(tape: Tape, x: Node, gain: Node, bias: Node, eps: float = NORM_EPS) -> Node:
    """Normalize each channel over the batch axis (axis 0) of a 2D input."""
    if x.value.ndim != 2:
        raise ValueError("batch_norm expects a 2D input")
    c = x.value.shape[1]
    if gain.value.shape != (c,) or bias.value.shape != (c,):
        raise ValueError("batch_norm gain/bias must match the channel width")
    mu = x.value.mean(axis=0, keepdims=True)
    var = x.value.var(axis=0, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.value - mu) * inv
    out = Node(xhat * gain.value + bias.value)

    def backward():
        g = out.grad
        gain.accumulate((g * xhat).sum(axis=0))
        bias.accumulate(g.sum(axis=0))
        gx = g * gain.value
        x.accumulate(inv * (gx - gx.mean(axis=0, keepdims=True)
                            - xhat * (gx * xhat).mean(axis=0, keepdims=True)))

    tape.record(out, backward)
    return out


# ---------------------------------------------------------------------------
# structure: indexing, reshaping, reductions


def gather_rows(tape: Tape, x: Node, idx: np.ndarray) -> Node:
    """x[(idx)] for a 2D x and an integer index array of any shape."""
    if x.value.ndim != 2:
        raise ValueError("gather_rows expects a 2D source")
    idx = np.asarray(idx)
    out = Node(x.value[idx])

    def backward():
        if x.grad is None:
            x.grad = np.zeros_like(x.value)
        np.add.at(x.grad, idx, out.grad)

    tape.record(out, backward)
    return out


def expand_mid(tape: Tape, x: Node, k: int) -> Node:
    """(M, C) -> (M, k, C) by repeating each row k times along a new axis."""
    out = Node(np.repeat(x.value[:, None, :], k, axis=1))

    def backward():
        x.accumulate(out.grad.sum(axis=1))

    tape.record(out, backward)
    return out


def tile_rows(tape: Tape, x: Node, count: int) -> Node:
    """(C,) -> (count, C) by repetition."""
    out = Node(np.tile(x.value, (count, 1)))

    def backward():
        x.accumulate(out.grad.sum(axis=0))

    tape.record(out, backward)
    return out


def reshape(tape: Tape, x: Node, shape) -> Node:
    out = Node(x.value.reshape(shape))

    def backward():
        x.accumulate(out.grad.reshape(x.value.shape))

    tape.record(out, backward)
    return out


def concat(tape: Tape, parts: list[Node], axis: int = -1) -> Node:
    out = Node(np.concatenate([p.value for p in parts], axis=axis))
    widths = [p.value.shape[axis] for p in parts]
    splits = np.cumsum(widths)[:-1]

    def backward():
        for part, g in zip(parts, np.split(out.grad, splits, axis=axis)):
            part.accumulate(g)

    tape.record(out, backward)
    return out


def slice_cols(tape: Tape, x: Node, start: int, stop: int) -> Node:
    if x.value.ndim != 2:
        raise ValueError("slice_cols expects a 2D input")
    out = Node(x.value[:, start:stop].copy())

    def backward():
        if x.grad is None:
            x.grad = np.zeros_like(x.value)
        x.grad[:, start:stop] += out.grad

    tape.record(out, backward)
    return out


def sum_axis(tape: Tape, x: Node, axis: int) -> Node:
    out = Node(x.value.sum(axis=axis))

    def backward():
        x.accumulate(np.broadcast_to(np.expand_dims(out.grad, axis), x.value.shape))

    tape.record(out, backward)
    return out


def max_axis(tape: Tape, x: Node, axis: int) -> Node:
    """Max-reduce one axis; gradient routes to the first maximum."""
    idx = np.argmax(x.value, axis=axis)
    out = Node(np.max(x.value, axis=axis))

    def backward():
        if x.grad is None:
            x.grad = np.zeros_like(x.value)
        expanded = np.expand_dims(idx, axis)
        np.put_along_axis(
            x.grad, expanded,
            np.take_along_axis(x.grad, expanded, axis) + np.expand_dims(out.grad, axis),
            axis)

    tape.record(out, backward)
    return out


def sum_all(tape: Tape, x: Node) -> Node:
    out = Node(np.asarray(x.value.sum()))

    def backward():
        x.accumulate(np.broadcast_to(out.grad, x.value.shape))

    tape.record(out, backward)
    return out


def mean_all(tape: Tape, x: Node) -> Node:
    n = x.value.size
    out = Node(np.asarray(x.value.sum() / n))

    def backward():
        x.accumulate(np.broadcast_to(out.grad / n, x.value.shape))

    tape.record(out, backward)
    return out


# ---------------------------------------------------------------------------
# losses


def smooth_l1(tape: Tape, x: Node, target, delta: float = 1.0) -> Node:
    """Elementwise smooth L1 against a constant target.

    0.5*r^2/delta inside |r| < delta, |r| - 0.5*delta outside.
    """
    t = np.asarray(target, dtype=np.float64)
    r = x.value - t
    a = np.abs(r)
    inner = a < delta
    out = Node(np.where(inner, 0.5 * r * r / delta, a - 0.5 * delta))

    def backward():
        x.accumulate(out.grad * np.where(inner, r / delta, np.sign(r)))

    tape.record(out, backward)
    return out


def binary_cross_entropy(tape: Tape, p: Node, target, eps: float = BCE_EPS) -> Node:
    """Elementwise BCE of probabilities against constant 0/1 targets.

    Inputs outside (eps, 1-eps) are clamped (gradient zero there) with a
    debug log entry; sigmoid outputs never trigger the clamp.
    """
    t = np.asarray(target, dtype=np.float64)
    inside = (p.value > eps) & (p.value < 1.0 - eps)
    if not inside.all():
        log.debug("binary_cross_entropy clamped %d inputs to [%g, %g]",
                  int((~inside).sum()), eps, 1.0 - eps)
    pc = np.clip(p.value, eps, 1.0 - eps)
    out = Node(-(t * np.log(pc) + (1.0 - t) * np.log(1.0 - pc)))

    def backward():
        x = out.grad * (pc - t) / (pc * (1.0 - pc))
        p.accumulate(np.where(inside, x, 0.0))

    tape.record(out, backward)
    return out
