"""Central finite-difference validation of taped gradients.

The forward function is re-run with each parameter entry perturbed by ±h and
the two-sided slope is compared against the accumulated analytic gradient.
This is the independent route against which every backward rule is audited;
it deliberately shares nothing with the tape machinery beyond reading and
writing parameter values.
"""
from __future__ import annotations

import numpy as np

from .nn import ParamStore


def finite_difference_gradient(loss_fn, store: ParamStore, name: str,
                               h: float = 1e-5) -> np.ndarray:
    """d loss / d store[name] by central differences, entry by entry."""
    param = store[name].value
    grad = np.zeros_like(param)
    flat = param.ravel()
    gflat = grad.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        up = loss_fn()
        flat[i] = keep - h
        down = loss_fn()
        flat[i] = keep
        gflat[i] = (up - down) / (2.0 * h)
    return grad


def check_gradients(loss_fn, backward_fn, store: ParamStore,
                    names=None, h: float = 1e-5,
                    rel_tol: float = 1e-4, abs_floor: float = 1e-7):
    """Compare analytic and finite-difference gradients for named parameters.

    `loss_fn()` returns the scalar loss without touching gradients;
    `backward_fn()` runs one forward+backward cycle, leaving gradients in the
    store. Returns a dict of per-parameter worst relative errors and raises
    AssertionError on the first parameter exceeding the tolerance.
    """
    if names is None:
        names = store.names()
    store.zero_grad()
    backward_fn()
    worst = {}
    for name in names:
        analytic = store[name].grad.copy()
        numeric = finite_difference_gradient(loss_fn, store, name, h=h)
        diff = np.abs(analytic - numeric)
        # two-term tolerance: the absolute floor absorbs finite-difference
        # roundoff on structurally-zero gradients
        allowed = abs_floor + rel_tol * np.maximum(np.abs(analytic), np.abs(numeric))
        excess = diff / allowed
        worst[name] = float(excess.max())
        if worst[name] > 1.0:
            i = np.unravel_index(np.argmax(excess), excess.shape)
            raise AssertionError(
                f"gradient check failed for {name}{list(i)}: "
                f"analytic={analytic[i]:.6g} numeric={numeric[i]:.6g} "
                f"|diff|={diff[i]:.3g} > {allowed[i]:.3g}")
    return worst
