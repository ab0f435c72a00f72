"""Central finite-difference gradient checking.

The numeric side only ever calls the forward pass, so it stays independent
of the backward implementation it is checking. Run graphs in float64 when
using the default step size.
"""

from __future__ import annotations

import numpy as np

from .rng import Rng
from .tensor import Tensor


def relative_error(a: float, n: float) -> float:
    return abs(a - n) / max(1.0, abs(a), abs(n))


def check_gradients(
    build_loss,
    params: list[Tensor],
    h: float = 1e-3,
    tol: float = 1e-3,
    max_coords: int | None = None,
    rng: Rng | None = None,
) -> float:
    """Compare analytic gradients of build_loss() against central differences.

    build_loss must rebuild the graph from the current parameter data on
    every call. Returns the worst relative error; raises AssertionError when
    it exceeds tol. max_coords caps the number of coordinates checked per
    tensor (sampled with rng when set).
    """
    for p in params:
        p.grad = None
    loss = build_loss()
    loss.backward()
    analytic = []
    for p in params:
        if p.grad is None:
            analytic.append(np.zeros_like(p.data))
        else:
            analytic.append(np.array(p.grad, copy=True))

    worst = 0.0
    for p, a in zip(params, analytic):
        flat = p.data.reshape(-1)
        n_coords = flat.size
        if max_coords is not None and n_coords > max_coords:
            if rng is None:
                rng = Rng(0)
            coords = rng.integers(0, n_coords, size=max_coords)
        else:
            coords = range(n_coords)
        a_flat = a.reshape(-1)
        for c in coords:
            c = int(c)
            orig = flat[c]
            flat[c] = orig + h
            f_plus = build_loss().item()
            flat[c] = orig - h
            f_minus = build_loss().item()
            flat[c] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            err = relative_error(float(a_flat[c]), numeric)
            if err > worst:
                worst = err
            if err > tol:
                raise AssertionError(
                    f"gradient mismatch at coord {c}: analytic={a_flat[c]:.6g} "
                    f"numeric={numeric:.6g} rel_err={err:.3g}"
                )
    return worst
