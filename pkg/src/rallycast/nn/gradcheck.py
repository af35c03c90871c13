"""Central-difference gradient verification.

``grad_check`` compares the tape's gradients against central differences, in
float64, and reports the worst relative error

    max over coordinates of |analytic - numeric| / max(1, |analytic|)

For vector-valued functions the output is contracted with a fixed random
projection so a single backward pass exercises the full Jacobian action.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tensor


def grad_check(fn: Callable[..., Tensor], inputs: Sequence[np.ndarray],
               h: float = 1e-5, projection: np.ndarray | None = None,
               rng: np.random.Generator | None = None) -> float:
    """Max relative error between tape gradients and central differences.

    ``fn`` maps Tensors (one per entry of ``inputs``) to a Tensor; ``inputs``
    are the points at which to differentiate.  All inputs are treated as
    differentiable.
    """
    arrays = [np.asarray(a, dtype=np.float64) for a in inputs]
    probe = fn(*[Tensor(a) for a in arrays])
    if probe.data.size != 1:
        if projection is None:
            gen = rng if rng is not None else np.random.default_rng(0)
            projection = gen.normal(size=probe.data.shape)
        proj = np.asarray(projection, dtype=np.float64)

        def scalar_fn(*ts):
            return _contract(fn(*ts), proj)
    else:
        def scalar_fn(*ts):
            return fn(*ts)

    tensors = [Tensor(a.copy(), requires_grad=True) for a in arrays]
    out = scalar_fn(*tensors)
    out.backward()
    analytic = [t.grad if t.grad is not None else np.zeros_like(t.data) for t in tensors]

    worst = 0.0
    for idx, base in enumerate(arrays):
        flat = base.reshape(-1)
        for coord in range(flat.size):
            orig = flat[coord]
            flat[coord] = orig + h
            plus = scalar_fn(*[Tensor(a) for a in arrays]).item()
            flat[coord] = orig - h
            minus = scalar_fn(*[Tensor(a) for a in arrays]).item()
            flat[coord] = orig
            numeric = (plus - minus) / (2.0 * h)
            a_val = analytic[idx].reshape(-1)[coord]
            err = abs(a_val - numeric) / max(1.0, abs(a_val))
            if err > worst:
                worst = err
    return worst


def _contract(out: Tensor, proj: np.ndarray) -> Tensor:
    from . import tensor as T
    return T.tsum(out * Tensor(proj))
