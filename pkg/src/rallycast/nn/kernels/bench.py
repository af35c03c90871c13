"""Timing comparison between the compiled and NumPy conv kernel backends."""

from __future__ import annotations

import time

import numpy as np

from . import conv_numpy

try:
    from . import _convext
except ImportError:
    _convext = None


def _time(fn, *args, repeats: int = 5) -> float:
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def run(image_size: int = 64, batch: int = 16, channels: tuple[int, int] = (8, 16),
        kernel: int = 3, stride: int = 2) -> list[dict]:
    """Per-kernel best-of-5 timings for both backends at the given geometry."""
    rng = np.random.default_rng(0)
    cin, cout = channels
    pad = kernel // 2
    xp = np.pad(rng.normal(size=(batch, image_size, image_size, cin)),
                ((0, 0), (pad, pad), (pad, pad), (0, 0)))
    w = rng.normal(size=(kernel, kernel, cin, cout))
    oh = (xp.shape[1] - kernel) // stride + 1
    ow = (xp.shape[2] - kernel) // stride + 1
    gy = rng.normal(size=(batch, oh, ow, cout))
    cases = [
        ("forward", (xp, w, (stride, stride))),
        ("backward_input", (gy, w, xp.shape, (stride, stride))),
        ("backward_weights", (gy, xp, w.shape, (stride, stride))),
    ]
    rows = []
    for name, args in cases:
        numpy_t = _time(getattr(conv_numpy, f"conv2d_{name}"), *args)
        row = {"kernel": name, "numpy_ms": numpy_t * 1e3, "cython_ms": None,
               "speedup": None}
        if _convext is not None:
            cy_t = _time(getattr(_convext, f"conv2d_{name}"), *args)
            row["cython_ms"] = cy_t * 1e3
            row["speedup"] = numpy_t / cy_t
        rows.append(row)
    return rows


def format_rows(rows: list[dict], image_size: int, batch: int) -> str:
    lines = [f"conv kernel timings (batch={batch}, {image_size}x{image_size}, best of 5)",
             f"{'kernel':18s} {'numpy':>10s} {'cython':>10s} {'speedup':>8s}"]
    for row in rows:
        cy = f"{row['cython_ms']:.3f} ms" if row["cython_ms"] is not None else "n/a"
        sp = f"{row['speedup']:.2f}x" if row["speedup"] is not None else "-"
        lines.append(f"{row['kernel']:18s} {row['numpy_ms']:8.3f} ms {cy:>10s} {sp:>8s}")
    return "\n".join(lines)
