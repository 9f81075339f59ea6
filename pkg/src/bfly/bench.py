"""Throughput comparison of the XOR-gather kernel backends.

Unvalidated extra: numbers here are informational and not part of any
correctness claim.  Encodes a batch of random stripes through each available
backend (numba and numpy) and reports MB/s of parity production.
"""

from __future__ import annotations

import time

import numpy as np

from . import kernels
from .core import CodeParams, _butterfly_plan


def run_bench(k_user: int = 4, block_size: int = 4096, stripes: int = 64,
              repeats: int = 5) -> list[dict]:
    """Time the butterfly-parity gather for every backend; returns rows of
    {backend, seconds, mb_per_s} after checking the outputs agree."""
    params = CodeParams(k_user, block_size=block_size)
    rng = np.random.default_rng(0)
    data = np.zeros((stripes, params.rows, params.k, block_size), dtype=np.uint8)
    data[:, :, :params.k_user] = rng.integers(
        0, 256, size=(stripes, params.rows, params.k_user, block_size),
        dtype=np.uint8)
    idx, starts = _butterfly_plan(params)
    flat = [np.ascontiguousarray(d).reshape(-1, block_size) for d in data]
    payload_mb = stripes * params.rows * block_size / 1e6

    results = []
    reference: np.ndarray | None = None
    for name, kernel in kernels.available_backends().items():
        out = np.empty((params.rows, block_size), dtype=np.uint8)
        kernel(flat[0], idx, starts, out)  # warm-up (JIT compile)
        best = float("inf")
        for _ in range(repeats):
            t0 = time.perf_counter()
            for src in flat:
                kernel(src, idx, starts, out)
            best = min(best, time.perf_counter() - t0)
        if reference is None:
            reference = out.copy()
        elif not np.array_equal(out, reference):
            raise AssertionError(f"backend {name} disagrees with reference")
        results.append({"backend": name, "seconds": best,
                        "mb_per_s": payload_mb / best})
    return results


def format_bench(results: list[dict]) -> str:
    lines = ["backend   seconds     MB/s"]
    for r in results:
        lines.append(f"{r['backend']:<8} {r['seconds']:>8.4f} {r['mb_per_s']:>8.1f}")
    return "\n".join(lines)
