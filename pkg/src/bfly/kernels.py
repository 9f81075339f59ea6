"""Blockwise XOR kernels.

The hot loop of encoding and decoding is a segmented gather-XOR: for each
output block, XOR together a run of input blocks selected by an index array.
Two interchangeable implementations are provided, a numba-jitted one and a
pure-numpy one built on ``bitwise_xor.reduceat``.

Selection is controlled by the ``BFLY_KERNEL`` environment variable:

* ``auto`` (default) — use numba when importable, else numpy;
* ``numba`` — require the jitted kernel, raise if numba is absent;
* ``numpy`` — force the fallback.
"""

from __future__ import annotations

import os

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None
    _HAVE_NUMBA = False


def gather_xor_numpy(src: np.ndarray, idx: np.ndarray, starts: np.ndarray,
                     out: np.ndarray) -> np.ndarray:
    """Set out[s] to the XOR of src[idx[e]] for e in starts[s]:starts[s+1].

    ``src`` and ``out`` are 2-D uint8 arrays of blocks; empty segments yield
    zero blocks.
    """
    out[:] = 0
    if idx.size == 0:
        return out
    gathered = src[idx]
    lengths = np.diff(starts)
    nonempty = np.flatnonzero(lengths > 0)
    # Zero-length segments occupy no space in `gathered`, so the starts of
    # the non-empty segments are also their ends.
    out[nonempty] = np.bitwise_xor.reduceat(gathered, starts[nonempty], axis=0)
    return out


if _HAVE_NUMBA:

    @njit(cache=True)
    def _gather_xor_jit(src, idx, starts, out):  # pragma: no cover - jitted
        for s in range(out.shape[0]):
            for c in range(out.shape[1]):
                out[s, c] = 0
            for e in range(starts[s], starts[s + 1]):
                r = idx[e]
                for c in range(out.shape[1]):
                    out[s, c] ^= src[r, c]

    def gather_xor_numba(src: np.ndarray, idx: np.ndarray, starts: np.ndarray,
                         out: np.ndarray) -> np.ndarray:
        """Jitted variant of :func:`gather_xor_numpy`."""
        _gather_xor_jit(np.ascontiguousarray(src), idx, starts, out)
        return out

else:
    gather_xor_numba = None


def _resolve_backend(name: str):
    if name == "numpy":
        return "numpy", gather_xor_numpy
    if name == "numba":
        if not _HAVE_NUMBA:
            raise RuntimeError("BFLY_KERNEL=numba but numba is not importable")
        return "numba", gather_xor_numba
    if name == "auto":
        if _HAVE_NUMBA:
            return "numba", gather_xor_numba
        return "numpy", gather_xor_numpy
    raise ValueError(f"BFLY_KERNEL must be auto, numba, or numpy (got {name!r})")


BACKEND, gather_xor = _resolve_backend(os.environ.get("BFLY_KERNEL", "auto"))


def available_backends() -> dict[str, object]:
    """Name -> kernel for every backend usable in this process."""
    out = {"numpy": gather_xor_numpy}
    if _HAVE_NUMBA:
        out["numba"] = gather_xor_numba
    return out
