"""Independent GF(2) linear-algebra oracle for the code.

Models the code at bit level: a generator matrix maps the k_user*2^(k-1)
information bits of one stripe to all (k_user+2)*2^(k-1) stored bits.
Rank checks over erased node pairs certify that any two losses are
decodable, and a plain linear solve doubles as a ground-truth decoder for
cross-checking the combinatorial one.  Correctness lifts from bits to octet
blocks by linearity.

Bit matrices are 2-D numpy uint8 arrays with entries in {0, 1}.  Bit
indexing is column-major by node, then row: information bit (i, j) lives at
j*rows + i, and stored bits order the nodes as info 0..k_user-1, horizontal,
butterfly.
"""

from __future__ import annotations

import functools
import itertools
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .core import (
    BUTTERFLY,
    HORIZONTAL,
    CodeParams,
    ErasurePattern,
    NodeId,
    all_nodes,
    butterfly_set,
    info_node,
    node_sort_key,
)
from .errors import SingularSystemError

BitMatrix = np.ndarray

VERIFY_MAX_K = 9


def rank(m: BitMatrix) -> int:
    """GF(2) rank by Gaussian elimination with XOR row operations."""
    a = np.array(m, dtype=np.uint8, copy=True)
    if a.ndim != 2:
        raise ValueError("rank expects a 2-D bit matrix")
    n_rows, n_cols = a.shape
    r = 0
    for col in range(n_cols):
        if r == n_rows:
            break
        below = np.nonzero(a[r:, col])[0]
        if below.size == 0:
            continue
        p = r + below[0]
        if p != r:
            a[[r, p]] = a[[p, r]]
        others = np.nonzero(a[:, col])[0]
        others = others[others != r]
        if others.size:
            a[others] ^= a[r]
        r += 1
    return r


def info_bit_index(params: CodeParams, i: int, j: int) -> int:
    """Position of information element (row i, column j) in the bit vector."""
    return j * params.rows + i


def stored_bit_index(params: CodeParams, node: NodeId, i: int) -> int:
    """Position of row i of a stored node in the stored-bit vector."""
    if node.is_info:
        pos = node.index
    elif node == HORIZONTAL:
        pos = params.k_user
    else:
        pos = params.k_user + 1
    return pos * params.rows + i


def node_bit_slice(params: CodeParams, node: NodeId) -> slice:
    start = stored_bit_index(params, node, 0)
    return slice(start, start + params.rows)


@dataclass(frozen=True)
class CodeSystem:
    """Generator matrix view of one stripe's worth of the code."""

    params: CodeParams
    generator: BitMatrix  # (k_user*rows) x ((k_user+2)*rows)


@functools.lru_cache(maxsize=None)
def build_generator(params: CodeParams) -> CodeSystem:
    """Generator with an identity information block and XOR parity columns.

    The horizontal column for row i has 1s at every stored (i, j); the
    butterfly column for row i has 1s at the butterfly set of i restricted
    to stored columns (virtual coordinates are dropped).
    """
    rows = params.rows
    n_info = params.k_user * rows
    n_stored = params.stored_nodes * rows
    g = np.zeros((n_info, n_stored), dtype=np.uint8)
    g[:, :n_info] = np.eye(n_info, dtype=np.uint8)
    for i in range(rows):
        hcol = stored_bit_index(params, HORIZONTAL, i)
        for j in range(params.k_user):
            g[info_bit_index(params, i, j), hcol] = 1
        bcol = stored_bit_index(params, BUTTERFLY, i)
        for r, c in butterfly_set(params, i):
            if c < params.k_user:
                g[info_bit_index(params, r, c), bcol] = 1
    g.setflags(write=False)
    return CodeSystem(params=params, generator=g)


def dump_generator(system: CodeSystem) -> str:
    """Text grid of the generator: one line per information bit, one '0'/'1'
    character per stored bit, both ordered column-major by node then row."""
    return "\n".join("".join("01"[v] for v in row) for row in system.generator)


def surviving_bit_columns(params: CodeParams, pattern: ErasurePattern) -> np.ndarray:
    keep = []
    for node in all_nodes(params):
        if node not in pattern:
            s = node_bit_slice(params, node)
            keep.extend(range(s.start, s.stop))
    return np.asarray(keep, dtype=np.int64)


@dataclass(frozen=True)
class MdsReport:
    """Pass/fail rank certification for every 2-node erasure pattern."""

    params: CodeParams
    results: tuple[tuple[ErasurePattern, bool], ...]

    @property
    def all_pass(self) -> bool:
        return all(ok for _, ok in self.results)

    @property
    def n_pass(self) -> int:
        return sum(1 for _, ok in self.results if ok)


def mds_verify(params: CodeParams, system: CodeSystem | None = None) -> MdsReport:
    """Check that deleting any two nodes leaves a full-rank system.

    A `system` override lets tests certify deliberately damaged generators.
    """
    if params.k > VERIFY_MAX_K:
        raise ValueError(f"verification is desk-scale only (k <= {VERIFY_MAX_K})")
    if system is None:
        system = build_generator(params)
    n_info = params.k_user * params.rows
    results = []
    nodes = sorted(all_nodes(params), key=node_sort_key)
    for a, b in itertools.combinations(nodes, 2):
        pattern = ErasurePattern.of(a, b)
        cols = surviving_bit_columns(params, pattern)
        ok = rank(system.generator[:, cols]) == n_info
        results.append((pattern, ok))
    return MdsReport(params=params, results=tuple(results))


def solution_operator(system: CodeSystem,
                      pattern: ErasurePattern) -> tuple[BitMatrix, np.ndarray]:
    """Matrix S with info_bits = S @ surviving_bits (mod 2).

    Returns (S, surviving column indices).  Raises SingularSystemError when
    the survivors do not determine the information uniquely.
    """
    params = system.params
    cols = surviving_bit_columns(params, pattern)
    m = system.generator[:, cols].T.copy()  # equations x unknowns
    n_avail, n_info = m.shape
    aug = np.concatenate([m, np.eye(n_avail, dtype=np.uint8)], axis=1)
    for col in range(n_info):
        below = np.nonzero(aug[col:, col])[0]
        if below.size == 0:
            raise SingularSystemError(
                f"pattern {pattern.label()} leaves information bit {col}"
                " undetermined")
        p = col + below[0]
        if p != col:
            aug[[col, p]] = aug[[p, col]]
        others = np.nonzero(aug[:, col])[0]
        others = others[others != col]
        if others.size:
            aug[others] ^= aug[col]
    return aug[:n_info, n_info:], cols


@functools.lru_cache(maxsize=None)
def _cached_operator(params: CodeParams,
                     pattern: ErasurePattern) -> tuple[BitMatrix, np.ndarray]:
    return solution_operator(build_generator(params), pattern)


def oracle_decode(params: CodeParams, pattern: ErasurePattern,
                  available: Mapping[NodeId, np.ndarray]) -> np.ndarray:
    """Solve the surviving linear system for the information columns.

    `available` maps each surviving node to its column, rows x block_size
    (octet blocks; every bit lane is solved independently).  Returns the
    information region, rows x k_user x block_size.
    """
    if len(pattern) > 2:
        raise ValueError("oracle decodes at most 2 erasures")
    rows, block = params.rows, params.block_size
    s, cols = _cached_operator(params, pattern)
    stored = np.zeros((params.stored_nodes * rows, block), dtype=np.uint8)
    for node in all_nodes(params):
        if node in pattern:
            continue
        stored[node_bit_slice(params, node)] = available[node]
    lanes = np.unpackbits(stored[cols], axis=1)
    solved = (s.astype(np.int64) @ lanes.astype(np.int64)) % 2
    info = np.packbits(solved.astype(np.uint8), axis=1)
    return info.reshape(params.k_user, rows, block).transpose(1, 0, 2)
